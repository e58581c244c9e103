#include "rvec/segmenter.hpp"

#include <algorithm>

#include "json.hpp"
#include "rvec/diag.hpp"
#include "rvec/error.hpp"

namespace rvec::segmenter {

std::vector<std::string> segment_response(std::string_view response_text) {
  std::vector<std::string> steps;
  std::size_t start = 0;
  while (start <= response_text.size()) {
    const std::size_t hit = response_text.find(kStepDelimiter, start);
    const std::size_t end = hit == std::string_view::npos ? response_text.size() : hit;
    if (end > start) steps.emplace_back(response_text.substr(start, end - start));
    if (hit == std::string_view::npos) break;
    start = hit + kStepDelimiter.size();
  }
  return steps;
}

const KeywordTable& default_keywords() {
  // Both "think differenly" and the corrected spelling match.
  static const KeywordTable table{
      {"Wait", "verify", "make sure", "hold on", "think again", "'s correct", "'s incorrect",
       "Let me check", "seems right"},
      {"Alternatively", "think differenly", "think differently", "another way", "another approach",
       "another method", "another solution", "another strategy", "another technique"},
  };
  return table;
}

void validate(const KeywordTable& table) {
  if (table.reflection_keywords.empty()) throw ValidationError("reflection_keywords: must be non-empty");
  if (table.backtracking_keywords.empty()) throw ValidationError("backtracking_keywords: must be non-empty");
  for (const auto* list : {&table.reflection_keywords, &table.backtracking_keywords}) {
    for (const auto& k : *list) {
      if (k.empty()) throw ValidationError("keyword table: empty keyword");
    }
  }
}

KeywordTable load_keywords(const std::filesystem::path& file) {
  KeywordTable table;
  try {
    const auto j = nlohmann::json::parse(io::read_text(file));
    table.reflection_keywords = j.at("reflection_keywords").get<std::vector<std::string>>();
    table.backtracking_keywords = j.at("backtracking_keywords").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(file.string() + ": " + e.what());
  }
  validate(table);
  return table;
}

namespace {

// ASCII folding only; multi-byte UTF-8 sequences pass through unchanged.
std::string fold_case(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

bool contains_any(const std::string& folded_text, const std::vector<std::string>& keywords) {
  return std::any_of(keywords.begin(), keywords.end(), [&](const std::string& k) {
    return folded_text.find(fold_case(k)) != std::string::npos;
  });
}

}  // namespace

Annotation annotate_step_detailed(std::string_view text, const KeywordTable& table) {
  const std::string folded = fold_case(text);
  const bool reflection = contains_any(folded, table.reflection_keywords);
  const bool backtracking = contains_any(folded, table.backtracking_keywords);
  if (reflection) return {Label::reflection, backtracking};
  if (backtracking) return {Label::backtracking, false};
  return {Label::others, false};
}

Label annotate_step(std::string_view text, const KeywordTable& table) {
  const auto a = annotate_step_detailed(text, table);
  if (a.conflict) {
    diag::debug("label_conflict", "reflection and backtracking keywords both matched; kept reflection");
  }
  return a.label;
}

double agreement_ratio(std::span<const Label> labels_a, std::span<const Label> labels_b) {
  if (labels_a.size() != labels_b.size()) {
    throw ValidationError("agreement_ratio: length mismatch (" + std::to_string(labels_a.size()) +
                          " vs " + std::to_string(labels_b.size()) + ")");
  }
  if (labels_a.empty()) throw ValidationError("agreement_ratio: empty input");
  std::size_t same = 0;
  for (std::size_t i = 0; i < labels_a.size(); ++i) same += labels_a[i] == labels_b[i];
  return static_cast<double>(same) / static_cast<double>(labels_a.size());
}

}  // namespace rvec::segmenter
