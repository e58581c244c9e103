#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rvec/data_model.hpp"

namespace rvec::segmenter {

inline constexpr std::string_view kStepDelimiter = "\n\n";

// Splits on the two-newline delimiter and drops empty segments.
std::vector<std::string> segment_response(std::string_view response_text);

struct KeywordTable {
  std::vector<std::string> reflection_keywords;
  std::vector<std::string> backtracking_keywords;
};

// The annotation keyword table used for reasoning-step labels.
const KeywordTable& default_keywords();

// {"reflection_keywords": [...], "backtracking_keywords": [...]}
KeywordTable load_keywords(const std::filesystem::path& file);
void validate(const KeywordTable& table);

struct Annotation {
  Label label = Label::others;
  // Both a reflection and a backtracking keyword matched; reflection won.
  bool conflict = false;
};

// Case-insensitive substring matching; reflection beats backtracking.
Annotation annotate_step_detailed(std::string_view text, const KeywordTable& table);
// Same, but reports conflicts through diag at debug level.
Label annotate_step(std::string_view text, const KeywordTable& table);

double agreement_ratio(std::span<const Label> labels_a, std::span<const Label> labels_b);

}  // namespace rvec::segmenter
