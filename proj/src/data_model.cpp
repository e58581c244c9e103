#include "rvec/data_model.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <algorithm>
#include <limits>
#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"
#include "rvec/error.hpp"

namespace rvec {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view to_string(Label label) noexcept {
  switch (label) {
    case Label::reflection: return "reflection";
    case Label::backtracking: return "backtracking";
    case Label::others: return "others";
    case Label::unlabeled: return "unlabeled";
  }
  return "unlabeled";
}

Label label_from_string(std::string_view name) {
  if (name == "reflection") return Label::reflection;
  if (name == "backtracking") return Label::backtracking;
  if (name == "others") return Label::others;
  if (name == "unlabeled") return Label::unlabeled;
  throw ValidationError("label: unknown value '" + std::string(name) + "'");
}

void validate_step_indices(std::span<const StepRecord> records) {
  std::map<std::string, std::vector<std::uint64_t>> by_sample;
  for (const auto& r : records) by_sample[r.sample_id].push_back(r.step_index);
  for (auto& [sample, indices] : by_sample) {
    std::sort(indices.begin(), indices.end());
    for (std::size_t i = 0; i < indices.size(); ++i) {
      if (indices[i] != i) {
        throw ValidationError("records.step_index: sample '" + sample +
                              "' does not cover a contiguous range starting at 0");
      }
    }
  }
}

namespace {

void check_finite_rows(const MatrixF& m, const char* field) {
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (float v : m.row(r)) {
      if (!std::isfinite(v)) {
        throw ValidationError(std::string(field) + ": non-finite value in row " + std::to_string(r));
      }
    }
  }
}

void check_finite(std::span<const float> v, const char* field) {
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!std::isfinite(v[i])) {
      throw ValidationError(std::string(field) + ": non-finite value at index " + std::to_string(i));
    }
  }
}

json step_to_json(const StepRecord& r) {
  return json{{"sample_id", r.sample_id},
              {"step_index", r.step_index},
              {"text", r.text},
              {"label", to_string(r.label)},
              {"response_length_tokens", r.response_length_tokens}};
}

StepRecord step_from_json(const json& j) {
  StepRecord r;
  r.sample_id = j.at("sample_id").get<std::string>();
  r.step_index = j.at("step_index").get<std::uint64_t>();
  r.text = j.at("text").get<std::string>();
  r.label = label_from_string(j.at("label").get<std::string>());
  r.response_length_tokens = j.at("response_length_tokens").get<std::uint64_t>();
  return r;
}

json read_json_file(const fs::path& file) {
  try {
    return json::parse(io::read_text(file));
  } catch (const json::exception& e) {
    throw FormatError(file.string() + ": " + e.what());
  }
}

void require_file(const fs::path& file) {
  if (!fs::is_regular_file(file)) throw IoError("missing file: " + file.string());
}

}  // namespace

std::string format_step_record(const StepRecord& record) { return step_to_json(record).dump(); }

StepRecord parse_step_record(std::string_view line) {
  try {
    return step_from_json(json::parse(line));
  } catch (const json::exception& e) {
    throw FormatError(e.what());
  } catch (const ValidationError& e) {
    throw FormatError(e.what());
  }
}

void validate(const ActivationSet& set) {
  if (set.dim() == 0) throw ValidationError("dim: must be positive");
  if (set.count() == 0) throw ValidationError("count: must be positive");
  if (set.records.size() != set.count()) {
    throw ValidationError("records: length " + std::to_string(set.records.size()) +
                          " does not match count " + std::to_string(set.count()));
  }
  check_finite_rows(set.data, "data");
  validate_step_indices(set.records);
}

void write_activation_set(const ActivationSet& set, const fs::path& dir) {
  validate(set);
  fs::create_directories(dir);
  json manifest = {{"model", set.model_name}, {"layer", set.layer_index},
                   {"dim", set.dim()},        {"count", set.count()},
                   {"dtype", "f32"},          {"byte_order", "little"}};
  io::write_text(dir / "manifest.json", manifest.dump(2) + "\n");
  io::write_f32(dir / "activations.bin", set.data.flat());
  std::string lines;
  for (const auto& r : set.records) lines += format_step_record(r) + "\n";
  io::write_text(dir / "steps.jsonl", lines);
}

ActivationSet read_activation_set(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("missing activation directory: " + dir.string());
  for (const char* name : {"manifest.json", "activations.bin", "steps.jsonl"}) require_file(dir / name);

  const json manifest = read_json_file(dir / "manifest.json");
  ActivationSet set;
  std::size_t dim = 0, count = 0;
  try {
    set.model_name = manifest.at("model").get<std::string>();
    set.layer_index = manifest.at("layer").get<std::uint64_t>();
    dim = manifest.at("dim").get<std::size_t>();
    count = manifest.at("count").get<std::size_t>();
    if (manifest.at("dtype") != "f32") throw FormatError("manifest.json: dtype must be \"f32\"");
    if (manifest.at("byte_order") != "little") {
      throw FormatError("manifest.json: byte_order must be \"little\"");
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("manifest.json: ") + e.what());
  }

  auto values = io::read_f32(dir / "activations.bin", count * dim);
  set.data = MatrixF(count, dim, std::move(values));
  for (std::size_t r = 0; r < count; ++r) {
    for (float v : set.data.row(r)) {
      if (!std::isfinite(v)) {
        throw FormatError("activations.bin: non-finite value in row " + std::to_string(r));
      }
    }
  }

  std::istringstream lines(io::read_text(dir / "steps.jsonl"));
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(lines, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      set.records.push_back(parse_step_record(line));
    } catch (const FormatError& e) {
      throw FormatError("steps.jsonl line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  validate(set);
  return set;
}

SaeModel make_sae(std::size_t d, std::size_t D, double lambda) {
  SaeModel m;
  m.d = d;
  m.D = D;
  m.W_enc = MatrixF(d, D);
  m.b_enc.assign(D, 0.0f);
  m.W_dec = MatrixF(D, d);
  m.b_dec.assign(d, 0.0f);
  m.lambda = lambda;
  return m;
}

void validate(const SaeModel& m) {
  if (m.d == 0) throw ValidationError("d: must be positive");
  if (m.D == 0) throw ValidationError("D: must be positive");
  if (m.W_enc.rows() != m.d || m.W_enc.cols() != m.D) throw ValidationError("W_enc: shape must be d x D");
  if (m.b_enc.size() != m.D) throw ValidationError("b_enc: length must be D");
  if (m.W_dec.rows() != m.D || m.W_dec.cols() != m.d) throw ValidationError("W_dec: shape must be D x d");
  if (m.b_dec.size() != m.d) throw ValidationError("b_dec: length must be d");
  if (!(m.lambda >= 0.0) || !std::isfinite(m.lambda)) throw ValidationError("lambda: must be finite and >= 0");
  check_finite(m.W_enc.flat(), "W_enc");
  check_finite(m.b_enc, "b_enc");
  check_finite(m.W_dec.flat(), "W_dec");
  check_finite(m.b_dec, "b_dec");
}

void save_sae(const SaeModel& model, const fs::path& dir) {
  validate(model);
  fs::create_directories(dir);
  json meta = {{"d", model.d},
               {"D", model.D},
               {"lambda", model.lambda},
               {"trained_steps", model.trained_steps}};
  io::write_text(dir / "sae.json", meta.dump(2) + "\n");

  std::vector<float> payload;
  payload.reserve(2 * model.d * model.D + model.d + model.D);
  payload.insert(payload.end(), model.W_enc.flat().begin(), model.W_enc.flat().end());
  payload.insert(payload.end(), model.b_enc.begin(), model.b_enc.end());
  payload.insert(payload.end(), model.W_dec.flat().begin(), model.W_dec.flat().end());
  payload.insert(payload.end(), model.b_dec.begin(), model.b_dec.end());
  io::write_f32(dir / "sae.bin", payload);
}

SaeModel load_sae(const fs::path& dir) {
  require_file(dir / "sae.json");
  require_file(dir / "sae.bin");
  const json meta = read_json_file(dir / "sae.json");
  SaeModel m;
  try {
    m.d = meta.at("d").get<std::size_t>();
    m.D = meta.at("D").get<std::size_t>();
    m.lambda = meta.at("lambda").get<double>();
    m.trained_steps = meta.at("trained_steps").get<std::uint64_t>();
  } catch (const json::exception& e) {
    throw FormatError(std::string("sae.json: ") + e.what());
  }
  const std::size_t dD = m.d * m.D;
  auto payload = io::read_f32(dir / "sae.bin", 2 * dD + m.d + m.D);
  auto it = payload.begin();
  auto take = [&it](std::size_t n) {
    std::vector<float> out(it, it + static_cast<std::ptrdiff_t>(n));
    it += static_cast<std::ptrdiff_t>(n);
    return out;
  };
  m.W_enc = MatrixF(m.d, m.D, take(dD));
  m.b_enc = take(m.D);
  m.W_dec = MatrixF(m.D, m.d, take(dD));
  m.b_dec = take(m.d);
  try {
    validate(m);
  } catch (const ValidationError& e) {
    throw FormatError(dir.string() + ": " + e.what());
  }
  return m;
}

namespace io {

namespace {
static_assert(sizeof(float) == 4 && std::numeric_limits<float>::is_iec559);

std::uint32_t to_little(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    return ((v & 0xFFu) << 24) | ((v & 0xFF00u) << 8) | ((v >> 8) & 0xFF00u) | (v >> 24);
  }
}
}  // namespace

void write_f32(const fs::path& file, std::span<const float> values) {
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + file.string());
  std::vector<std::uint32_t> words(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    words[i] = to_little(std::bit_cast<std::uint32_t>(values[i]));
  }
  out.write(reinterpret_cast<const char*>(words.data()),
            static_cast<std::streamsize>(words.size() * sizeof(std::uint32_t)));
  if (!out) throw IoError("write failed: " + file.string());
}

std::vector<float> read_f32(const fs::path& file, std::size_t expected_count) {
  require_file(file);
  const auto bytes = fs::file_size(file);
  if (bytes != expected_count * 4) {
    throw FormatError(file.string() + ": size mismatch, expected " + std::to_string(expected_count * 4) +
                      " bytes (4 per f32), found " + std::to_string(bytes));
  }
  std::ifstream in(file, std::ios::binary);
  if (!in) throw IoError("cannot open: " + file.string());
  std::vector<std::uint32_t> words(expected_count);
  in.read(reinterpret_cast<char*>(words.data()), static_cast<std::streamsize>(bytes));
  if (!in) throw IoError("read failed: " + file.string());
  std::vector<float> values(expected_count);
  for (std::size_t i = 0; i < expected_count; ++i) {
    values[i] = std::bit_cast<float>(to_little(words[i]));
  }
  return values;
}

std::string read_text(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw IoError("cannot open: " + file.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& file, std::string_view text) {
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + file.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw IoError("write failed: " + file.string());
}

}  // namespace io

}  // namespace rvec
