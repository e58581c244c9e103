#pragma once

// Core value types and the on-disk exchange formats shared with the Python
// adapter.
//
// Activation directory:
//   manifest.json    {"model", "layer", "dim", "count", "dtype": "f32", "byte_order": "little"}
//   activations.bin  count*dim f32, row-major, little-endian, no header
//   steps.jsonl      one StepRecord per line, line i <-> matrix row i
//
// SAE checkpoint directory:
//   sae.json  {"d", "D", "lambda", "trained_steps"}
//   sae.bin   W_enc (d x D), b_enc (D), W_dec (D x d), b_dec (d); f32 LE, row-major

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rvec/matrix.hpp"

namespace rvec {

enum class Label { reflection, backtracking, others, unlabeled };

std::string_view to_string(Label label) noexcept;
// Throws ValidationError for anything but the four canonical names.
Label label_from_string(std::string_view name);

struct StepRecord {
  std::string sample_id;
  std::uint64_t step_index = 0;
  std::string text;
  Label label = Label::unlabeled;
  std::uint64_t response_length_tokens = 0;

  bool operator==(const StepRecord&) const = default;
};

// Throws ValidationError when step indices of some sample are not 0..k-1.
void validate_step_indices(std::span<const StepRecord> records);

// One steps.jsonl line, without the trailing newline.
std::string format_step_record(const StepRecord& record);
// Throws FormatError on malformed JSON, missing keys or an unknown label.
StepRecord parse_step_record(std::string_view line);

struct ActivationSet {
  std::string model_name;
  std::uint64_t layer_index = 0;
  MatrixF data;  // count x dim
  std::vector<StepRecord> records;

  std::size_t dim() const noexcept { return data.cols(); }
  std::size_t count() const noexcept { return data.rows(); }

  bool operator==(const ActivationSet&) const = default;
};

// Throws ValidationError naming the offending field or row.
void validate(const ActivationSet& set);

void write_activation_set(const ActivationSet& set, const std::filesystem::path& dir);
ActivationSet read_activation_set(const std::filesystem::path& dir);

struct SaeModel {
  std::size_t d = 0;
  std::size_t D = 0;
  MatrixF W_enc;  // d x D
  std::vector<float> b_enc;
  MatrixF W_dec;  // D x d; row j is dictionary atom j
  std::vector<float> b_dec;
  double lambda = 0.0;
  std::uint64_t trained_steps = 0;

  bool operator==(const SaeModel&) const = default;
};

// Zero-initialized model with consistent shapes.
SaeModel make_sae(std::size_t d, std::size_t D, double lambda = 0.0);
void validate(const SaeModel& model);

void save_sae(const SaeModel& model, const std::filesystem::path& dir);
SaeModel load_sae(const std::filesystem::path& dir);

namespace io {

// Raw little-endian f32 payloads. Reading checks the exact byte size.
void write_f32(const std::filesystem::path& file, std::span<const float> values);
std::vector<float> read_f32(const std::filesystem::path& file, std::size_t expected_count);

std::string read_text(const std::filesystem::path& file);
void write_text(const std::filesystem::path& file, std::string_view text);

}  // namespace io

}  // namespace rvec
