#include <cstring>
#include <limits>

#include "doctest.h"
#include "oracles.hpp"
#include "rvec/data_model.hpp"
#include "rvec/error.hpp"

using namespace rvec;
namespace fs = std::filesystem;

namespace {

ActivationSet small_set(std::size_t n = 4, std::size_t d = 3) {
  ActivationSet s;
  s.model_name = "tiny-model";
  s.layer_index = 7;
  s.data = MatrixF(n, d);
  for (std::size_t i = 0; i < n * d; ++i) s.data.data()[i] = 0.25f * static_cast<float>(i) - 1.0f;
  for (std::size_t i = 0; i < n; ++i) {
    s.records.push_back({"sample-" + std::to_string(i / 2), i % 2, "step \"" + std::to_string(i) + "\"\nline",
                         i % 3 == 0 ? Label::reflection : Label::others, 1200});
  }
  return s;
}

// Writes little-endian f32 bytes by hand, as an external exporter would.
void write_le_floats(const fs::path& file, const std::vector<float>& values) {
  std::string bytes;
  for (float v : values) {
    std::uint32_t w;
    std::memcpy(&w, &v, 4);
    for (int b = 0; b < 4; ++b) bytes.push_back(static_cast<char>((w >> (8 * b)) & 0xFF));
  }
  io::write_text(file, bytes);
}

}  // namespace

TEST_CASE("labels convert to and from strings") {
  for (Label l : {Label::reflection, Label::backtracking, Label::others, Label::unlabeled}) {
    CHECK(label_from_string(to_string(l)) == l);
  }
  CHECK_THROWS_AS(label_from_string("Reflection"), ValidationError);
}

TEST_CASE("step indices must be contiguous from zero per sample") {
  std::vector<StepRecord> ok{{"a", 1, "", Label::others, 0}, {"a", 0, "", Label::others, 0}, {"b", 0, "", Label::others, 0}};
  CHECK_NOTHROW(validate_step_indices(ok));
  std::vector<StepRecord> gap{{"a", 0, "", Label::others, 0}, {"a", 2, "", Label::others, 0}};
  CHECK_THROWS_AS(validate_step_indices(gap), ValidationError);
  std::vector<StepRecord> late{{"a", 1, "", Label::others, 0}};
  CHECK_THROWS_AS(validate_step_indices(late), ValidationError);
}

TEST_CASE("activation set round trip is bit-exact") {
  test::TempDir dir;
  const ActivationSet s = small_set();
  write_activation_set(s, dir.path());
  const ActivationSet back = read_activation_set(dir.path());
  CHECK(back.model_name == s.model_name);
  CHECK(back.layer_index == s.layer_index);
  CHECK(back.records == s.records);
  CHECK(test::bitwise_equal(back.data.flat(), s.data.flat()));
  CHECK(fs::file_size(dir / "activations.bin") == 4 * s.count() * s.dim());

  test::TempDir again;
  write_activation_set(back, again.path());
  for (const char* f : {"manifest.json", "activations.bin", "steps.jsonl"}) {
    CHECK(test::file_bytes(dir / f) == test::file_bytes(again / f));
  }
}

TEST_CASE("a hand-written activation directory is accepted") {
  test::TempDir dir;
  io::write_text(dir / "manifest.json",
                 R"({"model": "ext", "layer": 3, "dim": 2, "count": 2, "dtype": "f32", "byte_order": "little"})");
  write_le_floats(dir / "activations.bin", {1.0f, -2.5f, 0.125f, 3.0f});
  io::write_text(dir / "steps.jsonl",
                 "{\"sample_id\": \"q1\", \"step_index\": 0, \"text\": \"Wait\", \"label\": \"reflection\", "
                 "\"response_length_tokens\": 900}\n"
                 "{\"sample_id\": \"q1\", \"step_index\": 1, \"text\": \"x\", \"label\": \"others\", "
                 "\"response_length_tokens\": 900}\n");
  const ActivationSet s = read_activation_set(dir.path());
  CHECK(s.model_name == "ext");
  CHECK(s.layer_index == 3);
  CHECK(s.data(0, 1) == -2.5f);
  CHECK(s.data(1, 0) == 0.125f);
  CHECK(s.records[0].label == Label::reflection);
  CHECK(s.records[1].response_length_tokens == 900);
}

TEST_CASE("activation reader rejects malformed inputs") {
  test::TempDir dir;
  const ActivationSet s = small_set();

  SUBCASE("missing directory") { CHECK_THROWS_AS(read_activation_set(dir / "nope"), IoError); }

  SUBCASE("missing file") {
    write_activation_set(s, dir.path());
    fs::remove(dir / "steps.jsonl");
    CHECK_THROWS_AS(read_activation_set(dir.path()), IoError);
  }

  SUBCASE("truncated binary") {
    write_activation_set(s, dir.path());
    const auto bytes = test::file_bytes(dir / "activations.bin");
    io::write_text(dir / "activations.bin", bytes.substr(0, bytes.size() - 4));
    try {
      read_activation_set(dir.path());
      FAIL("expected FormatError");
    } catch (const FormatError& e) {
      CHECK(std::string(e.what()).find("size mismatch") != std::string::npos);
    }
  }

  SUBCASE("non-finite value names its row") {
    ActivationSet bad = s;
    write_activation_set(bad, dir.path());
    std::vector<float> values(bad.data.flat().begin(), bad.data.flat().end());
    values[2 * bad.dim() + 1] = std::numeric_limits<float>::quiet_NaN();
    write_le_floats(dir / "activations.bin", values);
    try {
      read_activation_set(dir.path());
      FAIL("expected FormatError");
    } catch (const FormatError& e) {
      CHECK(std::string(e.what()).find("row 2") != std::string::npos);
    }
  }

  SUBCASE("wrong dtype") {
    write_activation_set(s, dir.path());
    io::write_text(dir / "manifest.json",
                   R"({"model": "m", "layer": 0, "dim": 3, "count": 4, "dtype": "f16", "byte_order": "little"})");
    CHECK_THROWS_AS(read_activation_set(dir.path()), FormatError);
  }

  SUBCASE("bad JSON line cites the line number") {
    write_activation_set(s, dir.path());
    auto lines = test::file_bytes(dir / "steps.jsonl");
    const auto second = lines.find('\n') + 1;
    lines.insert(second, "{broken\n");
    io::write_text(dir / "steps.jsonl", lines);
    try {
      read_activation_set(dir.path());
      FAIL("expected FormatError");
    } catch (const FormatError& e) {
      CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
  }

  SUBCASE("record count must match rows") {
    write_activation_set(s, dir.path());
    auto lines = test::file_bytes(dir / "steps.jsonl");
    lines = lines.substr(0, lines.rfind('\n', lines.size() - 2) + 1);
    io::write_text(dir / "steps.jsonl", lines);
    CHECK_THROWS_AS(read_activation_set(dir.path()), ValidationError);
  }
}

TEST_CASE("validate rejects inconsistent activation sets") {
  ActivationSet s = small_set();
  s.records.pop_back();
  CHECK_THROWS_AS(validate(s), ValidationError);
  ActivationSet empty;
  CHECK_THROWS_AS(validate(empty), ValidationError);
}

TEST_CASE("SAE checkpoint round trip is bit-exact") {
  std::mt19937_64 rng(3);
  SaeModel m = make_sae(5, 7, 2e-3);
  m.W_enc = matrix_cast<float>(test::random_matrix(rng, 5, 7));
  m.W_dec = matrix_cast<float>(test::random_matrix(rng, 7, 5));
  for (float& b : m.b_enc) b = 0.1f;
  for (float& b : m.b_dec) b = -0.3f;
  m.trained_steps = 42;
  test::TempDir dir;
  save_sae(m, dir.path());
  const SaeModel back = load_sae(dir.path());
  CHECK(back.d == 5);
  CHECK(back.D == 7);
  CHECK(back.lambda == m.lambda);
  CHECK(back.trained_steps == 42);
  CHECK(test::bitwise_equal(back.W_enc.flat(), m.W_enc.flat()));
  CHECK(test::bitwise_equal(back.W_dec.flat(), m.W_dec.flat()));
  CHECK(back.b_enc == m.b_enc);
  CHECK(back.b_dec == m.b_dec);
  CHECK(fs::file_size(dir / "sae.bin") == 4 * (2 * 5 * 7 + 5 + 7));

  io::write_text(dir / "sae.bin", test::file_bytes(dir / "sae.bin") + "xxxx");
  CHECK_THROWS_AS(load_sae(dir.path()), FormatError);
}

TEST_CASE("SAE validation") {
  SaeModel m = make_sae(2, 3, 0.0);
  CHECK_NOTHROW(validate(m));
  m.b_enc.push_back(0.0f);
  CHECK_THROWS_AS(validate(m), ValidationError);
  SaeModel n = make_sae(2, 3, -1.0);
  CHECK_THROWS_AS(validate(n), ValidationError);
}

TEST_CASE("step records format as one JSON line") {
  const StepRecord r{"s", 3, "a\nb", Label::backtracking, 10};
  const std::string line = format_step_record(r);
  CHECK(line.find('\n') == std::string::npos);
  CHECK(parse_step_record(line) == r);
  CHECK_THROWS_AS(parse_step_record("{\"sample_id\": 1}"), FormatError);
  CHECK_THROWS_AS(parse_step_record(R"({"sample_id": "s", "step_index": 0, "text": "", "label": "bogus",
                                        "response_length_tokens": 0})"),
                  FormatError);
}
