#include "rvec/steering.hpp"

#include <cmath>

#include "json.hpp"
#include "rvec/data_model.hpp"
#include "rvec/diag.hpp"
#include "rvec/error.hpp"

namespace rvec::steering {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

double norm2(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

std::vector<double> checked_unit(std::span<const double> v) {
  if (v.empty()) throw ValidationError("steering vector: empty direction");
  const double n = norm2(v);
  if (!std::isfinite(n)) throw ValidationError("steering vector: non-finite direction");
  const double dev = std::abs(n - 1.0);
  if (dev > kNormTolerance) {
    throw ValidationError("steering vector: norm " + std::to_string(n) + " is not 1 (tolerance " +
                          std::to_string(kNormTolerance) + ")");
  }
  if (dev > 1e-6) diag::warn("renormalized_direction", "steering vector norm " + std::to_string(n) + " renormalized");
  std::vector<double> u(v.begin(), v.end());
  for (double& x : u) x /= n;
  return u;
}

double activity_of(const std::vector<geometry::ChannelActivity>& list, std::size_t channel) {
  for (const auto& a : list)
    if (a.channel_index == channel) return a.activity;
  return 0.0;
}

}  // namespace

std::map<std::string, std::vector<std::size_t>> filter_exclusive_channels(
    const std::map<std::string, std::vector<geometry::ChannelActivity>>& activities_by_behavior,
    double overlap_ratio) {
  if (activities_by_behavior.size() < 2) {
    throw ValidationError("filter_exclusive_channels: need at least 2 behaviors, got " +
                          std::to_string(activities_by_behavior.size()));
  }
  if (!(overlap_ratio > 0.0) || !std::isfinite(overlap_ratio)) {
    throw ValidationError("filter_exclusive_channels: overlap_ratio must be positive");
  }
  for (const auto& [behavior, list] : activities_by_behavior) {
    if (list.empty()) throw ValidationError("filter_exclusive_channels: empty activity list for '" + behavior + "'");
  }
  std::map<std::string, std::vector<std::size_t>> out;
  for (const auto& [behavior, list] : activities_by_behavior) {
    auto& kept = out[behavior];
    for (const auto& a : list) {
      bool exclusive = true;
      for (const auto& [other, other_list] : activities_by_behavior) {
        if (other == behavior) continue;
        if (!(activity_of(other_list, a.channel_index) < overlap_ratio * a.activity)) {
          exclusive = false;
          break;
        }
      }
      if (exclusive) kept.push_back(a.channel_index);
    }
  }
  return out;
}

SteeringVector build_behavior_vector(const MatrixF& W_dec, std::span<const std::size_t> channels,
                                     const std::string& behavior) {
  if (channels.empty()) throw ValidationError("build_behavior_vector: no channels for '" + behavior + "'");
  const std::size_t d = W_dec.cols();
  std::vector<double> sum(d, 0.0);
  for (std::size_t c : channels) {
    if (c >= W_dec.rows()) {
      throw ValidationError("build_behavior_vector: channel " + std::to_string(c) + " out of range (D = " +
                            std::to_string(W_dec.rows()) + ")");
    }
    const auto row = W_dec.row(c);
    double s = 0.0;
    for (float x : row) s += static_cast<double>(x) * x;
    const double n = std::sqrt(s);
    if (!(n > 0.0)) throw NumericError("build_behavior_vector: decoder row " + std::to_string(c) + " has zero norm");
    for (std::size_t i = 0; i < d; ++i) sum[i] += static_cast<double>(row[i]) / n;
  }
  for (double& x : sum) x /= static_cast<double>(channels.size());
  const double n = norm2(sum);
  if (!(n > 1e-12)) {
    throw NumericError("build_behavior_vector: selected rows cancel to a zero vector for '" + behavior + "'");
  }
  SteeringVector v;
  v.behavior = behavior;
  v.provenance.assign(channels.begin(), channels.end());
  v.direction.resize(d);
  for (std::size_t i = 0; i < d; ++i) v.direction[i] = static_cast<float>(sum[i] / n);
  return v;
}

std::vector<double> apply_steering(std::span<const double> h, std::span<const double> v, double alpha) {
  if (h.size() != v.size()) {
    throw DimensionError("apply_steering: h has length " + std::to_string(h.size()) + ", v has length " +
                         std::to_string(v.size()));
  }
  if (!std::isfinite(alpha)) throw ValidationError("apply_steering: alpha must be finite");
  const std::vector<double> u = checked_unit(v);
  double proj = 0.0;
  for (std::size_t i = 0; i < h.size(); ++i) proj += u[i] * h[i];
  std::vector<double> out(h.begin(), h.end());
  const double scale = alpha * proj;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += scale * u[i];
  return out;
}

std::vector<double> apply_steering(std::span<const double> h, const SteeringVector& v, double alpha) {
  const auto dir = vector_cast<double>(std::span<const float>(v.direction));
  return apply_steering(h, dir, alpha);
}

std::vector<double> combine_steering(std::span<const SteeringVector> vectors, std::span<const double> coefficients) {
  if (vectors.empty()) throw ValidationError("combine_steering: no vectors");
  if (vectors.size() != coefficients.size()) {
    throw ValidationError("combine_steering: " + std::to_string(vectors.size()) + " vectors but " +
                          std::to_string(coefficients.size()) + " coefficients");
  }
  const std::size_t d = vectors.front().direction.size();
  std::vector<double> out(d, 0.0);
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    if (vectors[i].direction.size() != d) throw DimensionError("combine_steering: vectors differ in length");
    for (std::size_t j = 0; j < d; ++j) out[j] += coefficients[i] * static_cast<double>(vectors[i].direction[j]);
  }
  return out;
}

void validate(const SteeringVector& v) {
  if (v.direction.empty()) throw ValidationError("direction: must be nonempty");
  double s = 0.0;
  for (float x : v.direction) {
    if (!std::isfinite(x)) throw ValidationError("direction: non-finite entry");
    s += static_cast<double>(x) * x;
  }
  if (std::abs(std::sqrt(s) - 1.0) > kNormTolerance) {
    throw ValidationError("direction: norm " + std::to_string(std::sqrt(s)) + " is not 1");
  }
}

void save_steering_vector(const SteeringVector& v, const fs::path& dir) {
  validate(v);
  fs::create_directories(dir);
  json meta = {{"behavior", v.behavior}, {"d", v.direction.size()}, {"provenance", v.provenance}};
  io::write_text(dir / "steering.json", meta.dump(2) + "\n");
  io::write_f32(dir / "steering.bin", v.direction);
}

SteeringVector load_steering_vector(const fs::path& dir) {
  const fs::path meta_file = dir / "steering.json";
  if (!fs::is_regular_file(meta_file)) throw IoError("missing file: " + meta_file.string());
  SteeringVector v;
  std::size_t d = 0;
  try {
    const json meta = json::parse(io::read_text(meta_file));
    v.behavior = meta.at("behavior").get<std::string>();
    d = meta.at("d").get<std::size_t>();
    v.provenance = meta.at("provenance").get<std::vector<std::size_t>>();
  } catch (const json::exception& e) {
    throw FormatError(meta_file.string() + ": " + e.what());
  }
  v.direction = io::read_f32(dir / "steering.bin", d);
  try {
    validate(v);
  } catch (const ValidationError& e) {
    throw FormatError(dir.string() + ": " + e.what());
  }
  return v;
}

}  // namespace rvec::steering
