#pragma once

// Behavior vectors built from SAE decoder rows, and the projection-based
// intervention h' = h + alpha * v (v^T h). alpha = -1 removes the component
// along v, alpha > 0 amplifies it.

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "rvec/geometry.hpp"
#include "rvec/matrix.hpp"

namespace rvec::steering {

struct SteeringVector {
  std::vector<float> direction;  // unit norm
  std::string behavior;
  std::vector<std::size_t> provenance;  // contributing decoder rows

  bool operator==(const SteeringVector&) const = default;
};

inline constexpr double kDefaultOverlapRatio = 0.5;
// Norm deviations up to this are renormalised with a warning; larger ones are errors.
inline constexpr double kNormTolerance = 1e-3;

// Channel c stays with behavior b iff, under every other behavior, its
// activity is below overlap_ratio times its activity under b. A channel
// missing from another behavior's list counts as activity 0 there.
std::map<std::string, std::vector<std::size_t>> filter_exclusive_channels(
    const std::map<std::string, std::vector<geometry::ChannelActivity>>& activities_by_behavior,
    double overlap_ratio = kDefaultOverlapRatio);

// Normalises each selected decoder row, averages them and renormalises.
SteeringVector build_behavior_vector(const MatrixF& W_dec, std::span<const std::size_t> channels,
                                     const std::string& behavior);

std::vector<double> apply_steering(std::span<const double> h, std::span<const double> v, double alpha);
std::vector<double> apply_steering(std::span<const double> h, const SteeringVector& v, double alpha);

// sum_i coefficients[i] * vectors[i].direction, not renormalised.
std::vector<double> combine_steering(std::span<const SteeringVector> vectors, std::span<const double> coefficients);

void validate(const SteeringVector& v);

// steering.json {behavior, d, provenance} + steering.bin (direction, f32 LE).
void save_steering_vector(const SteeringVector& v, const std::filesystem::path& dir);
SteeringVector load_steering_vector(const std::filesystem::path& dir);

}  // namespace rvec::steering
