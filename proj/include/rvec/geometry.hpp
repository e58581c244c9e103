#pragma once

// Decoder-geometry diagnostics: dictionary incoherence, per-behavior
// top-active channels, cosine silhouettes, cross-layer normalisation,
// response-length split and a deterministic 2-D export.

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rvec/data_model.hpp"
#include "rvec/matrix.hpp"

namespace rvec::geometry {

// Max |cos| over distinct atom pairs. Atoms are the rows of `atoms`.
double incoherence(const MatrixD& atoms);

struct ChannelActivity {
  std::size_t channel_index = 0;
  double activity = 0.0;  // max |latent| over the labeled rows
  std::string label;

  bool operator==(const ChannelActivity&) const = default;
};

// The k channels with the largest max-|value| over rows labeled `target`,
// descending, ties by lower index. k > D is clamped with a warning.
std::vector<ChannelActivity> top_active_channels(const MatrixD& latents, std::span<const std::string> labels,
                                                 std::string_view target, std::size_t k);

struct Silhouette {
  std::vector<double> per_point;
  double mean = 0.0;
};

// Silhouette with distance 1 - cos. Points in singleton clusters score 0.
Silhouette silhouette_cosine(const MatrixD& vectors, std::span<const std::string> cluster_labels);

// Min-max normalisation to [0, 1]. Throws when all values are equal.
std::vector<double> normalize_across_layers(std::span<const double> scores);

struct Embedding2D {
  MatrixD coords;      // n x 2
  MatrixD normalized;  // unit-norm input rows; handed to the adapter for UMAP
};

// PCA of the row-normalised vectors. Each axis is signed so that its
// largest-magnitude coordinate is positive.
Embedding2D embed_2d(const MatrixD& vectors);

struct LengthThresholds {
  std::uint64_t short_max = 1000;
  std::uint64_t long_min = 8000;
};

// "short" below short_max, "long" above long_min, otherwise "excluded".
std::vector<std::string> length_split_labels(std::span<const StepRecord> records, LengthThresholds t = {});

std::vector<std::string> behavior_labels(std::span<const StepRecord> records);

}  // namespace rvec::geometry
