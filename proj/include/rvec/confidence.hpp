#pragma once

// Entropy-minimisation search for confidence directions. A linear-softmax
// readout head stands in for the tail of the model; a score vector S over
// decoder rows shifts every activation by S W_dec and is optimised to make
// the head's predictions confident.

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "rvec/data_model.hpp"
#include "rvec/matrix.hpp"
#include "rvec/optim.hpp"
#include "rvec/steering.hpp"

namespace rvec::confidence {

struct ReadoutHead {
  std::size_t d = 0;
  std::size_t vocab = 0;
  MatrixF W_out;  // d x vocab
  std::vector<float> b_out;

  bool operator==(const ReadoutHead&) const = default;
};

struct ScoreVector {
  std::vector<float> S;  // one score per decoder row
  std::uint64_t trained_iters = 0;
  double final_entropy = 0.0;

  bool operator==(const ScoreVector&) const = default;
};

void validate(const ReadoutHead& head);
void validate(const ScoreVector& scores);

// Natural-log Shannon entropy, 0 log 0 = 0. p must sum to 1 within 1e-6.
double entropy(std::span<const double> p);

// softmax(W_out^T h + b_out)
std::vector<double> predict(const ReadoutHead& head, std::span<const double> h);

// Mean head entropy over the rows of `batch` after every row is shifted by
// basis^T theta (basis is K x d). When grad is nonempty it receives the
// gradient with respect to theta.
double entropy_objective(const ReadoutHead& head, const MatrixD& basis, std::span<const double> theta,
                         const MatrixD& batch, std::span<double> grad = {});

struct OptimizeConfig {
  std::uint64_t iters = 1000;
  double learning_rate = 0.01;
  std::size_t batch_size = 256;
  std::uint64_t seed = 0;
  optim::AdamConfig adam{};
};

void validate(const OptimizeConfig& config);

// Adam with cosine decay (no warmup) from S = 0. Batches are drawn without
// replacement and reshuffled every epoch. `trajectory`, when given, receives
// the batch objective at every iteration.
ScoreVector optimize_scores(const ReadoutHead& head, const MatrixF& W_dec, const ActivationSet& activations,
                            const OptimizeConfig& config, std::vector<double>* trajectory = nullptr);

// Indices of the k largest |S|, descending, ties to the lower index.
std::vector<std::size_t> top_scoring_columns(const ScoreVector& scores, std::size_t k);

// Same optimiser over the coefficients of sum_i alpha_i v_i, starting at 0.
std::vector<double> fit_coefficients(const ReadoutHead& head, std::span<const steering::SteeringVector> vectors,
                                     const ActivationSet& activations, const OptimizeConfig& config,
                                     std::vector<double>* trajectory = nullptr);

// head.json {kind: "linear", d, vocab} + head.bin (W_out row-major, then b_out).
void save_head(const ReadoutHead& head, const std::filesystem::path& dir);
ReadoutHead load_head(const std::filesystem::path& dir);

// scores.json {D, trained_iters, final_entropy} + scores.bin (S).
void save_scores(const ScoreVector& scores, const std::filesystem::path& dir);
ScoreVector load_scores(const std::filesystem::path& dir);

}  // namespace rvec::confidence
