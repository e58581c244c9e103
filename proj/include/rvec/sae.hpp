#pragma once

// ReLU sparse autoencoder.
//
//   z     = ReLU(W_enc^T h + b_enc)
//   h_hat = W_dec^T z + b_dec
//
// Training minimises  mean_b ||h_hat - h||^2 + lambda * mean_b ||z||_1.
// The L1 term stands in for the non-differentiable L0 count, which is still
// reported (entries above kActiveThreshold) as a metric.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "rvec/data_model.hpp"
#include "rvec/optim.hpp"

namespace rvec::sae {

inline constexpr double kActiveThreshold = 1e-6;

std::vector<double> encode(const SaeModel& model, std::span<const double> h);
std::vector<double> decode(const SaeModel& model, std::span<const double> z);

// N x D matrix; row i is encode(row i). N = 0 yields an empty 0 x D matrix.
MatrixD latent_features(const SaeModel& model, const MatrixF& activations);
MatrixD latent_features(const SaeModel& model, const ActivationSet& activations);

struct LossReport {
  double total = 0.0;
  double reconstruction_mse = 0.0;  // mean over the batch of ||h_hat - h||^2
  double sparsity_penalty = 0.0;    // lambda * mean ||z||_1 (or ||z||_0 for l0_ste)
  double mean_l0 = 0.0;             // mean count of z entries > kActiveThreshold
};

// Double-precision working copy of the SAE weights.
struct SaeParams {
  MatrixD W_enc;  // d x D
  std::vector<double> b_enc;
  MatrixD W_dec;  // D x d
  std::vector<double> b_dec;

  std::size_t d() const noexcept { return W_enc.rows(); }
  std::size_t D() const noexcept { return W_enc.cols(); }

  static SaeParams from_model(const SaeModel& model);
  // Rounds to f32.
  SaeModel to_model(double lambda, std::uint64_t trained_steps) const;
};

using SaeGradients = SaeParams;

// How the sparsity term is computed and differentiated.
//   l1:     lambda * mean ||z||_1, exact gradient.
//   l0_ste: lambda * mean ||z||_0 in the forward pass; the backward pass uses
//           a rectangular pseudo-derivative of width `bandwidth` just above
//           the ReLU threshold, pushing weakly active latents to zero.
struct SparsityPenalty {
  enum class Kind { l1, l0_ste };
  Kind kind = Kind::l1;
  double lambda = 2e-3;
  double bandwidth = 0.1;
};

// Loss on a batch (rows are samples). When grads is non-null it receives the
// gradient of `total` with respect to every parameter (exact for l1).
LossReport loss(const SaeParams& params, const MatrixD& batch, const SparsityPenalty& penalty,
                SaeGradients* grads = nullptr);
inline LossReport loss(const SaeParams& params, const MatrixD& batch, double lambda,
                       SaeGradients* grads = nullptr) {
  return loss(params, batch, SparsityPenalty{SparsityPenalty::Kind::l1, lambda, 0.0}, grads);
}
LossReport loss(const SaeModel& model, const MatrixD& batch);

struct TrainConfig {
  std::size_t hidden_dim = 2048;
  std::size_t batch_size = 1024;
  double learning_rate = 1e-4;
  double warmup_fraction = 0.10;
  double lambda = 2e-3;
  SparsityPenalty::Kind penalty = SparsityPenalty::Kind::l1;
  double ste_bandwidth = 0.1;
  // 0 selects default_total_steps().
  std::uint64_t total_steps = 0;
  std::uint64_t seed = 0;
  optim::AdamConfig adam{};
  // Per-dimension standardisation before training, folded back into the
  // weights afterwards so the checkpoint works on raw activations.
  bool standardize = false;
  // Project every decoder row back to unit L2 norm after each update.
  bool unit_norm_decoder = false;
  // Start with W_enc = W_dec^T.
  bool tied_init = false;
};

void validate(const TrainConfig& config);

// Enough steps for every sample to be seen at least 50 times.
std::uint64_t default_total_steps(std::size_t n_samples, std::size_t batch_size);

struct LossRecord {
  std::uint64_t step = 0;
  double lr = 0.0;
  double total = 0.0;
  double mse = 0.0;
  double l1 = 0.0;  // lambda * mean ||z||_1
  double l0 = 0.0;
};

struct TrainResult {
  SaeModel model;
  std::vector<LossRecord> log;
};

// Deterministic for a fixed seed and thread count. Throws NumericError naming
// the step when the loss becomes non-finite.
TrainResult train(const MatrixF& activations, const TrainConfig& config);
TrainResult train(const ActivationSet& activations, const TrainConfig& config);

// Columns: step,lr,total,mse,l1,l0
void write_loss_csv(const std::filesystem::path& file, std::span<const LossRecord> log);

}  // namespace rvec::sae
