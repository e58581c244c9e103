#include "rvec/sae.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <random>

#include "rvec/error.hpp"
#include "rvec/kernels.hpp"

namespace rvec::sae {

namespace {

void require_dim(std::size_t got, std::size_t want, const char* what) {
  if (got != want) {
    throw DimensionError(std::string(what) + ": expected length " + std::to_string(want) + ", got " +
                         std::to_string(got));
  }
}

void require_finite(std::span<const double> v, const char* what) {
  for (double x : v) {
    if (!std::isfinite(x)) throw ValidationError(std::string(what) + ": non-finite input");
  }
}

MatrixD to_double_rows(const MatrixF& m) { return matrix_cast<double>(m); }

}  // namespace

std::vector<double> encode(const SaeModel& model, std::span<const double> h) {
  require_dim(h.size(), model.d, "encode");
  require_finite(h, "encode");
  std::vector<double> z(model.b_enc.begin(), model.b_enc.end());
  for (std::size_t i = 0; i < model.d; ++i) {
    const auto w = model.W_enc.row(i);
    for (std::size_t j = 0; j < model.D; ++j) z[j] += static_cast<double>(w[j]) * h[i];
  }
  for (double& v : z) v = std::max(v, 0.0);
  return z;
}

std::vector<double> decode(const SaeModel& model, std::span<const double> z) {
  require_dim(z.size(), model.D, "decode");
  require_finite(z, "decode");
  std::vector<double> h(model.b_dec.begin(), model.b_dec.end());
  for (std::size_t j = 0; j < model.D; ++j) {
    if (z[j] == 0.0) continue;
    const auto w = model.W_dec.row(j);
    for (std::size_t i = 0; i < model.d; ++i) h[i] += static_cast<double>(w[i]) * z[j];
  }
  return h;
}

MatrixD latent_features(const SaeModel& model, const MatrixF& activations) {
  if (activations.rows() == 0) return MatrixD(0, model.D);
  require_dim(activations.cols(), model.d, "latent_features");
  const MatrixD h = to_double_rows(activations);
  const MatrixD w = matrix_cast<double>(model.W_enc);
  const std::vector<double> b(model.b_enc.begin(), model.b_enc.end());
  MatrixD z;
  kernels::matmul_bias(h, w, b, z);
  for (double& v : z.flat()) v = std::max(v, 0.0);
  return z;
}

MatrixD latent_features(const SaeModel& model, const ActivationSet& activations) {
  return latent_features(model, activations.data);
}

SaeParams SaeParams::from_model(const SaeModel& model) {
  return {matrix_cast<double>(model.W_enc),
          std::vector<double>(model.b_enc.begin(), model.b_enc.end()),
          matrix_cast<double>(model.W_dec),
          std::vector<double>(model.b_dec.begin(), model.b_dec.end())};
}

SaeModel SaeParams::to_model(double lambda, std::uint64_t trained_steps) const {
  SaeModel m;
  m.d = d();
  m.D = D();
  m.W_enc = matrix_cast<float>(W_enc);
  m.b_enc = std::vector<float>(b_enc.begin(), b_enc.end());
  m.W_dec = matrix_cast<float>(W_dec);
  m.b_dec = std::vector<float>(b_dec.begin(), b_dec.end());
  m.lambda = lambda;
  m.trained_steps = trained_steps;
  return m;
}

LossReport loss(const SaeParams& p, const MatrixD& batch, const SparsityPenalty& penalty, SaeGradients* grads) {
  const double lambda = penalty.lambda;
  const bool l0 = penalty.kind == SparsityPenalty::Kind::l0_ste;
  if (l0 && !(penalty.bandwidth > 0.0)) throw ValidationError("loss: STE bandwidth must be positive");
  const std::size_t B = batch.rows();
  if (B == 0) throw ValidationError("loss: empty batch");
  require_dim(batch.cols(), p.d(), "loss");
  const std::size_t D = p.D();
  const double inv_b = 1.0 / static_cast<double>(B);

  MatrixD z;
  kernels::matmul_bias(batch, p.W_enc, p.b_enc, z);
  for (double& v : z.flat()) v = std::max(v, 0.0);
  MatrixD residual;
  kernels::matmul_bias(z, p.W_dec, p.b_dec, residual);

  double sq = 0.0;
  for (std::size_t i = 0; i < residual.size(); ++i) {
    residual.data()[i] -= batch.data()[i];
    sq += residual.data()[i] * residual.data()[i];
  }
  double l1 = 0.0;
  std::size_t active = 0;
  for (double v : z.flat()) {
    l1 += v;
    active += v > kActiveThreshold;
  }

  LossReport report;
  report.reconstruction_mse = sq * inv_b;
  report.sparsity_penalty = lambda * (l0 ? static_cast<double>(active) : l1) * inv_b;
  report.total = report.reconstruction_mse + report.sparsity_penalty;
  report.mean_l0 = static_cast<double>(active) * inv_b;

  if (grads) {
    // residual becomes dL/dh_hat
    for (double& v : residual.flat()) v *= 2.0 * inv_b;
    kernels::matmul_tn(z, residual, grads->W_dec);
    grads->b_dec.assign(p.d(), 0.0);
    kernels::column_sums(residual, grads->b_dec);

    MatrixD dz;
    kernels::matmul_nt(residual, p.W_dec, dz);
    if (l0) {
      const double kernel = lambda * inv_b / penalty.bandwidth;
      for (std::size_t i = 0; i < dz.size(); ++i) {
        const double zi = z.data()[i];
        dz.data()[i] = zi > 0.0 ? dz.data()[i] + (zi < penalty.bandwidth ? kernel : 0.0) : 0.0;
      }
    } else {
      const double l1_grad = lambda * inv_b;
      for (std::size_t i = 0; i < dz.size(); ++i) {
        dz.data()[i] = z.data()[i] > 0.0 ? dz.data()[i] + l1_grad : 0.0;
      }
    }
    kernels::matmul_tn(batch, dz, grads->W_enc);
    grads->b_enc.assign(D, 0.0);
    kernels::column_sums(dz, grads->b_enc);
  }
  return report;
}

LossReport loss(const SaeModel& model, const MatrixD& batch) {
  return loss(SaeParams::from_model(model), batch, model.lambda);
}

void validate(const TrainConfig& c) {
  if (c.hidden_dim == 0) throw ValidationError("hidden_dim: must be positive");
  if (c.batch_size == 0) throw ValidationError("batch_size: must be positive");
  if (!(c.learning_rate > 0.0)) throw ValidationError("learning_rate: must be positive");
  if (!(c.warmup_fraction >= 0.0 && c.warmup_fraction < 1.0)) {
    throw ValidationError("warmup_fraction: must lie in [0, 1)");
  }
  if (!(c.lambda >= 0.0)) throw ValidationError("lambda: must be nonnegative");
  if (!(c.adam.beta1 >= 0.0 && c.adam.beta1 < 1.0) || !(c.adam.beta2 >= 0.0 && c.adam.beta2 < 1.0)) {
    throw ValidationError("adam betas: must lie in [0, 1)");
  }
  if (!(c.adam.eps > 0.0)) throw ValidationError("adam eps: must be positive");
}

std::uint64_t default_total_steps(std::size_t n_samples, std::size_t batch_size) {
  const std::uint64_t seen = 50ull * n_samples;
  return std::max<std::uint64_t>(1, (seen + batch_size - 1) / batch_size);
}

namespace {

struct Standardizer {
  std::vector<double> mean;
  std::vector<double> scale;

  static Standardizer fit(const MatrixD& x) {
    Standardizer s;
    const std::size_t n = x.rows(), d = x.cols();
    s.mean.assign(d, 0.0);
    s.scale.assign(d, 0.0);
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < d; ++c) s.mean[c] += x(r, c);
    for (double& m : s.mean) m /= static_cast<double>(n);
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < d; ++c) s.scale[c] += (x(r, c) - s.mean[c]) * (x(r, c) - s.mean[c]);
    for (double& v : s.scale) {
      v = std::sqrt(v / static_cast<double>(n));
      if (v < 1e-12) v = 1.0;  // constant dimension
    }
    return s;
  }

  void apply(MatrixD& x) const {
    for (std::size_t r = 0; r < x.rows(); ++r)
      for (std::size_t c = 0; c < x.cols(); ++c) x(r, c) = (x(r, c) - mean[c]) / scale[c];
  }

  // Rewrites weights trained on standardised inputs into raw-input weights:
  //   encoder sees (h - mean) / scale, decoder output is scale * h_hat + mean.
  void fold(SaeParams& p) const {
    const std::size_t d = p.d(), D = p.D();
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < D; ++j) p.W_enc(i, j) /= scale[i];
    for (std::size_t j = 0; j < D; ++j) {
      double shift = 0.0;
      for (std::size_t i = 0; i < d; ++i) shift += p.W_enc(i, j) * mean[i];
      p.b_enc[j] -= shift;
    }
    for (std::size_t j = 0; j < D; ++j)
      for (std::size_t i = 0; i < d; ++i) p.W_dec(j, i) *= scale[i];
    for (std::size_t i = 0; i < d; ++i) p.b_dec[i] = p.b_dec[i] * scale[i] + mean[i];
  }
};

void normalize_rows(MatrixD& m) {
  for (std::size_t r = 0; r < m.rows(); ++r) {
    double s = 0.0;
    for (double v : m.row(r)) s += v * v;
    if (s > 0.0) {
      const double inv = 1.0 / std::sqrt(s);
      for (double& v : m.row(r)) v *= inv;
    }
  }
}

SaeParams init_params(std::size_t d, std::size_t D, bool tied, std::mt19937_64& rng) {
  SaeParams p{MatrixD(d, D), std::vector<double>(D, 0.0), MatrixD(D, d), std::vector<double>(d, 0.0)};
  std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(static_cast<double>(d)));
  for (double& w : p.W_enc.flat()) w = normal(rng);
  for (double& w : p.W_dec.flat()) w = normal(rng);
  if (tied) {
    normalize_rows(p.W_dec);
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < D; ++j) p.W_enc(i, j) = p.W_dec(j, i);
  }
  return p;
}


bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace

TrainResult train(const MatrixF& activations, const TrainConfig& config) {
  validate(config);
  const std::size_t n = activations.rows();
  const std::size_t d = activations.cols();
  if (n == 0) throw ValidationError("train: zero samples");
  if (d == 0) throw ValidationError("train: zero-dimensional activations");

  MatrixD data = to_double_rows(activations);
  std::optional<Standardizer> standardizer;
  if (config.standardize) {
    standardizer = Standardizer::fit(data);
    standardizer->apply(data);
  }

  const std::uint64_t total = config.total_steps ? config.total_steps : default_total_steps(n, config.batch_size);
  const auto warmup = static_cast<std::uint64_t>(std::floor(config.warmup_fraction * static_cast<double>(total)));
  const optim::WarmupCosine schedule(config.learning_rate, total, std::min(warmup, total - 1));

  std::mt19937_64 rng(config.seed);
  SaeParams params = init_params(d, config.hidden_dim, config.tied_init, rng);
  if (config.unit_norm_decoder) normalize_rows(params.W_dec);
  SaeGradients grads = params;
  optim::Adam adam_w_enc(params.W_enc.size(), config.adam);
  optim::Adam adam_b_enc(params.b_enc.size(), config.adam);
  optim::Adam adam_w_dec(params.W_dec.size(), config.adam);
  optim::Adam adam_b_dec(params.b_dec.size(), config.adam);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::size_t cursor = n;  // forces a shuffle before the first batch

  const SparsityPenalty penalty{config.penalty, config.lambda, config.ste_bandwidth};
  TrainResult result;
  result.log.reserve(total);
  MatrixD batch;
  for (std::uint64_t step = 0; step < total; ++step) {
    if (cursor >= n) {
      std::shuffle(order.begin(), order.end(), rng);
      cursor = 0;
    }
    const std::size_t rows = std::min(config.batch_size, n - cursor);
    if (batch.rows() != rows) batch = MatrixD(rows, d);
    for (std::size_t r = 0; r < rows; ++r) {
      const auto src = data.row(order[cursor + r]);
      std::copy(src.begin(), src.end(), batch.row(r).begin());
    }
    cursor += rows;

    const LossReport report = loss(params, batch, penalty, &grads);
    if (!std::isfinite(report.total) || !all_finite(grads.W_enc.flat()) || !all_finite(grads.W_dec.flat())) {
      throw NumericError("train: non-finite loss or gradient at step " + std::to_string(step));
    }
    const double lr = schedule.at(step);
    adam_w_enc.step(params.W_enc.flat(), grads.W_enc.flat(), lr);
    adam_b_enc.step(params.b_enc, grads.b_enc, lr);
    adam_w_dec.step(params.W_dec.flat(), grads.W_dec.flat(), lr);
    adam_b_dec.step(params.b_dec, grads.b_dec, lr);
    if (config.unit_norm_decoder) normalize_rows(params.W_dec);

    result.log.push_back({step, lr, report.total, report.reconstruction_mse, report.sparsity_penalty,
                          report.mean_l0});
  }

  if (standardizer) standardizer->fold(params);
  result.model = params.to_model(config.lambda, total);
  rvec::validate(result.model);
  return result;
}

TrainResult train(const ActivationSet& activations, const TrainConfig& config) {
  return train(activations.data, config);
}

void write_loss_csv(const std::filesystem::path& file, std::span<const LossRecord> log) {
  std::ofstream out(file, std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + file.string());
  out << "step,lr,total,mse,l1,l0\n" << std::setprecision(10);
  for (const auto& r : log) {
    out << r.step << ',' << r.lr << ',' << r.total << ',' << r.mse << ',' << r.l1 << ',' << r.l0 << '\n';
  }
  if (!out) throw IoError("write failed: " + file.string());
}

}  // namespace rvec::sae
