#include "rvec/confidence.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "json.hpp"
#include "rvec/error.hpp"
#include "rvec/kernels.hpp"

namespace rvec::confidence {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json read_json(const fs::path& file) {
  if (!fs::is_regular_file(file)) throw IoError("missing file: " + file.string());
  try {
    return json::parse(io::read_text(file));
  } catch (const json::exception& e) {
    throw FormatError(file.string() + ": " + e.what());
  }
}

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

MatrixD to_double(const MatrixF& m) { return matrix_cast<double>(m); }

struct Minibatches {
  const MatrixD& data;
  std::size_t batch;
  std::mt19937_64 rng;
  std::vector<std::size_t> order;
  std::size_t cursor;
  MatrixD out;

  Minibatches(const MatrixD& d, std::size_t b, std::uint64_t seed)
      : data(d), batch(std::min(b, d.rows())), rng(seed), order(d.rows()), cursor(d.rows()) {
    std::iota(order.begin(), order.end(), std::size_t{0});
  }

  const MatrixD& next() {
    const std::size_t n = data.rows();
    if (cursor >= n) {
      std::shuffle(order.begin(), order.end(), rng);
      cursor = 0;
    }
    const std::size_t rows = std::min(batch, n - cursor);
    if (out.rows() != rows) out = MatrixD(rows, data.cols());
    for (std::size_t r = 0; r < rows; ++r) {
      const auto src = data.row(order[cursor + r]);
      std::copy(src.begin(), src.end(), out.row(r).begin());
    }
    cursor += rows;
    return out;
  }
};

// Adam over theta for the shifted-activation entropy objective.
std::vector<double> minimise(const ReadoutHead& head, const MatrixD& basis, const MatrixD& data,
                             const OptimizeConfig& config, std::vector<double>* trajectory, const char* who) {
  const std::size_t K = basis.rows();
  std::vector<double> theta(K, 0.0), grad(K, 0.0);
  if (trajectory) {
    trajectory->clear();
    trajectory->reserve(config.iters);
  }
  if (config.iters == 0) return theta;
  const optim::WarmupCosine schedule(config.learning_rate, config.iters, 0);
  optim::Adam adam(K, config.adam);
  Minibatches batches(data, config.batch_size, config.seed);
  for (std::uint64_t it = 0; it < config.iters; ++it) {
    const double value = entropy_objective(head, basis, theta, batches.next(), grad);
    if (!std::isfinite(value) || !all_finite(grad)) {
      throw NumericError(std::string(who) + ": non-finite objective or gradient at iteration " + std::to_string(it));
    }
    if (trajectory) trajectory->push_back(value);
    adam.step(theta, grad, schedule.at(it));
  }
  return theta;
}

void check_inputs(const ReadoutHead& head, const ActivationSet& activations, const OptimizeConfig& config) {
  validate(head);
  validate(config);
  if (activations.count() == 0) throw ValidationError("activations: must be nonempty");
  if (activations.dim() != head.d) {
    throw DimensionError("head input dim " + std::to_string(head.d) + " does not match activation dim " +
                         std::to_string(activations.dim()));
  }
}

}  // namespace

void validate(const ReadoutHead& head) {
  if (head.d == 0) throw ValidationError("d: must be positive");
  if (head.vocab < 2) throw ValidationError("vocab: must be at least 2");
  if (head.W_out.rows() != head.d || head.W_out.cols() != head.vocab) {
    throw ValidationError("W_out: shape must be d x vocab");
  }
  if (head.b_out.size() != head.vocab) throw ValidationError("b_out: length must be vocab");
  for (float x : head.W_out.flat())
    if (!std::isfinite(x)) throw ValidationError("W_out: non-finite entry");
  for (float x : head.b_out)
    if (!std::isfinite(x)) throw ValidationError("b_out: non-finite entry");
}

void validate(const ScoreVector& scores) {
  if (scores.S.empty()) throw ValidationError("S: must be nonempty");
  for (float x : scores.S)
    if (!std::isfinite(x)) throw ValidationError("S: non-finite entry");
  if (!std::isfinite(scores.final_entropy)) throw ValidationError("final_entropy: must be finite");
}

void validate(const OptimizeConfig& c) {
  if (c.batch_size == 0) throw ValidationError("batch_size: must be positive");
  if (!(c.learning_rate >= 0.0) || !std::isfinite(c.learning_rate)) {
    throw ValidationError("learning_rate: must be finite and >= 0");
  }
}

double entropy(std::span<const double> p) {
  if (p.empty()) throw ValidationError("entropy: empty probability vector");
  double sum = 0.0;
  for (double x : p) {
    if (!(x >= 0.0) || !std::isfinite(x)) throw ValidationError("entropy: entries must be finite and >= 0");
    sum += x;
  }
  if (std::abs(sum - 1.0) > 1e-6) throw ValidationError("entropy: entries sum to " + std::to_string(sum) + ", not 1");
  double h = 0.0;
  for (double x : p)
    if (x > 0.0) h -= x * std::log(x);
  return std::max(0.0, h);
}

std::vector<double> predict(const ReadoutHead& head, std::span<const double> h) {
  validate(head);
  if (h.size() != head.d) {
    throw DimensionError("predict: h has length " + std::to_string(h.size()) + ", head expects " +
                         std::to_string(head.d));
  }
  std::vector<double> logits(head.b_out.begin(), head.b_out.end());
  for (std::size_t i = 0; i < head.d; ++i) {
    const auto w = head.W_out.row(i);
    for (std::size_t k = 0; k < head.vocab; ++k) logits[k] += h[i] * static_cast<double>(w[k]);
  }
  const double mx = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (double& l : logits) {
    l = std::exp(l - mx);
    z += l;
  }
  for (double& l : logits) l /= z;
  return logits;
}

double entropy_objective(const ReadoutHead& head, const MatrixD& basis, std::span<const double> theta,
                         const MatrixD& batch, std::span<double> grad) {
  const std::size_t d = head.d, V = head.vocab, K = basis.rows(), B = batch.rows();
  if (basis.cols() != d || batch.cols() != d) throw DimensionError("entropy_objective: dimension mismatch");
  if (theta.size() != K) throw DimensionError("entropy_objective: theta length must equal basis rows");
  if (!grad.empty() && grad.size() != K) throw DimensionError("entropy_objective: grad length must equal basis rows");
  if (B == 0) throw ValidationError("entropy_objective: empty batch");

  std::vector<double> offset(d, 0.0);
  for (std::size_t j = 0; j < K; ++j) {
    if (theta[j] == 0.0) continue;
    const auto row = basis.row(j);
    for (std::size_t i = 0; i < d; ++i) offset[i] += theta[j] * row[i];
  }
  MatrixD shifted = batch;
  for (std::size_t r = 0; r < B; ++r) {
    auto row = shifted.row(r);
    for (std::size_t i = 0; i < d; ++i) row[i] += offset[i];
  }
  const MatrixD W = to_double(head.W_out);
  const auto bias = vector_cast<double>(std::span<const float>(head.b_out));
  MatrixD logits;
  kernels::matmul_bias(shifted, W, bias, logits);

  std::vector<double> ent(B);
  MatrixD g_logits;
  kernels::softmax_entropy_rows(logits, ent, grad.empty() ? nullptr : &g_logits);
  double mean = 0.0;
  for (double e : ent) mean += e;
  mean /= static_cast<double>(B);

  if (!grad.empty()) {
    // The shift is shared by every row, so only the column mean of dH/dlogits matters.
    std::vector<double> g_mean(V, 0.0);
    kernels::column_sums(g_logits, g_mean);
    for (double& g : g_mean) g /= static_cast<double>(B);
    std::vector<double> g_offset(d, 0.0);
    for (std::size_t i = 0; i < d; ++i) {
      const auto w = W.row(i);
      double s = 0.0;
      for (std::size_t k = 0; k < V; ++k) s += w[k] * g_mean[k];
      g_offset[i] = s;
    }
    for (std::size_t j = 0; j < K; ++j) {
      const auto row = basis.row(j);
      double s = 0.0;
      for (std::size_t i = 0; i < d; ++i) s += row[i] * g_offset[i];
      grad[j] = s;
    }
  }
  return mean;
}

ScoreVector optimize_scores(const ReadoutHead& head, const MatrixF& W_dec, const ActivationSet& activations,
                            const OptimizeConfig& config, std::vector<double>* trajectory) {
  check_inputs(head, activations, config);
  if (W_dec.cols() != head.d || W_dec.rows() == 0) throw DimensionError("optimize_scores: W_dec must be D x d");
  const MatrixD basis = to_double(W_dec);
  const MatrixD data = to_double(activations.data);
  const auto theta = minimise(head, basis, data, config, trajectory, "optimize_scores");

  ScoreVector out;
  out.S.assign(theta.begin(), theta.end());
  out.trained_iters = config.iters;
  const auto stored = vector_cast<double>(std::span<const float>(out.S));
  out.final_entropy = entropy_objective(head, basis, stored, data);
  return out;
}

std::vector<std::size_t> top_scoring_columns(const ScoreVector& scores, std::size_t k) {
  const std::size_t D = scores.S.size();
  if (k == 0) throw ValidationError("top_scoring_columns: k must be positive");
  if (k > D) {
    throw ValidationError("top_scoring_columns: k = " + std::to_string(k) + " exceeds D = " + std::to_string(D));
  }
  std::vector<std::size_t> idx(D);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return std::abs(scores.S[a]) > std::abs(scores.S[b]); });
  idx.resize(k);
  return idx;
}

std::vector<double> fit_coefficients(const ReadoutHead& head, std::span<const steering::SteeringVector> vectors,
                                     const ActivationSet& activations, const OptimizeConfig& config,
                                     std::vector<double>* trajectory) {
  check_inputs(head, activations, config);
  if (vectors.empty()) throw ValidationError("fit_coefficients: need at least one vector");
  MatrixD basis(vectors.size(), head.d);
  for (std::size_t j = 0; j < vectors.size(); ++j) {
    if (vectors[j].direction.size() != head.d) {
      throw DimensionError("fit_coefficients: vector " + std::to_string(j) + " has length " +
                           std::to_string(vectors[j].direction.size()) + ", head expects " + std::to_string(head.d));
    }
    for (std::size_t i = 0; i < head.d; ++i) basis(j, i) = vectors[j].direction[i];
  }
  return minimise(head, basis, to_double(activations.data), config, trajectory, "fit_coefficients");
}

void save_head(const ReadoutHead& head, const fs::path& dir) {
  validate(head);
  fs::create_directories(dir);
  json meta = {{"kind", "linear"}, {"d", head.d}, {"vocab", head.vocab}};
  io::write_text(dir / "head.json", meta.dump(2) + "\n");
  std::vector<float> payload(head.W_out.flat().begin(), head.W_out.flat().end());
  payload.insert(payload.end(), head.b_out.begin(), head.b_out.end());
  io::write_f32(dir / "head.bin", payload);
}

ReadoutHead load_head(const fs::path& dir) {
  const json meta = read_json(dir / "head.json");
  ReadoutHead head;
  try {
    if (meta.at("kind") != "linear") throw FormatError("head.json: kind must be \"linear\"");
    head.d = meta.at("d").get<std::size_t>();
    head.vocab = meta.at("vocab").get<std::size_t>();
  } catch (const json::exception& e) {
    throw FormatError(std::string("head.json: ") + e.what());
  }
  auto payload = io::read_f32(dir / "head.bin", head.d * head.vocab + head.vocab);
  const auto split = payload.begin() + static_cast<std::ptrdiff_t>(head.d * head.vocab);
  head.b_out.assign(split, payload.end());
  payload.erase(split, payload.end());
  head.W_out = MatrixF(head.d, head.vocab, std::move(payload));
  try {
    validate(head);
  } catch (const ValidationError& e) {
    throw FormatError(dir.string() + ": " + e.what());
  }
  return head;
}

void save_scores(const ScoreVector& scores, const fs::path& dir) {
  validate(scores);
  fs::create_directories(dir);
  json meta = {{"D", scores.S.size()}, {"trained_iters", scores.trained_iters}, {"final_entropy", scores.final_entropy}};
  io::write_text(dir / "scores.json", meta.dump(2) + "\n");
  io::write_f32(dir / "scores.bin", scores.S);
}

ScoreVector load_scores(const fs::path& dir) {
  const json meta = read_json(dir / "scores.json");
  ScoreVector s;
  std::size_t D = 0;
  try {
    D = meta.at("D").get<std::size_t>();
    s.trained_iters = meta.at("trained_iters").get<std::uint64_t>();
    s.final_entropy = meta.at("final_entropy").get<double>();
  } catch (const json::exception& e) {
    throw FormatError(std::string("scores.json: ") + e.what());
  }
  s.S = io::read_f32(dir / "scores.bin", D);
  try {
    validate(s);
  } catch (const ValidationError& e) {
    throw FormatError(dir.string() + ": " + e.what());
  }
  return s;
}

}  // namespace rvec::confidence
