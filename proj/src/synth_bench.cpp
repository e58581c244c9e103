#include "rvec/synth_bench.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "rvec/assignment.hpp"
#include "rvec/diag.hpp"
#include "rvec/geometry.hpp"
#include "rvec/kernels.hpp"

namespace rvec::synth {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream) {
  return splitmix64(splitmix64(seed) ^ (stream * 0xD1B54A32D192ED03ull));
}

void normalize(std::span<double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  const double n = std::sqrt(s);
  for (double& x : v) x /= n;
}

MatrixD gaussian_atoms(std::size_t m, std::size_t d, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  MatrixD atoms(m, d);
  for (std::size_t i = 0; i < m; ++i) {
    do {
      for (double& x : atoms.row(i)) x = normal(rng);
    } while (std::all_of(atoms.row(i).begin(), atoms.row(i).end(), [](double x) { return x == 0.0; }));
    normalize(atoms.row(i));
  }
  return atoms;
}

// Modified Gram-Schmidt on the rows.
void orthonormalize(MatrixD& atoms) {
  for (std::size_t i = 0; i < atoms.rows(); ++i) {
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t j = 0; j < i; ++j) {
        double dot = 0.0;
        for (std::size_t c = 0; c < atoms.cols(); ++c) dot += atoms(i, c) * atoms(j, c);
        for (std::size_t c = 0; c < atoms.cols(); ++c) atoms(i, c) -= dot * atoms(j, c);
      }
    }
    normalize(atoms.row(i));
  }
}

}  // namespace

void validate(const SynthConfig& c) {
  if (c.d == 0 || c.m == 0 || c.k == 0) throw ValidationError("synth: d, m, k must be positive");
  if (c.k > c.m) throw ValidationError("synth: k must not exceed m");
  if (!(c.alpha_min > 0.0)) throw ValidationError("synth: alpha_min must be positive");
  if (!(c.alpha_max_ratio >= 1.0)) throw ValidationError("synth: alpha_max_ratio must be >= 1");
  if (!(c.noise_bound >= 0.0)) throw ValidationError("synth: noise_bound must be nonnegative");
  if (c.n_samples == 0) throw ValidationError("synth: n_samples must be positive");
  if (!(c.target_mu > 0.0 && c.target_mu < 1.0)) throw ValidationError("synth: target_mu must lie in (0, 1)");
  if (c.max_attempts == 0) throw ValidationError("synth: max_attempts must be positive");
  if (c.hidden_dim != 0 && c.hidden_dim < c.m) throw ValidationError("synth: hidden_dim must be >= m");
}

Dictionary generate_dictionary(const SynthConfig& config) {
  validate(config);
  std::mt19937_64 rng(stream_seed(config.seed, 0));
  Dictionary best;
  best.mu = std::numeric_limits<double>::infinity();
  for (unsigned attempt = 1; attempt <= config.max_attempts; ++attempt) {
    MatrixD atoms = gaussian_atoms(config.m, config.d, rng);
    if (config.orthogonalize && config.m <= config.d) orthonormalize(atoms);
    const double mu = config.m >= 2 ? geometry::incoherence(atoms) : 0.0;
    if (mu < best.mu) best = {std::move(atoms), mu, attempt};
    if (best.mu <= config.target_mu) return best;
  }
  throw CoherenceError("generate_dictionary: target_mu " + std::to_string(config.target_mu) +
                           " not reached after " + std::to_string(config.max_attempts) +
                           " attempts; best mu " + std::to_string(best.mu),
                       best.mu);
}

SynthData generate_samples(const MatrixD& atoms, const SynthConfig& config) {
  validate(config);
  if (atoms.rows() != config.m || atoms.cols() != config.d) {
    throw DimensionError("generate_samples: dictionary must be m x d");
  }
  const std::size_t n = config.n_samples, d = config.d, m = config.m, k = config.k;
  SynthData out;
  out.set.model_name = "synthetic";
  out.set.layer_index = 0;
  out.set.data = MatrixF(n, d);
  out.set.records.resize(n);
  out.codes.resize(n);
  const double a_lo = config.alpha_min;
  const double a_hi = config.alpha_min * config.alpha_max_ratio;

  const auto sn = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel
  {
    std::vector<std::size_t> pool(m);
    std::vector<double> h(d), noise(d);
#pragma omp for schedule(static)
    for (std::ptrdiff_t si = 0; si < sn; ++si) {
      const auto i = static_cast<std::size_t>(si);
      std::mt19937_64 rng(stream_seed(config.seed, i + 1));
      std::uniform_real_distribution<double> unit(0.0, 1.0);
      std::normal_distribution<double> normal(0.0, 1.0);

      // Partial Fisher-Yates picks a uniform k-subset.
      std::iota(pool.begin(), pool.end(), std::size_t{0});
      SparseCode& code = out.codes[i];
      code.support.resize(k);
      code.coefficients.resize(k);
      for (std::size_t j = 0; j < k; ++j) {
        std::uniform_int_distribution<std::size_t> pick(j, m - 1);
        std::swap(pool[j], pool[pick(rng)]);
        code.support[j] = pool[j];
        const double mag = a_hi > a_lo ? a_lo + (a_hi - a_lo) * unit(rng) : a_lo;
        code.coefficients[j] = config.signed_coefficients && unit(rng) < 0.5 ? -mag : mag;
      }
      std::sort(code.support.begin(), code.support.end());

      std::fill(h.begin(), h.end(), 0.0);
      for (std::size_t j = 0; j < k; ++j) {
        const auto atom = atoms.row(code.support[j]);
        for (std::size_t c = 0; c < d; ++c) h[c] += code.coefficients[j] * atom[c];
      }
      if (config.noise_bound > 0.0) {
        // Uniform in the ball: Gaussian direction, radius R * U^(1/d).
        for (double& x : noise) x = normal(rng);
        normalize(noise);
        const double radius = config.noise_bound * std::pow(unit(rng), 1.0 / static_cast<double>(d));
        for (std::size_t c = 0; c < d; ++c) h[c] += radius * noise[c];
      }
      auto row = out.set.data.row(i);
      for (std::size_t c = 0; c < d; ++c) row[c] = static_cast<float>(h[c]);
      out.set.records[i] = {"synth-" + std::to_string(i), 0, "", Label::unlabeled, 0};
    }
  }
  return out;
}

MatchResult match_dictionaries(const MatrixD& true_atoms, const MatrixD& learned_rows) {
  if (true_atoms.cols() != learned_rows.cols()) {
    throw DimensionError("match_dictionaries: atom dimensions differ");
  }
  std::vector<std::size_t> usable;
  std::vector<double> learned_norm(learned_rows.rows());
  for (std::size_t j = 0; j < learned_rows.rows(); ++j) {
    double s = 0.0;
    for (double v : learned_rows.row(j)) s += v * v;
    learned_norm[j] = std::sqrt(s);
    if (learned_norm[j] > 0.0) {
      usable.push_back(j);
    } else {
      diag::warn("zero_learned_row", "learned row " + std::to_string(j) + " has zero norm; excluded");
    }
  }
  const std::size_t m = true_atoms.rows();
  if (usable.size() < m) {
    throw ValidationError("match_dictionaries: fewer usable learned rows (" + std::to_string(usable.size()) +
                          ") than true atoms (" + std::to_string(m) + ")");
  }

  MatrixD abs_cos(m, usable.size());
  for (std::size_t i = 0; i < m; ++i) {
    const auto t = true_atoms.row(i);
    double tn = 0.0;
    for (double v : t) tn += v * v;
    tn = std::sqrt(tn);
    if (!(tn > 0.0)) throw ValidationError("match_dictionaries: zero true atom " + std::to_string(i));
    for (std::size_t u = 0; u < usable.size(); ++u) {
      const auto l = learned_rows.row(usable[u]);
      double dot = 0.0;
      for (std::size_t c = 0; c < t.size(); ++c) dot += t[c] * l[c];
      abs_cos(i, u) = std::min(1.0, std::abs(dot) / (tn * learned_norm[usable[u]]));
    }
  }
  MatrixD cost(m, usable.size());
  for (std::size_t i = 0; i < cost.size(); ++i) cost.data()[i] = -abs_cos.data()[i];
  const auto pick = solve_assignment(cost);

  MatchResult r;
  r.assignment.resize(m);
  r.scores.resize(m);
  for (std::size_t i = 0; i < m; ++i) {
    r.assignment[i] = usable[pick[i]];
    r.scores[i] = abs_cos(i, pick[i]);
  }
  return r;
}

RecoveryResult run_recovery_experiment(const SynthConfig& config) {
  validate(config);
  RecoveryResult result;
  result.dictionary = generate_dictionary(config);
  const SynthData data = generate_samples(result.dictionary.atoms, config);

  sae::TrainConfig train = config.train;
  train.hidden_dim = config.hidden_dim ? config.hidden_dim : config.m;
  train.seed = config.seed;
  auto trained = sae::train(data.set, train);
  result.model = std::move(trained.model);
  result.log = std::move(trained.log);

  const MatrixD learned = matrix_cast<double>(result.model.W_dec);
  const MatchResult match = match_dictionaries(result.dictionary.atoms, learned);

  RecoveryReport& rep = result.report;
  rep.scores = match.scores;
  rep.mean_alignment =
      std::accumulate(match.scores.begin(), match.scores.end(), 0.0) / static_cast<double>(match.scores.size());
  rep.fraction_above_0_9 =
      static_cast<double>(std::count_if(match.scores.begin(), match.scores.end(), [](double s) { return s >= 0.9; })) /
      static_cast<double>(match.scores.size());
  rep.mu_true = result.dictionary.mu;
  rep.mu_measured = learned.rows() >= 2 ? geometry::incoherence(learned) : 0.0;

  const MatrixD latents = sae::latent_features(result.model, data.set);
  MatrixD recon;
  kernels::matmul_bias(latents, learned, vector_cast<double>(std::span<const float>(result.model.b_dec)), recon);
  double err = 0.0, energy = 0.0;
  std::size_t active = 0;
  for (std::size_t r = 0; r < recon.rows(); ++r) {
    const auto h = data.set.data.row(r);
    for (std::size_t c = 0; c < recon.cols(); ++c) {
      const double diff = recon(r, c) - static_cast<double>(h[c]);
      err += diff * diff;
      energy += static_cast<double>(h[c]) * static_cast<double>(h[c]);
    }
    for (double z : latents.row(r)) active += z > sae::kActiveThreshold;
  }
  rep.recon_error = energy > 0.0 ? err / energy : 0.0;
  rep.mean_l0 = static_cast<double>(active) / static_cast<double>(latents.rows());
  return result;
}

}  // namespace rvec::synth
