#include "rvec/geometry.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "rvec/diag.hpp"
#include "rvec/error.hpp"
#include "rvec/kernels.hpp"

namespace rvec::geometry {

namespace {

MatrixD unit_rows(const MatrixD& x, const char* who) {
  MatrixD out = x;
  for (std::size_t r = 0; r < x.rows(); ++r) {
    double s = 0.0;
    for (double v : x.row(r)) s += v * v;
    const double norm = std::sqrt(s);
    if (!(norm > 0.0)) throw ValidationError(std::string(who) + ": zero vector at row " + std::to_string(r));
    for (double& v : out.row(r)) v /= norm;
  }
  return out;
}

}  // namespace

double incoherence(const MatrixD& atoms) {
  if (atoms.rows() < 2) throw ValidationError("incoherence: need at least 2 atoms");
  const MatrixD dist = kernels::cosine_distances(unit_rows(atoms, "incoherence"));
  double mu = 0.0;
  for (std::size_t i = 0; i < dist.rows(); ++i)
    for (std::size_t j = i + 1; j < dist.cols(); ++j) mu = std::max(mu, std::abs(1.0 - dist(i, j)));
  return std::min(mu, 1.0);
}

std::vector<ChannelActivity> top_active_channels(const MatrixD& latents, std::span<const std::string> labels,
                                                 std::string_view target, std::size_t k) {
  if (labels.size() != latents.rows()) {
    throw DimensionError("top_active_channels: labels length does not match latent rows");
  }
  if (k == 0) throw ValidationError("top_active_channels: k must be positive");
  const std::size_t D = latents.cols();
  if (k > D) {
    diag::warn("topk_clamped", "k=" + std::to_string(k) + " exceeds D=" + std::to_string(D) + "; clamped");
    k = D;
  }
  std::vector<double> activity(D, 0.0);
  bool any = false;
  for (std::size_t r = 0; r < latents.rows(); ++r) {
    if (labels[r] != target) continue;
    any = true;
    const auto row = latents.row(r);
    for (std::size_t c = 0; c < D; ++c) activity[c] = std::max(activity[c], std::abs(row[c]));
  }
  if (!any) throw ValidationError("top_active_channels: no rows labeled '" + std::string(target) + "'");

  std::vector<std::size_t> order(D);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return activity[a] > activity[b]; });
  std::vector<ChannelActivity> out;
  out.reserve(k);
  for (std::size_t i = 0; i < k; ++i) out.push_back({order[i], activity[order[i]], std::string(target)});
  return out;
}

Silhouette silhouette_cosine(const MatrixD& vectors, std::span<const std::string> cluster_labels) {
  const std::size_t n = vectors.rows();
  if (cluster_labels.size() != n) throw DimensionError("silhouette_cosine: labels length does not match rows");
  if (n < 3) throw ValidationError("silhouette_cosine: need at least 3 points");

  std::map<std::string, std::size_t> ids;
  for (const auto& l : cluster_labels) ids.emplace(l, ids.size());
  if (ids.size() < 2) throw ValidationError("silhouette_cosine: need at least 2 clusters");
  std::vector<std::size_t> cluster(n);
  std::vector<std::size_t> sizes(ids.size(), 0);
  for (std::size_t i = 0; i < n; ++i) {
    cluster[i] = ids.at(cluster_labels[i]);
    ++sizes[cluster[i]];
  }

  const MatrixD sums = kernels::cluster_distance_sums(unit_rows(vectors, "silhouette_cosine"), cluster, ids.size());
  Silhouette s;
  s.per_point.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t own = cluster[i];
    if (sizes[own] == 1) {
      s.per_point[i] = 0.0;
      continue;
    }
    const double a = sums(i, own) / static_cast<double>(sizes[own] - 1);
    double b = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < sizes.size(); ++c) {
      if (c != own) b = std::min(b, sums(i, c) / static_cast<double>(sizes[c]));
    }
    const double denom = std::max(a, b);
    s.per_point[i] = denom > 0.0 ? std::clamp((b - a) / denom, -1.0, 1.0) : 0.0;
  }
  s.mean = std::accumulate(s.per_point.begin(), s.per_point.end(), 0.0) / static_cast<double>(n);
  return s;
}

std::vector<double> normalize_across_layers(std::span<const double> scores) {
  if (scores.empty()) throw ValidationError("normalize_across_layers: empty input");
  const auto [lo, hi] = std::minmax_element(scores.begin(), scores.end());
  const double min = *lo, max = *hi;
  if (!(max > min)) throw ValidationError("normalize_across_layers: all scores are equal");
  std::vector<double> out(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    out[i] = scores[i] == max ? 1.0 : (scores[i] - min) / (max - min);
  }
  return out;
}

Embedding2D embed_2d(const MatrixD& vectors) {
  const std::size_t n = vectors.rows();
  const std::size_t d = vectors.cols();
  if (n < 3) throw ValidationError("embed_2d: need at least 3 points");

  Embedding2D out;
  out.normalized = unit_rows(vectors, "embed_2d");
  Eigen::MatrixXd x(n, d);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < d; ++c) x(r, c) = out.normalized(r, c);
  x.rowwise() -= x.colwise().mean();

  // Principal coordinates via the smaller of the Gram and covariance problems.
  Eigen::MatrixXd coords = Eigen::MatrixXd::Zero(n, 2);
  if (n <= d) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(x * x.transpose());
    for (int a = 0; a < 2 && a < static_cast<int>(n); ++a) {
      const Eigen::Index col = static_cast<Eigen::Index>(n) - 1 - a;
      const double lambda = eig.eigenvalues()(col);
      if (lambda > 1e-12) coords.col(a) = eig.eigenvectors().col(col) * std::sqrt(lambda);
    }
  } else {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(x.transpose() * x);
    for (int a = 0; a < 2 && a < static_cast<int>(d); ++a) {
      const Eigen::Index col = static_cast<Eigen::Index>(d) - 1 - a;
      if (eig.eigenvalues()(col) > 1e-12) coords.col(a) = x * eig.eigenvectors().col(col);
    }
  }

  out.coords = MatrixD(n, 2);
  for (int a = 0; a < 2; ++a) {
    Eigen::Index arg = 0;
    coords.col(a).cwiseAbs().maxCoeff(&arg);
    const double sign = coords(arg, a) < 0.0 ? -1.0 : 1.0;
    for (std::size_t r = 0; r < n; ++r) out.coords(r, static_cast<std::size_t>(a)) = sign * coords(static_cast<Eigen::Index>(r), a);
  }
  return out;
}

std::vector<std::string> length_split_labels(std::span<const StepRecord> records, LengthThresholds t) {
  std::vector<std::string> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    if (r.response_length_tokens < t.short_max) {
      out.emplace_back("short");
    } else if (r.response_length_tokens > t.long_min) {
      out.emplace_back("long");
    } else {
      out.emplace_back("excluded");
    }
  }
  return out;
}

std::vector<std::string> behavior_labels(std::span<const StepRecord> records) {
  std::vector<std::string> out;
  out.reserve(records.size());
  for (const auto& r : records) out.emplace_back(to_string(r.label));
  return out;
}

}  // namespace rvec::geometry
