// Serial textbook loops. No skipping, no transposes, no OpenMP.
#include <algorithm>
#include <cmath>
#include <vector>

#include "kernels_shape.hpp"
#include "rvec/kernels.hpp"

namespace rvec::kernels::reference {

using detail::require;
using detail::shape;

void matmul_bias(const MatrixD& a, const MatrixD& b, std::span<const double> bias, MatrixD& out) {
  require(a.cols() == b.rows(), "matmul_bias", shape(a) + " * " + shape(b));
  require(bias.empty() || bias.size() == b.cols(), "matmul_bias", "bias length");
  detail::resize_if_needed(out, a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < a.cols(); ++p) s += a(i, p) * b(p, j);
      out(i, j) = s + (bias.empty() ? 0.0 : bias[j]);
    }
  }
}

void matmul_tn(const MatrixD& a, const MatrixD& g, MatrixD& out) {
  require(a.rows() == g.rows(), "matmul_tn", shape(a) + "^T * " + shape(g));
  detail::resize_if_needed(out, a.cols(), g.cols());
  for (std::size_t i = 0; i < a.cols(); ++i) {
    for (std::size_t j = 0; j < g.cols(); ++j) {
      double s = 0.0;
      for (std::size_t r = 0; r < a.rows(); ++r) s += a(r, i) * g(r, j);
      out(i, j) = s;
    }
  }
}

void matmul_nt(const MatrixD& g, const MatrixD& b, MatrixD& out) {
  require(g.cols() == b.cols(), "matmul_nt", shape(g) + " * " + shape(b) + "^T");
  detail::resize_if_needed(out, g.rows(), b.rows());
  for (std::size_t i = 0; i < g.rows(); ++i) {
    for (std::size_t j = 0; j < b.rows(); ++j) {
      double s = 0.0;
      for (std::size_t c = 0; c < g.cols(); ++c) s += g(i, c) * b(j, c);
      out(i, j) = s;
    }
  }
}

void column_sums(const MatrixD& a, std::span<double> out) {
  require(out.size() == a.cols(), "column_sums", "output length");
  for (std::size_t j = 0; j < a.cols(); ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i) s += a(i, j);
    out[j] = s;
  }
}

MatrixD cosine_distances(const MatrixD& x) {
  const std::size_t n = x.rows();
  MatrixD out(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double dot = 0.0, ni = 0.0, nj = 0.0;
      for (std::size_t c = 0; c < x.cols(); ++c) {
        dot += x(i, c) * x(j, c);
        ni += x(i, c) * x(i, c);
        nj += x(j, c) * x(j, c);
      }
      require(ni > 0.0 && nj > 0.0, "cosine_distances", "zero vector");
      out(i, j) = i == j ? 0.0 : 1.0 - dot / std::sqrt(ni * nj);
    }
  }
  return out;
}

void softmax_entropy_rows(const MatrixD& logits, std::span<double> entropy, MatrixD* grad) {
  require(entropy.size() == logits.rows(), "softmax_entropy_rows", "entropy length");
  if (grad) detail::resize_if_needed(*grad, logits.rows(), logits.cols());
  const std::size_t v = logits.cols();
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    double mx = logits(i, 0);
    for (std::size_t k = 1; k < v; ++k) mx = std::max(mx, logits(i, k));
    std::vector<double> p(v);
    double z = 0.0;
    for (std::size_t k = 0; k < v; ++k) z += (p[k] = std::exp(logits(i, k) - mx));
    double h = 0.0;
    for (std::size_t k = 0; k < v; ++k) {
      p[k] /= z;
      if (p[k] > 0.0) h -= p[k] * std::log(p[k]);
    }
    entropy[i] = h;
    if (grad) {
      for (std::size_t k = 0; k < v; ++k) {
        const double lp = p[k] > 0.0 ? std::log(p[k]) : 0.0;
        (*grad)(i, k) = -p[k] * (lp + h);
      }
    }
  }
}


MatrixD cluster_distance_sums(const MatrixD& unit, std::span<const std::size_t> cluster,
                              std::size_t n_clusters) {
  detail::require(cluster.size() == unit.rows(), "cluster_distance_sums", "cluster length");
  const MatrixD dist = cosine_distances(unit);
  MatrixD out(unit.rows(), n_clusters);
  for (std::size_t i = 0; i < unit.rows(); ++i)
    for (std::size_t j = 0; j < unit.rows(); ++j)
      if (j != i) out(i, cluster[j]) += dist(i, j);
  return out;
}

}  // namespace rvec::kernels::reference
