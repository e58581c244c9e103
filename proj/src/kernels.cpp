#include "rvec/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "kernels_shape.hpp"

namespace rvec::kernels {

using detail::require;
using detail::shape;

void matmul_bias(const MatrixD& a, const MatrixD& b, std::span<const double> bias, MatrixD& out) {
  require(a.cols() == b.rows(), "matmul_bias", shape(a) + " * " + shape(b));
  require(bias.empty() || bias.size() == b.cols(), "matmul_bias", "bias length");
  detail::resize_if_needed(out, a.rows(), b.cols());
  const auto n = static_cast<std::ptrdiff_t>(a.rows());
  const std::size_t inner = a.cols();
  const std::size_t m = b.cols();

#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    double* o = out.row(static_cast<std::size_t>(i)).data();
    if (bias.empty()) {
      std::fill(o, o + m, 0.0);
    } else {
      std::copy(bias.begin(), bias.end(), o);
    }
    const double* ar = a.row(static_cast<std::size_t>(i)).data();
    for (std::size_t p = 0; p < inner; ++p) {
      const double s = ar[p];
      if (s == 0.0) continue;
      const double* br = b.row(p).data();
      for (std::size_t j = 0; j < m; ++j) o[j] += s * br[j];
    }
  }
}

void matmul_tn(const MatrixD& a, const MatrixD& g, MatrixD& out) {
  require(a.rows() == g.rows(), "matmul_tn", shape(a) + "^T * " + shape(g));
  detail::resize_if_needed(out, a.cols(), g.cols());
  const std::size_t n = a.rows();
  const auto k = static_cast<std::ptrdiff_t>(a.cols());
  const std::size_t m = g.cols();

#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < k; ++i) {
    double* o = out.row(static_cast<std::size_t>(i)).data();
    std::fill(o, o + m, 0.0);
    for (std::size_t r = 0; r < n; ++r) {
      const double s = a(r, static_cast<std::size_t>(i));
      if (s == 0.0) continue;
      const double* gr = g.row(r).data();
      for (std::size_t j = 0; j < m; ++j) o[j] += s * gr[j];
    }
  }
}

void matmul_nt(const MatrixD& g, const MatrixD& b, MatrixD& out) {
  require(g.cols() == b.cols(), "matmul_nt", shape(g) + " * " + shape(b) + "^T");
  // Transposing b turns the row dot products into axpy updates that vectorize.
  MatrixD bt(b.cols(), b.rows());
  for (std::size_t r = 0; r < b.rows(); ++r)
    for (std::size_t c = 0; c < b.cols(); ++c) bt(c, r) = b(r, c);
  matmul_bias(g, bt, {}, out);
}

void column_sums(const MatrixD& a, std::span<double> out) {
  require(out.size() == a.cols(), "column_sums", "output length");
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t r = 0; r < a.rows(); ++r) {
    const double* ar = a.row(r).data();
    for (std::size_t j = 0; j < a.cols(); ++j) out[j] += ar[j];
  }
}

MatrixD cosine_distances(const MatrixD& x) {
  const std::size_t n = x.rows();
  std::vector<double> norms(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (double v : x.row(i)) s += v * v;
    norms[i] = std::sqrt(s);
    require(norms[i] > 0.0, "cosine_distances", "zero vector at row " + std::to_string(i));
  }
  MatrixD out(n, n);
  const auto sn = static_cast<std::ptrdiff_t>(n);

#pragma omp parallel for schedule(dynamic, 16)
  for (std::ptrdiff_t si = 0; si < sn; ++si) {
    const auto i = static_cast<std::size_t>(si);
    const double* xi = x.row(i).data();
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) {
        out(i, j) = 0.0;
        continue;
      }
      const double* xj = x.row(j).data();
      double dot = 0.0;
      for (std::size_t c = 0; c < x.cols(); ++c) dot += xi[c] * xj[c];
      const double cosine = std::clamp(dot / (norms[i] * norms[j]), -1.0, 1.0);
      out(i, j) = 1.0 - cosine;
    }
  }
  return out;
}

void softmax_entropy_rows(const MatrixD& logits, std::span<double> entropy, MatrixD* grad) {
  require(entropy.size() == logits.rows(), "softmax_entropy_rows", "entropy length");
  if (grad) detail::resize_if_needed(*grad, logits.rows(), logits.cols());
  const auto n = static_cast<std::ptrdiff_t>(logits.rows());
  const std::size_t v = logits.cols();

#pragma omp parallel
  {
    std::vector<double> logp(v);
#pragma omp for schedule(static)
    for (std::ptrdiff_t si = 0; si < n; ++si) {
      const auto i = static_cast<std::size_t>(si);
      const double* l = logits.row(i).data();
      const double mx = *std::max_element(l, l + v);
      double z = 0.0;
      for (std::size_t k = 0; k < v; ++k) z += std::exp(l[k] - mx);
      const double lse = mx + std::log(z);
      double h = 0.0;
      for (std::size_t k = 0; k < v; ++k) {
        logp[k] = l[k] - lse;
        h -= std::exp(logp[k]) * logp[k];
      }
      entropy[i] = h;
      if (grad) {
        double* g = grad->row(i).data();
        for (std::size_t k = 0; k < v; ++k) g[k] = -std::exp(logp[k]) * (logp[k] + h);
      }
    }
  }
}


MatrixD cluster_distance_sums(const MatrixD& unit, std::span<const std::size_t> cluster,
                              std::size_t n_clusters) {
  detail::require(cluster.size() == unit.rows(), "cluster_distance_sums", "cluster length");
  const std::size_t n = unit.rows();
  const std::size_t dim = unit.cols();
  MatrixD out(n, n_clusters);
  const auto sn = static_cast<std::ptrdiff_t>(n);

#pragma omp parallel for schedule(dynamic, 16)
  for (std::ptrdiff_t si = 0; si < sn; ++si) {
    const auto i = static_cast<std::size_t>(si);
    const double* ui = unit.row(i).data();
    double* o = out.row(i).data();
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const double* uj = unit.row(j).data();
      double dot = 0.0;
      for (std::size_t c = 0; c < dim; ++c) dot += ui[c] * uj[c];
      o[cluster[j]] += 1.0 - dot;
    }
  }
  return out;
}

}  // namespace rvec::kernels
