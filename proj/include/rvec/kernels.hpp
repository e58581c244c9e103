#pragma once

// Dense kernels behind SAE training, geometry and entropy optimization.
//
// Two implementations share every signature:
//   rvec::kernels             OpenMP-parallel, used by the library.
//   rvec::kernels::reference  plain serial loops, kept as the test oracle and
//                             the benchmark baseline.
//
// Parallel kernels split work over output rows only; each output element is
// produced by one thread with a fixed summation order, so results are bitwise
// identical for every thread count.

#include <span>

#include "rvec/matrix.hpp"

namespace rvec::kernels {

// out(n x m) = a(n x k) * b(k x m) + bias. An empty bias means none.
void matmul_bias(const MatrixD& a, const MatrixD& b, std::span<const double> bias, MatrixD& out);

// out(k x m) = a(n x k)^T * g(n x m). Gradient of a weight matrix over a batch.
void matmul_tn(const MatrixD& a, const MatrixD& g, MatrixD& out);

// out(n x k) = g(n x m) * b(k x m)^T. Back-propagation through a linear map.
void matmul_nt(const MatrixD& g, const MatrixD& b, MatrixD& out);

// out[j] = sum_i a(i, j)
void column_sums(const MatrixD& a, std::span<double> out);

// n x n matrix of 1 - cos(x_i, x_j). Rows must be nonzero.
MatrixD cosine_distances(const MatrixD& x);

// out(i, c) = sum over rows j != i with cluster[j] == c of 1 - <u_i, u_j>.
// Rows of `unit` must already be unit-norm. Never forms the n x n matrix.
MatrixD cluster_distance_sums(const MatrixD& unit, std::span<const std::size_t> cluster, std::size_t n_clusters);

// Per-row softmax entropy (natural log). When grad is non-null it receives
// dH/dlogits for every row, which is -p_k (log p_k + H).
void softmax_entropy_rows(const MatrixD& logits, std::span<double> entropy, MatrixD* grad);

namespace reference {

void matmul_bias(const MatrixD& a, const MatrixD& b, std::span<const double> bias, MatrixD& out);
void matmul_tn(const MatrixD& a, const MatrixD& g, MatrixD& out);
void matmul_nt(const MatrixD& g, const MatrixD& b, MatrixD& out);
void column_sums(const MatrixD& a, std::span<double> out);
MatrixD cosine_distances(const MatrixD& x);
MatrixD cluster_distance_sums(const MatrixD& unit, std::span<const std::size_t> cluster, std::size_t n_clusters);
void softmax_entropy_rows(const MatrixD& logits, std::span<double> entropy, MatrixD* grad);

}  // namespace reference

}  // namespace rvec::kernels
