#include "doctest.h"
#include "oracles.hpp"
#include "rvec/kernels.hpp"
#include "rvec/parallel.hpp"

using namespace rvec;
using rvec::test::random_matrix;

namespace {

void require_close(const MatrixD& a, const MatrixD& b, double tol) {
  REQUIRE(a.rows() == b.rows());
  REQUIRE(a.cols() == b.cols());
  CHECK(test::relative_error(a.flat(), b.flat()) <= tol);
}

struct ThreadGuard {
  ~ThreadGuard() { parallel::set_num_threads(0); }
};

}  // namespace

TEST_CASE("matmul kernels agree with the serial reference") {
  std::mt19937_64 rng(11);
  for (auto [n, k, m] : {std::tuple{1, 1, 1}, {7, 5, 3}, {33, 17, 40}, {64, 128, 64}}) {
    const MatrixD a = random_matrix(rng, n, k);
    const MatrixD b = random_matrix(rng, k, m);
    const auto bias = test::random_vector(rng, m);
    MatrixD fast, slow;
    kernels::matmul_bias(a, b, bias, fast);
    kernels::reference::matmul_bias(a, b, bias, slow);
    require_close(fast, slow, 1e-13);

    kernels::matmul_bias(a, b, {}, fast);
    kernels::reference::matmul_bias(a, b, {}, slow);
    require_close(fast, slow, 1e-13);

    const MatrixD g = random_matrix(rng, n, m);
    kernels::matmul_tn(a, g, fast);
    kernels::reference::matmul_tn(a, g, slow);
    require_close(fast, slow, 1e-13);

    const MatrixD bt = random_matrix(rng, k, m);
    kernels::matmul_nt(g, bt, fast);
    kernels::reference::matmul_nt(g, bt, slow);
    require_close(fast, slow, 1e-13);

    std::vector<double> cf(m), cs(m);
    kernels::column_sums(g, cf);
    kernels::reference::column_sums(g, cs);
    CHECK(test::relative_error(cf, cs) <= 1e-13);
  }
}

TEST_CASE("matmul_bias rejects mismatched shapes") {
  MatrixD out;
  CHECK_THROWS(kernels::matmul_bias(MatrixD(2, 3), MatrixD(4, 2), {}, out));
  const std::vector<double> bias(3);
  CHECK_THROWS(kernels::matmul_bias(MatrixD(2, 3), MatrixD(3, 2), bias, out));
}

TEST_CASE("cosine kernels agree with the reference") {
  std::mt19937_64 rng(12);
  const MatrixD x = random_matrix(rng, 41, 9);
  require_close(kernels::cosine_distances(x), kernels::reference::cosine_distances(x), 1e-12);

  MatrixD unit = x;
  for (std::size_t r = 0; r < unit.rows(); ++r) {
    const double n = test::norm(unit.row(r));
    for (double& v : unit.row(r)) v /= n;
  }
  std::vector<std::size_t> cluster(unit.rows());
  for (std::size_t i = 0; i < cluster.size(); ++i) cluster[i] = (i * 7) % 3;
  require_close(kernels::cluster_distance_sums(unit, cluster, 3),
                kernels::reference::cluster_distance_sums(unit, cluster, 3), 1e-12);
}

TEST_CASE("softmax entropy kernel agrees with the reference") {
  std::mt19937_64 rng(13);
  const MatrixD logits = random_matrix(rng, 23, 7, 3.0);
  std::vector<double> ef(23), es(23);
  MatrixD gf, gs;
  kernels::softmax_entropy_rows(logits, ef, &gf);
  kernels::reference::softmax_entropy_rows(logits, es, &gs);
  CHECK(test::relative_error(ef, es) <= 1e-12);
  require_close(gf, gs, 1e-12);

  SUBCASE("large logits do not overflow") {
    MatrixD big(1, 2);
    big(0, 0) = 1000.0;
    std::vector<double> e(1);
    kernels::softmax_entropy_rows(big, e, nullptr);
    CHECK(std::isfinite(e[0]));
    CHECK(e[0] == doctest::Approx(0.0).epsilon(1e-12));
  }
}

TEST_CASE("parallel kernels are bitwise identical across thread counts") {
  ThreadGuard guard;
  std::mt19937_64 rng(14);
  const MatrixD a = random_matrix(rng, 97, 53);
  const MatrixD b = random_matrix(rng, 53, 71);
  const MatrixD g = random_matrix(rng, 97, 71);
  std::vector<std::size_t> cluster(a.rows());
  for (std::size_t i = 0; i < cluster.size(); ++i) cluster[i] = i % 4;
  MatrixD unit = a;
  for (std::size_t r = 0; r < unit.rows(); ++r) {
    const double n = test::norm(unit.row(r));
    for (double& v : unit.row(r)) v /= n;
  }

  auto run = [&] {
    std::vector<MatrixD> outs(5);
    kernels::matmul_bias(a, b, {}, outs[0]);
    kernels::matmul_tn(a, g, outs[1]);
    kernels::matmul_nt(g, b, outs[2]);
    outs[3] = kernels::cluster_distance_sums(unit, cluster, 4);
    std::vector<double> ent(g.rows());
    kernels::softmax_entropy_rows(g, ent, &outs[4]);
    return outs;
  };
  parallel::set_num_threads(1);
  const auto one = run();
  for (int t : {2, 3, 8}) {
    parallel::set_num_threads(t);
    const auto many = run();
    for (std::size_t i = 0; i < one.size(); ++i) {
      CHECK(test::bitwise_equal(one[i].flat(), many[i].flat()));
    }
  }
}
