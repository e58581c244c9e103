#include <map>

#include "doctest.h"
#include "oracles.hpp"
#include "rvec/error.hpp"
#include "rvec/geometry.hpp"

using namespace rvec;
using namespace rvec::geometry;

namespace {

// Max |cos| over pairs, written out directly.
double incoherence_oracle(const MatrixD& a) {
  double mu = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = i + 1; j < a.rows(); ++j)
      mu = std::max(mu, std::abs(test::dot(a.row(i), a.row(j))) / (test::norm(a.row(i)) * test::norm(a.row(j))));
  return mu;
}

// O(n^2) silhouette with 1 - cos distance, singletons 0.
std::vector<double> silhouette_oracle(const MatrixD& x, const std::vector<std::string>& labels) {
  const std::size_t n = x.rows();
  auto dist = [&](std::size_t i, std::size_t j) {
    return 1.0 - test::dot(x.row(i), x.row(j)) / (test::norm(x.row(i)) * test::norm(x.row(j)));
  };
  std::vector<double> s(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    std::map<std::string, std::pair<double, std::size_t>> acc;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      auto& [sum, count] = acc[labels[j]];
      sum += dist(i, j);
      ++count;
    }
    if (acc[labels[i]].second == 0) continue;
    const double a = acc[labels[i]].first / static_cast<double>(acc[labels[i]].second);
    double b = INFINITY;
    for (const auto& [lab, sc] : acc)
      if (lab != labels[i] && sc.second > 0) b = std::min(b, sc.first / static_cast<double>(sc.second));
    s[i] = (b - a) / std::max(a, b);
  }
  return s;
}

}  // namespace

TEST_CASE("incoherence matches the pairwise definition and its invariances") {
  std::mt19937_64 rng(31);
  MatrixD a = test::random_matrix(rng, 12, 20);
  const double mu = incoherence(a);
  CHECK(mu == doctest::Approx(incoherence_oracle(a)).epsilon(1e-12));
  CHECK(mu >= 0.0);
  CHECK(mu <= 1.0);

  MatrixD permuted(12, 20);
  for (std::size_t r = 0; r < 12; ++r) {
    const double scale = 0.1 + static_cast<double>(r);
    for (std::size_t c = 0; c < 20; ++c) permuted((r * 5) % 12, c) = scale * a(r, c);
  }
  CHECK(incoherence(permuted) == doctest::Approx(mu).epsilon(1e-12));

  MatrixD eye(3, 3, 0.0);
  for (std::size_t i = 0; i < 3; ++i) eye(i, i) = 1.0;
  CHECK(incoherence(eye) == doctest::Approx(0.0).epsilon(1e-15));

  a(4, 0) = 0.0;
  for (double& v : a.row(4)) v = 0.0;
  try {
    incoherence(a);
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("row 4") != std::string::npos);
  }
  CHECK_THROWS_AS(incoherence(MatrixD(1, 3, 1.0)), ValidationError);
}

TEST_CASE("top-active channels rank by activity with index tie-break") {
  MatrixD z(4, 5, 0.0);
  z(0, 1) = 3.0;
  z(1, 3) = 3.0;
  z(1, 0) = 1.0;
  z(2, 4) = 9.0;  // row 2 is not labeled reflection
  z(3, 2) = 2.0;
  const std::vector<std::string> labels{"reflection", "reflection", "others", "reflection"};
  const auto top = top_active_channels(z, labels, "reflection", 3);
  REQUIRE(top.size() == 3);
  CHECK(top[0].channel_index == 1);
  CHECK(top[1].channel_index == 3);
  CHECK(top[2].channel_index == 2);
  CHECK(top[0].activity == 3.0);
  CHECK(top[0].label == "reflection");

  const auto all = top_active_channels(z, labels, "reflection", 5);
  std::vector<std::size_t> ids;
  for (const auto& c : all) ids.push_back(c.channel_index);
  std::sort(ids.begin(), ids.end());
  CHECK(ids == std::vector<std::size_t>{0, 1, 2, 3, 4});

  test::DiagCapture cap;
  CHECK(top_active_channels(z, labels, "reflection", 50).size() == 5);
  CHECK(cap.has("topk_clamped"));
  CHECK_THROWS_AS(top_active_channels(z, labels, "backtracking", 2), ValidationError);
  CHECK_THROWS_AS(top_active_channels(z, labels, "reflection", 0), ValidationError);
}

TEST_CASE("silhouette agrees with the quadratic definition") {
  std::mt19937_64 rng(32);
  const MatrixD x = test::random_matrix(rng, 30, 6);
  std::vector<std::string> labels;
  for (std::size_t i = 0; i < 30; ++i) labels.push_back(i < 12 ? "a" : (i < 29 ? "b" : "c"));
  const auto s = silhouette_cosine(x, labels);
  const auto oracle = silhouette_oracle(x, labels);
  CHECK(test::relative_error(s.per_point, oracle) <= 1e-10);
  CHECK(s.per_point[29] == 0.0);
  for (double v : s.per_point) {
    CHECK(v >= -1.0);
    CHECK(v <= 1.0);
  }

  std::vector<std::string> renamed;
  for (const auto& l : labels) renamed.push_back(l == "a" ? "zz" : (l == "b" ? "aa" : "mm"));
  CHECK(silhouette_cosine(x, renamed).mean == doctest::Approx(s.mean).epsilon(1e-12));
}

TEST_CASE("silhouette preconditions") {
  MatrixD x(3, 2, 1.0);
  CHECK_THROWS_AS(silhouette_cosine(x, std::vector<std::string>{"a", "a", "a"}), ValidationError);
  CHECK_THROWS_AS(silhouette_cosine(MatrixD(2, 2, 1.0), std::vector<std::string>{"a", "b"}), ValidationError);
  CHECK_THROWS_AS(silhouette_cosine(x, std::vector<std::string>{"a", "b"}), DimensionError);
  x(1, 0) = 0.0;
  x(1, 1) = 0.0;
  CHECK_THROWS_AS(silhouette_cosine(x, std::vector<std::string>{"a", "b", "b"}), ValidationError);
}

TEST_CASE("orthogonal clusters separate; shuffled labels do not") {
  const auto f = test::orthogonal_clusters(33, 60, 16, 0.05);
  CHECK(silhouette_cosine(f.points, f.labels).mean > 0.8);
  auto shuffled = f.labels;
  std::mt19937_64 rng(34);
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  CHECK(std::abs(silhouette_cosine(f.points, shuffled).mean) < 0.2);
}

TEST_CASE("min-max normalisation across layers") {
  const auto n = normalize_across_layers(std::vector<double>{2.0, 4.0, 3.0});
  CHECK(n == std::vector<double>{0.0, 1.0, 0.5});
  CHECK_THROWS_AS(normalize_across_layers(std::vector<double>{1.0, 1.0}), ValidationError);
  CHECK_THROWS_AS(normalize_across_layers(std::vector<double>{}), ValidationError);
}

TEST_CASE("2-D embedding is deterministic and permutation-equivariant") {
  std::mt19937_64 rng(35);
  const MatrixD x = test::random_matrix(rng, 25, 10);
  const auto e = embed_2d(x);
  REQUIRE(e.coords.rows() == 25);
  REQUIRE(e.coords.cols() == 2);
  CHECK(embed_2d(x).coords == e.coords);
  for (std::size_t r = 0; r < 25; ++r) CHECK(test::norm(e.normalized.row(r)) == doctest::Approx(1.0));

  std::vector<std::size_t> perm(25);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::shuffle(perm.begin(), perm.end(), rng);
  MatrixD px(25, 10);
  for (std::size_t r = 0; r < 25; ++r) std::copy(x.row(perm[r]).begin(), x.row(perm[r]).end(), px.row(r).begin());
  const auto pe = embed_2d(px);
  for (std::size_t axis = 0; axis < 2; ++axis) {
    // Equal up to a per-axis sign.
    double same = 0.0, flipped = 0.0;
    for (std::size_t r = 0; r < 25; ++r) {
      same = std::max(same, std::abs(pe.coords(r, axis) - e.coords(perm[r], axis)));
      flipped = std::max(flipped, std::abs(pe.coords(r, axis) + e.coords(perm[r], axis)));
    }
    CHECK(std::min(same, flipped) < 1e-9);
  }

  SUBCASE("the first axis separates two clusters") {
    const auto f = test::orthogonal_clusters(36, 20, 8, 0.05);
    const auto ef = embed_2d(f.points);
    for (std::size_t r = 1; r < 20; ++r) CHECK((ef.coords(r, 0) > 0) == (ef.coords(0, 0) > 0));
    for (std::size_t r = 20; r < 40; ++r) CHECK((ef.coords(r, 0) > 0) != (ef.coords(0, 0) > 0));
  }
  CHECK_THROWS_AS(embed_2d(MatrixD(2, 3, 1.0)), ValidationError);
}

TEST_CASE("length split uses strict thresholds") {
  std::vector<StepRecord> r;
  for (std::uint64_t len : {0, 999, 1000, 8000, 8001}) r.push_back({"s", 0, "", Label::others, len});
  CHECK(length_split_labels(r) == std::vector<std::string>{"short", "short", "excluded", "excluded", "long"});
  CHECK(length_split_labels(r, {10, 20}) ==
        std::vector<std::string>{"short", "long", "long", "long", "long"});
}

TEST_CASE("behavior labels") {
  std::vector<StepRecord> r{{"s", 0, "", Label::reflection, 0}, {"s", 1, "", Label::unlabeled, 0}};
  CHECK(behavior_labels(r) == std::vector<std::string>{"reflection", "unlabeled"});
}
