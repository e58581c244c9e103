#include "rvec/assignment.hpp"

#include <cmath>
#include <limits>

#include "rvec/error.hpp"

namespace rvec {

std::vector<std::size_t> solve_assignment(const MatrixD& cost) {
  const std::size_t n = cost.rows();
  const std::size_t m = cost.cols();
  if (n > m) throw ValidationError("solve_assignment: more rows than columns");
  for (double c : cost.flat()) {
    if (!std::isfinite(c)) throw ValidationError("solve_assignment: non-finite cost");
  }
  if (n == 0) return {};

  constexpr double inf = std::numeric_limits<double>::infinity();
  constexpr std::size_t none = 0;
  // 1-based indices; column 0 is the virtual start, row 0 means "unassigned".
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<std::size_t> owner(m + 1, none), way(m + 1, 0);

  for (std::size_t row = 1; row <= n; ++row) {
    owner[0] = row;
    std::size_t col0 = 0;
    std::vector<double> min_slack(m + 1, inf);
    std::vector<bool> used(m + 1, false);
    do {
      used[col0] = true;
      const std::size_t r = owner[col0];
      double delta = inf;
      std::size_t next = 0;
      for (std::size_t c = 1; c <= m; ++c) {
        if (used[c]) continue;
        const double slack = cost(r - 1, c - 1) - u[r] - v[c];
        if (slack < min_slack[c]) {
          min_slack[c] = slack;
          way[c] = col0;
        }
        if (min_slack[c] < delta) {
          delta = min_slack[c];
          next = c;
        }
      }
      for (std::size_t c = 0; c <= m; ++c) {
        if (used[c]) {
          u[owner[c]] += delta;
          v[c] -= delta;
        } else {
          min_slack[c] -= delta;
        }
      }
      col0 = next;
    } while (owner[col0] != none);
    // Flip the augmenting path.
    do {
      const std::size_t prev = way[col0];
      owner[col0] = owner[prev];
      col0 = prev;
    } while (col0 != 0);
  }

  std::vector<std::size_t> assignment(n);
  for (std::size_t c = 1; c <= m; ++c) {
    if (owner[c] != none) assignment[owner[c] - 1] = c - 1;
  }
  return assignment;
}

}  // namespace rvec
