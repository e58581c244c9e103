#pragma once

#include <vector>

#include "rvec/matrix.hpp"

namespace rvec {

// Minimum-cost one-to-one assignment of every row to a distinct column
// (rows <= cols), by the Hungarian method with row/column potentials.
// Returns the column chosen for each row.
std::vector<std::size_t> solve_assignment(const MatrixD& cost);

}  // namespace rvec
