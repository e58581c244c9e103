#pragma once

#include <string>

#include "rvec/error.hpp"
#include "rvec/matrix.hpp"

namespace rvec::kernels::detail {

inline void require(bool ok, const char* kernel, const std::string& what) {
  if (!ok) throw DimensionError(std::string(kernel) + ": " + what);
}

inline std::string shape(const MatrixD& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

inline void resize_if_needed(MatrixD& out, std::size_t rows, std::size_t cols) {
  if (out.rows() != rows || out.cols() != cols) out = MatrixD(rows, cols);
}

}  // namespace rvec::kernels::detail
