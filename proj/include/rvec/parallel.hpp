#pragma once

namespace rvec::parallel {

// Caps OpenMP parallelism for every kernel. Values < 1 restore the runtime default.
void set_num_threads(int n);
int num_threads();
bool openmp_enabled() noexcept;

}  // namespace rvec::parallel
