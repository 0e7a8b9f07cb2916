#pragma once

#include <cstddef>
#include <exception>
#include <mutex>

namespace wemp {

/// Worker count for data-parallel loops. One worker runs the plain serial loop,
/// which is the reference every OpenMP path is tested against.
struct Execution {
  int workers = 1;

  [[nodiscard]] bool serial() const noexcept { return workers <= 1; }
  static Execution sequential() noexcept { return {1}; }
};

/// Runs `body(i)` for i in [0, n). Iterations must write disjoint outputs; the
/// result is then bitwise independent of the worker count. The first exception
/// thrown by any iteration is rethrown on the calling thread.
template <class Body>
void parallel_for(std::ptrdiff_t n, const Execution& exec, Body&& body) {
  if (exec.serial() || n <= 1) {
    for (std::ptrdiff_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::exception_ptr failure;
  std::mutex guard;
#pragma omp parallel for num_threads(exec.workers) schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      body(i);
    } catch (...) {
      std::scoped_lock lock(guard);
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
}

}  // namespace wemp
