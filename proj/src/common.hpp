#pragma once

#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>

namespace rmcl {

// Error taxonomy. The C API and the CLI exit codes mirror these categories:
// configuration problems (bad dimensions, invalid options), malformed data
// (files that do not parse), numeric failures (non-finite values, degenerate
// states) and I/O failures.
struct config_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct data_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct numeric_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct io_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Global worker count for the dense kernels. 0 = hardware concurrency.
// Threading never changes results: work is split so that every output
// element is computed by exactly one worker in a fixed accumulation order.
void set_num_threads(int n);
int num_threads();
// The raw configured value (0 = auto), before hardware resolution.
int num_threads_setting();

// Runs fn(begin, end) on contiguous chunks of [begin, end), possibly on
// worker threads. Falls back to a single inline call for small ranges.
void parallel_for(std::size_t begin, std::size_t end,
                  const std::function<void(std::size_t, std::size_t)>& fn);

}  // namespace rmcl
