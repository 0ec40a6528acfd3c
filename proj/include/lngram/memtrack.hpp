#pragma once

// Heap accounting. The counters live in the core library; they only move when
// the allocator hooks (a separate object library) are linked into the
// executable, which instrumented() reports.

#include <cstddef>

namespace lngram::memtrack {

bool instrumented();
std::size_t live_bytes();
std::size_t peak_bytes();
// Resets the peak to the current live value.
void reset_peak();

namespace detail {
void on_alloc(std::size_t bytes);
void on_free(std::size_t bytes);
}  // namespace detail

}  // namespace lngram::memtrack
