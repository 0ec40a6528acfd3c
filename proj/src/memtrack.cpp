#include "lngram/memtrack.hpp"

#include <atomic>

namespace lngram::memtrack {

namespace {
constinit std::atomic<std::size_t> g_live{0};
constinit std::atomic<std::size_t> g_peak{0};
constinit std::atomic<bool> g_hooked{false};
}  // namespace

bool instrumented() { return g_hooked.load(std::memory_order_relaxed); }
std::size_t live_bytes() { return g_live.load(std::memory_order_relaxed); }
std::size_t peak_bytes() { return g_peak.load(std::memory_order_relaxed); }
void reset_peak() { g_peak.store(g_live.load(std::memory_order_relaxed), std::memory_order_relaxed); }

namespace detail {

void on_alloc(std::size_t bytes) {
  g_hooked.store(true, std::memory_order_relaxed);
  const std::size_t now = g_live.fetch_add(bytes, std::memory_order_relaxed) + bytes;
  std::size_t peak = g_peak.load(std::memory_order_relaxed);
  while (now > peak && !g_peak.compare_exchange_weak(peak, now, std::memory_order_relaxed)) {
  }
}

void on_free(std::size_t bytes) { g_live.fetch_sub(bytes, std::memory_order_relaxed); }

}  // namespace detail

}  // namespace lngram::memtrack
