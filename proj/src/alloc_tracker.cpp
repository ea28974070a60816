// SPDX-License-Identifier: Apache-2.0
#include "spx/alloc_tracker.hpp"

#include <atomic>

namespace spx::mem {

namespace {
constinit std::atomic<std::int64_t> g_current{0};
constinit std::atomic<std::int64_t> g_peak{0};
constinit std::atomic<bool> g_active{false};
}  // namespace

bool tracking_active() { return g_active.load(std::memory_order_relaxed); }
std::int64_t current_bytes() { return g_current.load(std::memory_order_relaxed); }
std::int64_t peak_bytes() { return g_peak.load(std::memory_order_relaxed); }
void reset_peak() { g_peak.store(g_current.load(std::memory_order_relaxed), std::memory_order_relaxed); }
void set_tracking_active() { g_active.store(true, std::memory_order_relaxed); }

void note_alloc(std::size_t bytes) {
    const auto now = g_current.fetch_add(static_cast<std::int64_t>(bytes), std::memory_order_relaxed) +
                     static_cast<std::int64_t>(bytes);
    auto peak = g_peak.load(std::memory_order_relaxed);
    while (now > peak && !g_peak.compare_exchange_weak(peak, now, std::memory_order_relaxed)) {
    }
}

void note_free(std::size_t bytes) {
    g_current.fetch_sub(static_cast<std::int64_t>(bytes), std::memory_order_relaxed);
}

}  // namespace spx::mem
