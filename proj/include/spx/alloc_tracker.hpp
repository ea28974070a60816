// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>

namespace spx::mem {

// Heap accounting fed by the malloc hook (the spx_memhook target). Without
// the hook linked in, every counter stays at zero.
bool tracking_active();
std::int64_t current_bytes();
std::int64_t peak_bytes();
// Peak := current.
void reset_peak();

// Called by the hook.
void note_alloc(std::size_t bytes);
void note_free(std::size_t bytes);
void set_tracking_active();

// Peak heap growth above the level at construction.
class PeakScope {
public:
    PeakScope() : base_(current_bytes()) { reset_peak(); }
    std::int64_t peak() const {
        const std::int64_t d = peak_bytes() - base_;
        return d > 0 ? d : 0;
    }

private:
    std::int64_t base_;
};

}  // namespace spx::mem
