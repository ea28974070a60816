// SPDX-License-Identifier: Apache-2.0
// glibc malloc interposition feeding spx::mem. Link into executables only.
#include <malloc.h>

#include <cerrno>
#include <cstddef>

#include "spx/alloc_tracker.hpp"

extern "C" {
void* __libc_malloc(std::size_t);
void* __libc_calloc(std::size_t, std::size_t);
void* __libc_realloc(void*, std::size_t);
void* __libc_memalign(std::size_t, std::size_t);
void __libc_free(void*);
}

namespace {

void* track(void* p) {
    if (p) spx::mem::note_alloc(malloc_usable_size(p));
    return p;
}

struct Activate {
    Activate() { spx::mem::set_tracking_active(); }
} activate;

}  // namespace

extern "C" {

void* malloc(std::size_t n) noexcept { return track(__libc_malloc(n)); }

void* calloc(std::size_t n, std::size_t size) noexcept { return track(__libc_calloc(n, size)); }

void free(void* p) noexcept {
    if (!p) return;
    spx::mem::note_free(malloc_usable_size(p));
    __libc_free(p);
}

void* realloc(void* p, std::size_t n) noexcept {
    const std::size_t old = p ? malloc_usable_size(p) : 0;
    void* q = __libc_realloc(p, n);
    if (q) {
        spx::mem::note_free(old);
        spx::mem::note_alloc(malloc_usable_size(q));
    } else if (n == 0 && p) {
        spx::mem::note_free(old);
    }
    return q;
}

void* memalign(std::size_t align, std::size_t n) noexcept { return track(__libc_memalign(align, n)); }

void* aligned_alloc(std::size_t align, std::size_t n) noexcept { return track(__libc_memalign(align, n)); }

int posix_memalign(void** out, std::size_t align, std::size_t n) noexcept {
    if (align < sizeof(void*) || (align & (align - 1)) != 0) return EINVAL;
    void* p = track(__libc_memalign(align, n));
    if (!p) return ENOMEM;
    *out = p;
    return 0;
}

}  // extern "C"
