#pragma once

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace seal {

/// Keeps large freed blocks in the heap instead of returning them to the OS.
/// Training reallocates the same large buffers every epoch, and with glibc's
/// defaults each one is a fresh mmap that page-faults on first touch.
inline void retain_freed_memory() {
#if defined(__GLIBC__)
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
}

}  // namespace seal
