#pragma once

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace fedsac {

/// Keeps freed heap memory mapped between training steps.
inline bool tune_allocator() {
#if defined(__GLIBC__)
  mallopt(M_TRIM_THRESHOLD, 64 << 20);
  mallopt(M_MMAP_THRESHOLD, 32 << 20);
#endif
  return true;
}

inline const bool allocator_tuned = tune_allocator();

}  // namespace fedsac
