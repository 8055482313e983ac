#pragma once

#include <omp.h>

namespace shallowblock {

inline int resolve_threads(int requested) {
  return requested > 0 ? requested : omp_get_max_threads();
}

}  // namespace shallowblock
