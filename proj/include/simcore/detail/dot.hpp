#pragma once

#include <cstddef>

namespace simcore::detail {

// The one dot-product used everywhere. Accumulation is sequential over the
// dimension in double precision so results are bit-identical regardless of
// blocking or thread count.
inline double dot_f32(const float* a, const float* b, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        acc += static_cast<double>(a[i]) * static_cast<double>(b[i]);
    }
    return acc;
}

}  // namespace simcore::detail
