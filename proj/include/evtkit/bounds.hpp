#pragma once

#include <vector>

#include "evtkit/numeric.hpp"

namespace evtkit {

/// Paired lower/upper vectors bracketing a fixed point (lower <= upper component-wise).
template <Value V>
struct Bounds {
    std::vector<V> lower;
    std::vector<V> upper;
};

}  // namespace evtkit
