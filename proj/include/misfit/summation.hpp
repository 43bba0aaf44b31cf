#pragma once

#include <cstddef>

namespace misfit {

/// Leaf size below which terms are summed in a plain loop.
inline constexpr std::size_t kPairwiseBlock = 128;

/// Pairwise (cascade) reduction over [begin, end). `leaf(b, e)` returns the
/// naive sum of a short block; blocks are combined as a balanced binary tree,
/// so rounding error grows like O(log n) instead of O(n). `T` needs `+=`.
template <class T, class Leaf>
T pairwise_sum(std::size_t begin, std::size_t end, const Leaf& leaf) {
    if (end - begin <= kPairwiseBlock) return leaf(begin, end);
    const std::size_t mid = begin + (end - begin) / 2;
    T left = pairwise_sum<T>(begin, mid, leaf);
    left += pairwise_sum<T>(mid, end, leaf);
    return left;
}

}  // namespace misfit
