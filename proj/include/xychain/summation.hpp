// summation.hpp — pairwise (cascade) summation of generated terms
#pragma once

#include <cstddef>
#include <span>

namespace xychain {

namespace detail {
inline constexpr std::size_t kPairwiseBlock = 16;
}

// Sum term(i) for i in [begin, end) by recursive halving; error grows as O(log n).
template <class Term>
double pairwise_sum(std::size_t begin, std::size_t end, const Term& term) {
    const std::size_t n = end - begin;
    if (n <= detail::kPairwiseBlock) {
        double s = 0.0;
        for (std::size_t i = begin; i < end; ++i) s += term(i);
        return s;
    }
    const std::size_t mid = begin + n / 2;
    return pairwise_sum(begin, mid, term) + pairwise_sum(mid, end, term);
}

inline double pairwise_sum(std::span<const double> values) {
    return pairwise_sum(0, values.size(), [&](std::size_t i) { return values[i]; });
}

}  // namespace xychain
