#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

namespace vrmc::detail {

/// C(n_pop, k), or nullopt once the value exceeds cap.
inline std::optional<std::uint64_t> binomial_capped(std::size_t n_pop, std::size_t k,
                                                    std::uint64_t cap) {
    if (k > n_pop) {
        return 0;
    }
    k = std::min(k, n_pop - k);
    unsigned __int128 c = 1;
    for (std::size_t j = 1; j <= k; ++j) {
        c = c * (n_pop - k + j) / j;  // exact: j consecutive integers divide by j!
        if (c > cap) {
            return std::nullopt;
        }
    }
    return static_cast<std::uint64_t>(c);
}

/// Calls fn(idx) for every size-k subset of {0,...,n_pop-1} in lexicographic
/// order; idx stays sorted ascending and must not be retained by fn.
template <typename Fn>
void for_each_subset(std::size_t n_pop, std::size_t k, Fn&& fn) {
    std::vector<std::size_t> idx(k);
    for (std::size_t j = 0; j < k; ++j) {
        idx[j] = j;
    }
    const auto& view = idx;
    while (true) {
        fn(view);
        std::size_t j = k;
        while (j > 0 && idx[j - 1] == n_pop - k + (j - 1)) {
            --j;
        }
        if (j == 0) {
            return;
        }
        ++idx[j - 1];
        for (std::size_t t = j; t < k; ++t) {
            idx[t] = idx[t - 1] + 1;
        }
    }
}

}  // namespace vrmc::detail
