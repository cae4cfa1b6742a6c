#pragma once

#include <cstddef>
#include <vector>

#include "vrmc/rng.hpp"

namespace vrmc {

/// Distinct dataset indices, kept sorted ascending so gradient sums always
/// accumulate in ascending-index order (bit-reproducible).
using MinibatchIndexSet = std::vector<std::size_t>;

/// Draws n distinct indices uniformly from {0,...,N-1}; every size-n subset
/// is equally likely (partial Fisher-Yates), so each index has inclusion
/// probability exactly n/N. Throws std::invalid_argument unless 1 <= n <= N.
MinibatchIndexSet sample_without_replacement(std::size_t N, std::size_t n, RngStream& rng);

/// Reusable sampler holding its index array between draws. draw() costs O(n)
/// (the partial shuffle is undone afterwards) and yields exactly the same
/// output as sample_without_replacement at equal stream state.
class MinibatchSampler {
public:
    explicit MinibatchSampler(std::size_t N);

    std::size_t population() const noexcept { return perm_.size(); }

    void draw(std::size_t n, RngStream& rng, MinibatchIndexSet& out);

private:
    std::vector<std::size_t> perm_;
    std::vector<std::size_t> picks_;
};

}  // namespace vrmc
