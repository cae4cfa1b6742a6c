#include "vrmc/minibatch.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>

namespace vrmc {

MinibatchSampler::MinibatchSampler(std::size_t N) : perm_(N) {
    if (N == 0) {
        throw std::invalid_argument("MinibatchSampler: population must be >= 1");
    }
    std::iota(perm_.begin(), perm_.end(), std::size_t{0});
}

void MinibatchSampler::draw(std::size_t n, RngStream& rng, MinibatchIndexSet& out) {
    const std::size_t N = perm_.size();
    if (n == 0 || n > N) {
        throw std::invalid_argument("minibatch size " + std::to_string(n) +
                                    " out of range [1, " + std::to_string(N) + "]");
    }
    picks_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t j = i + rng.uniform_below(N - i);
        std::swap(perm_[i], perm_[j]);
        picks_[i] = j;
    }
    out.assign(perm_.begin(), perm_.begin() + static_cast<std::ptrdiff_t>(n));
    for (std::size_t i = n; i-- > 0;) {
        std::swap(perm_[i], perm_[picks_[i]]);
    }
    std::sort(out.begin(), out.end());
}

MinibatchIndexSet sample_without_replacement(std::size_t N, std::size_t n, RngStream& rng) {
    MinibatchSampler sampler(N);
    MinibatchIndexSet out;
    sampler.draw(n, rng, out);
    return out;
}

}  // namespace vrmc
