#pragma once

#include <array>
#include <cstdint>

namespace vrmc {

/// Philox4x64-10 block function (Salmon et al., "Parallel random numbers:
/// as easy as 1, 2, 3", SC'11). Pure: output depends only on (counter, key).
std::array<std::uint64_t, 4> philox4x64(const std::array<std::uint64_t, 4>& counter,
                                        const std::array<std::uint64_t, 2>& key);

/// Purpose tag keeping a chain's independent draw streams apart. Minibatch
/// index draws and injected-noise draws use distinct tags so changing the
/// minibatch size never perturbs the noise sequence.
enum class StreamPurpose : std::uint64_t {
    minibatch = 0,
    noise = 1,
    data_gen = 2,
    init = 3,
};

/// Deterministic counter-based random stream.
///
/// Draw i of stream (seed, chain, purpose) is word 0 of the Philox block at
/// counter {i, 0, chain, purpose} with key {seed, 0}: every draw is a pure
/// function of the stream id, so sequences are reproducible across runs and
/// platforms and distinct stream ids never collide.
class RngStream {
public:
    RngStream(std::uint64_t seed, std::uint64_t chain, StreamPurpose purpose)
        : key_{seed, 0},
          chain_(chain),
          purpose_(static_cast<std::uint64_t>(purpose)) {}

    std::uint64_t next_u64();

    /// Uniform on (0,1] with 53-bit resolution: ((x >> 11) + 1) * 2^-53.
    double uniform01();

    /// Standard normal via Box-Muller: sqrt(-2 ln u1) * cos(2*pi*u2).
    /// Consumes exactly two uniforms (two 64-bit draws), never caches.
    double gaussian();

    /// Uniform integer in [0, bound) by masked rejection. bound must be >= 1;
    /// bound == 1 returns 0 without consuming a draw.
    std::uint64_t uniform_below(std::uint64_t bound);

    /// Number of 64-bit draws consumed so far (the counter position).
    std::uint64_t draws_consumed() const noexcept { return index_; }

    std::uint64_t seed() const noexcept { return key_[0]; }
    std::uint64_t chain() const noexcept { return chain_; }
    StreamPurpose purpose() const noexcept { return static_cast<StreamPurpose>(purpose_); }

private:
    std::array<std::uint64_t, 2> key_;
    std::uint64_t chain_;
    std::uint64_t purpose_;
    std::uint64_t index_ = 0;
};

}  // namespace vrmc
