#pragma once

#include <cstdint>
#include <random>

namespace regfuse {

struct RngSeed {
    std::uint64_t value = 0;
};

using Rng = std::mt19937_64;

/// splitmix64 finalizer. Used to derive independent substreams from a master
/// seed and a counter so that results never depend on evaluation order.
constexpr std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr RngSeed derive_seed(RngSeed seed, std::uint64_t stream) {
    return RngSeed{mix64(seed.value ^ mix64(stream + 0x632be59bd9b4e019ULL))};
}

inline Rng make_rng(RngSeed seed) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed.value), static_cast<std::uint32_t>(seed.value >> 32)};
    return Rng(seq);
}

/// Counter-based stream for hot loops where constructing a Mersenne Twister
/// per draw would dominate. Same seed, same sequence.
class SplitMixStream {
public:
    explicit SplitMixStream(std::uint64_t state) : state_(state) {}

    std::uint64_t next() {
        state_ += 0x9e3779b97f4a7c15ULL;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    /// Uniform integer in [0, n) by rejection, no modulo bias.
    std::uint64_t below(std::uint64_t n) {
        const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
        std::uint64_t v = next();
        while (v >= limit) v = next();
        return v % n;
    }

private:
    std::uint64_t state_;
};

}  // namespace regfuse
