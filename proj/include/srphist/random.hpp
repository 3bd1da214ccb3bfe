#pragma once

#include <cstdint>

namespace srphist {

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Counter-based generator: draw k depends only on (seed, k), so results are
/// identical on every platform and independent of call interleaving.
class CounterRng {
public:
    explicit CounterRng(std::uint64_t seed) noexcept : key_(mix64(seed)) {}

    std::uint64_t next() noexcept { return mix64(key_ ^ mix64(counter_++)); }

    /// Uniform integer in [0, bound), bound >= 1 (Lemire multiply-shift).
    std::uint64_t below(std::uint64_t bound) noexcept {
        return static_cast<std::uint64_t>((static_cast<unsigned __int128>(next()) * bound) >> 64);
    }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() noexcept { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    std::uint64_t draws() const noexcept { return counter_; }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

/// Independent seed for stream `index` derived from a base seed.
constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) noexcept {
    return index == 0 ? base : mix64(base ^ mix64(index * 0xd1b54a32d192ed03ULL));
}

}  // namespace srphist
