#pragma once

#include <cstdint>

namespace refracta {

// splitmix64 finalizer, https://prng.di.unimi.it/splitmix64.c
constexpr std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Counter-based random stream: the n-th draw of stream (seed, key) is a pure
/// function of (seed, key, n), so results never depend on evaluation order.
class CounterRng {
public:
    constexpr CounterRng(std::uint64_t seed, std::uint64_t key)
        : base_(mix64(mix64(seed) ^ (key * 0xd1342543de82ef95ULL + 0x2545f4914f6cdd1dULL))) {}

    constexpr std::uint64_t next_u64() { return mix64(base_ + 0x632be59bd9b4e019ULL * (counter_++)); }

    /// Uniform double in [0, 1).
    constexpr double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    constexpr double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    constexpr std::uint64_t counter() const { return counter_; }

private:
    std::uint64_t base_;
    std::uint64_t counter_ = 0;
};

}  // namespace refracta
