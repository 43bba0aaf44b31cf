#pragma once

#include <cstdint>
#include <limits>

namespace misfit {

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Counter-based generator: the k-th output is mix64(key + k * golden), so a
/// stream is fully determined by its key and any output can be computed
/// without touching the others. Keys for sub-streams are derived by mixing,
/// which makes (seed, replication, estimator, ...) addressing cheap and
/// independent of execution order. Satisfies UniformRandomBitGenerator.
class CounterRng {
public:
    using result_type = std::uint64_t;

    explicit CounterRng(std::uint64_t seed) noexcept : key_(mix64(seed ^ 0x6a09e667f3bcc909ULL)) {}

    /// Independent stream addressed by `index` below this one.
    CounterRng substream(std::uint64_t index) const noexcept {
        CounterRng child(0);
        child.key_ = mix64(key_ ^ mix64(index + 0x9e3779b97f4a7c15ULL));
        return child;
    }

    result_type operator()() noexcept { return mix64(key_ + (++counter_) * 0x9e3779b97f4a7c15ULL); }

    /// Uniform double in (0, 1) with 53 random bits.
    double uniform() noexcept { return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53; }

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

}  // namespace misfit
