#pragma once

#include <cstdint>
#include <cstddef>

namespace map2seq {

// SplitMix64 finalizer. Used as the mixing function of the counter-based
// generator below so streams are identical on every platform.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Stateless draw: the value at position `counter` of stream `seed`.
constexpr std::uint64_t counter_hash(std::uint64_t seed, std::uint64_t counter) noexcept {
    return mix64(mix64(seed) ^ (counter * 0xd1b54a32d192ed03ULL));
}

// Uniform double in [0, 1) from the top 53 bits.
constexpr double unit_double(std::uint64_t bits) noexcept {
    return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

// Counter-based generator. Unlike <random> distributions, the mapping from
// seed to values is fully specified here.
class CounterRng {
public:
    explicit CounterRng(std::uint64_t seed) noexcept : seed_(seed) {}

    std::uint64_t next() noexcept { return counter_hash(seed_, counter_++); }

    double uniform() noexcept { return unit_double(next()); }

    double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n) via 128-bit multiply (Lemire, no rejection;
    // bias is below 2^-64 * n).
    std::size_t below(std::size_t n) noexcept {
        return static_cast<std::size_t>(
            (static_cast<unsigned __int128>(next()) * n) >> 64);
    }

    template <typename Container>
    void shuffle(Container& c) noexcept {
        for (std::size_t i = c.size(); i > 1; --i) {
            std::size_t j = below(i);
            using std::swap;
            swap(c[i - 1], c[j]);
        }
    }

    std::uint64_t seed() const noexcept { return seed_; }
    std::uint64_t position() const noexcept { return counter_; }

private:
    std::uint64_t seed_;
    std::uint64_t counter_ = 0;
};

}  // namespace map2seq
