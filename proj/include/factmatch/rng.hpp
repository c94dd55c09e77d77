#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <utility>

namespace factmatch {

/// Seeded generator used everywhere randomness matters. std::shuffle and the
/// std distributions are implementation-defined, so sampling goes through the
/// helpers below to keep outputs identical across standard libraries.
using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t seed)
{
    return Rng{seed};
}

/// Uniform integer in [0, n). n must be > 0.
inline std::size_t uniform_index(Rng& rng, std::size_t n)
{
    const std::uint64_t bound = static_cast<std::uint64_t>(n);
    const std::uint64_t limit = Rng::max() - (Rng::max() % bound) - 1;
    std::uint64_t draw = rng();
    while (draw > limit) {
        draw = rng();
    }
    return static_cast<std::size_t>(draw % bound);
}

/// Fisher-Yates.
template <typename T>
void shuffle_in_place(std::span<T> items, Rng& rng)
{
    for (std::size_t i = items.size(); i > 1; --i) {
        std::size_t j = uniform_index(rng, i);
        std::swap(items[i - 1], items[j]);
    }
}

}  // namespace factmatch
