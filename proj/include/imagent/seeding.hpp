// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string_view>

namespace imagent
{

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept
{
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a64(std::string_view text) noexcept
{
    std::uint64_t h = 0xCBF29CE484222325ull;
    for (unsigned char c: text)
    {
        h ^= c;
        h *= 0x100000001B3ull;
    }
    return h;
}

/// Seed for candidate `candidate` of step `step` in a run seeded with `run_seed`.
constexpr std::uint64_t derive_seed(std::uint64_t run_seed, int step, int candidate) noexcept
{
    auto h = splitmix64(run_seed);
    h = splitmix64(h ^ static_cast<std::uint64_t>(step));
    return splitmix64(h ^ (static_cast<std::uint64_t>(candidate) << 32));
}

/// Uniform double in [0, 1) from the top 53 bits of a 64-bit draw.
constexpr double unit_interval(std::uint64_t bits) noexcept
{
    return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

} // namespace imagent
