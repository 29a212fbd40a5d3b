#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

// Counter-based random numbers.
//
// Every draw is a pure function of (seed, stream, counter), so any partition
// of the work into chunks or threads reproduces the same numbers.

namespace spinboost {

/// Philox4x32-10 counter-based generator.
class Philox4x32
{
  public:
    using Counter = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    static Counter generate(Counter ctr, Key key)
    {
        for (int round = 0; round < 10; ++round)
        {
            if (round > 0)
            {
                key[0] += kW0;
                key[1] += kW1;
            }
            std::uint64_t const p0 = std::uint64_t{kM0} * ctr[0];
            std::uint64_t const p1 = std::uint64_t{kM1} * ctr[2];
            auto const hi0 = static_cast<std::uint32_t>(p0 >> 32);
            auto const lo0 = static_cast<std::uint32_t>(p0);
            auto const hi1 = static_cast<std::uint32_t>(p1 >> 32);
            auto const lo1 = static_cast<std::uint32_t>(p1);
            ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
        }
        return ctr;
    }

  private:
    static constexpr std::uint32_t kM0 = 0xD2511F53;
    static constexpr std::uint32_t kM1 = 0xCD9E8D57;
    static constexpr std::uint32_t kW0 = 0x9E3779B9;
    static constexpr std::uint32_t kW1 = 0xBB67AE85;
};

/// SplitMix64 finalizer, used to derive child seeds.
inline std::uint64_t mix64(std::uint64_t z)
{
    z += 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index)
{
    return mix64(mix64(seed) ^ (index * 0xD6E8FEB86659FD93ull));
}

/*!
 * Stream of standard normals addressed by (seed, stream, counter).
 *
 * Each counter yields one Philox block, i.e. two uniforms in (0, 1) and,
 * via Box-Muller, two independent standard normals.
 */
class CounterRng
{
  public:
    CounterRng(std::uint64_t seed, std::uint64_t stream)
        : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
          stream_(stream)
    {
    }

    std::array<double, 2> uniform_pair(std::uint64_t counter) const
    {
        Philox4x32::Counter const ctr{static_cast<std::uint32_t>(counter),
                                      static_cast<std::uint32_t>(counter >> 32),
                                      static_cast<std::uint32_t>(stream_),
                                      static_cast<std::uint32_t>(stream_ >> 32)};
        auto const out = Philox4x32::generate(ctr, key_);
        auto to_unit = [](std::uint32_t hi, std::uint32_t lo) {
            std::uint64_t const bits = (std::uint64_t{hi} << 32) | lo;
            return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
        };
        return {to_unit(out[0], out[1]), to_unit(out[2], out[3])};
    }

    std::array<double, 2> normal_pair(std::uint64_t counter) const
    {
        auto const [u1, u2] = uniform_pair(counter);
        double const r = std::sqrt(-2.0 * std::log(u1));
        double const phi = 2.0 * std::numbers::pi * u2;
        return {r * std::cos(phi), r * std::sin(phi)};
    }

  private:
    Philox4x32::Key key_;
    std::uint64_t stream_;
};

} // namespace spinboost
