#pragma once

// Counter-based random numbers for reproducible Monte Carlo ensembles.
//
// Every Gaussian draw is a pure function of (trajectory key, step, block):
//
//   trajectory key  = splitmix64(base_seed + k * 0x9E3779B97F4A7C15)
//                     for trajectory index k, i.e. the (k+1)-th output of a
//                     SplitMix64 generator seeded with base_seed
//   Philox4x32-10   key   = (low word, high word) of the trajectory key
//                   counter = (step low, step high, block, 0)
//
// One Philox block yields two 53-bit uniforms and, through Box-Muller, two
// standard normals. Results therefore do not depend on how trajectories are
// scheduled across workers or on which steps a caller decides to skip.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace strobosq {

inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Seed of trajectory `index` in an ensemble started from `base_seed`.
inline constexpr std::uint64_t trajectory_seed(std::uint64_t base_seed, std::uint64_t index) {
    return splitmix64(base_seed + index * 0x9E3779B97F4A7C15ULL);
}

class Philox4x32 {
public:
    using Counter = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    static constexpr Counter generate(Counter ctr, Key key) {
        for (int round = 0; round < 10; ++round) {
            if (round > 0) {
                key[0] += kWeyl0;
                key[1] += kWeyl1;
            }
            ctr = single_round(ctr, key);
        }
        return ctr;
    }

private:
    static constexpr std::uint32_t kMul0 = 0xD2511F53;
    static constexpr std::uint32_t kMul1 = 0xCD9E8D57;
    static constexpr std::uint32_t kWeyl0 = 0x9E3779B9;
    static constexpr std::uint32_t kWeyl1 = 0xBB67AE85;

    static constexpr Counter single_round(const Counter& c, const Key& k) {
        const std::uint64_t p0 = std::uint64_t{kMul0} * c[0];
        const std::uint64_t p1 = std::uint64_t{kMul1} * c[2];
        const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
        const auto lo0 = static_cast<std::uint32_t>(p0);
        const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
        const auto lo1 = static_cast<std::uint32_t>(p1);
        return {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
    }
};

/// Gaussian stream addressed by (step, block) for one trajectory.
class NormalStream {
public:
    explicit constexpr NormalStream(std::uint64_t trajectory_key)
        : key_{static_cast<std::uint32_t>(trajectory_key),
               static_cast<std::uint32_t>(trajectory_key >> 32)} {}

    /// Two independent standard normals for (step, block).
    std::array<double, 2> pair(std::uint64_t step, std::uint32_t block) const {
        const auto r = Philox4x32::generate({static_cast<std::uint32_t>(step),
                                             static_cast<std::uint32_t>(step >> 32), block, 0},
                                            key_);
        const double u1 = to_unit_open(r[0], r[1]);  // (0, 1]
        const double u2 = to_unit_open(r[2], r[3]);
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * std::numbers::pi * u2;
        return {radius * std::cos(angle), radius * std::sin(angle)};
    }

private:
    static double to_unit_open(std::uint32_t lo, std::uint32_t hi) {
        const std::uint64_t bits = (std::uint64_t{hi} << 32 | lo) >> 11;
        return (static_cast<double>(bits) + 1.0) * 0x1.0p-53;
    }

    Philox4x32::Key key_;
};

}  // namespace strobosq
