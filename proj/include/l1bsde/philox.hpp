#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <utility>

namespace l1bsde {

/**
 * Philox4x32-10 counter-based generator (Salmon, Moraes, Dror, Shaw, SC'11).
 *
 * Output is a pure function of (counter, key), so draws are addressable and
 * reproducible regardless of evaluation order or thread count.
 */
class Philox4x32 {
public:
    using Counter = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    static Counter generate(Counter ctr, Key key) noexcept {
        for (int round = 0; round < 10; ++round) {
            if (round > 0) {
                key[0] += kWeyl0;
                key[1] += kWeyl1;
            }
            ctr = single_round(ctr, key);
        }
        return ctr;
    }

    static Key key_from_seed(std::uint64_t seed) noexcept {
        return Key{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32U)};
    }

private:
    static constexpr std::uint32_t kMul0 = 0xD2511F53U;
    static constexpr std::uint32_t kMul1 = 0xCD9E8D57U;
    static constexpr std::uint32_t kWeyl0 = 0x9E3779B9U;
    static constexpr std::uint32_t kWeyl1 = 0xBB67AE85U;

    static Counter single_round(const Counter& c, const Key& k) noexcept {
        const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * c[0];
        const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * c[2];
        const auto hi0 = static_cast<std::uint32_t>(p0 >> 32U);
        const auto lo0 = static_cast<std::uint32_t>(p0);
        const auto hi1 = static_cast<std::uint32_t>(p1 >> 32U);
        const auto lo1 = static_cast<std::uint32_t>(p1);
        return Counter{hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
    }
};

/// Maps two 32-bit words to a double in the open interval (0, 1).
inline double open_unit_interval(std::uint32_t hi, std::uint32_t lo) noexcept {
    const std::uint64_t bits = ((static_cast<std::uint64_t>(hi) << 32U) | lo) >> 11U;
    return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
}

/// Two independent standard normals (Box-Muller) from one Philox block.
inline std::pair<double, double> normal_pair(const Philox4x32::Counter& ctr, const Philox4x32::Key& key) noexcept {
    const auto r = Philox4x32::generate(ctr, key);
    const double u1 = open_unit_interval(r[0], r[1]);
    const double u2 = open_unit_interval(r[2], r[3]);
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    return {radius * std::cos(angle), radius * std::sin(angle)};
}

/// Uniform (0,1) stream addressed by (stream id, index); used for resampling.
inline double addressed_uniform(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) noexcept {
    const Philox4x32::Counter ctr{static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32U),
                                  static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32U)};
    const auto r = Philox4x32::generate(ctr, Philox4x32::key_from_seed(seed));
    return open_unit_interval(r[0], r[1]);
}

} // namespace l1bsde
