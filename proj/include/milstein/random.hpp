#pragma once

// Counter-based normal variates. Every Gaussian used anywhere in the library is
// a pure function of (master seed, path index, stream component, draw index),
// so results never depend on how paths are scheduled across threads.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>

namespace milstein {

/// Philox4x32-10 block function (Salmon et al., "Parallel random numbers: as
/// easy as 1, 2, 3").
class Philox4x32 {
  public:
    using Counter = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    static constexpr Counter apply(Counter ctr, Key key) noexcept {
        for (int round = 0; round < 10; ++round) {
            ctr = single_round(ctr, key);
            key[0] += kWeyl0;
            key[1] += kWeyl1;
        }
        return ctr;
    }

  private:
    static constexpr std::uint32_t kMul0 = 0xD2511F53u;
    static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
    static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
    static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

    static constexpr Counter single_round(const Counter& c, const Key& k) noexcept {
        const std::uint64_t p0 = std::uint64_t{kMul0} * c[0];
        const std::uint64_t p1 = std::uint64_t{kMul1} * c[2];
        const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
        const auto lo0 = static_cast<std::uint32_t>(p0);
        const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
        const auto lo1 = static_cast<std::uint32_t>(p1);
        return {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
    }
};

/// Identifies one independent Gaussian stream.
struct StreamKey {
    std::uint64_t master_seed = 0;
    std::uint64_t path_index = 0;
    std::uint32_t component = 0;

    friend bool operator==(const StreamKey&, const StreamKey&) = default;
};

// Component namespaces. Streams with different components are independent.
namespace stream {
inline constexpr std::uint32_t kDriver = 0x0000;      // + Brownian coordinate
inline constexpr std::uint32_t kLimitDriver = 0x1000; // driver W of limit draws
inline constexpr std::uint32_t kAuxB = 0x2000;        // + flat (p,i,j) index
inline constexpr std::uint32_t kAuxWbar = 0x3000;     // + p
inline constexpr std::uint32_t kLemma = 0x4000;       // + Brownian label
} // namespace stream

/// Random-access standard normal stream. Draw k comes from Philox block k/2
/// through the Box-Muller transform.
class NormalStream {
  public:
    explicit NormalStream(const StreamKey& key) noexcept
        : key_{static_cast<std::uint32_t>(key.master_seed),
               static_cast<std::uint32_t>(key.master_seed >> 32)},
          component_(key.component),
          path_lo_(static_cast<std::uint32_t>(key.path_index)),
          path_hi_(static_cast<std::uint32_t>(key.path_index >> 32)) {}

    /// Draws 2*block and 2*block+1.
    std::array<double, 2> pair(std::uint32_t block) const noexcept {
        const auto out = Philox4x32::apply({block, component_, path_lo_, path_hi_}, key_);
        const std::uint64_t a = (std::uint64_t{out[0]} << 32) | out[1];
        const std::uint64_t b = (std::uint64_t{out[2]} << 32) | out[3];
        const double u1 = to_open_unit(a);
        const double u2 = to_open_unit(b);
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * std::numbers::pi * u2;
        return {radius * std::cos(angle), radius * std::sin(angle)};
    }

    double at(std::uint64_t index) const noexcept {
        return pair(static_cast<std::uint32_t>(index / 2))[index % 2];
    }

    /// Writes draws 0..out.size()-1, scaled by `scale`.
    void fill(std::span<double> out, double scale = 1.0) const noexcept {
        const std::size_t n = out.size();
        std::size_t k = 0;
        for (std::uint32_t block = 0; k + 1 < n; ++block, k += 2) {
            const auto z = pair(block);
            out[k] = scale * z[0];
            out[k + 1] = scale * z[1];
        }
        if (k < n) out[k] = scale * pair(static_cast<std::uint32_t>(k / 2))[0];
    }

  private:
    // (0,1) open interval from the top 53 bits.
    static double to_open_unit(std::uint64_t bits) noexcept {
        return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
    }

    Philox4x32::Key key_;
    std::uint32_t component_;
    std::uint32_t path_lo_;
    std::uint32_t path_hi_;
};

} // namespace milstein
