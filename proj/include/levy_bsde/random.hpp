#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace levy_bsde {

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11).
/// A block is a pure function of (key, counter), so any draw can be
/// regenerated without replaying a sequential stream.
class Philox4x32 {
public:
    using Counter = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    explicit constexpr Philox4x32(std::uint64_t seed) noexcept
        : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)} {}

    constexpr Counter operator()(Counter ctr) const noexcept {
        Key key = key_;
        for (int round = 0; round < 10; ++round) {
            ctr = single_round(ctr, key);
            key[0] += kWeylA;
            key[1] += kWeylB;
        }
        return ctr;
    }

private:
    static constexpr std::uint32_t kMulA = 0xD2511F53u;
    static constexpr std::uint32_t kMulB = 0xCD9E8D57u;
    static constexpr std::uint32_t kWeylA = 0x9E3779B9u;
    static constexpr std::uint32_t kWeylB = 0xBB67AE85u;

    static constexpr Counter single_round(const Counter& c, const Key& k) noexcept {
        const std::uint64_t p0 = static_cast<std::uint64_t>(kMulA) * c[0];
        const std::uint64_t p1 = static_cast<std::uint64_t>(kMulB) * c[2];
        const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
        const auto lo0 = static_cast<std::uint32_t>(p0);
        const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
        const auto lo1 = static_cast<std::uint32_t>(p1);
        return {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
    }

    Key key_;
};

/// Independent substream identified by (path, step, tag). Draws are
/// consumed sequentially within the substream; two uniforms per block.
class StreamRng {
public:
    StreamRng(std::uint64_t seed, std::uint64_t path, std::uint32_t step, std::uint32_t tag) noexcept
        : gen_(seed), path_(path), step_(step), tag_(tag) {}

    /// Uniform on the open interval (0, 1) with 53 random bits.
    double uniform() noexcept {
        if (cursor_ == 2) refill();
        const std::uint64_t bits = buffer_[cursor_++] >> 11;
        return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
    }

    /// Standard normal via Box-Muller; the second variate is cached.
    double normal() noexcept {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = uniform();
        const double u2 = uniform();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * std::numbers::pi * u2;
        spare_ = radius * std::sin(angle);
        has_spare_ = true;
        return radius * std::cos(angle);
    }

    /// Poisson(mean) by exact inversion. Means above 10 are split into
    /// equal pieces of at most 10 whose counts are summed.
    std::uint32_t poisson(double mean) noexcept {
        if (!(mean > 0.0)) return 0;
        const int pieces = mean <= kInversionLimit ? 1 : static_cast<int>(std::ceil(mean / kInversionLimit));
        const double piece_mean = mean / pieces;
        std::uint32_t total = 0;
        for (int i = 0; i < pieces; ++i) total += invert_poisson(piece_mean);
        return total;
    }

private:
    static constexpr double kInversionLimit = 10.0;

    std::uint32_t invert_poisson(double mean) noexcept {
        const double u = uniform();
        double prob = std::exp(-mean);
        double cdf = prob;
        std::uint32_t k = 0;
        // Tail beyond ~60 for mean <= 10 has mass below 1e-30.
        while (u > cdf && k < 200) {
            ++k;
            prob *= mean / k;
            cdf += prob;
            if (prob == 0.0) break;
        }
        return k;
    }

    void refill() noexcept {
        const Philox4x32::Counter ctr{block_++, step_, static_cast<std::uint32_t>(path_),
                                      (tag_ << 8) ^ static_cast<std::uint32_t>(path_ >> 32)};
        const auto out = gen_(ctr);
        buffer_[0] = (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
        buffer_[1] = (static_cast<std::uint64_t>(out[2]) << 32) | out[3];
        cursor_ = 0;
    }

    Philox4x32 gen_;
    std::uint64_t path_;
    std::uint32_t step_;
    std::uint32_t tag_;
    std::uint32_t block_ = 0;
    std::array<std::uint64_t, 2> buffer_{};
    int cursor_ = 2;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

/// Substream tags. Atom j uses kAtomTagBase + j.
inline constexpr std::uint32_t kBrownianTag = 1;
inline constexpr std::uint32_t kAtomTagBase = 16;
inline constexpr std::uint32_t kSamplerTag = 0xAB;

}  // namespace levy_bsde
