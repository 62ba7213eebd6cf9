#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace heatlab {

/// Philox4x32-10 block function (Salmon et al., SC'11). Stateless: the
/// output is a pure function of (counter, key).
inline std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr,
                                               std::array<std::uint32_t, 2> key) {
    constexpr std::uint32_t kM0 = 0xD2511F53u;
    constexpr std::uint32_t kM1 = 0xCD9E8D57u;
    constexpr std::uint32_t kW0 = 0x9E3779B9u;
    constexpr std::uint32_t kW1 = 0xBB67AE85u;
    for (int round = 0; round < 10; ++round) {
        const std::uint64_t p0 = static_cast<std::uint64_t>(kM0) * ctr[0];
        const std::uint64_t p1 = static_cast<std::uint64_t>(kM1) * ctr[2];
        const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
        const auto lo0 = static_cast<std::uint32_t>(p0);
        const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
        const auto lo1 = static_cast<std::uint32_t>(p1);
        ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
        key[0] += kW0;
        key[1] += kW1;
    }
    return ctr;
}

/// Independent families of streams under one seed.
enum class StreamTag : std::uint32_t {
    kernel = 1,
    survival = 2,
    exit_law = 3,
    exit_inner = 4,
    directions = 5,
    test = 6,
};

/// Counter-based stream for path `index` under `seed`: the n-th block is
/// philox(counter = (n, index_lo, index_hi ^ tag), key = seed). Any path
/// can be regenerated without touching the others.
class UniformStream {
public:
    UniformStream(std::uint64_t seed, std::uint64_t index, StreamTag tag)
        : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
          index_lo_(static_cast<std::uint32_t>(index)),
          index_hi_(static_cast<std::uint32_t>(index >> 32) ^ (static_cast<std::uint32_t>(tag) << 24)) {}

    /// Uniform double in the open interval (0,1) with 53 random bits.
    double next() {
        if (pos_ >= 4) refill();
        const std::uint32_t a = block_[pos_++];
        if (pos_ >= 4) refill();
        const std::uint32_t b = block_[pos_++];
        const std::uint64_t bits = (static_cast<std::uint64_t>(a >> 5) << 26) | (b >> 6);
        return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
    }

private:
    void refill() {
        block_ = philox4x32({counter_++, index_lo_, index_hi_, 0u}, key_);
        pos_ = 0;
    }

    std::array<std::uint32_t, 2> key_;
    std::uint32_t index_lo_;
    std::uint32_t index_hi_;
    std::uint32_t counter_ = 0;
    std::array<std::uint32_t, 4> block_{};
    int pos_ = 4;
};

/// Standard normal draws by Box-Muller on a UniformStream.
class NormalStream {
public:
    NormalStream(std::uint64_t seed, std::uint64_t index, StreamTag tag) : u_(seed, index, tag) {}

    double next() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double r = std::sqrt(-2.0 * std::log(u_.next()));
        const double a = 2.0 * std::numbers::pi * u_.next();
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

    double uniform() { return u_.next(); }

private:
    UniformStream u_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace heatlab
