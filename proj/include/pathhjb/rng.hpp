#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace pathhjb {

// Philox4x32-10 counter-based generator. A draw is a pure function of
// (key, counter), so any trajectory/step can be regenerated in isolation.
class Philox4x32 {
public:
    using Block = std::array<std::uint32_t, 4>;

    explicit Philox4x32(std::uint64_t seed)
        : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)} {}

    Block operator()(std::uint64_t stream, std::uint64_t index) const {
        Block ctr{static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32),
                  static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
        std::array<std::uint32_t, 2> key = key_;
        for (int round = 0; round < 10; ++round) {
            const std::uint64_t p0 = std::uint64_t{kMul0} * ctr[0];
            const std::uint64_t p1 = std::uint64_t{kMul1} * ctr[2];
            const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
            const auto lo0 = static_cast<std::uint32_t>(p0);
            const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
            const auto lo1 = static_cast<std::uint32_t>(p1);
            ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
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
    std::array<std::uint32_t, 2> key_;
};

// Open-interval uniform in (0,1) from two 32-bit words (53 significant bits).
inline double to_unit(std::uint32_t hi, std::uint32_t lo) {
    const std::uint64_t bits = ((std::uint64_t{hi} << 32) | lo) >> 11;
    return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
}

// Box-Muller on one Philox block: two independent standard normals.
inline std::array<double, 2> normal_pair(const Philox4x32::Block& block) {
    const double u1 = to_unit(block[0], block[1]);
    const double u2 = to_unit(block[2], block[3]);
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    return {radius * std::cos(angle), radius * std::sin(angle)};
}

// Sequential view over one Philox stream, for sampling that is not indexed by
// (trajectory, step): probe paths, ball samples, random test fixtures.
class RandomStream {
public:
    RandomStream(std::uint64_t seed, std::uint64_t stream) : gen_(seed), stream_(stream) {}

    double uniform() {
        const auto block = gen_(stream_, counter_++);
        return to_unit(block[0], block[1]);
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const auto pair = normal_pair(gen_(stream_, counter_++));
        spare_ = pair[1];
        has_spare_ = true;
        return pair[0];
    }

    std::uint64_t below(std::uint64_t bound) {
        const auto block = gen_(stream_, counter_++);
        const std::uint64_t bits = (std::uint64_t{block[0]} << 32) | block[1];
        return bound == 0 ? 0 : bits % bound;
    }

private:
    Philox4x32 gen_;
    std::uint64_t stream_;
    std::uint64_t counter_ = 0;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace pathhjb
