#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>

namespace blockuniv {

namespace detail {

constexpr std::uint64_t splitmix64(std::uint64_t z) noexcept {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

}  // namespace detail

/// Identifies one random stream. Keys form a tree: `child(i)` derives an
/// independent key for sub-stream i, so e.g. (seed, replicate, row) maps to
/// `StreamKey(seed).child(replicate).child(row)` and the draws of a row do not
/// depend on the order in which rows are generated.
class StreamKey {
public:
    constexpr explicit StreamKey(std::uint64_t seed) noexcept
        : value_(detail::splitmix64(seed ^ 0x6A09E667F3BCC909ULL)) {}

    constexpr StreamKey child(std::uint64_t index) const noexcept {
        return StreamKey(Raw{}, detail::splitmix64(value_ ^ detail::splitmix64(index + 0x3C6EF372FE94F82BULL)));
    }

    constexpr std::uint64_t value() const noexcept { return value_; }

private:
    struct Raw {};
    constexpr StreamKey(Raw, std::uint64_t v) noexcept : value_(v) {}
    std::uint64_t value_;
};

/// Counter-based generator: the k-th output is a pure function of (key, k).
/// Satisfies UniformRandomBitGenerator.
class KeyedStream {
public:
    using result_type = std::uint64_t;

    constexpr explicit KeyedStream(StreamKey key) noexcept : key_(key.value()) {}

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    constexpr result_type operator()() noexcept {
        const std::uint64_t c = counter_++;
        return detail::splitmix64(detail::splitmix64(c) ^ key_);
    }

    /// Uniform on [0, 1).
    double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

    /// Standard normal via Box-Muller. Implemented here rather than with
    /// std::normal_distribution so that outputs are identical across standard libraries.
    double normal() noexcept {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = 1.0 - uniform();  // (0, 1]
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(angle);
        has_spare_ = true;
        return r * std::cos(angle);
    }

    /// +1 or -1 with equal probability.
    double rademacher() noexcept { return ((*this)() >> 63) ? 1.0 : -1.0; }

    /// Uniform integer in [0, bound). Bound must be positive.
    std::uint64_t below(std::uint64_t bound) noexcept {
        // Lemire's multiply-shift with rejection.
        while (true) {
            const unsigned __int128 m = static_cast<unsigned __int128>((*this)()) * bound;
            const auto low = static_cast<std::uint64_t>(m);
            if (low >= bound || low >= (0 - bound) % bound) {
                return static_cast<std::uint64_t>(m >> 64);
            }
        }
    }

    bool bernoulli(double prob) noexcept { return uniform() < prob; }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace blockuniv
