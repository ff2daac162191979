/*
   Copyright 2026 The gsm2sim Authors

   Licensed under the Apache License, Version 2.0 (the "License");
   you may not use this file except in compliance with the License.
   You may obtain a copy of the License at

       http://www.apache.org/licenses/LICENSE-2.0

   Unless required by applicable law or agreed to in writing, software
   distributed under the License is distributed on an "AS IS" BASIS,
   WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
   See the License for the specific language governing permissions and
   limitations under the License.
*/

//! \file random.hpp
//! Counter-based random streams (Philox4x32-10) and the variate samplers used
//! throughout the simulator.
//!
//! Every replicate owns one stream keyed by the master seed and indexed by a
//! 64-bit stream id, so streams never overlap and a (seed, replicate) pair
//! reproduces the same sequence on any platform. The samplers below are
//! implemented here rather than taken from <random> because the standard
//! distributions are implementation-defined.

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>

#include "gsm2/errors.hpp"

namespace gsm2 {

inline constexpr const char* kRngAlgorithm = "philox4x32-10";

/// Raw Philox4x32 block function with 10 rounds.
class Philox4x32 {
public:
    using Counter = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    static constexpr Counter apply(Counter ctr, Key key) noexcept {
        ctr = round(ctr, key);
        for (int i = 1; i < 10; ++i) {
            key[0] += kW0;
            key[1] += kW1;
            ctr = round(ctr, key);
        }
        return ctr;
    }

private:
    static constexpr std::uint32_t kM0 = 0xD2511F53u;
    static constexpr std::uint32_t kM1 = 0xCD9E8D57u;
    static constexpr std::uint32_t kW0 = 0x9E3779B9u;
    static constexpr std::uint32_t kW1 = 0xBB67AE85u;

    static constexpr Counter round(const Counter& c, const Key& k) noexcept {
        const std::uint64_t p0 = std::uint64_t{kM0} * c[0];
        const std::uint64_t p1 = std::uint64_t{kM1} * c[2];
        const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
        const auto lo0 = static_cast<std::uint32_t>(p0);
        const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
        const auto lo1 = static_cast<std::uint32_t>(p1);
        return {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
    }
};

/// A reproducible random stream. Satisfies UniformRandomBitGenerator.
///
/// Counter layout: words 0-1 hold the block index, words 2-3 the stream id.
/// Key: the 64-bit master seed.
class RngStream {
public:
    using result_type = std::uint64_t;

    RngStream() : RngStream(0, 0) {}
    RngStream(std::uint64_t seed, std::uint64_t stream_id)
        : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
          stream_id_(stream_id) {}

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type operator()() {
        if (pos_ >= 2) refill();
        const std::uint64_t hi = block_[2 * pos_];
        const std::uint64_t lo = block_[2 * pos_ + 1];
        ++pos_;
        return (hi << 32) | lo;
    }

    std::uint64_t stream_id() const { return stream_id_; }
    std::uint64_t blocks_used() const { return block_index_; }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

    /// Uniform on the open interval (0, 1); safe for log().
    double uniform_open() {
        return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer on [0, n). Lemire's multiply-shift with rejection.
    std::uint64_t uniform_index(std::uint64_t n) {
        if (n == 0) throw InputError("uniform_index: empty range");
        const unsigned __int128 full = static_cast<unsigned __int128>((*this)()) * n;
        auto low = static_cast<std::uint64_t>(full);
        if (low < n) {
            const std::uint64_t threshold = (0 - n) % n;
            auto m = full;
            while (low < threshold) {
                m = static_cast<unsigned __int128>((*this)()) * n;
                low = static_cast<std::uint64_t>(m);
            }
            return static_cast<std::uint64_t>(m >> 64);
        }
        return static_cast<std::uint64_t>(full >> 64);
    }

    /// Exp(1) variate.
    double exponential() { return -std::log(uniform_open()); }

    double exponential(double rate) { return exponential() / rate; }

    /// Standard normal, Box-Muller with the second variate cached.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = uniform_open();
        const double u2 = uniform();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * std::numbers::pi * u2;
        spare_ = radius * std::sin(angle);
        has_spare_ = true;
        return radius * std::cos(angle);
    }

    /// Poisson variate. Multiplication method below mean 10, otherwise the
    /// PTRS transformed-rejection sampler (Hormann 1993).
    std::uint64_t poisson(double mean) {
        if (!(mean >= 0.0) || !std::isfinite(mean))
            throw InputError("poisson: mean must be finite and non-negative");
        if (mean == 0.0) return 0;
        if (mean < 10.0) {
            const double limit = std::exp(-mean);
            std::uint64_t k = 0;
            double prod = uniform_open();
            while (prod > limit) {
                ++k;
                prod *= uniform_open();
            }
            return k;
        }
        const double slam = std::sqrt(mean);
        const double loglam = std::log(mean);
        const double b = 0.931 + 2.53 * slam;
        const double a = -0.059 + 0.02483 * b;
        const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
        const double vr = 0.9277 - 3.6224 / (b - 2.0);
        for (;;) {
            const double u = uniform() - 0.5;
            const double v = uniform_open();
            const double us = 0.5 - std::fabs(u);
            const double k = std::floor((2.0 * a / us + b) * u + mean + 0.43);
            if (us >= 0.07 && v <= vr) return static_cast<std::uint64_t>(k);
            if (k < 0.0 || (us < 0.013 && v > us)) continue;
            if (std::log(v) + std::log(inv_alpha) - std::log(a / (us * us) + b) <=
                -mean + k * loglam - std::lgamma(k + 1.0))
                return static_cast<std::uint64_t>(k);
        }
    }

    /// Bernoulli(p).
    bool bernoulli(double p) { return uniform() < p; }

    /// Draws an index from non-negative weights via their running sum.
    /// `cumulative` must be non-decreasing with a positive last entry.
    std::size_t from_cumulative(std::span<const double> cumulative) {
        if (cumulative.empty() || !(cumulative.back() > 0.0))
            throw InternalError("from_cumulative: zero total weight");
        const double target = uniform() * cumulative.back();
        std::size_t lo = 0, hi = cumulative.size() - 1;
        while (lo < hi) {
            const std::size_t mid = lo + (hi - lo) / 2;
            if (cumulative[mid] > target)
                hi = mid;
            else
                lo = mid + 1;
        }
        return lo;
    }

private:
    void refill() {
        const Philox4x32::Counter ctr{static_cast<std::uint32_t>(block_index_),
                                      static_cast<std::uint32_t>(block_index_ >> 32),
                                      static_cast<std::uint32_t>(stream_id_),
                                      static_cast<std::uint32_t>(stream_id_ >> 32)};
        block_ = Philox4x32::apply(ctr, key_);
        ++block_index_;
        pos_ = 0;
    }

    Philox4x32::Key key_;
    std::uint64_t stream_id_;
    std::uint64_t block_index_ = 0;
    Philox4x32::Counter block_{};
    int pos_ = 2;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

/// Sub-stream purposes within one replicate. Up to 256 purposes per replicate.
enum class Substream : std::uint64_t { initial = 0, dynamics = 1, chemistry = 2, analysis = 3, motion = 4 };

/// Stream for (replicate, purpose) under a master seed. Collision-free for
/// replicate ids below 2^56.
inline RngStream replicate_stream(std::uint64_t master_seed, std::uint64_t replicate,
                                  Substream purpose = Substream::dynamics) {
    return RngStream(master_seed, (replicate << 8) | static_cast<std::uint64_t>(purpose));
}

}  // namespace gsm2
