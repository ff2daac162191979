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

//! \file state.hpp
//! The lesion point measure: positions of sub-lethal (X) and lethal (Y)
//! lesions at a given time, plus the functionals evaluated on it.

#pragma once

#include <array>
#include <cstdint>
#include <utility>
#include <vector>

#include "gsm2/geometry.hpp"
#include "gsm2/grid.hpp"
#include "gsm2/kernel.hpp"

namespace gsm2 {

enum class LesionType { X, Y };

inline const char* to_string(LesionType t) { return t == LesionType::X ? "X" : "Y"; }

enum class Channel { repair = 0, death = 1, pair_lethal = 2, pair_repair = 3, irradiation = 4 };

inline constexpr std::array<Channel, 5> kAllChannels{Channel::repair, Channel::death,
                                                     Channel::pair_lethal, Channel::pair_repair,
                                                     Channel::irradiation};

inline const char* to_string(Channel c) {
    switch (c) {
        case Channel::repair: return "repair";
        case Channel::death: return "death";
        case Channel::pair_lethal: return "pair_lethal";
        case Channel::pair_repair: return "pair_repair";
        case Channel::irradiation: return "irradiation";
    }
    return "?";
}

namespace detail {
struct StateAccess;
}

/// Lesion configuration at one time. Lesions of one type are
/// indistinguishable: the storage order carries no meaning.
///
/// Only the jump engine, the diffusion stepper and the irradiation samplers
/// mutate a state (through detail::StateAccess).
class SystemState {
public:
    SystemState() = default;
    SystemState(double time, std::vector<Point> xs, std::vector<Point> ys)
        : time_(time), xs_(std::move(xs)), ys_(std::move(ys)) {}

    double time() const { return time_; }
    const std::vector<Point>& xs() const { return xs_; }
    const std::vector<Point>& ys() const { return ys_; }
    std::size_t n_x() const { return xs_.size(); }
    std::size_t n_y() const { return ys_.size(); }
    std::size_t total() const { return xs_.size() + ys_.size(); }
    std::uint64_t events(Channel c) const { return tally_[static_cast<int>(c)]; }

private:
    friend struct detail::StateAccess;

    double time_ = 0.0;
    std::vector<Point> xs_;
    std::vector<Point> ys_;
    std::array<std::uint64_t, 5> tally_{};
};

namespace detail {
struct StateAccess {
    static std::vector<Point>& xs(SystemState& s) { return s.xs_; }
    static std::vector<Point>& ys(SystemState& s) { return s.ys_; }
    static void set_time(SystemState& s, double t) { s.time_ = t; }
    static void count(SystemState& s, Channel c) { ++s.tally_[static_cast<int>(c)]; }

    /// Removes element i in O(1); order is not meaningful.
    static void swap_remove(std::vector<Point>& v, std::size_t i) {
        v[i] = v.back();
        v.pop_back();
    }
};
}  // namespace detail

/// Indices of X lesions left out of a concentration sum (the focal lesions of
/// the rate being evaluated).
struct Exclusion {
    static constexpr std::size_t kNone = static_cast<std::size_t>(-1);
    std::size_t first = kNone;
    std::size_t second = kNone;

    bool skips(std::size_t i) const { return i == first || i == second; }
};

/// <Gamma_q, nu>: the kernel-weighted lesion mass seen from q.
inline double kernel_mass(const Point& q, const Kernel& kernel, const SystemState& state,
                          Exclusion exclude = {}) {
    if (kernel.is_constant()) {
        std::size_t n = 0;
        if (kernel.includes_x()) {
            n += state.n_x();
            if (exclude.first != Exclusion::kNone && exclude.first < state.n_x()) --n;
            if (exclude.second != Exclusion::kNone && exclude.second < state.n_x()) --n;
        }
        if (kernel.includes_y()) n += state.n_y();
        return kernel.constant_value() * static_cast<double>(n);
    }
    const auto radius = kernel.support_radius();
    const double r2 = radius ? *radius * *radius : 0.0;
    double sum = 0.0;
    if (kernel.includes_x()) {
        const auto& xs = state.xs();
        for (std::size_t i = 0; i < xs.size(); ++i) {
            if (exclude.skips(i)) continue;
            const double d2 = distance2(q, xs[i]);
            if (radius && d2 >= r2) continue;
            sum += kernel(std::sqrt(d2));
        }
    }
    if (kernel.includes_y()) {
        for (const auto& y : state.ys()) {
            const double d2 = distance2(q, y);
            if (radius && d2 >= r2) continue;
            sum += kernel(std::sqrt(d2));
        }
    }
    return sum;
}

struct Counts {
    std::size_t x = 0;
    std::size_t y = 0;
    friend bool operator==(const Counts&, const Counts&) = default;
};

inline Counts marginal_counts(const SystemState& state) { return {state.n_x(), state.n_y()}; }

/// Cell-wise densities of the rescaled measure nu / K.
struct DensityFields {
    std::vector<double> x;
    std::vector<double> y;
};

inline DensityFields empirical_measure(const SystemState& state, double scale, const Grid& grid) {
    if (!(scale > 0.0)) throw InputError("empirical_measure: scale must be positive");
    DensityFields f{std::vector<double>(grid.size(), 0.0), std::vector<double>(grid.size(), 0.0)};
    const double unit = 1.0 / (scale * grid.cell_volume());
    for (const auto& q : state.xs()) f.x[grid.locate(q)] += unit;
    for (const auto& q : state.ys()) f.y[grid.locate(q)] += unit;
    return f;
}

}  // namespace gsm2
