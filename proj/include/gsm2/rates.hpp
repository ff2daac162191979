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

//! \file rates.hpp
//! Reaction-rate model: repair r, death a, pairwise interaction b with its
//! lethal probability p, and the placement laws of newly created lethal
//! lesions. Rates are in 1/h.
//!
//! The local concentration entering a rate never includes the focal
//! lesion(s) the rate belongs to.

#pragma once

#include <cmath>
#include <numeric>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "gsm2/errors.hpp"
#include "gsm2/geometry.hpp"
#include "gsm2/kernel.hpp"
#include "gsm2/random.hpp"
#include "gsm2/state.hpp"

namespace gsm2 {

/// Response g(v) applied to a local concentration v >= 0. Restricted to forms
/// that keep the growth bounds by construction.
struct Response {
    enum class Kind { constant, saturating_up, saturating_down, affine };

    Kind kind = Kind::constant;
    double slope = 0.0;  ///< affine only: g(v) = 1 + slope * v

    static Response constant() { return {}; }
    static Response saturating_up() { return {Kind::saturating_up, 0.0}; }
    static Response saturating_down() { return {Kind::saturating_down, 0.0}; }
    static Response affine(double slope) { return {Kind::affine, slope}; }

    bool is_constant() const { return kind == Kind::constant; }

    double operator()(double v) const {
        double g = 1.0;
        switch (kind) {
            case Kind::constant: g = 1.0; break;
            case Kind::saturating_up: g = 1.0 + 1.0 / (v + 1.0); break;
            case Kind::saturating_down: g = 1.0 - 1.0 / (v + 1.0); break;
            case Kind::affine: g = 1.0 + slope * v; break;
        }
        if (!(g >= 0.0) || !std::isfinite(g))
            throw ModelError("response function returned " + std::to_string(g) + " at v = " +
                             std::to_string(v));
        return g;
    }
};

/// A single-lesion channel: base * g(<Gamma_q, nu>).
struct RateChannel {
    double base = 0.0;
    Kernel kernel;
    Response form;
    std::optional<double> cap;  ///< r: uniform bound; a: linear-growth constant
};

/// Probability that an interacting pair produces a lethal lesion.
struct PairProbability {
    double p0 = 1.0;
    std::optional<double> length;  ///< if set: p0 * exp(-d^2 / (2 length^2))

    double operator()(const Point& q1, const Point& q2) const {
        if (!length) return p0;
        return p0 * std::exp(-distance2(q1, q2) / (2.0 * *length * *length));
    }
};

struct AtParent {};
struct Midpoint {};
struct SegmentUniform {};
/// sum_j w_j delta_{alpha_j q1 + (1 - alpha_j) q2}
struct SegmentMixture {
    std::vector<double> weights;
    std::vector<double> alphas;
};

/// Placement law of a new lethal lesion given its parent(s).
class Placement {
public:
    using Variant = std::variant<AtParent, Midpoint, SegmentUniform, SegmentMixture>;

    Placement() = default;
    Placement(Variant v) : spec_(std::move(v)) { validate(); }

    const Variant& spec() const { return spec_; }

    /// Single parent (death channel). Segment laws degenerate to the parent.
    Point sample(const Point& parent, RngStream&) const { return parent; }

    /// Two parents (pair channel).
    Point sample(const Point& q1, const Point& q2, RngStream& rng) const {
        if (std::holds_alternative<Midpoint>(spec_)) return lerp(q1, q2, 0.5);
        if (std::holds_alternative<AtParent>(spec_)) return rng.uniform() < 0.5 ? q1 : q2;
        if (std::holds_alternative<SegmentUniform>(spec_)) return lerp(q1, q2, rng.uniform());
        const auto& m = std::get<SegmentMixture>(spec_);
        std::vector<double> cum(m.weights.size());
        std::partial_sum(m.weights.begin(), m.weights.end(), cum.begin());
        return lerp(q1, q2, m.alphas[rng.from_cumulative(cum)]);
    }

private:
    void validate() const {
        const auto* m = std::get_if<SegmentMixture>(&spec_);
        if (!m) return;
        if (m->weights.empty() || m->weights.size() != m->alphas.size())
            throw ConfigError("segment mixture needs matching non-empty weights and alphas");
        double s = 0.0;
        for (double w : m->weights) {
            if (!(w >= 0.0)) throw ConfigError("segment mixture weights must be non-negative");
            s += w;
        }
        if (std::fabs(s - 1.0) > 1e-9) throw ConfigError("segment mixture weights must sum to 1");
        for (double a : m->alphas)
            if (!(a >= 0.0 && a <= 1.0)) throw ConfigError("segment mixture alphas must lie in [0, 1]");
    }

    Variant spec_ = AtParent{};
};

/// Parameters of every reaction channel.
struct RateModel {
    RateChannel r;
    RateChannel a;

    Kernel b_pair = Kernel::constant(0.0);   ///< separation profile b(|q1 - q2|)
    std::optional<Kernel> b_density_kernel;  ///< concentration dependence of b
    Response b_form;
    std::optional<double> b_cap;  ///< linear-growth constant for b

    PairProbability p;
    Placement m_a = Placement(AtParent{});
    Placement m_b = Placement(Midpoint{});

    /// Multiplies every concentration before the response is applied (1/K
    /// under the large-population rescaling).
    double concentration_scale = 1.0;

    void validate() const {
        for (const auto* ch : {&r, &a}) {
            if (!(ch->base >= 0.0) || !std::isfinite(ch->base))
                throw ConfigError("rate base must be finite and non-negative");
            if (ch->cap && !(*ch->cap > 0.0)) throw ConfigError("rate cap must be positive");
        }
        if (b_cap && !(*b_cap > 0.0)) throw ConfigError("rate cap must be positive");
        if (!(p.p0 >= 0.0 && p.p0 <= 1.0)) throw ConfigError("pair probability must lie in [0, 1]");
        if (p.length && !(*p.length > 0.0)) throw ConfigError("pair probability length must be positive");
        if (!(concentration_scale > 0.0)) throw ConfigError("concentration scale must be positive");
    }

    /// Rates that never depend on positions or on the configuration.
    bool r_is_global() const { return r.form.is_constant(); }
    bool a_is_global() const { return a.form.is_constant(); }
    bool b_is_global() const { return b_pair.is_constant() && !b_density_kernel; }
};

namespace detail {
inline void check_rate(double value, const char* name) {
    if (!(value >= 0.0) || !std::isfinite(value))
        throw ModelError(std::string(name) + " rate evaluated to " + std::to_string(value));
}
}  // namespace detail

/// Repair rate of an X lesion at q; `self` is its index in the state (if any).
inline double eval_r(const RateModel& m, const Point& q, const SystemState& state, Exclusion self = {}) {
    const double v = m.r_is_global() ? 0.0
                                     : kernel_mass(q, m.r.kernel, state, self) * m.concentration_scale;
    const double value = m.r.base * m.r.form(v);
    detail::check_rate(value, "repair");
    if (m.r.cap && value > *m.r.cap)
        throw ModelError("repair rate " + std::to_string(value) + " exceeds declared cap " +
                         std::to_string(*m.r.cap));
    return value;
}

inline double eval_a(const RateModel& m, const Point& q, const SystemState& state, Exclusion self = {}) {
    const double v = m.a_is_global() ? 0.0
                                     : kernel_mass(q, m.a.kernel, state, self) * m.concentration_scale;
    const double value = m.a.base * m.a.form(v);
    detail::check_rate(value, "death");
    if (m.a.cap && value > *m.a.cap * (1.0 + std::fabs(v)))
        throw ModelError("death rate " + std::to_string(value) + " exceeds linear-growth bound");
    return value;
}

/// Interaction rate of the unordered pair (q1, q2). Symmetric in its
/// arguments; the concentration is measured at the pair midpoint.
inline double eval_b_pair(const RateModel& m, const Point& q1, const Point& q2,
                          const SystemState& state, Exclusion pair = {}) {
    const double d2 = distance2(q1, q2);
    if (d2 == 0.0) throw InputError("eval_b_pair: coincident lesion positions " + q1.str());
    double value = m.b_pair(std::sqrt(d2));
    double v = 0.0;
    if (m.b_density_kernel) {
        v = kernel_mass(lerp(q1, q2, 0.5), *m.b_density_kernel, state, pair) * m.concentration_scale;
        value *= m.b_form(v);
    }
    detail::check_rate(value, "pair");
    if (m.b_cap && value > *m.b_cap * (1.0 + std::fabs(v)))
        throw ModelError("pair rate " + std::to_string(value) + " exceeds linear-growth bound");
    return value;
}

inline Point sample_placement(const Placement& spec, const Point& parent, RngStream& rng) {
    return spec.sample(parent, rng);
}

inline Point sample_placement(const Placement& spec, const Point& q1, const Point& q2, RngStream& rng) {
    return spec.sample(q1, q2, rng);
}

}  // namespace gsm2
