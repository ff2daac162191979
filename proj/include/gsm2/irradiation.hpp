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

//! \file irradiation.hpp
//! Microdosimetric damage sampling. A dose D delivers Poisson(D / z_F)
//! traversal events; each event deposits a specific energy z drawn from the
//! single-event law f1 and creates Poisson(kappa(z)) sub-lethal and
//! Poisson(lambda(z)) lethal lesions spread radially around its track.
//!
//! Radial profile (amorphous track): density C on rho <= R_c and C R_c^2 / rho^2
//! on (R_c, R_p], zero beyond. In 3D the beam runs along the last axis and the
//! position along the beam is uniform on the chord through the domain.

#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <numbers>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "gsm2/errors.hpp"
#include "gsm2/geometry.hpp"
#include "gsm2/grid.hpp"
#include "gsm2/random.hpp"
#include "gsm2/state.hpp"

namespace gsm2 {

struct DiracEnergy {
    double z0 = 0.0;
};

/// Discrete single-event law on the listed z values.
struct TabulatedEnergy {
    std::vector<double> z;
    std::vector<double> prob;  ///< normalized on construction
};

/// z = exp(mu + sigma N(0,1))
struct LogNormalEnergy {
    double log_mean = 0.0;
    double log_sd = 1.0;
};

class SpecificEnergyDist {
public:
    using Variant = std::variant<DiracEnergy, TabulatedEnergy, LogNormalEnergy>;

    SpecificEnergyDist() : SpecificEnergyDist(DiracEnergy{0.04}) {}
    SpecificEnergyDist(Variant v) : law_(std::move(v)) { prepare(); }

    /// Two-column CSV (z_gray, probability); a header line is allowed.
    /// Probabilities are renormalized.
    static SpecificEnergyDist from_csv(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot open single-event table " + path);
        TabulatedEnergy t;
        std::string line;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (line.empty() || line[0] == '#') continue;
            for (char& c : line)
                if (c == ',' || c == ';' || c == '\t') c = ' ';
            std::istringstream row(line);
            double z = 0.0, p = 0.0;
            if (!(row >> z >> p)) {
                if (lineno == 1) continue;
                throw ConfigError(path + ":" + std::to_string(lineno) + ": expected two numbers");
            }
            t.z.push_back(z);
            t.prob.push_back(p);
        }
        return SpecificEnergyDist(std::move(t));
    }

    const Variant& law() const { return law_; }

    double mean() const { return moment(1); }
    double second_moment() const { return moment(2); }

    double sample(RngStream& rng) const {
        if (const auto* d = std::get_if<DiracEnergy>(&law_)) return d->z0;
        if (const auto* t = std::get_if<TabulatedEnergy>(&law_)) return t->z[rng.from_cumulative(cum_)];
        const auto& l = std::get<LogNormalEnergy>(law_);
        return std::exp(l.log_mean + l.log_sd * rng.normal());
    }

    /// Expectation of g(Z); exact for the discrete laws, quadrature for the
    /// lognormal.
    template <class F>
    double expect(F&& g) const {
        if (const auto* d = std::get_if<DiracEnergy>(&law_)) return g(d->z0);
        if (const auto* t = std::get_if<TabulatedEnergy>(&law_)) {
            double s = 0.0;
            for (std::size_t i = 0; i < t->z.size(); ++i) s += t->prob[i] * g(t->z[i]);
            return s;
        }
        const auto& l = std::get<LogNormalEnergy>(law_);
        // Trapezoid rule in the standard-normal variable over [-10, 10].
        const int n = 4001;
        const double span = 10.0, h = 2.0 * span / (n - 1);
        double s = 0.0;
        for (int i = 0; i < n; ++i) {
            const double x = -span + i * h;
            s += std::exp(-0.5 * x * x) * g(std::exp(l.log_mean + l.log_sd * x));
        }
        return s * h / std::sqrt(2.0 * std::numbers::pi);
    }

private:
    double moment(int k) const {
        if (const auto* l = std::get_if<LogNormalEnergy>(&law_))
            return std::exp(k * l->log_mean + 0.5 * k * k * l->log_sd * l->log_sd);
        return expect([k](double z) { return std::pow(z, k); });
    }

    void prepare() {
        if (const auto* d = std::get_if<DiracEnergy>(&law_)) {
            if (!(d->z0 >= 0.0) || !std::isfinite(d->z0)) throw ConfigError("dirac z0 must be >= 0");
        } else if (auto* t = std::get_if<TabulatedEnergy>(&law_)) {
            if (t->z.empty() || t->z.size() != t->prob.size())
                throw ConfigError("tabulated f1 needs matching non-empty z and probability columns");
            double total = 0.0;
            for (std::size_t i = 0; i < t->z.size(); ++i) {
                if (!(t->z[i] >= 0.0) || !std::isfinite(t->z[i])) throw ConfigError("tabulated z must be >= 0");
                if (!(t->prob[i] >= 0.0) || !std::isfinite(t->prob[i]))
                    throw ConfigError("tabulated probabilities must be >= 0");
                total += t->prob[i];
            }
            if (!(total > 0.0)) throw ConfigError("tabulated f1 has zero total probability");
            const double eps = 4.0 * std::numeric_limits<double>::epsilon() * static_cast<double>(t->prob.size());
            if (std::fabs(total - 1.0) > eps)
                for (double& p : t->prob) p /= total;
            cum_.resize(t->prob.size());
            std::partial_sum(t->prob.begin(), t->prob.end(), cum_.begin());
        } else {
            const auto& l = std::get<LogNormalEnergy>(law_);
            if (!std::isfinite(l.log_mean) || !(l.log_sd > 0.0))
                throw ConfigError("lognormal f1 needs finite log_mean and positive log_sd");
        }
    }

    Variant law_;
    std::vector<double> cum_;
};

/// Lesion yield as a function of specific energy (per event).
struct YieldFunction {
    /// Linear kappa * z when `z_table` is empty, else piecewise-linear
    /// interpolation of (z_table, values) with flat extrapolation.
    double coefficient = 0.0;
    std::vector<double> z_table;
    std::vector<double> values;

    static YieldFunction linear(double c) { return {c, {}, {}}; }

    bool is_linear() const { return z_table.empty(); }

    void validate() const {
        if (is_linear()) {
            if (!(coefficient >= 0.0) || !std::isfinite(coefficient))
                throw ConfigError("yield coefficient must be >= 0");
            return;
        }
        if (z_table.size() != values.size() || z_table.size() < 2)
            throw ConfigError("tabulated yield needs at least two (z, value) rows");
        for (std::size_t i = 0; i < values.size(); ++i) {
            if (!(values[i] >= 0.0)) throw ConfigError("tabulated yield values must be >= 0");
            if (i && !(z_table[i] > z_table[i - 1])) throw ConfigError("tabulated yield z must increase");
        }
    }

    double operator()(double z) const {
        if (is_linear()) return coefficient * z;
        if (z <= z_table.front()) return values.front();
        if (z >= z_table.back()) return values.back();
        const auto it = std::upper_bound(z_table.begin(), z_table.end(), z);
        const std::size_t i = static_cast<std::size_t>(it - z_table.begin());
        const double w = (z - z_table[i - 1]) / (z_table[i] - z_table[i - 1]);
        return (1.0 - w) * values[i - 1] + w * values[i];
    }
};

struct AmorphousTrack {
    double core_radius = 0.01;      ///< R_c, micrometres
    double penumbra_radius = 0.5;   ///< R_p, micrometres

    void validate() const {
        if (!(core_radius > 0.0) || !(penumbra_radius > core_radius))
            throw ConfigError("amorphous track needs 0 < R_c < R_p");
    }

    /// Probability of the core disc under the untruncated planar law.
    double core_weight() const { return 1.0 / (1.0 + 2.0 * std::log(penumbra_radius / core_radius)); }

    /// Unnormalized planar density at transverse distance rho.
    double profile(double rho) const {
        if (rho <= core_radius) return 1.0;
        if (rho <= penumbra_radius) return core_radius * core_radius / (rho * rho);
        return 0.0;
    }

    double sample_radius(RngStream& rng) const {
        const double w = core_weight();
        const double u = rng.uniform();
        if (u < w) return core_radius * std::sqrt(u / w);
        return core_radius * std::exp((u - w) / (1.0 - w) * std::log(penumbra_radius / core_radius));
    }
};

/// Joint law of (xi_X, xi_Y) per event that ignores z; used instead of the
/// independent Poisson yields when supplied.
struct JointCountTable {
    std::vector<std::size_t> nx;
    std::vector<std::size_t> ny;
    std::vector<double> prob;
};

enum class TrackPlacement { uniform, at_point };
enum class LesionSpread { amorphous_track, uniform };

/// Optional dependence of the yields on a chemical species concentration:
/// yield * (1 + coefficient * rho(track center)).
struct ChemCoupling {
    std::size_t species = 0;
    double coefficient = 0.0;
};

struct IrradiationModel {
    double dose = 0.0;   ///< D, gray (initial acute exposure)
    double z_f = 0.04;   ///< gray
    SpecificEnergyDist f1;
    YieldFunction kappa = YieldFunction::linear(0.0);
    YieldFunction lambda = YieldFunction::linear(0.0);
    std::optional<JointCountTable> joint_counts;
    std::optional<ChemCoupling> coupling;

    TrackPlacement track_placement = TrackPlacement::uniform;
    std::optional<Point> track_point;  ///< for at_point
    LesionSpread spread = LesionSpread::amorphous_track;
    AmorphousTrack track;

    double d_dot = 0.0;     ///< traversal events per hour while t < t_irr
    double t_irr = 0.0;     ///< hours

    void validate(const Domain& domain) const {
        if (!(dose >= 0.0) || !std::isfinite(dose)) throw ConfigError("dose must be >= 0");
        if (!(z_f > 0.0) || !std::isfinite(z_f)) throw ConfigError("z_F must be positive");
        const double m = f1.mean();
        if (std::fabs(m - z_f) > 1e-6 * std::fabs(z_f))
            throw ConfigError("declared z_F " + std::to_string(z_f) + " differs from the f1 mean " +
                              std::to_string(m));
        kappa.validate();
        lambda.validate();
        if (joint_counts) {
            const auto& j = *joint_counts;
            if (j.prob.empty() || j.nx.size() != j.prob.size() || j.ny.size() != j.prob.size())
                throw ConfigError("joint count table columns must have equal non-zero length");
            double s = 0.0;
            for (double p : j.prob) {
                if (!(p >= 0.0)) throw ConfigError("joint count probabilities must be >= 0");
                s += p;
            }
            if (std::fabs(s - 1.0) > 1e-9) throw ConfigError("joint count probabilities must sum to 1");
        }
        if (track_placement == TrackPlacement::at_point) {
            if (!track_point) throw ConfigError("at_point track placement needs a point");
            if (!domain.contains(*track_point)) throw ConfigError("track point lies outside the domain");
        }
        if (spread == LesionSpread::amorphous_track) track.validate();
        if (!(d_dot >= 0.0) || !std::isfinite(d_dot)) throw ConfigError("dose rate must be finite and >= 0");
        if (!(t_irr >= 0.0) || !std::isfinite(t_irr)) throw ConfigError("T_irr must be >= 0");
        if (coupling && !(coupling->coefficient >= 0.0))
            throw ConfigError("chemistry coupling coefficient must be >= 0");
    }

    bool protracted() const { return d_dot > 0.0 && t_irr > 0.0; }
};

/// Concentration lookup handed to the samplers by the chemistry coupling.
using ConcentrationLookup = std::function<double(std::size_t species, const Point&)>;

inline std::uint64_t sample_event_count(double dose, double z_f, RngStream& rng) {
    if (!(z_f > 0.0)) throw ConfigError("z_F must be positive");
    if (!(dose >= 0.0)) throw ConfigError("dose must be >= 0");
    return rng.poisson(dose / z_f);
}

/// One traversal event and the lesions it created.
struct TrackBatch {
    Point center;
    double z = 0.0;
    std::vector<Point> xs;
    std::vector<Point> ys;
};

namespace detail {

inline Point sample_track_center(const IrradiationModel& m, const Domain& domain, RngStream& rng) {
    if (m.track_placement == TrackPlacement::at_point) return *m.track_point;
    return domain.sample_uniform(rng);
}

inline Point sample_around_track(const IrradiationModel& m, const Domain& domain, const Point& center,
                                 RngStream& rng) {
    if (m.spread == LesionSpread::uniform) return domain.sample_uniform(rng);
    const auto [lo, hi] = domain.bounding_box();
    const int d = domain.dim();
    constexpr int kMaxTries = 1000000;
    for (int attempt = 0; attempt < kMaxTries; ++attempt) {
        const double rho = m.track.sample_radius(rng);
        const double theta = rng.uniform(0.0, 2.0 * std::numbers::pi);
        Point q = center;
        q[0] += rho * std::cos(theta);
        q[1] += rho * std::sin(theta);
        if (d == 3) q[2] = rng.uniform(lo[2], hi[2]);
        if (domain.contains(q)) return q;
    }
    throw InternalError("radial lesion placement failed around track at " + center.str());
}

inline std::pair<std::uint64_t, std::uint64_t> sample_counts(const IrradiationModel& m, double z,
                                                             double multiplier, RngStream& rng) {
    if (m.joint_counts) {
        const auto& j = *m.joint_counts;
        std::vector<double> cum(j.prob.size());
        std::partial_sum(j.prob.begin(), j.prob.end(), cum.begin());
        const std::size_t k = rng.from_cumulative(cum);
        return {j.nx[k], j.ny[k]};
    }
    const std::uint64_t nx = rng.poisson(m.kappa(z) * multiplier);
    const std::uint64_t ny = rng.poisson(m.lambda(z) * multiplier);
    return {nx, ny};
}

}  // namespace detail

/// Samples one traversal event. With a coupling and a lookup, the yields are
/// scaled by 1 + coefficient * rho(track center).
inline TrackBatch sample_track(const IrradiationModel& m, const Domain& domain, RngStream& rng,
                               const ConcentrationLookup& lookup = {}) {
    TrackBatch b;
    b.center = detail::sample_track_center(m, domain, rng);
    b.z = m.f1.sample(rng);
    double mult = 1.0;
    if (m.coupling && lookup) mult = 1.0 + m.coupling->coefficient * lookup(m.coupling->species, b.center);
    const auto [nx, ny] = detail::sample_counts(m, b.z, mult, rng);
    b.xs.reserve(nx);
    b.ys.reserve(ny);
    for (std::uint64_t i = 0; i < nx; ++i) b.xs.push_back(detail::sample_around_track(m, domain, b.center, rng));
    for (std::uint64_t i = 0; i < ny; ++i) b.ys.push_back(detail::sample_around_track(m, domain, b.center, rng));
    return b;
}

/// Acute exposure to `m.dose` at t = 0.
inline SystemState sample_initial_measure(const IrradiationModel& m, const Domain& domain, RngStream& rng,
                                          const ConcentrationLookup& lookup = {}) {
    const std::uint64_t events = sample_event_count(m.dose, m.z_f, rng);
    std::vector<Point> xs, ys;
    for (std::uint64_t e = 0; e < events; ++e) {
        auto b = sample_track(m, domain, rng, lookup);
        xs.insert(xs.end(), b.xs.begin(), b.xs.end());
        ys.insert(ys.end(), b.ys.begin(), b.ys.end());
    }
    return SystemState(0.0, std::move(xs), std::move(ys));
}

/// Normalized deposition shape of one track on a grid (integrates to 1).
inline std::vector<double> track_footprint(const IrradiationModel& m, const Grid& grid, const Point& center) {
    std::vector<double> shape(grid.size(), 0.0);
    double total = 0.0;
    for (std::size_t c = 0; c < grid.size(); ++c) {
        const Point& q = grid.center(c);
        double v = 1.0;
        if (m.spread == LesionSpread::amorphous_track) {
            const double dx = q[0] - center[0], dy = q[1] - center[1];
            v = m.track.profile(std::sqrt(dx * dx + dy * dy));
        }
        shape[c] = v;
        total += v;
    }
    if (total <= 0.0) {
        shape[grid.locate(center)] = 1.0;
        total = 1.0;
    }
    const double norm = 1.0 / (total * grid.cell_volume());
    for (double& v : shape) v *= norm;
    return shape;
}

}  // namespace gsm2
