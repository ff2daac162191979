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

//! \file meanfield.hpp
//! Deterministic and non-spatial reference solvers:
//!  - the master equation for the joint law of (Y, X) counts,
//!  - the mean-count kinetic ODEs,
//!  - an exact non-spatial stochastic simulation of the count chain,
//!  - the large-population limit, homogeneous and on a grid.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "gsm2/diffusion.hpp"
#include "gsm2/errors.hpp"
#include "gsm2/grid.hpp"
#include "gsm2/irradiation.hpp"
#include "gsm2/random.hpp"
#include "gsm2/rates.hpp"

namespace gsm2 {

/// How the pairwise intensity of x sub-lethal lesions is counted.
enum class PairConvention {
    unordered,  ///< b x (x - 1) / 2, one clock per unordered pair
    ordered,    ///< b x (x - 1)
    squared,    ///< b x^2
};

inline const char* to_string(PairConvention c) {
    switch (c) {
        case PairConvention::unordered: return "unordered";
        case PairConvention::ordered: return "ordered";
        case PairConvention::squared: return "squared";
    }
    return "?";
}

inline double pair_intensity(double x, double b, PairConvention c) {
    switch (c) {
        case PairConvention::unordered: return 0.5 * b * x * (x - 1.0);
        case PairConvention::ordered: return b * x * (x - 1.0);
        case PairConvention::squared: return b * x * x;
    }
    return 0.0;
}

/// Coefficient c of the quadratic mean-field pair term c b u^2.
inline double pair_mean_factor(PairConvention c) { return c == PairConvention::unordered ? 0.5 : 1.0; }

/// Constant-rate count dynamics with an optional compound source.
struct CountRates {
    double r = 0.0;
    double a = 0.0;
    double b = 0.0;
    double p = 1.0;
    PairConvention convention = PairConvention::unordered;
    double d_dot = 0.0;  ///< events per hour while t < t_irr
    double t_irr = 0.0;

    void validate() const {
        for (double v : {r, a, b, d_dot, t_irr})
            if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError("count rates must be finite and >= 0");
        if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("pair probability must lie in [0, 1]");
    }

    double source_rate(double t) const { return t < t_irr ? d_dot : 0.0; }
};

/// Dense joint pmf table over 0..x_max, 0..y_max, stored [y][x].
struct CountPmf {
    std::size_t x_max = 0;
    std::size_t y_max = 0;
    std::vector<double> p;

    CountPmf() = default;
    CountPmf(std::size_t xm, std::size_t ym) : x_max(xm), y_max(ym), p((xm + 1) * (ym + 1), 0.0) {}

    double& at(std::size_t y, std::size_t x) { return p[y * (x_max + 1) + x]; }
    double at(std::size_t y, std::size_t x) const { return p[y * (x_max + 1) + x]; }
    double total() const {
        double s = 0.0;
        for (double v : p) s += v;
        return s;
    }
};

namespace detail {

inline double poisson_pmf(std::size_t k, double mean) {
    if (mean == 0.0) return k == 0 ? 1.0 : 0.0;
    return std::exp(static_cast<double>(k) * std::log(mean) - mean - std::lgamma(static_cast<double>(k) + 1.0));
}

/// Quadrature nodes (z, weight) of the single-event law.
inline std::vector<std::pair<double, double>> energy_nodes(const SpecificEnergyDist& f1) {
    std::vector<std::pair<double, double>> nodes;
    if (const auto* d = std::get_if<DiracEnergy>(&f1.law())) {
        nodes.emplace_back(d->z0, 1.0);
    } else if (const auto* t = std::get_if<TabulatedEnergy>(&f1.law())) {
        for (std::size_t i = 0; i < t->z.size(); ++i) nodes.emplace_back(t->z[i], t->prob[i]);
    } else {
        const auto& l = std::get<LogNormalEnergy>(f1.law());
        const int n = 801;
        const double span = 9.0, h = 2.0 * span / (n - 1);
        double total = 0.0;
        for (int i = 0; i < n; ++i) {
            const double x = -span + i * h;
            const double w = std::exp(-0.5 * x * x);
            nodes.emplace_back(std::exp(l.log_mean + l.log_sd * x), w);
            total += w;
        }
        for (auto& nd : nodes) nd.second /= total;
    }
    return nodes;
}

}  // namespace detail

/// Per-event joint law of (xi_X, xi_Y), truncated to the given bounds.
inline CountPmf event_count_pmf(const IrradiationModel& m, std::size_t x_max, std::size_t y_max) {
    CountPmf g(x_max, y_max);
    if (m.joint_counts) {
        const auto& j = *m.joint_counts;
        for (std::size_t k = 0; k < j.prob.size(); ++k)
            if (j.nx[k] <= x_max && j.ny[k] <= y_max) g.at(j.ny[k], j.nx[k]) += j.prob[k];
        return g;
    }
    for (const auto& [z, w] : detail::energy_nodes(m.f1)) {
        const double kx = m.kappa(z), ky = m.lambda(z);
        std::vector<double> px(x_max + 1), py(y_max + 1);
        for (std::size_t x = 0; x <= x_max; ++x) px[x] = detail::poisson_pmf(x, kx);
        for (std::size_t y = 0; y <= y_max; ++y) py[y] = detail::poisson_pmf(y, ky);
        for (std::size_t y = 0; y <= y_max; ++y)
            for (std::size_t x = 0; x <= x_max; ++x) g.at(y, x) += w * py[y] * px[x];
    }
    return g;
}

/// Law of the summed counts over Poisson(mean) independent events, by the
/// bivariate Panjer recursion on the truncated lattice.
inline CountPmf compound_count_pmf(const CountPmf& g, double mean) {
    CountPmf f(g.x_max, g.y_max);
    const double g00 = g.at(0, 0);
    f.at(0, 0) = std::exp(-mean * (1.0 - g00));
    for (std::size_t y = 0; y <= g.y_max; ++y)
        for (std::size_t x = 0; x <= g.x_max; ++x) {
            if (x == 0 && y == 0) continue;
            // n f(n) = mean * sum_k k g(k) f(n - k), along whichever coordinate is positive.
            double s = 0.0;
            if (x > 0) {
                for (std::size_t j = 0; j <= y; ++j)
                    for (std::size_t i = 1; i <= x; ++i) s += static_cast<double>(i) * g.at(j, i) * f.at(y - j, x - i);
                f.at(y, x) = mean * s / static_cast<double>(x);
            } else {
                for (std::size_t j = 1; j <= y; ++j) s += static_cast<double>(j) * g.at(j, 0) * f.at(y - j, 0);
                f.at(y, x) = mean * s / static_cast<double>(y);
            }
        }
    return f;
}

// ---------------------------------------------------------------------------
// Master equation

struct MasterOptions {
    double dt = 1e-3;               ///< upper bound on the internal RK4 step
    double leak_tolerance = 1e-8;   ///< probability allowed to leave the lattice
    std::size_t x_max = 0;          ///< 0: automatic
    std::size_t y_max = 0;
    int max_doublings = 6;
};

struct MasterResult {
    std::vector<double> times;
    std::vector<double> survival;  ///< P(Y = 0)
    std::vector<double> mean_x;
    std::vector<double> mean_y;
    std::vector<double> factorial_x;  ///< E[X (X - 1)]
    double leak = 0.0;
    std::size_t x_max = 0;
    std::size_t y_max = 0;
    CountPmf final_pmf;
};

namespace detail {

/// Non-negligible entries (dy, dx, probability) of the per-event count law.
struct SourceJumps {
    struct Jump {
        std::uint32_t dy;
        std::uint32_t dx;
        double w;
    };
    std::vector<Jump> jumps;

    explicit SourceJumps(const CountPmf& g, double floor = 1e-18) {
        for (std::size_t j = 0; j <= g.y_max; ++j)
            for (std::size_t i = 0; i <= g.x_max; ++i)
                if (g.at(j, i) > floor)
                    jumps.push_back({static_cast<std::uint32_t>(j), static_cast<std::uint32_t>(i), g.at(j, i)});
    }
};

inline void master_rhs(const CountPmf& p, CountPmf& dp, const CountRates& k, double dd, const SourceJumps* g) {
    std::fill(dp.p.begin(), dp.p.end(), 0.0);
    const std::size_t X = p.x_max, Y = p.y_max;
    for (std::size_t y = 0; y <= Y; ++y)
        for (std::size_t x = 0; x <= X; ++x) {
            const double v = p.at(y, x);
            if (v == 0.0) continue;
            const double xd = static_cast<double>(x);
            const double pr = pair_intensity(xd, k.b, k.convention);
            const double out = xd * (k.r + k.a) + (x >= 2 ? pr : 0.0) + dd;
            dp.at(y, x) -= out * v;
            if (x >= 1) {
                dp.at(y, x - 1) += xd * k.r * v;
                if (y + 1 <= Y) dp.at(y + 1, x - 1) += xd * k.a * v;
            }
            if (x >= 2 && pr > 0.0) {
                if (y + 1 <= Y) dp.at(y + 1, x - 2) += k.p * pr * v;
                dp.at(y, x - 2) += (1.0 - k.p) * pr * v;
            }
            if (dd > 0.0 && g)
                for (const auto& jump : g->jumps)
                    if (y + jump.dy <= Y && x + jump.dx <= X) dp.at(y + jump.dy, x + jump.dx) += dd * jump.w * v;
        }
}

inline void rk4_step(CountPmf& p, double h, const CountRates& k, double dd, const SourceJumps* g,
                     std::array<CountPmf, 5>& work) {
    auto& [k1, k2, k3, k4, tmp] = work;
    master_rhs(p, k1, k, dd, g);
    for (std::size_t i = 0; i < p.p.size(); ++i) tmp.p[i] = p.p[i] + 0.5 * h * k1.p[i];
    master_rhs(tmp, k2, k, dd, g);
    for (std::size_t i = 0; i < p.p.size(); ++i) tmp.p[i] = p.p[i] + 0.5 * h * k2.p[i];
    master_rhs(tmp, k3, k, dd, g);
    for (std::size_t i = 0; i < p.p.size(); ++i) tmp.p[i] = p.p[i] + h * k3.p[i];
    master_rhs(tmp, k4, k, dd, g);
    for (std::size_t i = 0; i < p.p.size(); ++i)
        p.p[i] += h / 6.0 * (k1.p[i] + 2.0 * k2.p[i] + 2.0 * k3.p[i] + k4.p[i]);
}

inline CountPmf embed(const CountPmf& src, std::size_t xm, std::size_t ym) {
    CountPmf out(xm, ym);
    for (std::size_t y = 0; y <= std::min(ym, src.y_max); ++y)
        for (std::size_t x = 0; x <= std::min(xm, src.x_max); ++x) out.at(y, x) = src.at(y, x);
    return out;
}

}  // namespace detail

/// Integrates the master equation from the initial law `p0` and reports the
/// requested functionals at `times`. Bounds grow automatically (doubling)
/// while the truncation leak exceeds the tolerance.
inline MasterResult solve_master(const CountPmf& p0, const CountRates& k, const std::vector<double>& times,
                                 const MasterOptions& opt = {},
                                 const std::optional<IrradiationModel>& source = std::nullopt) {
    k.validate();
    if (!(opt.dt > 0.0)) throw ConfigError("master dt must be positive");
    for (double t : times)
        if (!(t >= 0.0)) throw ConfigError("master output times must be >= 0");
    if (k.d_dot > 0.0 && !source) throw ConfigError("master source rate needs an irradiation model");

    // Support of the initial law.
    std::size_t sx = 0, sy = 0;
    for (std::size_t y = 0; y <= p0.y_max; ++y)
        for (std::size_t x = 0; x <= p0.x_max; ++x)
            if (p0.at(y, x) > 0.0) {
                sx = std::max(sx, x);
                sy = std::max(sy, y);
            }
    double src_x = 0.0, src_y = 0.0;
    if (source && k.d_dot > 0.0) {
        const double events = k.d_dot * k.t_irr;
        src_x = events * source->f1.expect([&](double z) { return source->kappa(z); });
        src_y = events * source->f1.expect([&](double z) { return source->lambda(z); });
    }
    std::size_t xm = opt.x_max ? opt.x_max
                               : sx + static_cast<std::size_t>(std::ceil(src_x + 10.0 * std::sqrt(src_x + 1.0)));
    std::size_t ym = opt.y_max ? opt.y_max
                               : sy + xm + static_cast<std::size_t>(std::ceil(src_y + 10.0 * std::sqrt(src_y + 1.0)));

    std::vector<double> sorted = times;
    std::sort(sorted.begin(), sorted.end());

    for (int attempt = 0;; ++attempt) {
        MasterResult res;
        res.x_max = xm;
        res.y_max = ym;
        CountPmf p = detail::embed(p0, xm, ym);
        std::optional<detail::SourceJumps> g;
        if (source && k.d_dot > 0.0) g.emplace(event_count_pmf(*source, xm, ym));

        const double xd = static_cast<double>(xm);
        const double lam = xd * (k.r + k.a) + std::max(0.0, pair_intensity(xd, k.b, k.convention)) + k.d_dot;
        const double h_max = lam > 0.0 ? std::min(opt.dt, 1.0 / lam) : opt.dt;
        std::array<CountPmf, 5> work;
        for (auto& w : work) w = CountPmf(xm, ym);

        auto record = [&](double t) {
            res.times.push_back(t);
            double s = 0.0, mx = 0.0, my = 0.0, fx = 0.0;
            for (std::size_t y = 0; y <= ym; ++y)
                for (std::size_t x = 0; x <= xm; ++x) {
                    const double v = p.at(y, x);
                    if (y == 0) s += v;
                    mx += static_cast<double>(x) * v;
                    my += static_cast<double>(y) * v;
                    fx += static_cast<double>(x) * (static_cast<double>(x) - 1.0) * v;
                }
            res.survival.push_back(s);
            res.mean_x.push_back(mx);
            res.mean_y.push_back(my);
            res.factorial_x.push_back(fx);
        };

        double t = 0.0;
        auto integrate_to = [&](double target) {
            while (t < target) {
                double seg_end = target;
                if (k.d_dot > 0.0 && t < k.t_irr) seg_end = std::min(seg_end, k.t_irr);
                const double dd = k.source_rate(t);
                const double span = seg_end - t;
                const auto n = static_cast<std::size_t>(std::ceil(span / h_max - 1e-12));
                const double h = span / static_cast<double>(std::max<std::size_t>(n, 1));
                for (std::size_t i = 0; i < std::max<std::size_t>(n, 1); ++i)
                    detail::rk4_step(p, h, k, dd, g ? &*g : nullptr, work);
                t = seg_end;
            }
        };
        for (double target : sorted) {
            integrate_to(target);
            record(target);
        }
        res.leak = std::max(0.0, 1.0 - p.total());
        res.final_pmf = p;
        if (res.leak <= opt.leak_tolerance) return res;
        if (attempt >= opt.max_doublings)
            throw NumericalError("master equation truncation leak " + std::to_string(res.leak) +
                                 " exceeds tolerance; raise x_max / y_max");
        xm *= 2;
        ym *= 2;
    }
}

inline CountPmf delta_pmf(std::size_t x0, std::size_t y0) {
    CountPmf p(x0, y0);
    p.at(y0, x0) = 1.0;
    return p;
}

/// Independent Poisson(mean_x) x Poisson(mean_y) initial law.
inline CountPmf poisson_pmf(double mean_x, double mean_y) {
    const auto bound = [](double m) { return static_cast<std::size_t>(std::ceil(m + 12.0 * std::sqrt(m + 1.0) + 5.0)); };
    CountPmf p(bound(mean_x), bound(mean_y));
    for (std::size_t y = 0; y <= p.y_max; ++y)
        for (std::size_t x = 0; x <= p.x_max; ++x)
            p.at(y, x) = detail::poisson_pmf(y, mean_y) * detail::poisson_pmf(x, mean_x);
    return p;
}

/// Initial law produced by an acute exposure of `m.dose`.
inline CountPmf irradiation_pmf(const IrradiationModel& m) {
    const double events = m.dose / m.z_f;
    const double mx = events * m.f1.expect([&](double z) { return m.kappa(z) * (1.0 + m.kappa(z)); });
    const double my = events * m.f1.expect([&](double z) { return m.lambda(z) * (1.0 + m.lambda(z)); });
    const double ex = events * m.f1.expect([&](double z) { return m.kappa(z); });
    const double ey = events * m.f1.expect([&](double z) { return m.lambda(z); });
    const auto bound = [](double mean, double second) {
        return static_cast<std::size_t>(std::ceil(mean + 12.0 * std::sqrt(second + 1.0) + 5.0));
    };
    const std::size_t xm = bound(ex, mx), ym = bound(ey, my);
    return compound_count_pmf(event_count_pmf(m, xm, ym), events);
}

// ---------------------------------------------------------------------------
// Mean-count kinetics

enum class MkmVariant {
    literal,          ///< X loss -(a + r) x - 2 b x, Y gain a x + p b x^2
    pair_consistent,  ///< X loss -(a + r) x - 2 c b x^2, Y gain a x + p c b x^2
    reduced,          ///< X loss -(a + r) x, Y gain a x + p c b x^2
};

struct MkmTrajectory {
    std::vector<double> times;
    std::vector<double> x;
    std::vector<double> y;
};

namespace detail {
template <class Rhs>
inline void rk4_system(std::array<double, 2>& s, double h, Rhs&& f) {
    const auto k1 = f(s);
    const std::array<double, 2> s2{s[0] + 0.5 * h * k1[0], s[1] + 0.5 * h * k1[1]};
    const auto k2 = f(s2);
    const std::array<double, 2> s3{s[0] + 0.5 * h * k2[0], s[1] + 0.5 * h * k2[1]};
    const auto k3 = f(s3);
    const std::array<double, 2> s4{s[0] + h * k3[0], s[1] + h * k3[1]};
    const auto k4 = f(s4);
    for (int i = 0; i < 2; ++i) s[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
}

template <class Rhs>
inline MkmTrajectory integrate_pair(std::array<double, 2> s, const std::vector<double>& times, double dt, Rhs&& f,
                                    const std::function<double(double)>& source_switch = {}) {
    MkmTrajectory out;
    std::vector<double> sorted = times;
    std::sort(sorted.begin(), sorted.end());
    double t = 0.0;
    for (double target : sorted) {
        while (t < target) {
            double end = target;
            if (source_switch) end = std::min(end, source_switch(t));
            const double span = end - t;
            const auto n = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(span / dt - 1e-12)));
            const double h = span / static_cast<double>(n);
            for (std::size_t i = 0; i < n; ++i) rk4_system(s, h, [&](const auto& v) { return f(t, v); });
            t = end;
        }
        out.times.push_back(target);
        out.x.push_back(s[0]);
        out.y.push_back(s[1]);
    }
    return out;
}
}  // namespace detail

inline MkmTrajectory solve_mkm(double x0, double y0, const CountRates& k, const std::vector<double>& times,
                               double dt, MkmVariant variant) {
    k.validate();
    if (!(dt > 0.0)) throw ConfigError("mkm dt must be positive");
    const double c = pair_mean_factor(k.convention);
    auto rhs = [&](double, const std::array<double, 2>& s) {
        const double x = s[0];
        std::array<double, 2> d{};
        switch (variant) {
            case MkmVariant::literal:
                d[0] = -(k.a + k.r) * x - 2.0 * k.b * x;
                d[1] = k.a * x + k.p * k.b * x * x;
                break;
            case MkmVariant::pair_consistent:
                d[0] = -(k.a + k.r) * x - 2.0 * c * k.b * x * x;
                d[1] = k.a * x + k.p * c * k.b * x * x;
                break;
            case MkmVariant::reduced:
                d[0] = -(k.a + k.r) * x;
                d[1] = k.a * x + k.p * c * k.b * x * x;
                break;
        }
        return d;
    };
    return detail::integrate_pair({x0, y0}, times, dt, rhs);
}

/// Closed-form solution of the source-free kinetics. Every variant has the
/// form x' = -l x - q x^2 (Bernoulli type), and y follows by integrating
/// x and x^2.
inline MkmTrajectory mkm_closed_form(double x0, double y0, const CountRates& k, const std::vector<double>& times,
                                     MkmVariant variant) {
    k.validate();
    const double c = pair_mean_factor(k.convention);
    double l = k.a + k.r, q = 0.0, g = k.p * c * k.b;
    if (variant == MkmVariant::literal) {
        l += 2.0 * k.b;
        g = k.p * k.b;
    } else if (variant == MkmVariant::pair_consistent) {
        q = 2.0 * c * k.b;
    }
    MkmTrajectory out;
    std::vector<double> sorted = times;
    std::sort(sorted.begin(), sorted.end());
    for (double t : sorted) {
        const double decay = std::exp(-l * t);
        const double phi = l > 0.0 ? -std::expm1(-l * t) / l : t;
        double x, i1, i2;
        if (q == 0.0) {
            x = x0 * decay;
            i1 = x0 * phi;
            i2 = l > 0.0 ? x0 * x0 * -std::expm1(-2.0 * l * t) / (2.0 * l) : x0 * x0 * t;
        } else {
            x = x0 * decay / (1.0 + q * x0 * phi);
            i1 = std::log1p(q * x0 * phi) / q;
            i2 = (x0 - x - l * i1) / q;
        }
        out.times.push_back(t);
        out.x.push_back(x);
        out.y.push_back(y0 + k.a * i1 + g * i2);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Exact simulation of the count chain

struct CountPath {
    std::vector<std::uint64_t> x;  ///< at each requested time
    std::vector<std::uint64_t> y;
    std::optional<double> extinction_time;
    std::uint64_t events = 0;
};

/// One path of the (X, Y) chain with constant rates (Gillespie's direct
/// method). Source events add counts drawn from `source` when provided.
inline CountPath simulate_count_path(std::uint64_t x0, std::uint64_t y0, const CountRates& k,
                                     const std::vector<double>& times, RngStream& rng,
                                     const IrradiationModel* source = nullptr) {
    std::vector<double> sorted = times;
    std::sort(sorted.begin(), sorted.end());
    CountPath path;
    std::uint64_t x = x0, y = y0;
    double t = 0.0;
    std::size_t next = 0;
    const double t_end = sorted.empty() ? 0.0 : sorted.back();
    auto absorbed = [&] { return x == 0 && k.source_rate(t) == 0.0; };
    if (absorbed()) path.extinction_time = 0.0;
    while (next < sorted.size()) {
        const double xd = static_cast<double>(x);
        const double rr = k.r * xd, ra = k.a * xd;
        const double rb = x >= 2 ? pair_intensity(xd, k.b, k.convention) : 0.0;
        const double rd = source ? k.source_rate(t) : 0.0;
        const double total = rr + ra + rb + rd;
        double t_next = total > 0.0 ? t + rng.exponential(total) : std::numeric_limits<double>::infinity();
        const bool crosses_switch = rd > 0.0 && t_next > k.t_irr;
        if (crosses_switch) t_next = k.t_irr;
        while (next < sorted.size() && sorted[next] < t_next) {
            path.x.push_back(x);
            path.y.push_back(y);
            ++next;
        }
        if (next >= sorted.size() || t_next > t_end) break;
        t = t_next;
        if (crosses_switch) {
            if (!path.extinction_time && absorbed()) path.extinction_time = t;
            continue;
        }
        const double u = rng.uniform() * total;
        if (u < rr) {
            --x;
        } else if (u < rr + ra) {
            --x;
            ++y;
        } else if (u < rr + ra + rb) {
            x -= 2;
            if (rng.uniform() < k.p) ++y;
        } else {
            const double z = source->f1.sample(rng);
            const auto [nx, ny] = detail::sample_counts(*source, z, 1.0, rng);
            x += nx;
            y += ny;
        }
        ++path.events;
        if (!path.extinction_time && absorbed()) path.extinction_time = t;
    }
    while (path.x.size() < sorted.size()) {
        path.x.push_back(x);
        path.y.push_back(y);
    }
    return path;
}

/// Ensemble statistics of the count chain at the requested times.
struct CountSummary {
    std::vector<double> times;
    std::size_t replicates = 0;
    std::vector<std::size_t> lethal_free;  ///< replicates with Y = 0
    std::vector<double> mean_x;
    std::vector<double> mean_y;
    std::vector<double> factorial_x;  ///< E[X (X - 1)]
};

/// Aggregates `n` paths; `initial` returns (x0, y0) drawn from the initial law.
template <class InitialDraw>
CountSummary simulate_nonspatial_sde(InitialDraw&& initial, const CountRates& k, const std::vector<double>& times,
                                     std::size_t n, std::uint64_t seed, const IrradiationModel* source = nullptr) {
    k.validate();
    CountSummary s;
    s.times = times;
    std::sort(s.times.begin(), s.times.end());
    s.replicates = n;
    const std::size_t m = s.times.size();
    s.lethal_free.assign(m, 0);
    s.mean_x.assign(m, 0.0);
    s.mean_y.assign(m, 0.0);
    s.factorial_x.assign(m, 0.0);
    for (std::size_t rep = 0; rep < n; ++rep) {
        RngStream init = replicate_stream(seed, rep, Substream::initial);
        RngStream rng = replicate_stream(seed, rep, Substream::dynamics);
        const auto [x0, y0] = initial(init);
        const CountPath path = simulate_count_path(x0, y0, k, s.times, rng, source);
        for (std::size_t i = 0; i < m; ++i) {
            const double x = static_cast<double>(path.x[i]);
            if (path.y[i] == 0) ++s.lethal_free[i];
            s.mean_x[i] += x;
            s.mean_y[i] += static_cast<double>(path.y[i]);
            s.factorial_x[i] += x * (x - 1.0);
        }
    }
    for (std::size_t i = 0; i < m; ++i) {
        s.mean_x[i] /= static_cast<double>(n);
        s.mean_y[i] /= static_cast<double>(n);
        s.factorial_x[i] /= static_cast<double>(n);
    }
    return s;
}

// ---------------------------------------------------------------------------
// Large-population limit

struct LimitTrajectory {
    std::vector<double> times;
    std::vector<double> x;  ///< total sub-lethal density <1, u^X>
    std::vector<double> y;
};

/// Spatially constant limit: u' = -(r + a) u - 2 c b u^2 + s_x, v' = a u + p c b u^2 + s_y,
/// where c is the pair-convention factor and the sources act while t < t_irr.
inline LimitTrajectory solve_limit_homogeneous(double u0, double v0, const CountRates& k, double source_x,
                                               double source_y, const std::vector<double>& times, double dt) {
    k.validate();
    if (!(dt > 0.0)) throw ConfigError("limit dt must be positive");
    const double c = pair_mean_factor(k.convention);
    auto rhs = [&](double t, const std::array<double, 2>& s) {
        const double u = s[0];
        const double on = k.source_rate(t) > 0.0 ? 1.0 : 0.0;
        return std::array<double, 2>{-(k.r + k.a) * u - 2.0 * c * k.b * u * u + on * k.d_dot * source_x,
                                     k.a * u + k.p * c * k.b * u * u + on * k.d_dot * source_y};
    };
    std::function<double(double)> sw;
    if (k.d_dot > 0.0 && k.t_irr > 0.0)
        sw = [&](double t) { return t < k.t_irr ? k.t_irr : std::numeric_limits<double>::infinity(); };
    auto traj = detail::integrate_pair({u0, v0}, times, dt, rhs, sw);
    for (double v : traj.x)
        if (!std::isfinite(v)) throw NumericalError("homogeneous limit blew up");
    return {traj.times, traj.x, traj.y};
}

struct LimitFields {
    std::vector<double> times;
    std::vector<double> total_x;
    std::vector<double> total_y;
    std::vector<std::vector<double>> u_x;  ///< densities at each output time
    std::vector<std::vector<double>> u_y;
};

struct SpatialLimitProblem {
    const Grid* grid = nullptr;
    RateModel rates;
    Motion motion_x;
    Motion motion_y;
    PairConvention convention = PairConvention::unordered;
    double d_dot = 0.0;
    double t_irr = 0.0;
    double source_x = 0.0;            ///< expected X lesions per event
    double source_y = 0.0;
    std::vector<double> source_shape;  ///< density integrating to 1 (empty: uniform)
    std::vector<double> u0_x;
    std::vector<double> u0_y;
};

namespace detail {

struct LimitOperator {
    const SpatialLimitProblem& pb;
    const Grid& g;
    std::size_t n;
    double vol;
    double c;
    std::vector<double> b_matrix;       ///< b(c1, c2) for all cell pairs
    std::vector<double> p_matrix;
    std::vector<std::vector<std::pair<std::uint32_t, double>>> placement;  ///< pair -> (cell, weight)
    std::vector<double> shape;
    std::vector<std::array<double, 3>> link_sign;

    explicit LimitOperator(const SpatialLimitProblem& problem)
        : pb(problem), g(*problem.grid), n(g.size()), vol(g.cell_volume()), c(pair_mean_factor(problem.convention)) {
        if (pb.rates.b_density_kernel)
            throw ConfigError("limit_spatial does not support a concentration-dependent pair rate");
        if (!pb.motion_x.is_isotropic() || !pb.motion_y.is_isotropic())
            throw ConfigError("limit_spatial needs isotropic diffusion");
        b_matrix.assign(n * n, 0.0);
        p_matrix.assign(n * n, 0.0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                if (i == j && !pb.rates.b_pair.is_constant()) {
                    b_matrix[i * n + j] = pb.rates.b_pair(0.0);
                } else {
                    b_matrix[i * n + j] = pb.rates.b_pair(distance(g.center(i), g.center(j)));
                }
                p_matrix[i * n + j] = pb.rates.p(g.center(i), g.center(j));
            }
        // Placement of the created Y on the segment between two cells.
        std::vector<std::pair<double, double>> alphas;
        const auto& spec = pb.rates.m_b.spec();
        if (std::holds_alternative<Midpoint>(spec)) alphas = {{0.5, 1.0}};
        else if (std::holds_alternative<AtParent>(spec)) alphas = {{1.0, 0.5}, {0.0, 0.5}};
        else if (std::holds_alternative<SegmentUniform>(spec)) {
            const int m = 16;
            for (int k = 0; k < m; ++k) alphas.emplace_back((k + 0.5) / m, 1.0 / m);
        } else {
            const auto& mix = std::get<SegmentMixture>(spec);
            for (std::size_t k = 0; k < mix.alphas.size(); ++k) alphas.emplace_back(mix.alphas[k], mix.weights[k]);
        }
        placement.resize(n * n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                for (const auto& [al, w] : alphas)
                    placement[i * n + j].emplace_back(
                        static_cast<std::uint32_t>(g.locate(lerp(g.center(i), g.center(j), al))), w);
        if (pb.source_shape.empty())
            shape.assign(n, 1.0 / (static_cast<double>(n) * vol));
        else
            shape = pb.source_shape;
    }

    double concentration(const Kernel& k, std::size_t cell, const std::vector<double>& ux,
                         const std::vector<double>& uy) const {
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            double m = 0.0;
            if (k.includes_x()) m += ux[j];
            if (k.includes_y()) m += uy[j];
            if (m != 0.0) s += k(distance(g.center(cell), g.center(j))) * m * vol;
        }
        return s;
    }

    void transport(const Motion& mo, const std::vector<double>& u, std::vector<double>& du) const {
        const double D = 0.5 * mo.covariance(0, 0);
        for (std::size_t cell = 0; cell < n; ++cell)
            for (const auto& link : g.links(cell)) {
                const double h = g.spacing(link.axis);
                const int ax = link.axis;
                du[cell] += D * (u[link.cell] - u[cell]) / (h * h);
                const double dir = g.center(link.cell)[ax] > g.center(cell)[ax] ? 1.0 : -1.0;
                const double v = mo.mu[ax] * dir;  // velocity towards the neighbour
                if (v > 0.0) {
                    du[cell] -= v * u[cell] / h;
                    du[link.cell] += v * u[cell] / h;
                }
            }
    }

    void rhs(double t, const std::vector<double>& ux, const std::vector<double>& uy, std::vector<double>& dx,
             std::vector<double>& dy) const {
        std::fill(dx.begin(), dx.end(), 0.0);
        std::fill(dy.begin(), dy.end(), 0.0);
        transport(pb.motion_x, ux, dx);
        transport(pb.motion_y, uy, dy);
        const RateModel& rm = pb.rates;
        for (std::size_t i = 0; i < n; ++i) {
            const double vr = rm.r_is_global() ? 0.0 : concentration(rm.r.kernel, i, ux, uy);
            const double va = rm.a_is_global() ? 0.0 : concentration(rm.a.kernel, i, ux, uy);
            const double r = rm.r.base * rm.r.form(vr);
            const double a = rm.a.base * rm.a.form(va);
            dx[i] -= (r + a) * ux[i];
            dy[i] += a * ux[i];
        }
        for (std::size_t i = 0; i < n; ++i) {
            if (ux[i] == 0.0) continue;
            for (std::size_t j = 0; j < n; ++j) {
                const double bij = b_matrix[i * n + j];
                if (bij == 0.0 || ux[j] == 0.0) continue;
                const double flux = c * bij * ux[i] * ux[j] * vol;  // per unit volume at i
                dx[i] -= 2.0 * flux;
                const double created = p_matrix[i * n + j] * flux * vol;
                for (const auto& [cell, w] : placement[i * n + j]) dy[cell] += w * created / vol;
            }
        }
        const double on = t < pb.t_irr ? pb.d_dot : 0.0;
        if (on > 0.0)
            for (std::size_t i = 0; i < n; ++i) {
                dx[i] += on * pb.source_x * shape[i];
                dy[i] += on * pb.source_y * shape[i];
            }
    }

    double stable_dt() const {
        double lim = std::numeric_limits<double>::infinity();
        for (const auto* mo : {&pb.motion_x, &pb.motion_y}) {
            const double D = 0.5 * mo->covariance(0, 0);
            double rate = 0.0;
            for (int ax = 0; ax < g.dim(); ++ax) {
                const double h = g.spacing(ax);
                rate += 2.0 * D / (h * h) + std::fabs(mo->mu[ax]) / h;
            }
            if (rate > 0.0) lim = std::min(lim, 1.0 / rate);
        }
        return lim;
    }
};

}  // namespace detail

/// Method of lines for the limit densities with explicit RK4.
inline LimitFields solve_limit_spatial(const SpatialLimitProblem& pb, const std::vector<double>& times, double dt) {
    if (!pb.grid) throw ConfigError("limit_spatial needs a grid");
    const Grid& g = *pb.grid;
    const std::size_t n = g.size();
    if (pb.u0_x.size() != n || pb.u0_y.size() != n) throw ConfigError("initial fields do not match the grid");
    if (!pb.source_shape.empty() && pb.source_shape.size() != n) throw ConfigError("source shape does not match the grid");
    detail::LimitOperator op(pb);
    if (dt > op.stable_dt())
        throw ConfigError("limit dt " + std::to_string(dt) + " exceeds the stability bound " +
                          std::to_string(op.stable_dt()));

    std::vector<double> ux = pb.u0_x, uy = pb.u0_y;
    std::vector<double> k1x(n), k1y(n), k2x(n), k2y(n), k3x(n), k3y(n), k4x(n), k4y(n), tx(n), ty(n);
    LimitFields out;
    std::vector<double> sorted = times;
    std::sort(sorted.begin(), sorted.end());
    double t = 0.0;
    auto step = [&](double h) {
        op.rhs(t, ux, uy, k1x, k1y);
        for (std::size_t i = 0; i < n; ++i) tx[i] = ux[i] + 0.5 * h * k1x[i], ty[i] = uy[i] + 0.5 * h * k1y[i];
        op.rhs(t + 0.5 * h, tx, ty, k2x, k2y);
        for (std::size_t i = 0; i < n; ++i) tx[i] = ux[i] + 0.5 * h * k2x[i], ty[i] = uy[i] + 0.5 * h * k2y[i];
        op.rhs(t + 0.5 * h, tx, ty, k3x, k3y);
        for (std::size_t i = 0; i < n; ++i) tx[i] = ux[i] + h * k3x[i], ty[i] = uy[i] + h * k3y[i];
        op.rhs(t + h, tx, ty, k4x, k4y);
        for (std::size_t i = 0; i < n; ++i) {
            ux[i] += h / 6.0 * (k1x[i] + 2.0 * k2x[i] + 2.0 * k3x[i] + k4x[i]);
            uy[i] += h / 6.0 * (k1y[i] + 2.0 * k2y[i] + 2.0 * k3y[i] + k4y[i]);
            for (double* v : {&ux[i], &uy[i]}) {
                if (*v < 0.0) {
                    if (*v < -1e-12) throw NumericalError("limit density became negative at cell " + std::to_string(i));
                    *v = 0.0;
                }
            }
        }
    };
    for (double target : sorted) {
        while (t < target) {
            double end = target;
            if (pb.d_dot > 0.0 && t < pb.t_irr) end = std::min(end, pb.t_irr);
            const double span = end - t;
            const auto m = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(span / dt - 1e-12)));
            const double h = span / static_cast<double>(m);
            for (std::size_t i = 0; i < m; ++i) {
                step(h);
                t += h;
            }
            t = end;
        }
        out.times.push_back(target);
        out.total_x.push_back(g.integrate(ux));
        out.total_y.push_back(g.integrate(uy));
        out.u_x.push_back(ux);
        out.u_y.push_back(uy);
    }
    return out;
}

}  // namespace gsm2
