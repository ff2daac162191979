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

//! \file chemistry.hpp
//! Reaction-diffusion of L chemical species on a cell grid with zero-flux
//! boundaries, explicit Euler in time, and additive jumps at irradiation
//! events.

#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "gsm2/errors.hpp"
#include "gsm2/geometry.hpp"
#include "gsm2/grid.hpp"

namespace gsm2 {

/// rho_s' = -k rho_s
struct LinearDecay {
    std::size_t species = 0;
    double k = 0.0;
};

/// A + B -> C at mass-action rate k rho_A rho_B.
struct Bimolecular {
    std::size_t a = 0;
    std::size_t b = 0;
    std::size_t c = 0;
    double k = 0.0;
};

/// rho_s' = g rho_s (1 - rho_s / capacity)
struct Logistic {
    std::size_t species = 0;
    double g = 0.0;
    double capacity = 1.0;
};

using Reaction = std::variant<LinearDecay, Bimolecular, Logistic>;

/// Species fields indexed [species][cell], plus the time they refer to.
struct ChemState {
    double time = 0.0;
    std::vector<std::vector<double>> fields;
};

struct ChemistryModel {
    std::vector<double> diffusion;        ///< D_i, um^2 / h
    std::vector<Reaction> reactions;
    std::vector<double> initial;          ///< uniform initial value per species
    std::vector<double> footprint_yield;  ///< deposited amount per gray, per species
    int cells_per_axis = 16;
    double dt = 1e-3;                     ///< hours
    std::optional<double> declared_c0;
    std::optional<double> declared_c1;

    std::size_t species() const { return diffusion.size(); }

    /// (C0, C1) with sum_i f_i <= C0 + C1 sum_i rho_i for the shipped reactions.
    std::pair<double, double> mass_control() const {
        double c1 = 0.0;
        for (const auto& r : reactions)
            if (const auto* l = std::get_if<Logistic>(&r)) c1 += l->g;
        return {0.0, c1};
    }

    void validate(const Grid& grid) const {
        const std::size_t L = species();
        if (L == 0) throw ConfigError("chemistry needs at least one species");
        if (initial.size() != L || footprint_yield.size() != L)
            throw ConfigError("chemistry initial and footprint_yield need one entry per species");
        double dmax = 0.0;
        for (double d : diffusion) {
            if (!(d >= 0.0) || !std::isfinite(d)) throw ConfigError("diffusion coefficients must be >= 0");
            dmax = std::max(dmax, d);
        }
        for (double v : initial)
            if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError("initial concentrations must be >= 0");
        for (double v : footprint_yield)
            if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError("footprint yields must be >= 0");
        auto check_species = [L](std::size_t s) {
            if (s >= L) throw ConfigError("reaction refers to unknown species " + std::to_string(s));
        };
        for (const auto& r : reactions) {
            if (const auto* d = std::get_if<LinearDecay>(&r)) {
                check_species(d->species);
                if (!(d->k >= 0.0)) throw ConfigError("decay rate must be >= 0");
            } else if (const auto* b = std::get_if<Bimolecular>(&r)) {
                check_species(b->a);
                check_species(b->b);
                check_species(b->c);
                if (!(b->k >= 0.0)) throw ConfigError("bimolecular rate must be >= 0");
            } else {
                const auto& l = std::get<Logistic>(r);
                check_species(l.species);
                if (!(l.g >= 0.0) || !(l.capacity > 0.0))
                    throw ConfigError("logistic needs g >= 0 and capacity > 0");
            }
        }
        if (!(dt > 0.0)) throw ConfigError("chemistry dt must be positive");
        const double h = grid.min_spacing();
        if (dmax > 0.0 && dt > h * h / (2.0 * grid.dim() * dmax))
            throw ConfigError("chemistry dt " + std::to_string(dt) + " exceeds the stability bound " +
                              std::to_string(h * h / (2.0 * grid.dim() * dmax)));
        const auto [c0, c1] = mass_control();
        if (declared_c0 && *declared_c0 < c0) throw ConfigError("declared C0 is below the network's bound");
        if (declared_c1 && *declared_c1 < c1) throw ConfigError("declared C1 is below the network's bound");
    }
};

/// Grid-bound reaction-diffusion solver.
class Chemistry {
public:
    static constexpr double kNegativeTolerance = -1e-12;

    Chemistry(ChemistryModel model, const Domain& domain)
        : model_(std::move(model)), grid_(Grid::uniform(domain, model_.cells_per_axis)) {
        model_.validate(grid_);
    }

    const ChemistryModel& model() const { return model_; }
    const Grid& grid() const { return grid_; }

    ChemState initial_state() const {
        ChemState s;
        for (double v : model_.initial) s.fields.emplace_back(grid_.size(), v);
        return s;
    }

    /// One explicit Euler step of length dt (stability is checked against
    /// the configured dt, so any dt up to it is admissible).
    void step(ChemState& s, double dt) const {
        if (dt > model_.dt * (1.0 + 1e-12)) throw InputError("chemistry step exceeds configured dt");
        const std::size_t L = model_.species(), n = grid_.size();
        std::vector<std::vector<double>> rate(L, std::vector<double>(n, 0.0));

        for (std::size_t i = 0; i < L; ++i) {
            const double D = model_.diffusion[i];
            if (D == 0.0) continue;
            const auto& u = s.fields[i];
            for (std::size_t c = 0; c < n; ++c) {
                double lap = 0.0;
                for (const auto& link : grid_.links(c)) {
                    const double h = grid_.spacing(link.axis);
                    lap += (u[link.cell] - u[c]) / (h * h);
                }
                rate[i][c] += D * lap;
            }
        }
        for (const auto& r : model_.reactions) {
            if (const auto* d = std::get_if<LinearDecay>(&r)) {
                for (std::size_t c = 0; c < n; ++c) rate[d->species][c] -= d->k * s.fields[d->species][c];
            } else if (const auto* b = std::get_if<Bimolecular>(&r)) {
                for (std::size_t c = 0; c < n; ++c) {
                    const double v = b->k * s.fields[b->a][c] * s.fields[b->b][c];
                    rate[b->a][c] -= v;
                    rate[b->b][c] -= v;
                    rate[b->c][c] += v;
                }
            } else {
                const auto& l = std::get<Logistic>(r);
                for (std::size_t c = 0; c < n; ++c) {
                    const double u = s.fields[l.species][c];
                    rate[l.species][c] += l.g * u * (1.0 - u / l.capacity);
                }
            }
        }
        for (std::size_t i = 0; i < L; ++i)
            for (std::size_t c = 0; c < n; ++c) {
                double v = s.fields[i][c] + dt * rate[i][c];
                if (v < 0.0) {
                    if (v < kNegativeTolerance)
                        throw NumericalError("chemistry species " + std::to_string(i) + " became negative (" +
                                             std::to_string(v) + ") in cell " + std::to_string(c));
                    v = 0.0;
                }
                s.fields[i][c] = v;
            }
        s.time += dt;
    }

    /// Steps to `t_target` with the configured dt and a final partial step.
    void advance(ChemState& s, double t_target) const {
        while (s.time < t_target) {
            const double h = std::min(model_.dt, t_target - s.time);
            if (h <= 0.0) break;
            step(s, h);
            if (t_target - s.time < 1e-15 * std::max(1.0, t_target)) s.time = t_target;
        }
    }

    /// Adds a non-negative footprint to one species.
    void inject(ChemState& s, std::size_t species, const std::vector<double>& footprint) const {
        if (species >= model_.species()) throw InputError("inject: unknown species");
        if (footprint.size() != grid_.size()) throw InputError("inject: footprint size mismatch");
        for (double v : footprint)
            if (!(v >= 0.0) || !std::isfinite(v)) throw InputError("inject: negative or non-finite footprint");
        for (std::size_t c = 0; c < footprint.size(); ++c) s.fields[species][c] += footprint[c];
    }

    /// Deposits a track of specific energy z with normalized shape `shape`
    /// into every species according to the footprint yields.
    void inject_track(ChemState& s, double z, const std::vector<double>& shape) const {
        for (std::size_t i = 0; i < model_.species(); ++i) {
            const double amount = model_.footprint_yield[i] * z;
            if (amount == 0.0) continue;
            std::vector<double> f(shape.size());
            for (std::size_t c = 0; c < shape.size(); ++c) f[c] = amount * shape[c];
            inject(s, i, f);
        }
    }

    double mass(const ChemState& s, std::size_t species) const { return grid_.integrate(s.fields[species]); }

    double total_mass(const ChemState& s) const {
        double m = 0.0;
        for (std::size_t i = 0; i < model_.species(); ++i) m += mass(s, i);
        return m;
    }

    /// Nearest-cell value of one species at q.
    double lookup(const ChemState& s, std::size_t species, const Point& q) const {
        if (species >= model_.species()) throw ConfigError("coupling refers to unknown species");
        if (q.dim() != grid_.dim()) throw ConfigError("chemistry grid does not cover the particle domain");
        return s.fields[species][grid_.locate(q)];
    }

private:
    ChemistryModel model_;
    Grid grid_;
};

}  // namespace gsm2
