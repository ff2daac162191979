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

//! \file engine.hpp
//! Jump-diffusion engine for the lesion point measure.
//!
//! Event times follow an integrated-hazard clock. One E ~ Exp(1) is drawn per
//! event; time then advances in substeps of at most dt_diff, with all channel
//! totals frozen at the substep start, until the accumulated hazard reaches E.
//! The firing channel is chosen proportionally to the frozen totals and the
//! lesion (or pair) proportionally to the frozen per-lesion weights. When no
//! lesion moves the rates are piecewise constant between events and the
//! scheme is exact.
//!
//! Pair rates are per unordered pair: N X lesions with a constant kernel b
//! give a total of b N (N - 1) / 2.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "gsm2/chemistry.hpp"
#include "gsm2/diffusion.hpp"
#include "gsm2/errors.hpp"
#include "gsm2/geometry.hpp"
#include "gsm2/irradiation.hpp"
#include "gsm2/random.hpp"
#include "gsm2/rates.hpp"
#include "gsm2/state.hpp"

namespace gsm2 {

/// Everything that defines the dynamics of one replicate.
struct SimulationModel {
    Domain domain;
    RateModel rates;
    MotionModel motion;
    IrradiationModel irradiation;
    std::optional<ChemistryModel> chemistry;
    std::size_t n_max = 1'000'000;

    void validate() const {
        rates.validate();
        motion.validate();
        irradiation.validate(domain);
        if (n_max == 0) throw ConfigError("n_max must be positive");
    }

    /// Irradiation channel intensity at time t.
    double irradiation_rate(double t) const {
        return irradiation.protracted() && t < irradiation.t_irr ? irradiation.d_dot : 0.0;
    }
};

struct ChannelTotals {
    double r = 0.0;
    double a = 0.0;
    double b = 0.0;  ///< sum over unordered pairs
    double d = 0.0;

    double total() const { return r + a + b + d; }
};

/// Frozen rates at a substep start: totals plus the selection weights.
struct RateTable {
    ChannelTotals totals;
    bool r_uniform = true;
    bool a_uniform = true;
    bool b_uniform = true;
    std::vector<double> r_cum;
    std::vector<double> a_cum;
    std::vector<std::pair<std::uint32_t, std::uint32_t>> pairs;
    std::vector<double> b_cum;
};

inline RateTable compute_rates(const SystemState& s, const SimulationModel& m) {
    const RateModel& rm = m.rates;
    RateTable t;
    const std::size_t n = s.n_x();
    const auto& xs = s.xs();
    const Point anywhere(m.domain.dim());

    t.r_uniform = rm.r_is_global();
    if (n > 0) {
        if (t.r_uniform) {
            t.totals.r = eval_r(rm, anywhere, s) * static_cast<double>(n);
        } else {
            t.r_cum.resize(n);
            double acc = 0.0;
            for (std::size_t i = 0; i < n; ++i) t.r_cum[i] = acc += eval_r(rm, xs[i], s, {i});
            t.totals.r = acc;
        }
    }

    t.a_uniform = rm.a_is_global();
    if (n > 0) {
        if (t.a_uniform) {
            t.totals.a = eval_a(rm, anywhere, s) * static_cast<double>(n);
        } else {
            t.a_cum.resize(n);
            double acc = 0.0;
            for (std::size_t i = 0; i < n; ++i) t.a_cum[i] = acc += eval_a(rm, xs[i], s, {i});
            t.totals.a = acc;
        }
    }

    t.b_uniform = rm.b_is_global();
    if (n > 1) {
        if (t.b_uniform) {
            const double b0 = rm.b_pair.constant_value();
            if (rm.b_cap && b0 > *rm.b_cap) throw ModelError("pair rate exceeds linear-growth bound");
            t.totals.b = b0 * 0.5 * static_cast<double>(n) * static_cast<double>(n - 1);
        } else {
            const auto radius = rm.b_pair.support_radius();
            const double r2 = radius ? *radius * *radius : 0.0;
            double acc = 0.0;
            for (std::size_t i = 0; i + 1 < n; ++i)
                for (std::size_t j = i + 1; j < n; ++j) {
                    if (radius && distance2(xs[i], xs[j]) >= r2) continue;
                    const double w = eval_b_pair(rm, xs[i], xs[j], s, {i, j});
                    if (w <= 0.0) continue;
                    t.pairs.emplace_back(static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j));
                    t.b_cum.push_back(acc += w);
                }
            t.totals.b = acc;
        }
    }

    t.totals.d = m.irradiation_rate(s.time());
    return t;
}

enum class ClockChannel { repair, death, pair, irradiation };

struct EventChoice {
    ClockChannel channel = ClockChannel::repair;
    std::size_t i = 0;
    std::size_t j = 0;
};

/// Picks the firing channel and the lesion(s) involved from frozen rates.
inline EventChoice choose_event(const RateTable& t, const SystemState& s, RngStream& rng) {
    const double total = t.totals.total();
    if (!(total > 0.0)) throw InternalError("event selected with zero total rate");
    const double u = rng.uniform() * total;
    const std::size_t n = s.n_x();
    EventChoice c;
    if (u < t.totals.r) {
        c.channel = ClockChannel::repair;
        c.i = t.r_uniform ? rng.uniform_index(n) : rng.from_cumulative(t.r_cum);
    } else if (u < t.totals.r + t.totals.a) {
        c.channel = ClockChannel::death;
        c.i = t.a_uniform ? rng.uniform_index(n) : rng.from_cumulative(t.a_cum);
    } else if (u < t.totals.r + t.totals.a + t.totals.b || t.totals.d == 0.0) {
        c.channel = ClockChannel::pair;
        if (t.b_uniform) {
            c.i = rng.uniform_index(n);
            c.j = rng.uniform_index(n - 1);
            if (c.j >= c.i) ++c.j;
            if (c.i > c.j) std::swap(c.i, c.j);
        } else {
            const auto& p = t.pairs[rng.from_cumulative(t.b_cum)];
            c.i = p.first;
            c.j = p.second;
        }
    } else {
        c.channel = ClockChannel::irradiation;
    }
    if (c.channel != ClockChannel::irradiation && n == 0)
        throw InternalError("lesion channel fired with no sub-lethal lesions");
    return c;
}

struct EventRecord {
    double time = 0.0;
    Channel channel = Channel::repair;
    std::vector<Point> removed;    ///< X lesions removed
    std::vector<Point> created_x;  ///< X lesions created
    std::vector<Point> created_y;  ///< Y lesions created
    std::optional<Point> track_center;
    double track_z = 0.0;

    std::size_t n_removed() const { return removed.size(); }
    std::size_t n_created() const { return created_x.size() + created_y.size(); }

    /// Cardinality contract of the channel.
    bool consistent() const {
        switch (channel) {
            case Channel::repair: return removed.size() == 1 && n_created() == 0;
            case Channel::death:
                return removed.size() == 1 && created_x.empty() && created_y.size() == 1;
            case Channel::pair_lethal:
                return removed.size() == 2 && created_x.empty() && created_y.size() == 1;
            case Channel::pair_repair: return removed.size() == 2 && n_created() == 0;
            case Channel::irradiation: return removed.empty();
        }
        return false;
    }
};

/// Optional chemistry bound to a replicate.
struct ChemLink {
    const Chemistry* chem = nullptr;
    ChemState* state = nullptr;

    explicit operator bool() const { return chem && state; }
};

/// Applies a chosen event to the state.
inline EventRecord execute_event(SystemState& s, const SimulationModel& m, const EventChoice& c,
                                 RngStream& rng, ChemLink chem = {}) {
    using A = detail::StateAccess;
    auto& xs = A::xs(s);
    auto& ys = A::ys(s);
    EventRecord rec;
    rec.time = s.time();
    switch (c.channel) {
        case ClockChannel::repair: {
            if (c.i >= xs.size()) throw InternalError("repair index out of range");
            rec.channel = Channel::repair;
            rec.removed.push_back(xs[c.i]);
            A::swap_remove(xs, c.i);
            break;
        }
        case ClockChannel::death: {
            if (c.i >= xs.size()) throw InternalError("death index out of range");
            rec.channel = Channel::death;
            const Point q = xs[c.i];
            rec.removed.push_back(q);
            A::swap_remove(xs, c.i);
            const Point y = sample_placement(m.rates.m_a, q, rng);
            if (!m.domain.contains(y)) throw ModelError("placement produced a point outside the domain");
            ys.push_back(y);
            rec.created_y.push_back(y);
            break;
        }
        case ClockChannel::pair: {
            if (c.i == c.j || c.i >= xs.size() || c.j >= xs.size())
                throw InternalError("invalid pair indices");
            const Point q1 = xs[c.i], q2 = xs[c.j];
            rec.removed = {q1, q2};
            const bool lethal = rng.uniform() < m.rates.p(q1, q2);
            A::swap_remove(xs, std::max(c.i, c.j));
            A::swap_remove(xs, std::min(c.i, c.j));
            if (lethal) {
                rec.channel = Channel::pair_lethal;
                const Point y = sample_placement(m.rates.m_b, q1, q2, rng);
                if (!m.domain.contains(y)) throw ModelError("placement produced a point outside the domain");
                ys.push_back(y);
                rec.created_y.push_back(y);
            } else {
                rec.channel = Channel::pair_repair;
            }
            break;
        }
        case ClockChannel::irradiation: {
            rec.channel = Channel::irradiation;
            ConcentrationLookup lookup;
            if (chem)
                lookup = [&chem](std::size_t sp, const Point& q) { return chem.chem->lookup(*chem.state, sp, q); };
            TrackBatch b = sample_track(m.irradiation, m.domain, rng, lookup);
            xs.insert(xs.end(), b.xs.begin(), b.xs.end());
            ys.insert(ys.end(), b.ys.begin(), b.ys.end());
            rec.created_x = std::move(b.xs);
            rec.created_y = std::move(b.ys);
            rec.track_center = b.center;
            rec.track_z = b.z;
            if (chem) {
                const auto shape = track_footprint(m.irradiation, chem.chem->grid(), b.center);
                chem.chem->inject_track(*chem.state, b.z, shape);
            }
            break;
        }
    }
    A::count(s, rec.channel);
    return rec;
}

namespace detail {
/// Moves lesions (and chemistry) forward by h, landing exactly on `target`.
inline void advance_time(SystemState& s, const SimulationModel& m, double h, double target, RngStream& motion,
                         ChemLink chem) {
    if (m.motion.is_static())
        StateAccess::set_time(s, target);
    else {
        step_all(s, m.motion, m.domain, h, motion);
        StateAccess::set_time(s, target);
    }
    if (chem) chem.chem->advance(*chem.state, target);
}
}  // namespace detail

/// Advances to the next event or to t_max, whichever comes first. `clock`
/// drives event times and selections, `motion` the Brownian increments.
inline std::optional<EventRecord> next_event(SystemState& s, const SimulationModel& m, double t_max,
                                             RngStream& clock, RngStream& motion, ChemLink chem = {}) {
    if (t_max < s.time()) throw InputError("next_event: t_max precedes the state time");
    const double target_hazard = clock.exponential();
    double acc = 0.0;
    const bool moving = !m.motion.is_static();
    while (s.time() < t_max) {
        const RateTable rt = compute_rates(s, m);
        const double total = rt.totals.total();
        if (!std::isfinite(total)) throw ModelError("channel totals are not finite");

        double end = t_max;
        if (moving) end = std::min(end, s.time() + m.motion.dt_diff);
        if (m.irradiation.protracted() && s.time() < m.irradiation.t_irr) end = std::min(end, m.irradiation.t_irr);
        const double h = end - s.time();

        const double need = target_hazard - acc;
        if (total > 0.0 && total * h >= need) {
            const double tau = std::min(need / total, h);
            const double t_event = tau == h ? end : s.time() + tau;
            detail::advance_time(s, m, tau, t_event, motion, chem);
            const EventChoice choice = choose_event(rt, s, clock);
            return execute_event(s, m, choice, clock, chem);
        }
        acc += total * h;
        detail::advance_time(s, m, h, end, motion, chem);
    }
    return std::nullopt;
}

/// How the lesions present at t = 0 are generated.
struct InitialCondition {
    enum class Kind { counts, irradiation, positions };

    Kind kind = Kind::counts;
    double n_x = 0.0;  ///< counts: fixed count, or Poisson mean when `poisson`
    double n_y = 0.0;
    bool poisson = false;
    std::vector<Point> xs;  ///< positions
    std::vector<Point> ys;
};

/// Samples the t = 0 state. Count-specified lesions are uniform on the domain.
inline SystemState sample_initial_state(const SimulationModel& m, const InitialCondition& ic, RngStream& rng) {
    switch (ic.kind) {
        case InitialCondition::Kind::irradiation: return sample_initial_measure(m.irradiation, m.domain, rng);
        case InitialCondition::Kind::positions:
            for (const auto* v : {&ic.xs, &ic.ys})
                for (const auto& q : *v)
                    if (!m.domain.contains(q)) throw ConfigError("initial lesion " + q.str() + " lies outside the domain");
            return SystemState(0.0, ic.xs, ic.ys);
        case InitialCondition::Kind::counts: {
            auto draw = [&](double v) {
                return ic.poisson ? rng.poisson(v) : static_cast<std::uint64_t>(std::llround(v));
            };
            const std::uint64_t nx = draw(ic.n_x), ny = draw(ic.n_y);
            std::vector<Point> xs, ys;
            xs.reserve(nx);
            ys.reserve(ny);
            for (std::uint64_t i = 0; i < nx; ++i) xs.push_back(m.domain.sample_uniform(rng));
            for (std::uint64_t i = 0; i < ny; ++i) ys.push_back(m.domain.sample_uniform(rng));
            return SystemState(0.0, std::move(xs), std::move(ys));
        }
    }
    throw InternalError("unknown initial condition kind");
}

struct RunSettings {
    double t_max = 1.0;
    std::vector<double> output_times;  ///< snapshot times in [0, t_max]
    bool stop_at_extinction = false;
    bool record_events = true;
    bool record_positions = false;
};

struct Snapshot {
    double time = 0.0;
    std::size_t n_x = 0;
    std::size_t n_y = 0;
    std::vector<Point> xs;
    std::vector<Point> ys;
    std::vector<double> chem_mass;
    std::vector<std::vector<double>> chem_fields;  ///< [species][cell], only with record_positions
};

struct ReplicateResult {
    std::uint64_t replicate = 0;
    std::size_t initial_x = 0;
    std::size_t initial_y = 0;
    std::vector<Snapshot> snapshots;
    std::vector<EventRecord> events;
    SystemState final_state;
    std::optional<double> extinction_time;  ///< first time no X remains and none can be created
};

namespace detail {
inline Snapshot take_snapshot(const SystemState& s, double t, const RunSettings& rs, ChemLink chem) {
    Snapshot snap{t, s.n_x(), s.n_y(), {}, {}, {}, {}};
    if (rs.record_positions) {
        snap.xs = s.xs();
        snap.ys = s.ys();
        if (chem) snap.chem_fields = chem.state->fields;
    }
    if (chem)
        for (std::size_t i = 0; i < chem.chem->model().species(); ++i)
            snap.chem_mass.push_back(chem.chem->mass(*chem.state, i));
    return snap;
}

inline bool absorbed(const SystemState& s, const SimulationModel& m) {
    return s.n_x() == 0 && m.irradiation_rate(s.time()) == 0.0;
}
}  // namespace detail

/// One full path on [0, t_max]. Deterministic in (model, settings, seed,
/// replicate): initial state, clock and motion use separate sub-streams.
inline ReplicateResult simulate_replicate(const SimulationModel& m, const InitialCondition& ic,
                                          const RunSettings& rs, std::uint64_t seed, std::uint64_t replicate) {
    if (!(rs.t_max > 0.0)) throw ConfigError("t_max must be positive");
    RngStream init_rng = replicate_stream(seed, replicate, Substream::initial);
    RngStream clock = replicate_stream(seed, replicate, Substream::dynamics);
    RngStream motion = replicate_stream(seed, replicate, Substream::motion);

    ReplicateResult out;
    out.replicate = replicate;
    SystemState s = sample_initial_state(m, ic, init_rng);
    out.initial_x = s.n_x();
    out.initial_y = s.n_y();

    std::optional<Chemistry> chem;
    ChemState chem_state;
    ChemLink link;
    if (m.chemistry) {
        chem.emplace(*m.chemistry, m.domain);
        chem_state = chem->initial_state();
        link = {&*chem, &chem_state};
    }

    std::vector<double> stops;
    for (double t : rs.output_times) {
        if (t < 0.0 || t > rs.t_max) throw ConfigError("output time outside [0, T]");
        stops.push_back(t);
    }
    std::sort(stops.begin(), stops.end());
    stops.erase(std::unique(stops.begin(), stops.end()), stops.end());

    if (detail::absorbed(s, m)) out.extinction_time = 0.0;
    std::size_t next_stop = 0;
    auto flush_stops = [&](double upto) {
        while (next_stop < stops.size() && stops[next_stop] <= upto)
            out.snapshots.push_back(detail::take_snapshot(s, stops[next_stop++], rs, link));
    };
    flush_stops(0.0);

    while (s.time() < rs.t_max) {
        if (rs.stop_at_extinction && out.extinction_time) break;
        const double horizon = next_stop < stops.size() ? stops[next_stop] : rs.t_max;
        auto ev = next_event(s, m, horizon, clock, motion, link);
        if (!ev) {
            if (!out.extinction_time && detail::absorbed(s, m)) out.extinction_time = s.time();
            flush_stops(s.time());
            continue;
        }
        if (s.total() > m.n_max)
            throw NumericalError("population " + std::to_string(s.total()) + " exceeds n_max " +
                                 std::to_string(m.n_max) + " at t = " + std::to_string(s.time()));
        if (!out.extinction_time && detail::absorbed(s, m)) out.extinction_time = s.time();
        if (rs.record_events) out.events.push_back(std::move(*ev));
    }
    // Counts are frozen once absorbed, so remaining snapshots reuse the state.
    while (next_stop < stops.size())
        out.snapshots.push_back(detail::take_snapshot(s, stops[next_stop++], rs, link));
    out.final_state = std::move(s);
    return out;
}

}  // namespace gsm2
