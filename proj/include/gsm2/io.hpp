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

//! \file io.hpp
//! Run orchestration: replicate fan-out, survival estimation, artifact
//! writers and parameter sweeps.

#pragma once

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "gsm2/config.hpp"
#include "gsm2/engine.hpp"
#include "gsm2/meanfield.hpp"
#include "gsm2/random.hpp"

namespace gsm2 {

inline constexpr const char* kToolName = "gsm2sim";
inline constexpr const char* kToolVersion = "0.1.0";
inline constexpr int kOutputSchemaVersion = 1;

/// Worker count: GSM2_THREADS when set, else the hardware concurrency.
inline unsigned default_threads() {
    if (const char* env = std::getenv("GSM2_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end == env || *end != '\0' || v < 1) throw ConfigError("GSM2_THREADS must be a positive integer");
        return static_cast<unsigned>(v);
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

/// Evaluates f(0..n-1) on `threads` workers. Results come back in index
/// order; the first exception thrown by any worker is rethrown.
template <class F>
auto parallel_map(std::size_t n, unsigned threads, F&& f) -> std::vector<decltype(f(std::size_t{}))> {
    using R = decltype(f(std::size_t{}));
    std::vector<std::optional<R>> slots(n);
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n || failed.load()) return;
            try {
                slots[i].emplace(f(i));
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
                failed = true;
                return;
            }
        }
    };
    threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    if (error) std::rethrow_exception(error);
    std::vector<R> out;
    out.reserve(n);
    for (auto& s : slots) out.push_back(std::move(*s));
    return out;
}

// ---------------------------------------------------------------------------
// Survival

struct SurvivalEstimate {
    std::vector<double> times;
    std::vector<double> survival;  ///< fraction of replicates with N_Y = 0
    std::vector<double> se;        ///< sqrt(S (1 - S) / n)
    std::size_t n = 0;
};

inline SurvivalEstimate estimate_survival(const std::vector<double>& times,
                                          const std::vector<std::size_t>& lethal_free, std::size_t n) {
    if (n == 0) throw InputError("survival needs at least one replicate");
    if (times.size() != lethal_free.size()) throw InputError("survival: times and counts differ in length");
    SurvivalEstimate e;
    e.times = times;
    e.n = n;
    for (std::size_t k : lethal_free) {
        if (k > n) throw InputError("survival: more lethal-free replicates than replicates");
        const double s = static_cast<double>(k) / static_cast<double>(n);
        e.survival.push_back(s);
        e.se.push_back(std::sqrt(s * (1.0 - s) / static_cast<double>(n)));
    }
    return e;
}

/// Survival at the snapshot times shared by all replicates.
inline SurvivalEstimate estimate_survival(const std::vector<ReplicateResult>& runs) {
    if (runs.empty()) throw InputError("survival needs at least one replicate");
    std::vector<double> times;
    for (const auto& s : runs.front().snapshots) times.push_back(s.time);
    std::vector<std::size_t> free(times.size(), 0);
    for (const auto& r : runs) {
        if (r.snapshots.size() != times.size()) throw InputError("replicates have different snapshot times");
        for (std::size_t i = 0; i < times.size(); ++i)
            if (r.snapshots[i].n_y == 0) ++free[i];
    }
    return estimate_survival(times, free, runs.size());
}

// ---------------------------------------------------------------------------
// Formatting helpers

inline std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string fmt_points(const std::vector<Point>& ps) {
    std::string s;
    for (std::size_t i = 0; i < ps.size(); ++i) {
        if (i) s += '|';
        for (int d = 0; d < ps[i].dim(); ++d) {
            if (d) s += ' ';
            s += fmt(ps[i][d]);
        }
    }
    return s;
}

inline std::string coord_header(int dim) {
    static const char* names[] = {"x", "y", "z"};
    std::string h;
    for (int d = 0; d < dim; ++d) {
        h += ',';
        h += names[d];
    }
    return h;
}

inline std::string coord_cells(const Point& p) {
    std::string s;
    for (int d = 0; d < p.dim(); ++d) s += ',' + fmt(p[d]);
    return s;
}

/// 64-bit FNV-1a, rendered as 16 hex digits.
inline std::string content_hash(const std::string& text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

inline std::string utc_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

class OutFile {
public:
    explicit OutFile(const std::filesystem::path& p) : path_(p), out_(p, std::ios::binary) {
        if (!out_) throw InputError("cannot write " + p.string());
    }
    template <class T>
    OutFile& operator<<(const T& v) {
        out_ << v;
        return *this;
    }
    void close() {
        out_.close();
        if (out_.fail()) throw InputError("error while writing " + path_.string());
    }

private:
    std::filesystem::path path_;
    std::ofstream out_;
};

inline void write_json(const std::filesystem::path& p, const Json& j) {
    OutFile f(p);
    f << j.dump(2) << '\n';
    f.close();
}

// ---------------------------------------------------------------------------
// Run

struct RunOptions {
    std::filesystem::path out_dir = "out";
    unsigned threads = 1;
    std::size_t chunk = 4096;  ///< replicates held in memory at once
    /// Optional reference curve for N_X / reference_scale at the checkpoints;
    /// the summary then reports the mean absolute per-replicate deviation.
    std::vector<double> reference;
    double reference_scale = 1.0;
};

/// Per-checkpoint accumulators shared by the Monte Carlo modes.
struct EnsembleStats {
    std::vector<double> times;
    std::size_t n = 0;
    std::vector<std::size_t> lethal_free;
    std::vector<double> sum_x, sum_y, sum_x2, sum_y2;
    std::size_t extinct = 0;
    double ext_sum = 0.0, ext_sum2 = 0.0;
    std::uint64_t events = 0;
    std::vector<double> reference;
    double reference_scale = 1.0;
    std::vector<double> sum_dev, sum_dev2;

    explicit EnsembleStats(std::vector<double> t = {}, std::vector<double> ref = {}, double ref_scale = 1.0)
        : times(std::move(t)), reference(std::move(ref)), reference_scale(ref_scale) {
        if (!reference.empty() && reference.size() != times.size())
            throw InputError("reference curve and checkpoints differ in length");
        sum_dev.assign(reference.size(), 0.0);
        sum_dev2.assign(reference.size(), 0.0);
        const auto m = times.size();
        lethal_free.assign(m, 0);
        sum_x.assign(m, 0.0);
        sum_y.assign(m, 0.0);
        sum_x2.assign(m, 0.0);
        sum_y2.assign(m, 0.0);
    }

    void add(std::size_t i, double x, double y) {
        if (y == 0.0) ++lethal_free[i];
        sum_x[i] += x;
        sum_y[i] += y;
        sum_x2[i] += x * x;
        sum_y2[i] += y * y;
        if (!reference.empty()) {
            const double d = std::abs(x / reference_scale - reference[i]);
            sum_dev[i] += d;
            sum_dev2[i] += d * d;
        }
    }

    void add_extinction(const std::optional<double>& t) {
        if (!t) return;
        ++extinct;
        ext_sum += *t;
        ext_sum2 += *t * *t;
    }

    static double mean(double s, std::size_t n) { return n ? s / static_cast<double>(n) : 0.0; }
    static double sd_of_mean(double s, double s2, std::size_t n) {
        if (n < 2) return 0.0;
        const double m = s / static_cast<double>(n);
        const double var = std::max(0.0, (s2 - static_cast<double>(n) * m * m) / static_cast<double>(n - 1));
        return std::sqrt(var / static_cast<double>(n));
    }

    Json to_json() const {
        Json j;
        j["replicates"] = n;
        j["times"] = times;
        std::vector<double> mx, my, sex, sey;
        for (std::size_t i = 0; i < times.size(); ++i) {
            mx.push_back(mean(sum_x[i], n));
            my.push_back(mean(sum_y[i], n));
            sex.push_back(sd_of_mean(sum_x[i], sum_x2[i], n));
            sey.push_back(sd_of_mean(sum_y[i], sum_y2[i], n));
        }
        j["mean_x"] = mx;
        j["se_mean_x"] = sex;
        j["mean_y"] = my;
        j["se_mean_y"] = sey;
        if (n) {
            const auto s = estimate_survival(times, lethal_free, n);
            j["survival"] = s.survival;
            j["survival_se"] = s.se;
        }
        j["extinct_replicates"] = extinct;
        j["mean_extinction_time"] = mean(ext_sum, extinct);
        j["se_extinction_time"] = sd_of_mean(ext_sum, ext_sum2, extinct);
        j["events"] = events;
        if (!reference.empty()) {
            std::vector<double> md, sd;
            for (std::size_t i = 0; i < times.size(); ++i) {
                md.push_back(mean(sum_dev[i], n));
                sd.push_back(sd_of_mean(sum_dev[i], sum_dev2[i], n));
            }
            j["reference"] = reference;
            j["reference_scale"] = reference_scale;
            j["mean_abs_deviation"] = md;
            j["se_mean_abs_deviation"] = sd;
        }
        return j;
    }
};

inline void write_survival_csv(const std::filesystem::path& p, const SurvivalEstimate& s) {
    OutFile f(p);
    f << "t,S,SE,n\n";
    for (std::size_t i = 0; i < s.times.size(); ++i)
        f << fmt(s.times[i]) << ',' << fmt(s.survival[i]) << ',' << fmt(s.se[i]) << ',' << s.n << '\n';
    f.close();
}

inline Json rates_summary(const SimulationModel& m) {
    Json j = detail::rates_json(m.rates);
    j["concentration_scale"] = m.rates.concentration_scale;
    j["d_dot"] = m.irradiation.d_dot;
    j["dose"] = m.irradiation.dose;
    return j;
}

/// Default checkpoints when the config lists none.
inline std::vector<double> checkpoints(const RunConfig& c) {
    std::vector<double> t = c.output_times;
    if (t.empty()) t = {0.0, c.t_max};
    std::sort(t.begin(), t.end());
    t.erase(std::unique(t.begin(), t.end()), t.end());
    return t;
}

namespace detail {

inline Json manifest_json(const RunConfig& c, const std::string& started, bool partial, const std::string& error) {
    const Json cfg = serialize(c);
    Json j;
    j["tool"] = kToolName;
    j["version"] = kToolVersion;
    j["output_schema_version"] = kOutputSchemaVersion;
    j["config"] = cfg;
    j["config_hash"] = content_hash(cfg.dump());
    j["rng"] = kRngAlgorithm;
    j["master_seed"] = c.seed;
    j["replicates"] = c.replicates;
    j["replicate_streams"] = "key = master seed, stream id = (replicate << 8) | substream; substreams: "
                             "initial=0, dynamics=1, chemistry=2, analysis=3, motion=4";
    j["scaling_k"] = c.scaling_k;
    j["raw_rates"] = rates_summary(c.model);
    j["effective_rates"] = rates_summary(c.effective_model());
    j["started_at"] = started;
    j["partial"] = partial;
    if (!error.empty()) j["error"] = error;
    return j;
}

inline Json run_spatial(const RunConfig& c, const RunOptions& o) {
    const SimulationModel m = c.effective_model();
    const InitialCondition ic = c.effective_initial();
    RunSettings rs = c.run_settings();
    rs.output_times = checkpoints(c);
    const int dim = m.domain.dim();
    EnsembleStats st(rs.output_times, o.reference, o.reference_scale);

    OutFile traj(o.out_dir / "trajectory.csv");
    traj << "replicate_id,t,N_X,N_Y\n";
    std::optional<OutFile> events, snaps, fields, masses;
    if (rs.record_events) {
        events.emplace(o.out_dir / "events.csv");
        *events << "replicate_id,t,channel,n_removed,n_created,removed,created_x,created_y\n";
    }
    if (rs.record_positions) {
        snaps.emplace(o.out_dir / "snapshots.csv");
        *snaps << "replicate_id,time,type" << coord_header(dim) << '\n';
    }
    std::optional<Grid> chem_grid;
    if (m.chemistry) {
        chem_grid = Grid::uniform(m.domain, m.chemistry->cells_per_axis);
        masses.emplace(o.out_dir / "chem_mass.csv");
        *masses << "replicate_id,t,species,mass\n";
        if (rs.record_positions) {
            fields.emplace(o.out_dir / "chem_fields.csv");
            *fields << "replicate_id,t,cell" << coord_header(dim);
            for (std::size_t s = 0; s < m.chemistry->species(); ++s) *fields << ",species_" << s;
            *fields << '\n';
        }
    }

    for (std::size_t begin = 0; begin < c.replicates; begin += o.chunk) {
        const std::size_t count = std::min(o.chunk, c.replicates - begin);
        auto runs = parallel_map(count, o.threads,
                                 [&](std::size_t i) { return simulate_replicate(m, ic, rs, c.seed, begin + i); });
        for (const auto& r : runs) {
            ++st.n;
            st.events += r.events.size();
            st.add_extinction(r.extinction_time);
            for (std::size_t i = 0; i < r.snapshots.size(); ++i) {
                const auto& s = r.snapshots[i];
                st.add(i, static_cast<double>(s.n_x), static_cast<double>(s.n_y));
                traj << r.replicate << ',' << fmt(s.time) << ',' << s.n_x << ',' << s.n_y << '\n';
                if (snaps) {
                    for (const auto& q : s.xs) *snaps << r.replicate << ',' << fmt(s.time) << ",X" << coord_cells(q) << '\n';
                    for (const auto& q : s.ys) *snaps << r.replicate << ',' << fmt(s.time) << ",Y" << coord_cells(q) << '\n';
                }
                if (masses)
                    for (std::size_t sp = 0; sp < s.chem_mass.size(); ++sp)
                        *masses << r.replicate << ',' << fmt(s.time) << ',' << sp << ',' << fmt(s.chem_mass[sp]) << '\n';
                if (fields && !s.chem_fields.empty())
                    for (std::size_t cell = 0; cell < chem_grid->size(); ++cell) {
                        *fields << r.replicate << ',' << fmt(s.time) << ',' << cell << coord_cells(chem_grid->center(cell));
                        for (const auto& f : s.chem_fields) *fields << ',' << fmt(f[cell]);
                        *fields << '\n';
                    }
            }
            if (events)
                for (const auto& e : r.events)
                    *events << r.replicate << ',' << fmt(e.time) << ',' << to_string(e.channel) << ',' << e.n_removed()
                            << ',' << e.n_created() << ',' << fmt_points(e.removed) << ','
                            << fmt_points(e.created_x) << ',' << fmt_points(e.created_y) << '\n';
        }
    }
    traj.close();
    for (auto* f : {&events, &snaps, &fields, &masses})
        if (*f) (*f)->close();
    write_survival_csv(o.out_dir / "survival.csv", estimate_survival(st.times, st.lethal_free, st.n));
    return st.to_json();
}

inline Json run_nonspatial(const RunConfig& c, const RunOptions& o) {
    const SimulationModel m = c.effective_model();
    const InitialCondition ic = c.effective_initial();
    const CountRates k = c.count_rates(m);
    const auto times = checkpoints(c);
    const IrradiationModel* source = k.d_dot > 0.0 ? &m.irradiation : nullptr;
    EnsembleStats st(times, o.reference, o.reference_scale);
    OutFile traj(o.out_dir / "trajectory.csv");
    traj << "replicate_id,t,N_X,N_Y\n";
    for (std::size_t begin = 0; begin < c.replicates; begin += o.chunk) {
        const std::size_t count = std::min(o.chunk, c.replicates - begin);
        auto paths = parallel_map(count, o.threads, [&](std::size_t i) {
            RngStream init = replicate_stream(c.seed, begin + i, Substream::initial);
            RngStream rng = replicate_stream(c.seed, begin + i, Substream::dynamics);
            const SystemState s0 = sample_initial_state(m, ic, init);
            return simulate_count_path(s0.n_x(), s0.n_y(), k, times, rng, source);
        });
        for (std::size_t p = 0; p < paths.size(); ++p) {
            const auto& path = paths[p];
            ++st.n;
            st.events += path.events;
            st.add_extinction(path.extinction_time);
            for (std::size_t i = 0; i < times.size(); ++i) {
                st.add(i, static_cast<double>(path.x[i]), static_cast<double>(path.y[i]));
                traj << begin + p << ',' << fmt(times[i]) << ',' << path.x[i] << ',' << path.y[i] << '\n';
            }
        }
    }
    traj.close();
    write_survival_csv(o.out_dir / "survival.csv", estimate_survival(st.times, st.lethal_free, st.n));
    return st.to_json();
}

inline CountPmf initial_pmf(const RunConfig& c, const SimulationModel& m, const InitialCondition& ic) {
    switch (ic.kind) {
        case InitialCondition::Kind::counts:
            if (ic.poisson) return gsm2::poisson_pmf(ic.n_x, ic.n_y);
            return delta_pmf(static_cast<std::size_t>(ic.n_x), static_cast<std::size_t>(ic.n_y));
        case InitialCondition::Kind::positions: return delta_pmf(ic.xs.size(), ic.ys.size());
        case InitialCondition::Kind::irradiation:
            if (m.irradiation.joint_counts || m.irradiation.coupling)
                throw ConfigError(std::string("mode ") + to_string(c.mode) +
                                  " supports linear or tabulated yields without joint tables or chemistry coupling");
            return irradiation_pmf(m.irradiation);
    }
    return delta_pmf(0, 0);
}

inline Json run_master(const RunConfig& c, const RunOptions& o) {
    const SimulationModel m = c.effective_model();
    const InitialCondition ic = c.effective_initial();
    const CountRates k = c.count_rates(m);
    const auto times = checkpoints(c);
    MasterOptions opt;
    opt.dt = c.meanfield.dt;
    opt.leak_tolerance = c.meanfield.leak_tolerance;
    std::optional<IrradiationModel> source;
    if (k.d_dot > 0.0) source = m.irradiation;
    const MasterResult res = solve_master(initial_pmf(c, m, ic), k, times, opt, source);
    OutFile f(o.out_dir / "master.csv");
    f << "t,S,mean_x,mean_y,factorial_x\n";
    for (std::size_t i = 0; i < res.times.size(); ++i)
        f << fmt(res.times[i]) << ',' << fmt(res.survival[i]) << ',' << fmt(res.mean_x[i]) << ','
          << fmt(res.mean_y[i]) << ',' << fmt(res.factorial_x[i]) << '\n';
    f.close();
    OutFile s(o.out_dir / "survival.csv");
    s << "t,S,SE,n\n";
    for (std::size_t i = 0; i < res.times.size(); ++i) s << fmt(res.times[i]) << ',' << fmt(res.survival[i]) << ",0,0\n";
    s.close();
    return {{"times", res.times}, {"survival", res.survival}, {"mean_x", res.mean_x}, {"mean_y", res.mean_y},
            {"leak", res.leak}, {"x_max", res.x_max}, {"y_max", res.y_max}};
}

inline std::pair<double, double> initial_means(const RunConfig& c, const SimulationModel& m, const InitialCondition& ic) {
    switch (ic.kind) {
        case InitialCondition::Kind::counts: return {ic.n_x, ic.n_y};
        case InitialCondition::Kind::positions:
            return {static_cast<double>(ic.xs.size()), static_cast<double>(ic.ys.size())};
        case InitialCondition::Kind::irradiation: {
            if (m.irradiation.joint_counts || m.irradiation.coupling)
                throw ConfigError(std::string("mode ") + to_string(c.mode) +
                                  " supports linear or tabulated yields without joint tables or chemistry coupling");
            const double events = m.irradiation.dose / m.irradiation.z_f;
            return {events * m.irradiation.f1.expect([&](double z) { return m.irradiation.kappa(z); }),
                    events * m.irradiation.f1.expect([&](double z) { return m.irradiation.lambda(z); })};
        }
    }
    return {0.0, 0.0};
}

inline std::pair<double, double> source_means(const IrradiationModel& irr) {
    return {irr.f1.expect([&](double z) { return irr.kappa(z); }), irr.f1.expect([&](double z) { return irr.lambda(z); })};
}

inline Json run_mkm(const RunConfig& c, const RunOptions& o) {
    const SimulationModel& m = c.model;
    const CountRates k = c.count_rates(m);
    if (k.d_dot > 0.0) throw ConfigError("mode mkm has no irradiation source term; set d_dot to 0");
    const auto [x0, y0] = initial_means(c, m, c.initial);
    const auto times = checkpoints(c);
    const auto num = solve_mkm(x0, y0, k, times, c.meanfield.dt, c.meanfield.mkm_variant);
    const auto exact = mkm_closed_form(x0, y0, k, times, c.meanfield.mkm_variant);
    OutFile f(o.out_dir / "trajectory.csv");
    f << "t,x,y,x_closed_form,y_closed_form\n";
    double worst = 0.0;
    for (std::size_t i = 0; i < num.times.size(); ++i) {
        f << fmt(num.times[i]) << ',' << fmt(num.x[i]) << ',' << fmt(num.y[i]) << ',' << fmt(exact.x[i]) << ','
          << fmt(exact.y[i]) << '\n';
        worst = std::max({worst, std::abs(num.x[i] - exact.x[i]), std::abs(num.y[i] - exact.y[i])});
    }
    f.close();
    return {{"variant", to_string(c.meanfield.mkm_variant)}, {"times", num.times}, {"x", num.x}, {"y", num.y},
            {"max_abs_closed_form_gap", worst}};
}

inline Json run_limit_homog(const RunConfig& c, const RunOptions& o) {
    const SimulationModel& m = c.model;
    const CountRates k = c.count_rates(m);
    const auto [u0, v0] = initial_means(c, m, c.initial);
    const auto [sx, sy] = source_means(m.irradiation);
    const auto traj = solve_limit_homogeneous(u0, v0, k, sx, sy, checkpoints(c), c.meanfield.dt);
    OutFile f(o.out_dir / "limit.csv");
    f << "t,u_X,u_Y\n";
    for (std::size_t i = 0; i < traj.times.size(); ++i)
        f << fmt(traj.times[i]) << ',' << fmt(traj.x[i]) << ',' << fmt(traj.y[i]) << '\n';
    f.close();
    return {{"times", traj.times}, {"u_X", traj.x}, {"u_Y", traj.y}};
}

inline Json run_limit_spatial(const RunConfig& c, const RunOptions& o) {
    const SimulationModel& m = c.model;
    const Grid grid = Grid::uniform(m.domain, c.meanfield.grid_cells);
    const std::size_t n = grid.size();
    SpatialLimitProblem pb;
    pb.grid = &grid;
    pb.rates = m.rates;
    pb.motion_x = m.motion.x;
    pb.motion_y = m.motion.y;
    pb.convention = c.meanfield.convention;
    pb.d_dot = m.irradiation.d_dot;
    pb.t_irr = m.irradiation.t_irr;
    std::tie(pb.source_x, pb.source_y) = source_means(m.irradiation);
    pb.u0_x.assign(n, 0.0);
    pb.u0_y.assign(n, 0.0);
    if (c.initial.kind == InitialCondition::Kind::positions) {
        for (const auto& q : c.initial.xs) pb.u0_x[grid.locate(q)] += 1.0 / grid.cell_volume();
        for (const auto& q : c.initial.ys) pb.u0_y[grid.locate(q)] += 1.0 / grid.cell_volume();
    } else {
        const auto [mx, my] = initial_means(c, m, c.initial);
        const double total_cells = grid.integrate(std::vector<double>(n, 1.0));
        for (std::size_t i = 0; i < n; ++i) {
            pb.u0_x[i] = mx / total_cells;
            pb.u0_y[i] = my / total_cells;
        }
    }
    const auto res = solve_limit_spatial(pb, checkpoints(c), c.meanfield.dt);
    OutFile tot(o.out_dir / "limit.csv");
    tot << "t,u_X,u_Y\n";
    for (std::size_t i = 0; i < res.times.size(); ++i)
        tot << fmt(res.times[i]) << ',' << fmt(res.total_x[i]) << ',' << fmt(res.total_y[i]) << '\n';
    tot.close();
    OutFile f(o.out_dir / "limit_fields.csv");
    f << "t,cell" << coord_header(grid.dim()) << ",u_X,u_Y\n";
    for (std::size_t i = 0; i < res.times.size(); ++i)
        for (std::size_t cell = 0; cell < n; ++cell)
            f << fmt(res.times[i]) << ',' << cell << coord_cells(grid.center(cell)) << ',' << fmt(res.u_x[i][cell])
              << ',' << fmt(res.u_y[i][cell]) << '\n';
    f.close();
    return {{"times", res.times}, {"u_X", res.total_x}, {"u_Y", res.total_y}, {"grid_cells", n}};
}

}  // namespace detail

/// Executes `c` into `o.out_dir`. The manifest is written first with
/// `partial: true` and rewritten on completion; on failure it keeps the flag
/// and records the error before the exception propagates.
inline Json run(const RunConfig& c, const RunOptions& o) {
    c.validate();
    std::error_code ec;
    std::filesystem::create_directories(o.out_dir, ec);
    if (ec) throw InputError("cannot create output directory " + o.out_dir.string() + ": " + ec.message());
    const std::string started = utc_timestamp();
    const auto manifest_path = o.out_dir / "manifest.json";
    write_json(manifest_path, detail::manifest_json(c, started, true, ""));
    try {
        Json result;
        switch (c.mode) {
            case Mode::spatial_mc: result = detail::run_spatial(c, o); break;
            case Mode::nonspatial_mc: result = detail::run_nonspatial(c, o); break;
            case Mode::master: result = detail::run_master(c, o); break;
            case Mode::mkm: result = detail::run_mkm(c, o); break;
            case Mode::limit_homog: result = detail::run_limit_homog(c, o); break;
            case Mode::limit_spatial: result = detail::run_limit_spatial(c, o); break;
        }
        Json summary{{"output_schema_version", kOutputSchemaVersion}, {"mode", to_string(c.mode)},
                     {"seed", c.seed}, {"scaling_k", c.scaling_k}, {"result", result}};
        write_json(o.out_dir / "summary.json", summary);
        write_json(manifest_path, detail::manifest_json(c, started, false, ""));
        return summary;
    } catch (const std::exception& e) {
        try {
            write_json(manifest_path, detail::manifest_json(c, started, true, e.what()));
        } catch (...) {
        }
        throw;
    }
}

// ---------------------------------------------------------------------------
// Sweeps

/// Least-squares slope of log(y) against log(x) over positive pairs.
inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!(x[i] > 0.0) || !(y[i] > 0.0)) continue;
        const double lx = std::log(x[i]), ly = std::log(y[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
        ++n;
    }
    if (n < 2) throw InputError("slope fit needs two positive points");
    const double dn = static_cast<double>(n);
    const double den = dn * sxx - sx * sx;
    if (den == 0.0) throw InputError("slope fit needs distinct abscissae");
    return (dn * sxy - sx * sy) / den;
}

/// Runs the configured sweep. Each point goes to its own sub-directory;
/// sweep.csv collects extinction statistics and, for K sweeps, the largest
/// (over checkpoints) mean absolute gap between N_X / K and the homogeneous
/// limit.
inline Json sweep(const RunConfig& base, const RunOptions& o) {
    if (!base.sweep) throw ConfigError("config has no sweep section");
    if (base.mode != Mode::spatial_mc && base.mode != Mode::nonspatial_mc)
        throw ConfigError("sweeps need a Monte Carlo mode");
    const bool is_k = base.sweep->parameter == SweepSettings::Parameter::k;
    std::error_code ec;
    std::filesystem::create_directories(o.out_dir, ec);
    if (ec) throw InputError("cannot create output directory " + o.out_dir.string());

    std::optional<LimitTrajectory> limit;
    if (is_k) {
        RunConfig lc = base;
        lc.scaling_k = 1.0;
        const CountRates k = lc.count_rates(lc.model);
        const auto [u0, v0] = detail::initial_means(lc, lc.model, lc.initial);
        const auto [sx, sy] = detail::source_means(lc.model.irradiation);
        limit = solve_limit_homogeneous(u0, v0, k, sx, sy, checkpoints(base), base.meanfield.dt);
    }

    OutFile csv(o.out_dir / "sweep.csv");
    csv << "parameter,value,replicates,extinct,mean_extinction_time,se_extinction_time,limit_error,limit_error_se\n";
    Json points = Json::array();
    std::vector<double> xs, errs;
    for (double v : base.sweep->values) {
        RunConfig c = base;
        c.sweep.reset();
        if (is_k) c.scaling_k = v;
        else c.model.motion.dt_diff = v;
        RunOptions po = o;
        po.out_dir = o.out_dir / ((is_k ? "k_" : "dt_diff_") + fmt(v));
        if (limit) {
            po.reference = limit->x;
            po.reference_scale = v;
        }
        const Json s = run(c, po);
        const Json& r = s.at("result");
        double err = 0.0, err_se = 0.0;
        if (limit) {
            const auto md = r.at("mean_abs_deviation").get<std::vector<double>>();
            const auto se = r.at("se_mean_abs_deviation").get<std::vector<double>>();
            for (std::size_t i = 0; i < md.size(); ++i)
                if (md[i] > err) {
                    err = md[i];
                    err_se = se[i];
                }
            xs.push_back(v);
            errs.push_back(err);
        }
        csv << (is_k ? "k" : "dt_diff") << ',' << fmt(v) << ',' << c.replicates << ','
            << r.at("extinct_replicates").get<std::size_t>() << ',' << fmt(r.at("mean_extinction_time").get<double>())
            << ',' << fmt(r.at("se_extinction_time").get<double>()) << ',' << fmt(err) << ',' << fmt(err_se) << '\n';
        points.push_back({{"value", v}, {"result", r}, {"limit_error", err}, {"limit_error_se", err_se}});
    }
    csv.close();
    Json summary{{"output_schema_version", kOutputSchemaVersion}, {"parameter", is_k ? "k" : "dt_diff"},
                 {"points", points}};
    if (is_k && xs.size() >= 2) summary["loglog_slope"] = loglog_slope(xs, errs);
    write_json(o.out_dir / "sweep_summary.json", summary);
    return summary;
}

}  // namespace gsm2
