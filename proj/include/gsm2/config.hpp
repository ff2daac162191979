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

//! \file config.hpp
//! Run configuration: a versioned JSON document. Every object rejects keys it
//! does not know. `serialize` writes the canonical form, which parses back to
//! an identical configuration.

#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "gsm2/chemistry.hpp"
#include "gsm2/engine.hpp"
#include "gsm2/errors.hpp"
#include "gsm2/irradiation.hpp"
#include "gsm2/meanfield.hpp"
#include "gsm2/rates.hpp"

namespace gsm2 {

using Json = nlohmann::ordered_json;

inline constexpr int kSchemaVersion = 1;

enum class Mode { spatial_mc, nonspatial_mc, master, mkm, limit_homog, limit_spatial };

inline const char* to_string(Mode m) {
    switch (m) {
        case Mode::spatial_mc: return "spatial_mc";
        case Mode::nonspatial_mc: return "nonspatial_mc";
        case Mode::master: return "master";
        case Mode::mkm: return "mkm";
        case Mode::limit_homog: return "limit_homog";
        case Mode::limit_spatial: return "limit_spatial";
    }
    return "?";
}

struct MeanFieldSettings {
    PairConvention convention = PairConvention::unordered;
    MkmVariant mkm_variant = MkmVariant::pair_consistent;
    double dt = 1e-3;
    double leak_tolerance = 1e-8;
    int grid_cells = 16;
};

struct SweepSettings {
    enum class Parameter { dt_diff, k };
    Parameter parameter = Parameter::dt_diff;
    std::vector<double> values;
};

struct RunConfig {
    Mode mode = Mode::spatial_mc;
    std::uint64_t seed = 1;
    std::size_t replicates = 1;
    double t_max = 1.0;
    std::vector<double> output_times;
    double scaling_k = 1.0;

    SimulationModel model;  ///< raw (unscaled) parameters
    InitialCondition initial;
    RunSettings engine;     ///< t_max and output_times are mirrored from above
    MeanFieldSettings meanfield;
    std::optional<SweepSettings> sweep;

    /// Parameters after the large-population rescaling by K: the pair kernel
    /// is divided by K, concentrations enter rates divided by K, the event
    /// rate and the initial lesion numbers are multiplied by K.
    SimulationModel effective_model() const {
        SimulationModel m = model;
        if (scaling_k != 1.0) {
            m.rates.b_pair = m.rates.b_pair.scaled(1.0 / scaling_k);
            if (m.rates.b_cap) *m.rates.b_cap /= scaling_k;
            m.rates.concentration_scale = model.rates.concentration_scale / scaling_k;
            m.irradiation.d_dot *= scaling_k;
            m.irradiation.dose *= scaling_k;
        }
        return m;
    }

    InitialCondition effective_initial() const {
        InitialCondition ic = initial;
        if (scaling_k != 1.0) {
            ic.n_x *= scaling_k;
            ic.n_y *= scaling_k;
        }
        return ic;
    }

    RunSettings run_settings() const {
        RunSettings rs = engine;
        rs.t_max = t_max;
        rs.output_times = output_times;
        return rs;
    }

    /// Constant-rate view used by the non-spatial solvers.
    CountRates count_rates(const SimulationModel& m) const {
        const RateModel& r = m.rates;
        if (!r.r_is_global() || !r.a_is_global() || !r.b_is_global() || r.p.length)
            throw ConfigError(std::string("mode ") + to_string(mode) +
                              " needs constant response forms, a constant pair kernel and a constant p");
        CountRates k;
        k.r = r.r.base;
        k.a = r.a.base;
        k.b = r.b_pair.constant_value();
        k.p = r.p.p0;
        k.convention = meanfield.convention;
        k.d_dot = m.irradiation.d_dot;
        k.t_irr = m.irradiation.t_irr;
        return k;
    }

    void validate() const {
        if (!(t_max > 0.0) || !std::isfinite(t_max)) throw ConfigError("t_max must be positive");
        for (double t : output_times)
            if (!(t >= 0.0 && t <= t_max)) throw ConfigError("output times must lie in [0, t_max]");
        if (replicates == 0) throw ConfigError("replicates must be positive");
        if (!(scaling_k >= 1.0) || !std::isfinite(scaling_k)) throw ConfigError("scaling_k must be >= 1");
        if (!(meanfield.dt > 0.0)) throw ConfigError("meanfield dt must be positive");
        if (meanfield.grid_cells < 1) throw ConfigError("meanfield grid_cells must be >= 1");
        effective_model().validate();
        if (initial.kind == InitialCondition::Kind::counts && (initial.n_x < 0.0 || initial.n_y < 0.0))
            throw ConfigError("initial counts must be >= 0");
        if (model.chemistry) Chemistry(*model.chemistry, model.domain);
        if (sweep) {
            if (sweep->values.empty()) throw ConfigError("sweep needs at least one value");
            for (double v : sweep->values)
                if (!(v > 0.0)) throw ConfigError("sweep values must be positive");
        }
    }
};

namespace detail {

/// Rejects keys of `j` outside `allowed`.
inline void check_keys(const Json& j, std::initializer_list<const char*> allowed, const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + ": expected an object");
    std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [k, v] : j.items())
        if (!ok.count(k)) throw ConfigError(where + ": unknown key '" + k + "'");
}

template <class T>
T get(const Json& j, const char* key, const std::string& where) {
    if (!j.contains(key)) throw ConfigError(where + ": missing key '" + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(where + "." + key + ": " + e.what());
    }
}

template <class T>
T get_or(const Json& j, const char* key, T fallback, const std::string& where) {
    return j.contains(key) ? get<T>(j, key, where) : fallback;
}

inline Point parse_point(const Json& j, const std::string& where) {
    if (!j.is_array() || j.size() < 1 || j.size() > 3) throw ConfigError(where + ": expected 1 to 3 coordinates");
    Point p(static_cast<int>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_number()) throw ConfigError(where + ": coordinates must be numbers");
        p[static_cast<int>(i)] = j[i].get<double>();
    }
    return p;
}

inline Json point_json(const Point& p) {
    Json a = Json::array();
    for (int i = 0; i < p.dim(); ++i) a.push_back(p[i]);
    return a;
}

inline Domain parse_domain(const Json& j) {
    const std::string w = "domain";
    const auto shape = get<std::string>(j, "shape", w);
    if (shape == "disk") {
        check_keys(j, {"shape", "center", "radius"}, w);
        return Domain::disk(parse_point(j.at("center"), w + ".center"), get<double>(j, "radius", w));
    }
    if (shape == "box") {
        check_keys(j, {"shape", "lo", "hi"}, w);
        return Domain::box(parse_point(j.at("lo"), w + ".lo"), parse_point(j.at("hi"), w + ".hi"));
    }
    throw ConfigError("domain.shape must be 'disk' or 'box'");
}

inline Json domain_json(const Domain& d) {
    if (d.is_disk()) return {{"shape", "disk"}, {"center", point_json(d.as_disk().center)}, {"radius", d.as_disk().radius}};
    return {{"shape", "box"}, {"lo", point_json(d.as_box().lo)}, {"hi", point_json(d.as_box().hi)}};
}

inline TypeFilter parse_filter(const std::string& s, const std::string& w) {
    if (s == "both") return TypeFilter::both;
    if (s == "X") return TypeFilter::x_only;
    if (s == "Y") return TypeFilter::y_only;
    throw ConfigError(w + ".types must be 'X', 'Y' or 'both'");
}

inline const char* filter_name(TypeFilter f) {
    return f == TypeFilter::both ? "both" : f == TypeFilter::x_only ? "X" : "Y";
}

inline Kernel parse_kernel(const Json& j, const std::string& w) {
    const auto type = get<std::string>(j, "type", w);
    const auto filter = parse_filter(get_or<std::string>(j, "types", "both", w), w);
    if (type == "constant") {
        check_keys(j, {"type", "types", "value"}, w);
        return Kernel::constant(get<double>(j, "value", w), filter);
    }
    if (type == "ball") {
        check_keys(j, {"type", "types", "epsilon", "weight"}, w);
        return Kernel::ball(get<double>(j, "epsilon", w), get_or<double>(j, "weight", 1.0, w), filter);
    }
    if (type == "gaussian") {
        check_keys(j, {"type", "types", "epsilon", "weight"}, w);
        return Kernel::gaussian(get_or<double>(j, "weight", 1.0, w), get<double>(j, "epsilon", w), filter);
    }
    if (type == "two_gaussian") {
        check_keys(j, {"type", "types", "weight1", "epsilon1", "weight2", "epsilon2"}, w);
        return Kernel::two_gaussian(get<double>(j, "weight1", w), get<double>(j, "epsilon1", w),
                                    get<double>(j, "weight2", w), get<double>(j, "epsilon2", w), filter);
    }
    throw ConfigError(w + ".type must be constant, ball, gaussian or two_gaussian");
}

inline Json kernel_json(const Kernel& k) {
    Json j;
    if (const auto* c = std::get_if<ConstantKernel>(&k.shape())) j = {{"type", "constant"}, {"value", c->value}};
    else if (const auto* b = std::get_if<BallIndicatorKernel>(&k.shape()))
        j = {{"type", "ball"}, {"epsilon", b->epsilon}, {"weight", b->weight}};
    else if (const auto* g = std::get_if<GaussianKernel>(&k.shape()))
        j = {{"type", "gaussian"}, {"epsilon", g->epsilon}, {"weight", g->weight}};
    else {
        const auto& t = std::get<TwoGaussianKernel>(k.shape());
        j = {{"type", "two_gaussian"}, {"weight1", t.near.weight}, {"epsilon1", t.near.epsilon},
             {"weight2", t.far.weight}, {"epsilon2", t.far.epsilon}};
    }
    j["types"] = filter_name(k.filter());
    return j;
}

inline Response parse_form(const Json& j, const std::string& w) {
    if (j.is_string()) {
        const auto s = j.get<std::string>();
        if (s == "constant") return Response::constant();
        if (s == "saturating_up") return Response::saturating_up();
        if (s == "saturating_down") return Response::saturating_down();
    } else if (j.is_object()) {
        check_keys(j, {"affine"}, w);
        return Response::affine(get<double>(j, "affine", w));
    }
    throw ConfigError(w + " must be constant, saturating_up, saturating_down or {\"affine\": c}");
}

inline Json form_json(const Response& r) {
    switch (r.kind) {
        case Response::Kind::constant: return "constant";
        case Response::Kind::saturating_up: return "saturating_up";
        case Response::Kind::saturating_down: return "saturating_down";
        case Response::Kind::affine: return Json{{"affine", r.slope}};
    }
    return "constant";
}

inline RateChannel parse_channel(const Json& j, const std::string& w) {
    check_keys(j, {"base", "form", "kernel", "cap"}, w);
    RateChannel c;
    c.base = get<double>(j, "base", w);
    if (j.contains("form")) c.form = parse_form(j.at("form"), w + ".form");
    if (j.contains("kernel")) c.kernel = parse_kernel(j.at("kernel"), w + ".kernel");
    if (j.contains("cap")) c.cap = get<double>(j, "cap", w);
    return c;
}

inline Json channel_json(const RateChannel& c) {
    Json j{{"base", c.base}, {"form", form_json(c.form)}, {"kernel", kernel_json(c.kernel)}};
    if (c.cap) j["cap"] = *c.cap;
    return j;
}

inline Placement parse_placement(const Json& j, const std::string& w) {
    if (j.is_string()) {
        const auto s = j.get<std::string>();
        if (s == "at_parent") return Placement(AtParent{});
        if (s == "midpoint") return Placement(Midpoint{});
        if (s == "segment_uniform") return Placement(SegmentUniform{});
    } else if (j.is_object()) {
        check_keys(j, {"segment_mixture"}, w);
        const auto& m = j.at("segment_mixture");
        check_keys(m, {"weights", "alphas"}, w + ".segment_mixture");
        return Placement(SegmentMixture{get<std::vector<double>>(m, "weights", w), get<std::vector<double>>(m, "alphas", w)});
    }
    throw ConfigError(w + " must be at_parent, midpoint, segment_uniform or {\"segment_mixture\": ...}");
}

inline Json placement_json(const Placement& p) {
    const auto& s = p.spec();
    if (std::holds_alternative<AtParent>(s)) return "at_parent";
    if (std::holds_alternative<Midpoint>(s)) return "midpoint";
    if (std::holds_alternative<SegmentUniform>(s)) return "segment_uniform";
    const auto& m = std::get<SegmentMixture>(s);
    return Json{{"segment_mixture", {{"weights", m.weights}, {"alphas", m.alphas}}}};
}

inline RateModel parse_rates(const Json& j) {
    const std::string w = "rates";
    check_keys(j, {"r", "a", "b", "p", "m_a", "m_b"}, w);
    RateModel m;
    m.r = parse_channel(j.at("r"), w + ".r");
    m.a = parse_channel(j.at("a"), w + ".a");
    const auto& b = j.at("b");
    check_keys(b, {"pair_kernel", "density_kernel", "form", "cap"}, w + ".b");
    m.b_pair = parse_kernel(b.at("pair_kernel"), w + ".b.pair_kernel");
    if (b.contains("density_kernel")) m.b_density_kernel = parse_kernel(b.at("density_kernel"), w + ".b.density_kernel");
    if (b.contains("form")) m.b_form = parse_form(b.at("form"), w + ".b.form");
    if (b.contains("cap")) m.b_cap = get<double>(b, "cap", w + ".b");
    if (j.contains("p")) {
        const auto& p = j.at("p");
        check_keys(p, {"p0", "length"}, w + ".p");
        m.p.p0 = get<double>(p, "p0", w + ".p");
        if (p.contains("length")) m.p.length = get<double>(p, "length", w + ".p");
    }
    if (j.contains("m_a")) m.m_a = parse_placement(j.at("m_a"), w + ".m_a");
    if (j.contains("m_b")) m.m_b = parse_placement(j.at("m_b"), w + ".m_b");
    return m;
}

inline Json rates_json(const RateModel& m) {
    Json b{{"pair_kernel", kernel_json(m.b_pair)}, {"form", form_json(m.b_form)}};
    if (m.b_density_kernel) b["density_kernel"] = kernel_json(*m.b_density_kernel);
    if (m.b_cap) b["cap"] = *m.b_cap;
    Json p{{"p0", m.p.p0}};
    if (m.p.length) p["length"] = *m.p.length;
    return {{"r", channel_json(m.r)}, {"a", channel_json(m.a)}, {"b", b}, {"p", p},
            {"m_a", placement_json(m.m_a)}, {"m_b", placement_json(m.m_b)}};
}

inline Motion parse_motion(const Json& j, int dim, const std::string& w) {
    check_keys(j, {"sigma", "mu"}, w);
    Motion m;
    if (j.contains("sigma")) {
        const auto& s = j.at("sigma");
        if (s.is_number()) {
            m = Motion::isotropic(s.get<double>());
        } else if (s.is_array() && static_cast<int>(s.size()) == dim) {
            for (int i = 0; i < dim; ++i) {
                if (!s[i].is_array() || static_cast<int>(s[i].size()) != dim)
                    throw ConfigError(w + ".sigma must be a number or a dim x dim matrix");
                for (int k = 0; k < dim; ++k) m.sigma[i][k] = s[i][k].get<double>();
            }
        } else {
            throw ConfigError(w + ".sigma must be a number or a dim x dim matrix");
        }
    }
    if (j.contains("mu")) {
        const auto mu = get<std::vector<double>>(j, "mu", w);
        if (static_cast<int>(mu.size()) != dim) throw ConfigError(w + ".mu must have one entry per dimension");
        for (int i = 0; i < dim; ++i) m.mu[i] = mu[i];
    }
    return m;
}

inline Json motion_json(const Motion& m, int dim) {
    Json mu = Json::array();
    for (int i = 0; i < dim; ++i) mu.push_back(m.mu[i]);
    Json j;
    if (m.is_isotropic()) {
        j["sigma"] = m.sigma[0][0];
    } else {
        Json s = Json::array();
        for (int i = 0; i < dim; ++i) {
            Json row = Json::array();
            for (int k = 0; k < dim; ++k) row.push_back(m.sigma[i][k]);
            s.push_back(row);
        }
        j["sigma"] = s;
    }
    j["mu"] = mu;
    return j;
}

inline YieldFunction parse_yield(const Json& j, const std::string& w) {
    if (j.is_number()) return YieldFunction::linear(j.get<double>());
    check_keys(j, {"z", "values"}, w);
    YieldFunction y;
    y.z_table = get<std::vector<double>>(j, "z", w);
    y.values = get<std::vector<double>>(j, "values", w);
    y.validate();
    return y;
}

inline Json yield_json(const YieldFunction& y) {
    if (y.is_linear()) return y.coefficient;
    return {{"z", y.z_table}, {"values", y.values}};
}

inline SpecificEnergyDist parse_f1(const Json& j, const std::filesystem::path& base, const std::string& w) {
    const auto type = get<std::string>(j, "type", w);
    if (type == "dirac") {
        check_keys(j, {"type", "z0"}, w);
        return SpecificEnergyDist(DiracEnergy{get<double>(j, "z0", w)});
    }
    if (type == "tabulated") {
        if (j.contains("file")) {
            check_keys(j, {"type", "file"}, w);
            std::filesystem::path p = get<std::string>(j, "file", w);
            if (p.is_relative()) p = base / p;
            return SpecificEnergyDist::from_csv(p.string());
        }
        check_keys(j, {"type", "z", "prob"}, w);
        return SpecificEnergyDist(TabulatedEnergy{get<std::vector<double>>(j, "z", w), get<std::vector<double>>(j, "prob", w)});
    }
    if (type == "lognormal") {
        check_keys(j, {"type", "log_mean", "log_sd"}, w);
        return SpecificEnergyDist(LogNormalEnergy{get<double>(j, "log_mean", w), get<double>(j, "log_sd", w)});
    }
    throw ConfigError(w + ".type must be dirac, tabulated or lognormal");
}

inline Json f1_json(const SpecificEnergyDist& f) {
    if (const auto* d = std::get_if<DiracEnergy>(&f.law())) return {{"type", "dirac"}, {"z0", d->z0}};
    if (const auto* t = std::get_if<TabulatedEnergy>(&f.law())) return {{"type", "tabulated"}, {"z", t->z}, {"prob", t->prob}};
    const auto& l = std::get<LogNormalEnergy>(f.law());
    return {{"type", "lognormal"}, {"log_mean", l.log_mean}, {"log_sd", l.log_sd}};
}

inline IrradiationModel parse_irradiation(const Json& j, const std::filesystem::path& base) {
    const std::string w = "irradiation";
    check_keys(j, {"dose", "z_f", "f1", "kappa", "lambda", "joint_counts", "coupling", "track_placement",
                   "spread", "core_radius", "penumbra_radius", "d_dot", "t_irr"},
               w);
    IrradiationModel m;
    m.dose = get_or<double>(j, "dose", 0.0, w);
    m.z_f = get_or<double>(j, "z_f", 0.04, w);
    m.f1 = j.contains("f1") ? parse_f1(j.at("f1"), base, w + ".f1") : SpecificEnergyDist(DiracEnergy{m.z_f});
    if (j.contains("kappa")) m.kappa = parse_yield(j.at("kappa"), w + ".kappa");
    if (j.contains("lambda")) m.lambda = parse_yield(j.at("lambda"), w + ".lambda");
    if (j.contains("joint_counts")) {
        const auto& t = j.at("joint_counts");
        check_keys(t, {"x", "y", "prob"}, w + ".joint_counts");
        m.joint_counts = JointCountTable{get<std::vector<std::size_t>>(t, "x", w), get<std::vector<std::size_t>>(t, "y", w),
                                         get<std::vector<double>>(t, "prob", w)};
    }
    if (j.contains("coupling")) {
        const auto& c = j.at("coupling");
        check_keys(c, {"species", "coefficient"}, w + ".coupling");
        m.coupling = ChemCoupling{get<std::size_t>(c, "species", w), get<double>(c, "coefficient", w)};
    }
    if (j.contains("track_placement")) {
        const auto& tp = j.at("track_placement");
        if (tp.is_string() && tp.get<std::string>() == "uniform") {
            m.track_placement = TrackPlacement::uniform;
        } else if (tp.is_object()) {
            check_keys(tp, {"at_point"}, w + ".track_placement");
            m.track_placement = TrackPlacement::at_point;
            m.track_point = parse_point(tp.at("at_point"), w + ".track_placement.at_point");
        } else {
            throw ConfigError(w + ".track_placement must be 'uniform' or {\"at_point\": [...]}");
        }
    }
    const auto spread = get_or<std::string>(j, "spread", "amorphous_track", w);
    if (spread == "amorphous_track") m.spread = LesionSpread::amorphous_track;
    else if (spread == "uniform") m.spread = LesionSpread::uniform;
    else throw ConfigError(w + ".spread must be amorphous_track or uniform");
    m.track.core_radius = get_or<double>(j, "core_radius", m.track.core_radius, w);
    m.track.penumbra_radius = get_or<double>(j, "penumbra_radius", m.track.penumbra_radius, w);
    m.d_dot = get_or<double>(j, "d_dot", 0.0, w);
    m.t_irr = get_or<double>(j, "t_irr", 0.0, w);
    return m;
}

inline Json irradiation_json(const IrradiationModel& m) {
    Json j{{"dose", m.dose}, {"z_f", m.z_f}, {"f1", f1_json(m.f1)}, {"kappa", yield_json(m.kappa)},
           {"lambda", yield_json(m.lambda)}};
    if (m.joint_counts) j["joint_counts"] = {{"x", m.joint_counts->nx}, {"y", m.joint_counts->ny}, {"prob", m.joint_counts->prob}};
    if (m.coupling) j["coupling"] = {{"species", m.coupling->species}, {"coefficient", m.coupling->coefficient}};
    if (m.track_placement == TrackPlacement::at_point) j["track_placement"] = {{"at_point", point_json(*m.track_point)}};
    else j["track_placement"] = "uniform";
    j["spread"] = m.spread == LesionSpread::uniform ? "uniform" : "amorphous_track";
    j["core_radius"] = m.track.core_radius;
    j["penumbra_radius"] = m.track.penumbra_radius;
    j["d_dot"] = m.d_dot;
    j["t_irr"] = m.t_irr;
    return j;
}

inline ChemistryModel parse_chemistry(const Json& j) {
    const std::string w = "chemistry";
    check_keys(j, {"diffusion", "reactions", "initial", "footprint_yield", "cells_per_axis", "dt", "c0", "c1"}, w);
    ChemistryModel c;
    c.diffusion = get<std::vector<double>>(j, "diffusion", w);
    const std::size_t L = c.diffusion.size();
    c.initial = get_or<std::vector<double>>(j, "initial", std::vector<double>(L, 0.0), w);
    c.footprint_yield = get_or<std::vector<double>>(j, "footprint_yield", std::vector<double>(L, 0.0), w);
    c.cells_per_axis = get_or<int>(j, "cells_per_axis", 16, w);
    c.dt = get_or<double>(j, "dt", 1e-3, w);
    if (j.contains("c0")) c.declared_c0 = get<double>(j, "c0", w);
    if (j.contains("c1")) c.declared_c1 = get<double>(j, "c1", w);
    if (j.contains("reactions")) {
        for (const auto& r : j.at("reactions")) {
            const auto type = get<std::string>(r, "type", w + ".reactions");
            if (type == "decay") {
                check_keys(r, {"type", "species", "k"}, w + ".reactions");
                c.reactions.push_back(LinearDecay{get<std::size_t>(r, "species", w), get<double>(r, "k", w)});
            } else if (type == "bimolecular") {
                check_keys(r, {"type", "a", "b", "c", "k"}, w + ".reactions");
                c.reactions.push_back(Bimolecular{get<std::size_t>(r, "a", w), get<std::size_t>(r, "b", w),
                                                  get<std::size_t>(r, "c", w), get<double>(r, "k", w)});
            } else if (type == "logistic") {
                check_keys(r, {"type", "species", "g", "capacity"}, w + ".reactions");
                c.reactions.push_back(
                    Logistic{get<std::size_t>(r, "species", w), get<double>(r, "g", w), get<double>(r, "capacity", w)});
            } else {
                throw ConfigError(w + ".reactions: type must be decay, bimolecular or logistic");
            }
        }
    }
    return c;
}

inline Json chemistry_json(const ChemistryModel& c) {
    Json rs = Json::array();
    for (const auto& r : c.reactions) {
        if (const auto* d = std::get_if<LinearDecay>(&r)) rs.push_back({{"type", "decay"}, {"species", d->species}, {"k", d->k}});
        else if (const auto* b = std::get_if<Bimolecular>(&r))
            rs.push_back({{"type", "bimolecular"}, {"a", b->a}, {"b", b->b}, {"c", b->c}, {"k", b->k}});
        else {
            const auto& l = std::get<Logistic>(r);
            rs.push_back({{"type", "logistic"}, {"species", l.species}, {"g", l.g}, {"capacity", l.capacity}});
        }
    }
    Json j{{"diffusion", c.diffusion}, {"reactions", rs}, {"initial", c.initial},
           {"footprint_yield", c.footprint_yield}, {"cells_per_axis", c.cells_per_axis}, {"dt", c.dt}};
    if (c.declared_c0) j["c0"] = *c.declared_c0;
    if (c.declared_c1) j["c1"] = *c.declared_c1;
    return j;
}

inline InitialCondition parse_initial(const Json& j, int dim) {
    const std::string w = "initial";
    InitialCondition ic;
    const auto kind = get<std::string>(j, "kind", w);
    if (kind == "counts") {
        check_keys(j, {"kind", "x", "y", "poisson"}, w);
        ic.kind = InitialCondition::Kind::counts;
        ic.n_x = get_or<double>(j, "x", 0.0, w);
        ic.n_y = get_or<double>(j, "y", 0.0, w);
        ic.poisson = get_or<bool>(j, "poisson", false, w);
        if (!ic.poisson && (ic.n_x != std::floor(ic.n_x) || ic.n_y != std::floor(ic.n_y)))
            throw ConfigError("initial counts must be integers unless poisson is set");
    } else if (kind == "irradiation") {
        check_keys(j, {"kind"}, w);
        ic.kind = InitialCondition::Kind::irradiation;
    } else if (kind == "positions") {
        check_keys(j, {"kind", "x", "y"}, w);
        ic.kind = InitialCondition::Kind::positions;
        for (const auto& p : j.value("x", Json::array())) ic.xs.push_back(parse_point(p, w + ".x"));
        for (const auto& p : j.value("y", Json::array())) ic.ys.push_back(parse_point(p, w + ".y"));
        for (const auto* v : {&ic.xs, &ic.ys})
            for (const auto& p : *v)
                if (p.dim() != dim) throw ConfigError("initial position " + p.str() + " has the wrong dimension");
    } else {
        throw ConfigError("initial.kind must be counts, irradiation or positions");
    }
    return ic;
}

inline Json initial_json(const InitialCondition& ic) {
    switch (ic.kind) {
        case InitialCondition::Kind::counts:
            return {{"kind", "counts"}, {"x", ic.n_x}, {"y", ic.n_y}, {"poisson", ic.poisson}};
        case InitialCondition::Kind::irradiation: return {{"kind", "irradiation"}};
        case InitialCondition::Kind::positions: {
            Json xs = Json::array(), ys = Json::array();
            for (const auto& p : ic.xs) xs.push_back(point_json(p));
            for (const auto& p : ic.ys) ys.push_back(point_json(p));
            return {{"kind", "positions"}, {"x", xs}, {"y", ys}};
        }
    }
    return {};
}

inline Mode parse_mode(const std::string& s) {
    for (Mode m : {Mode::spatial_mc, Mode::nonspatial_mc, Mode::master, Mode::mkm, Mode::limit_homog, Mode::limit_spatial})
        if (s == to_string(m)) return m;
    throw ConfigError("unknown mode '" + s + "'");
}

inline PairConvention parse_convention(const std::string& s) {
    for (auto c : {PairConvention::unordered, PairConvention::ordered, PairConvention::squared})
        if (s == to_string(c)) return c;
    throw ConfigError("meanfield.convention must be unordered, ordered or squared");
}

inline const char* to_string(MkmVariant v) {
    switch (v) {
        case MkmVariant::literal: return "literal";
        case MkmVariant::pair_consistent: return "pair_consistent";
        case MkmVariant::reduced: return "reduced";
    }
    return "?";
}

inline MkmVariant parse_variant(const std::string& s) {
    for (auto v : {MkmVariant::literal, MkmVariant::pair_consistent, MkmVariant::reduced})
        if (s == to_string(v)) return v;
    throw ConfigError("meanfield.mkm_variant must be literal, pair_consistent or reduced");
}

}  // namespace detail

/// Parses a configuration document. Relative file references resolve against
/// `base_dir`.
inline RunConfig parse_config(const Json& j, const std::filesystem::path& base_dir = ".") {
    using namespace detail;
    check_keys(j, {"schema_version", "mode", "seed", "replicates", "t_max", "output_times", "scaling_k", "domain",
                   "rates", "motion", "irradiation", "initial", "chemistry", "engine", "meanfield", "sweep"},
               "config");
    const int version = get<int>(j, "schema_version", "config");
    if (version != kSchemaVersion)
        throw ConfigError("unsupported schema_version " + std::to_string(version) + " (expected " +
                          std::to_string(kSchemaVersion) + ")");
    RunConfig c;
    c.mode = parse_mode(get<std::string>(j, "mode", "config"));
    c.seed = get_or<std::uint64_t>(j, "seed", 1, "config");
    c.replicates = get_or<std::size_t>(j, "replicates", 1, "config");
    c.t_max = get<double>(j, "t_max", "config");
    c.output_times = get_or<std::vector<double>>(j, "output_times", {}, "config");
    c.scaling_k = get_or<double>(j, "scaling_k", 1.0, "config");

    c.model.domain = j.contains("domain") ? parse_domain(j.at("domain")) : Domain();
    const int dim = c.model.domain.dim();
    if (j.contains("rates")) c.model.rates = parse_rates(j.at("rates"));
    if (j.contains("motion")) {
        const auto& m = j.at("motion");
        check_keys(m, {"dt_diff", "x", "y"}, "motion");
        c.model.motion.dt_diff = get_or<double>(m, "dt_diff", 1e-2, "motion");
        if (m.contains("x")) c.model.motion.x = parse_motion(m.at("x"), dim, "motion.x");
        if (m.contains("y")) c.model.motion.y = parse_motion(m.at("y"), dim, "motion.y");
    }
    if (j.contains("irradiation")) c.model.irradiation = parse_irradiation(j.at("irradiation"), base_dir);
    if (j.contains("initial")) c.initial = parse_initial(j.at("initial"), dim);
    if (j.contains("chemistry")) c.model.chemistry = parse_chemistry(j.at("chemistry"));
    if (j.contains("engine")) {
        const auto& e = j.at("engine");
        check_keys(e, {"n_max", "stop_at_extinction", "record_events", "record_positions"}, "engine");
        c.model.n_max = get_or<std::size_t>(e, "n_max", 1'000'000, "engine");
        c.engine.stop_at_extinction = get_or<bool>(e, "stop_at_extinction", false, "engine");
        c.engine.record_events = get_or<bool>(e, "record_events", true, "engine");
        c.engine.record_positions = get_or<bool>(e, "record_positions", false, "engine");
    }
    if (j.contains("meanfield")) {
        const auto& m = j.at("meanfield");
        check_keys(m, {"convention", "mkm_variant", "dt", "leak_tolerance", "grid_cells"}, "meanfield");
        c.meanfield.convention = parse_convention(get_or<std::string>(m, "convention", "unordered", "meanfield"));
        c.meanfield.mkm_variant = parse_variant(get_or<std::string>(m, "mkm_variant", "pair_consistent", "meanfield"));
        c.meanfield.dt = get_or<double>(m, "dt", 1e-3, "meanfield");
        c.meanfield.leak_tolerance = get_or<double>(m, "leak_tolerance", 1e-8, "meanfield");
        c.meanfield.grid_cells = get_or<int>(m, "grid_cells", 16, "meanfield");
    }
    if (j.contains("sweep")) {
        const auto& s = j.at("sweep");
        check_keys(s, {"parameter", "values"}, "sweep");
        SweepSettings sw;
        const auto p = get<std::string>(s, "parameter", "sweep");
        if (p == "dt_diff") sw.parameter = SweepSettings::Parameter::dt_diff;
        else if (p == "k") sw.parameter = SweepSettings::Parameter::k;
        else throw ConfigError("sweep.parameter must be dt_diff or k");
        sw.values = get<std::vector<double>>(s, "values", "sweep");
        c.sweep = sw;
    }
    c.validate();
    return c;
}

inline RunConfig parse_config_text(const std::string& text, const std::filesystem::path& base_dir = ".") {
    Json j;
    try {
        j = Json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    return parse_config(j, base_dir);
}

inline RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str(), path.parent_path().empty() ? "." : path.parent_path());
}

/// Canonical JSON form (every field explicit, tabulated data inlined).
inline Json serialize(const RunConfig& c) {
    using namespace detail;
    const int dim = c.model.domain.dim();
    Json j;
    j["schema_version"] = kSchemaVersion;
    j["mode"] = to_string(c.mode);
    j["seed"] = c.seed;
    j["replicates"] = c.replicates;
    j["t_max"] = c.t_max;
    j["output_times"] = c.output_times;
    j["scaling_k"] = c.scaling_k;
    j["domain"] = domain_json(c.model.domain);
    j["rates"] = rates_json(c.model.rates);
    j["motion"] = {{"dt_diff", c.model.motion.dt_diff}, {"x", motion_json(c.model.motion.x, dim)},
                   {"y", motion_json(c.model.motion.y, dim)}};
    j["irradiation"] = irradiation_json(c.model.irradiation);
    j["initial"] = initial_json(c.initial);
    if (c.model.chemistry) j["chemistry"] = chemistry_json(*c.model.chemistry);
    j["engine"] = {{"n_max", c.model.n_max}, {"stop_at_extinction", c.engine.stop_at_extinction},
                   {"record_events", c.engine.record_events}, {"record_positions", c.engine.record_positions}};
    j["meanfield"] = {{"convention", to_string(c.meanfield.convention)},
                      {"mkm_variant", to_string(c.meanfield.mkm_variant)},
                      {"dt", c.meanfield.dt},
                      {"leak_tolerance", c.meanfield.leak_tolerance},
                      {"grid_cells", c.meanfield.grid_cells}};
    if (c.sweep)
        j["sweep"] = {{"parameter", c.sweep->parameter == SweepSettings::Parameter::k ? "k" : "dt_diff"},
                      {"values", c.sweep->values}};
    return j;
}

}  // namespace gsm2
