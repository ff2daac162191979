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

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "gsm2/config.hpp"
#include "gsm2/io.hpp"

using namespace gsm2;
namespace fs = std::filesystem;

namespace {

const fs::path kConfigs = fs::path(GSM2_SOURCE_DIR) / "configs";

Json read_json(const fs::path& p) {
    std::ifstream in(p);
    return Json::parse(in);
}

std::string read_text(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path scratch(const std::string& name) {
    const fs::path d = fs::temp_directory_path() / ("gsm2_test_" + name);
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

Json small_spatial() {
    Json j = read_json(kConfigs / "c1_spatial.json");
    j["replicates"] = 2;
    j["engine"]["record_events"] = true;
    j["engine"]["record_positions"] = true;
    j["engine"]["stop_at_extinction"] = false;
    return j;
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(GSM2_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Config, ShippedConfigsLoad) {
    int n = 0;
    for (const auto& entry : fs::directory_iterator(kConfigs)) {
        if (entry.path().extension() != ".json") continue;
        EXPECT_NO_THROW(load_config(entry.path())) << entry.path();
        ++n;
    }
    EXPECT_GE(n, 10);
}

TEST(Config, SerializeRoundTrips) {
    for (const auto& entry : fs::directory_iterator(kConfigs)) {
        if (entry.path().extension() != ".json") continue;
        const RunConfig c = load_config(entry.path());
        const Json once = serialize(c);
        const Json twice = serialize(parse_config(once, kConfigs));
        EXPECT_EQ(once.dump(), twice.dump()) << entry.path();
    }
}

TEST(Config, UnknownKeysAreRejected) {
    Json j = small_spatial();
    j["rates"]["r"]["bsae"] = 1.0;
    EXPECT_THROW(parse_config(j, kConfigs), ConfigError);
    Json top = small_spatial();
    top["replicate"] = 3;
    EXPECT_THROW(parse_config(top, kConfigs), ConfigError);
}

TEST(Config, SchemaVersionIsChecked) {
    Json j = small_spatial();
    j["schema_version"] = 2;
    EXPECT_THROW(parse_config(j, kConfigs), ConfigError);
    j.erase("schema_version");
    EXPECT_THROW(parse_config(j, kConfigs), ConfigError);
    EXPECT_THROW(parse_config_text("{ not json", kConfigs), ConfigError);
    EXPECT_THROW(load_config(kConfigs / "missing.json"), ConfigError);
}

TEST(Config, InvalidValuesAreRejected) {
    Json j = small_spatial();
    j["t_max"] = -1.0;
    EXPECT_THROW(parse_config(j, kConfigs), ConfigError);
    j = small_spatial();
    j["output_times"] = {0.5, 9.0};
    EXPECT_THROW(parse_config(j, kConfigs), ConfigError);
    j = small_spatial();
    j["irradiation"]["z_f"] = 0.05;
    EXPECT_THROW(parse_config(j, kConfigs), ConfigError);
    j = small_spatial();
    j["mode"] = "teleport";
    EXPECT_THROW(parse_config(j, kConfigs), ConfigError);
}

TEST(Config, LargePopulationRescaling) {
    Json j = small_spatial();
    j["scaling_k"] = 10.0;
    j["irradiation"]["d_dot"] = 2.0;
    j["irradiation"]["t_irr"] = 1.0;
    j["irradiation"]["dose"] = 0.5;
    const RunConfig c = parse_config(j, kConfigs);
    const SimulationModel eff = c.effective_model();
    EXPECT_DOUBLE_EQ(eff.rates.b_pair.constant_value(), 0.01);
    EXPECT_DOUBLE_EQ(eff.irradiation.d_dot, 20.0);
    EXPECT_DOUBLE_EQ(eff.irradiation.dose, 5.0);
    EXPECT_DOUBLE_EQ(eff.rates.r.base, 4.0);
    EXPECT_DOUBLE_EQ(c.effective_initial().n_x, 50.0);
    EXPECT_DOUBLE_EQ(c.model.rates.b_pair.constant_value(), 0.1);
    j["scaling_k"] = 0.5;
    EXPECT_THROW(parse_config(j, kConfigs), ConfigError);
}

TEST(Config, CountRatesNeedConstantKernels) {
    const RunConfig c = load_config(kConfigs / "c8_dt_sweep.json");
    EXPECT_THROW(c.count_rates(c.model), ConfigError);
    const RunConfig g = load_config(kConfigs / "c1_master.json");
    const CountRates k = g.count_rates(g.model);
    EXPECT_EQ(k.r, 4.0);
    EXPECT_EQ(k.a, 0.1);
    EXPECT_EQ(k.b, 0.1);
}

TEST(Survival, BinomialEstimates) {
    const auto all = estimate_survival({1.0}, {100}, 100);
    EXPECT_EQ(all.survival[0], 1.0);
    EXPECT_EQ(all.se[0], 0.0);
    const auto quarter = estimate_survival({1.0}, {25}, 100);
    EXPECT_EQ(quarter.survival[0], 0.25);
    EXPECT_NEAR(quarter.se[0], 0.0433, 5e-5);
    EXPECT_THROW(estimate_survival({1.0}, {0}, 0), InputError);
    EXPECT_THROW(estimate_survival({1.0}, {5}, 4), InputError);
    EXPECT_THROW(estimate_survival(std::vector<ReplicateResult>{}), InputError);
}

TEST(Formatting, RoundTripPrecisionAndHash) {
    const double v = 0.1 + 0.2;
    EXPECT_EQ(std::stod(fmt(v)), v);
    EXPECT_EQ(fmt_points({Point(1.0, 2.0), Point(3.0, 4.5)}), "1 2|3 4.5");
    EXPECT_EQ(content_hash("abc"), content_hash("abc"));
    EXPECT_NE(content_hash("abc"), content_hash("abd"));
    EXPECT_EQ(content_hash("").size(), 16u);
}

TEST(Parallel, MapKeepsOrderAndRethrows) {
    const auto out = parallel_map(50, 3, [](std::size_t i) { return i * i; });
    for (std::size_t i = 0; i < out.size(); ++i) EXPECT_EQ(out[i], i * i);
    EXPECT_THROW(parallel_map(10, 2,
                              [](std::size_t i) -> int {
                                  if (i == 7) throw NumericalError("boom");
                                  return 0;
                              }),
                 NumericalError);
}

TEST(Parallel, ThreadDefaultFollowsEnvironment) {
    ::setenv("GSM2_THREADS", "3", 1);
    EXPECT_EQ(default_threads(), 3u);
    ::unsetenv("GSM2_THREADS");
    EXPECT_GE(default_threads(), 1u);
}

TEST(Run, SameSeedGivesIdenticalBytes) {
    const RunConfig c = parse_config(small_spatial(), kConfigs);
    const fs::path a = scratch("det_a"), b = scratch("det_b");
    RunOptions oa, ob;
    oa.out_dir = a;
    ob.out_dir = b;
    ob.threads = 2;
    run(c, oa);
    run(c, ob);
    std::size_t compared = 0;
    for (const auto& entry : fs::directory_iterator(a)) {
        const auto name = entry.path().filename();
        ASSERT_TRUE(fs::exists(b / name)) << name;
        if (name == "manifest.json") {
            Json ma = read_json(a / name), mb = read_json(b / name);
            ma.erase("started_at");
            mb.erase("started_at");
            EXPECT_EQ(ma, mb);
        } else {
            EXPECT_EQ(read_text(a / name), read_text(b / name)) << name;
        }
        ++compared;
    }
    EXPECT_GE(compared, 6u);
    for (const char* f : {"trajectory.csv", "events.csv", "snapshots.csv", "survival.csv", "summary.json"})
        EXPECT_TRUE(fs::exists(a / f)) << f;
    const std::string header = read_text(a / "trajectory.csv").substr(0, 26);
    EXPECT_EQ(header, "replicate_id,t,N_X,N_Y\n0,0");

    RunConfig other = c;
    other.seed += 1;
    const fs::path d = scratch("det_c");
    RunOptions od;
    od.out_dir = d;
    run(other, od);
    EXPECT_NE(read_text(a / "events.csv"), read_text(d / "events.csv"));
}

TEST(Run, ManifestRecordsRawAndEffectiveRates) {
    Json j = small_spatial();
    j["scaling_k"] = 10.0;
    j["replicates"] = 1;
    j["t_max"] = 0.1;
    j["output_times"] = {0.1};
    const RunConfig c = parse_config(j, kConfigs);
    const fs::path d = scratch("manifest");
    RunOptions o;
    o.out_dir = d;
    run(c, o);
    const Json m = read_json(d / "manifest.json");
    EXPECT_EQ(m["rng"], "philox4x32-10");
    EXPECT_EQ(m["master_seed"], c.seed);
    EXPECT_EQ(m["partial"], false);
    EXPECT_EQ(m["scaling_k"], 10.0);
    EXPECT_EQ(m["raw_rates"]["b"]["pair_kernel"]["value"], 0.1);
    EXPECT_DOUBLE_EQ(m["effective_rates"]["b"]["pair_kernel"]["value"].get<double>(), 0.01);
    EXPECT_EQ(m["config_hash"].get<std::string>().size(), 16u);
}

TEST(Run, MeanKineticsWritesNoSurvivalFile) {
    const RunConfig c = load_config(kConfigs / "mkm.json");
    const fs::path d = scratch("mkm");
    RunOptions o;
    o.out_dir = d;
    run(c, o);
    EXPECT_TRUE(fs::exists(d / "trajectory.csv"));
    EXPECT_FALSE(fs::exists(d / "survival.csv"));
    EXPECT_EQ(read_text(d / "trajectory.csv").rfind("t,x,y,x_closed_form,y_closed_form\n", 0), 0u);
}

TEST(Run, MasterSurvivalMatchesCompetingExponentials) {
    Json j = read_json(kConfigs / "c2_master.json");
    const RunConfig c = parse_config(j, kConfigs);
    const fs::path d = scratch("master");
    RunOptions o;
    o.out_dir = d;
    run(c, o);
    std::ifstream in(d / "survival.csv");
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "t,S,SE,n");
    std::string last;
    while (std::getline(in, line))
        if (!line.empty()) last = line;
    const double s = std::stod(last.substr(last.find(',') + 1));
    const double r = c.model.rates.r.base, a = c.model.rates.a.base;
    EXPECT_NEAR(s, r / (r + a), 1e-6);
}

TEST(Run, FailureLeavesPartialManifest) {
    Json j = small_spatial();
    j["engine"]["n_max"] = 3;
    const RunConfig c = parse_config(j, kConfigs);
    const fs::path d = scratch("partial");
    RunOptions o;
    o.out_dir = d;
    EXPECT_THROW(run(c, o), NumericalError);
    const Json m = read_json(d / "manifest.json");
    EXPECT_EQ(m["partial"], true);
    EXPECT_NE(m["error"].get<std::string>().find("n_max"), std::string::npos);
}

TEST(Sweep, WritesOneDirectoryPerValue) {
    Json j = small_spatial();
    j["sweep"] = {{"parameter", "dt_diff"}, {"values", {0.05, 0.025}}};
    j["engine"]["record_positions"] = false;
    const RunConfig c = parse_config(j, kConfigs);
    const fs::path d = scratch("sweep");
    RunOptions o;
    o.out_dir = d;
    sweep(c, o);
    EXPECT_TRUE(fs::exists(d / "sweep.csv"));
    EXPECT_TRUE(fs::exists(d / "sweep_summary.json"));
    std::size_t subdirs = 0;
    for (const auto& e : fs::directory_iterator(d)) subdirs += e.is_directory();
    EXPECT_EQ(subdirs, 2u);
    EXPECT_EQ(read_text(d / "sweep.csv").rfind("parameter,value,replicates,", 0), 0u);
}

TEST(Sweep, LogLogSlope) {
    EXPECT_NEAR(loglog_slope({10.0, 100.0, 1000.0}, {1.0, 0.1, 0.01}), -1.0, 1e-12);
    EXPECT_NEAR(loglog_slope({1.0, 4.0, 16.0}, {3.0, 1.5, 0.75}), -0.5, 1e-12);
}

TEST(Cli, ExitCodes) {
    const fs::path d = scratch("cli");
    const std::string mkm = (kConfigs / "mkm.json").string();
    EXPECT_EQ(run_cli("validate --config " + mkm), 0);
    EXPECT_EQ(run_cli("run --config " + mkm + " --out " + (d / "ok").string() + " --seed 5 --threads 1"), 0);
    EXPECT_TRUE(fs::exists(d / "ok" / "manifest.json"));

    {
        std::ofstream bad(d / "bad.json");
        bad << R"({"schema_version": 1, "mode": "mkm", "t_max": 1.0, "typo": 3})";
    }
    EXPECT_EQ(run_cli("validate --config " + (d / "bad.json").string()), 2);
    EXPECT_EQ(run_cli("run --config " + (d / "missing.json").string()), 2);
    EXPECT_EQ(run_cli("run --config " + mkm + " --replicates 0"), 2);
    EXPECT_EQ(run_cli("frobnicate"), 2);

    Json j = small_spatial();
    j["engine"]["n_max"] = 3;
    {
        std::ofstream num(d / "num.json");
        num << j.dump();
    }
    EXPECT_EQ(run_cli("run --config " + (d / "num.json").string() + " --out " + (d / "num").string()), 3);
}
