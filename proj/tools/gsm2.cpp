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

// Command-line front end: run, validate and sweep.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "gsm2/config.hpp"
#include "gsm2/errors.hpp"
#include "gsm2/io.hpp"

namespace {

enum ExitCode { kOk = 0, kOther = 1, kConfig = 2, kNumerical = 3 };

struct Flags {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> replicates;
    std::string out = "out";
    std::optional<unsigned> threads;
};

void add_common(CLI::App* sub, Flags& f, bool with_outputs) {
    sub->add_option("--config", f.config, "Path to the JSON run configuration")->required();
    if (!with_outputs) return;
    sub->add_option("--seed", f.seed, "Master seed (overrides the config)");
    sub->add_option("--replicates", f.replicates, "Replicate count (overrides the config)")->check(CLI::PositiveNumber);
    sub->add_option("--out", f.out, "Output directory")->capture_default_str();
    sub->add_option("--threads", f.threads, "Worker threads (default: GSM2_THREADS or hardware concurrency)")
        ->check(CLI::PositiveNumber);
}

gsm2::RunConfig load(const Flags& f) {
    gsm2::RunConfig c = gsm2::load_config(f.config);
    if (f.seed) c.seed = *f.seed;
    if (f.replicates) c.replicates = *f.replicates;
    c.validate();
    return c;
}

gsm2::RunOptions options(const Flags& f) {
    gsm2::RunOptions o;
    o.out_dir = f.out;
    o.threads = f.threads ? *f.threads : gsm2::default_threads();
    return o;
}

int report(const char* kind, const std::exception& e, int code) {
    std::cerr << "{\"error\": \"" << kind << "\", \"message\": " << gsm2::Json(e.what()).dump() << "}\n";
    return code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Spatial stochastic simulator of radiation-induced DNA damage kinetics"};
    app.require_subcommand(1);
    Flags run_f, val_f, sweep_f;
    auto* run = app.add_subcommand("run", "Run the configured mode and write artifacts");
    add_common(run, run_f, true);
    auto* validate = app.add_subcommand("validate", "Check a configuration without running it");
    add_common(validate, val_f, false);
    auto* sweep = app.add_subcommand("sweep", "Run the configured sweep over dt_diff or K");
    add_common(sweep, sweep_f, true);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kConfig;
    }

    try {
        if (*validate) {
            const gsm2::RunConfig c = load(val_f);
            std::cout << "config ok: mode " << gsm2::to_string(c.mode) << ", hash "
                      << gsm2::content_hash(gsm2::serialize(c).dump()) << '\n';
        } else if (*run) {
            const gsm2::RunConfig c = load(run_f);
            gsm2::run(c, options(run_f));
            std::cout << "wrote " << run_f.out << '\n';
        } else if (*sweep) {
            const gsm2::RunConfig c = load(sweep_f);
            const auto s = gsm2::sweep(c, options(sweep_f));
            std::cout << "wrote " << sweep_f.out;
            if (s.contains("loglog_slope")) std::cout << " (log-log slope " << s["loglog_slope"].get<double>() << ")";
            std::cout << '\n';
        }
        return kOk;
    } catch (const gsm2::ConfigError& e) {
        return report("config", e, kConfig);
    } catch (const gsm2::InputError& e) {
        return report("input", e, kConfig);
    } catch (const gsm2::ModelError& e) {
        return report("model", e, kConfig);
    } catch (const gsm2::NumericalError& e) {
        return report("numerical", e, kNumerical);
    } catch (const std::exception& e) {
        return report("internal", e, kOther);
    }
}
