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

#include <cmath>

#include "gsm2/chemistry.hpp"
#include "gsm2/irradiation.hpp"

using namespace gsm2;

namespace {

const Domain kBox = Domain::box(Point(0.0, 0.0), Point(1.0, 1.0));

ChemistryModel single(double d, double c0) {
    ChemistryModel m;
    m.diffusion = {d};
    m.initial = {c0};
    m.footprint_yield = {0.0};
    m.cells_per_axis = 10;
    m.dt = 1e-3;
    return m;
}

}  // namespace

TEST(Chemistry, UniformFieldIsStationaryUnderDiffusion) {
    const Chemistry chem(single(1.0, 2.5), kBox);
    auto s = chem.initial_state();
    chem.advance(s, 0.5);
    for (double v : s.fields[0]) EXPECT_NEAR(v, 2.5, 1e-12);
    EXPECT_NEAR(s.time, 0.5, 1e-12);
}

TEST(Chemistry, DiffusionConservesMass) {
    const Chemistry chem(single(2.0, 0.0), Domain::disk(Point(0.0, 0.0), 1.0));
    auto s = chem.initial_state();
    std::vector<double> bump(chem.grid().size(), 0.0);
    bump[chem.grid().locate(Point(0.3, -0.2))] = 100.0;
    chem.inject(s, 0, bump);
    const double m0 = chem.mass(s, 0);
    chem.advance(s, 0.2);
    EXPECT_NEAR(chem.mass(s, 0), m0, 1e-12 * m0);
    double lo = 1e300, hi = 0.0;
    for (double v : s.fields[0]) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    EXPECT_GE(lo, 0.0);
    EXPECT_LT(hi, 100.0);
}

TEST(Chemistry, LinearDecayIsExplicitEuler) {
    auto m = single(0.0, 1.0);
    m.reactions = {LinearDecay{0, 2.0}};
    const Chemistry chem(m, kBox);
    auto s = chem.initial_state();
    chem.advance(s, 1.0);
    const double euler = std::pow(1.0 - 2.0 * 1e-3, 1000);
    EXPECT_NEAR(s.fields[0][0], euler, 1e-12);
    // Global Euler error is about k^2 t dt / 2 relative.
    EXPECT_NEAR(s.fields[0][0], std::exp(-2.0), 1.5 * 2e-3 * std::exp(-2.0));
}

TEST(Chemistry, BimolecularConservesReactantPlusProduct) {
    ChemistryModel m;
    m.diffusion = {0.1, 0.1, 0.1};
    m.initial = {1.0, 2.0, 0.0};
    m.footprint_yield = {0.0, 0.0, 0.0};
    m.reactions = {Bimolecular{0, 1, 2, 3.0}};
    m.cells_per_axis = 8;
    const Chemistry chem(m, kBox);
    auto s = chem.initial_state();
    chem.advance(s, 0.5);
    EXPECT_NEAR(chem.mass(s, 0) + chem.mass(s, 2), 1.0, 1e-12);
    EXPECT_NEAR(chem.mass(s, 1) + chem.mass(s, 2), 2.0, 1e-12);
    EXPECT_NEAR(chem.mass(s, 1) - chem.mass(s, 0), 1.0, 1e-12);
    // Well-mixed A + B -> C with B0 - A0 = 1 has A(t) = 1 / (2 e^{3t} - 1).
    EXPECT_NEAR(chem.mass(s, 0), 1.0 / (2.0 * std::exp(1.5) - 1.0), 2e-3);
}

TEST(Chemistry, LogisticApproachesCapacity) {
    auto m = single(0.0, 1.0);
    m.reactions = {Logistic{0, 2.0, 10.0}};
    const Chemistry chem(m, kBox);
    auto s = chem.initial_state();
    chem.advance(s, 1.0);
    const double exact = 10.0 / (1.0 + 9.0 * std::exp(-2.0));
    EXPECT_NEAR(s.fields[0][0], exact, 1e-2);
    EXPECT_EQ(m.mass_control(), (std::pair<double, double>{0.0, 2.0}));
}

TEST(Chemistry, ZeroEnergyInjectionChangesNothing) {
    auto m = single(0.0, 0.7);
    m.footprint_yield = {3.0};
    const Chemistry chem(m, kBox);
    auto s = chem.initial_state();
    const auto before = s.fields;
    std::vector<double> shape(chem.grid().size(), 1.0);
    chem.inject_track(s, 0.0, shape);
    EXPECT_EQ(s.fields, before);
}

TEST(Chemistry, TrackInjectionDepositsYieldTimesEnergy) {
    auto m = single(0.0, 0.0);
    m.footprint_yield = {5.0};
    const Chemistry chem(m, kBox);
    IrradiationModel irr;
    irr.track = AmorphousTrack{0.02, 0.3};
    auto s = chem.initial_state();
    chem.inject_track(s, 0.04, track_footprint(irr, chem.grid(), Point(0.4, 0.6)));
    EXPECT_NEAR(chem.mass(s, 0), 0.2, 1e-10);

    irr.spread = LesionSpread::uniform;
    auto u = chem.initial_state();
    chem.inject_track(u, 0.04, track_footprint(irr, chem.grid(), Point(0.4, 0.6)));
    for (double v : u.fields[0]) EXPECT_NEAR(v, 0.2, 1e-12);
}

TEST(Chemistry, StabilityGateRejectsLargeSteps) {
    auto m = single(1.0, 0.0);
    m.dt = 0.01;  // bound is h^2 / (2 d D) = 0.0025 on a 10 x 10 unit grid
    EXPECT_THROW(Chemistry(m, kBox), ConfigError);
    m.dt = 0.0025;
    EXPECT_NO_THROW(Chemistry(m, kBox));
}

TEST(Chemistry, BadInputsAreRejected) {
    const Chemistry chem(single(0.0, 0.0), kBox);
    auto s = chem.initial_state();
    std::vector<double> f(chem.grid().size(), 0.0);
    f[3] = -1.0;
    EXPECT_THROW(chem.inject(s, 0, f), InputError);
    EXPECT_THROW(chem.inject(s, 1, std::vector<double>(chem.grid().size(), 0.0)), InputError);
    EXPECT_THROW(chem.step(s, 0.1), InputError);

    auto m = single(0.0, 0.0);
    m.reactions = {LinearDecay{2, 1.0}};
    EXPECT_THROW(Chemistry(m, kBox), ConfigError);
    m = single(0.0, 0.0);
    m.declared_c1 = 1.0;
    m.reactions = {Logistic{0, 2.0, 1.0}};
    EXPECT_THROW(Chemistry(m, kBox), ConfigError);
}

TEST(Chemistry, OvershootIsReportedAsNumericalError) {
    auto m = single(0.0, 1.0);
    m.reactions = {LinearDecay{0, 3000.0}};
    const Chemistry chem(m, kBox);
    auto s = chem.initial_state();
    EXPECT_THROW(chem.step(s, 1e-3), NumericalError);
}

TEST(Chemistry, RandomStepsStayNonNegativeAndReplay) {
    ChemistryModel m;
    m.diffusion = {0.05, 0.02, 0.0};
    m.initial = {0.0, 0.0, 0.0};
    m.footprint_yield = {0.0, 0.0, 0.0};
    m.reactions = {Bimolecular{0, 1, 2, 5.0}, LinearDecay{2, 1.0}, Logistic{1, 0.5, 2.0}};
    m.cells_per_axis = 8;
    m.dt = 1e-2;
    const Chemistry chem(m, kBox);
    RngStream rng(55, 0);
    auto s = chem.initial_state();
    for (auto& f : s.fields)
        for (double& v : f) v = rng.uniform(0.0, 2.0);
    auto replay = s;
    for (int k = 0; k < 1000; ++k) {
        chem.step(s, rng.uniform(0.0, m.dt));
        for (const auto& f : s.fields)
            for (double v : f) ASSERT_GE(v, 0.0);
    }
    RngStream again(55, 0);
    for (auto& f : replay.fields)
        for (double& v : f) v = again.uniform(0.0, 2.0);
    for (int k = 0; k < 1000; ++k) chem.step(replay, again.uniform(0.0, m.dt));
    EXPECT_EQ(s.fields, replay.fields);
}
