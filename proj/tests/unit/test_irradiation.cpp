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
#include <filesystem>
#include <fstream>
#include <random>

#include "gsm2/irradiation.hpp"

using namespace gsm2;

namespace {

const Domain kDisk = Domain::disk(Point(0.0, 0.0), 5.0);

struct Moments {
    double mean = 0.0;
    double var = 0.0;
};

template <class F>
Moments sample_moments(int n, F&& draw) {
    double s = 0.0, s2 = 0.0;
    for (int i = 0; i < n; ++i) {
        const double v = draw();
        s += v;
        s2 += v * v;
    }
    const double m = s / n;
    return {m, (s2 - n * m * m) / (n - 1)};
}

IrradiationModel linear_model(double kappa, double lambda) {
    IrradiationModel m;
    m.z_f = 0.04;
    m.f1 = SpecificEnergyDist(DiracEnergy{0.04});
    m.kappa = YieldFunction::linear(kappa);
    m.lambda = YieldFunction::linear(lambda);
    return m;
}

}  // namespace

TEST(EventCount, ZeroDoseGivesNoEvents) {
    RngStream rng(41, 0);
    for (int i = 0; i < 100; ++i) EXPECT_EQ(sample_event_count(0.0, 0.04, rng), 0u);
}

TEST(EventCount, PoissonMeanAndVariance) {
    RngStream rng(42, 0);
    const int n = 100000;
    const auto m = sample_moments(n, [&] { return static_cast<double>(sample_event_count(5.0, 0.04, rng)); });
    EXPECT_NEAR(m.mean, 125.0, 3.0 * std::sqrt(125.0 / n));
    EXPECT_NEAR(m.var / 125.0, 1.0, 0.05);
}

TEST(EventCount, RejectsBadArguments) {
    RngStream rng(43, 0);
    EXPECT_THROW(sample_event_count(1.0, 0.0, rng), ConfigError);
    EXPECT_THROW(sample_event_count(-1.0, 0.04, rng), ConfigError);
}

TEST(TrackBatch, ZeroYieldsGiveEmptyBatches) {
    const auto m = linear_model(0.0, 0.0);
    RngStream rng(44, 0);
    for (int i = 0; i < 100; ++i) {
        const auto b = sample_track(m, kDisk, rng);
        EXPECT_TRUE(b.xs.empty());
        EXPECT_TRUE(b.ys.empty());
        EXPECT_EQ(b.z, 0.04);
    }
}

TEST(TrackBatch, MeanYieldAndChemicalCoupling) {
    auto m = linear_model(50.0, 25.0);
    RngStream rng(45, 0);
    const int n = 40000;
    const auto x = sample_moments(n, [&] { return static_cast<double>(sample_track(m, kDisk, rng).xs.size()); });
    EXPECT_NEAR(x.mean, 2.0, 4.0 * std::sqrt(2.0 / n));
    const auto y = sample_moments(n, [&] { return static_cast<double>(sample_track(m, kDisk, rng).ys.size()); });
    EXPECT_NEAR(y.mean, 1.0, 4.0 * std::sqrt(1.0 / n));

    m.coupling = ChemCoupling{0, 1.0};
    const ConcentrationLookup one = [](std::size_t, const Point&) { return 1.0; };
    const auto c = sample_moments(n, [&] { return static_cast<double>(sample_track(m, kDisk, rng, one).xs.size()); });
    EXPECT_NEAR(c.mean, 4.0, 4.0 * std::sqrt(4.0 / n));
}

TEST(TrackBatch, JointCountTableOverridesYields) {
    auto m = linear_model(50.0, 0.0);
    m.joint_counts = JointCountTable{{0, 3}, {1, 0}, {0.5, 0.5}};
    RngStream rng(46, 0);
    int threes = 0;
    for (int i = 0; i < 2000; ++i) {
        const auto b = sample_track(m, kDisk, rng);
        ASSERT_TRUE((b.xs.size() == 0 && b.ys.size() == 1) || (b.xs.size() == 3 && b.ys.empty()));
        threes += b.xs.size() == 3;
    }
    EXPECT_NEAR(threes / 2000.0, 0.5, 0.05);
}

TEST(InitialMeasure, ZeroDoseIsEmpty) {
    const auto m = linear_model(50.0, 10.0);
    RngStream rng(47, 0);
    const auto s = sample_initial_measure(m, kDisk, rng);
    EXPECT_EQ(s.total(), 0u);
}

TEST(InitialMeasure, CountsFollowCompoundPoisson) {
    // Tabulated z makes the second stage overdispersed, so the variance
    // differs from the plain Poisson value and the check is informative.
    auto m = linear_model(40.0, 0.0);
    m.f1 = SpecificEnergyDist(TabulatedEnergy{{0.02, 0.1}, {0.75, 0.25}});
    m.z_f = 0.04;
    m.dose = 0.4;
    m.validate(kDisk);
    RngStream rng(48, 0);
    const int n = 40000;
    const auto eng = sample_moments(n, [&] { return static_cast<double>(sample_initial_measure(m, kDisk, rng).n_x()); });

    std::mt19937_64 gen(12345);
    std::poisson_distribution<int> events(m.dose / m.z_f);
    std::bernoulli_distribution big(0.25);
    const auto ref = sample_moments(n, [&] {
        const int e = events(gen);
        int total = 0;
        for (int i = 0; i < e; ++i) {
            std::poisson_distribution<int> lesions(40.0 * (big(gen) ? 0.1 : 0.02));
            total += lesions(gen);
        }
        return static_cast<double>(total);
    });

    const double nu = m.dose / m.z_f;
    const double ez = 0.75 * 0.02 + 0.25 * 0.1, ez2 = 0.75 * 0.02 * 0.02 + 0.25 * 0.1 * 0.1;
    const double mean = nu * 40.0 * ez;
    const double var = nu * (40.0 * ez + 1600.0 * ez2);
    EXPECT_NEAR(eng.mean, mean, 4.0 * std::sqrt(var / n));
    EXPECT_NEAR(ref.mean, mean, 4.0 * std::sqrt(var / n));
    EXPECT_NEAR(eng.var / var, 1.0, 0.06);
    EXPECT_NEAR(eng.var / ref.var, 1.0, 0.08);
    EXPECT_GT(var, 1.5 * mean);
}

TEST(InitialMeasure, LesionsLieInsideTheDomain) {
    auto m = linear_model(50.0, 50.0);
    m.dose = 2.0;
    m.track.penumbra_radius = 2.0;
    RngStream rng(49, 0);
    const auto s = sample_initial_measure(m, kDisk, rng);
    EXPECT_GT(s.total(), 0u);
    for (const auto& q : s.xs()) EXPECT_TRUE(kDisk.contains(q));
    for (const auto& q : s.ys()) EXPECT_TRUE(kDisk.contains(q));
}

TEST(SpecificEnergy, CsvIsRenormalized) {
    const auto path = std::filesystem::temp_directory_path() / "gsm2_f1_test.csv";
    {
        std::ofstream out(path);
        out << "z,p\n0.02,1\n0.04,2\n0.06,1\n";
    }
    const auto f = SpecificEnergyDist::from_csv(path.string());
    const auto& t = std::get<TabulatedEnergy>(f.law());
    EXPECT_DOUBLE_EQ(t.prob[0], 0.25);
    EXPECT_DOUBLE_EQ(t.prob[1], 0.5);
    EXPECT_NEAR(f.mean(), 0.04, 1e-15);
    std::filesystem::remove(path);
    EXPECT_THROW(SpecificEnergyDist::from_csv("/nonexistent/f1.csv"), ConfigError);
}

TEST(SpecificEnergy, DeclaredMeanMustMatch) {
    auto m = linear_model(1.0, 1.0);
    m.z_f = 0.05;
    EXPECT_THROW(m.validate(kDisk), ConfigError);
    m.z_f = 0.04;
    EXPECT_NO_THROW(m.validate(kDisk));
}

TEST(SpecificEnergy, LogNormalMoments) {
    const SpecificEnergyDist f(LogNormalEnergy{std::log(0.04), 0.3});
    const double exact = std::exp(std::log(0.04) + 0.045);
    EXPECT_NEAR(f.mean(), exact, 1e-15);
    EXPECT_NEAR(f.expect([](double z) { return z; }), exact, 1e-10);
    RngStream rng(50, 0);
    const int n = 100000;
    const auto s = sample_moments(n, [&] { return f.sample(rng); });
    EXPECT_NEAR(s.mean, exact, 4.0 * std::sqrt(s.var / n));
}

TEST(AmorphousTrack, RadiiRespectThePenumbra) {
    AmorphousTrack t{0.01, 0.5};
    RngStream rng(51, 0);
    const int n = 100000;
    int core = 0;
    for (int i = 0; i < n; ++i) {
        const double r = t.sample_radius(rng);
        ASSERT_GE(r, 0.0);
        ASSERT_LE(r, 0.5);
        core += r <= 0.01;
    }
    const double w = t.core_weight();
    EXPECT_NEAR(static_cast<double>(core) / n, w, 4.0 * std::sqrt(w * (1 - w) / n));
}

TEST(AmorphousTrack, RadialLawMatchesProfile) {
    // P(rho <= r) for R_c <= r <= R_p equals w (1 + 2 log(r / R_c)).
    AmorphousTrack t{0.02, 1.0};
    RngStream rng(52, 0);
    const int n = 100000;
    int below = 0;
    for (int i = 0; i < n; ++i) below += t.sample_radius(rng) <= 0.2;
    const double p = t.core_weight() * (1.0 + 2.0 * std::log(0.2 / 0.02));
    EXPECT_NEAR(static_cast<double>(below) / n, p, 4.0 * std::sqrt(p * (1 - p) / n));
}

TEST(Footprint, IntegratesToOne) {
    const Domain box = Domain::box(Point(0.0, 0.0), Point(2.0, 2.0));
    const Grid g = Grid::uniform(box, 20);
    auto m = linear_model(1.0, 1.0);
    m.track = AmorphousTrack{0.05, 0.5};
    for (const Point& c : {Point(1.0, 1.0), Point(0.01, 1.99), Point(1.3, 0.2)}) {
        const auto f = track_footprint(m, g, c);
        EXPECT_NEAR(g.integrate(f), 1.0, 1e-12);
        for (double v : f) EXPECT_GE(v, 0.0);
    }
    m.spread = LesionSpread::uniform;
    const auto u = track_footprint(m, g, Point(1.0, 1.0));
    EXPECT_NEAR(g.integrate(u), 1.0, 1e-12);
    EXPECT_NEAR(u.front(), u.back(), 1e-15);
}

TEST(IrradiationModel, ValidationCatchesBadInput) {
    auto m = linear_model(1.0, 1.0);
    m.track_placement = TrackPlacement::at_point;
    EXPECT_THROW(m.validate(kDisk), ConfigError);
    m.track_point = Point(10.0, 0.0);
    EXPECT_THROW(m.validate(kDisk), ConfigError);
    m.track_point = Point(1.0, 0.0);
    EXPECT_NO_THROW(m.validate(kDisk));
    m.track = AmorphousTrack{0.5, 0.1};
    EXPECT_THROW(m.validate(kDisk), ConfigError);
    EXPECT_THROW(SpecificEnergyDist(TabulatedEnergy{{0.1}, {0.0}}), ConfigError);
    EXPECT_THROW((YieldFunction{0.0, {0.1, 0.05}, {1.0, 2.0}}.validate()), ConfigError);
}

TEST(YieldFunction, TabulatedInterpolation) {
    const YieldFunction y{0.0, {0.0, 0.1}, {0.0, 10.0}};
    EXPECT_NEAR(y(0.05), 5.0, 1e-12);
    EXPECT_EQ(y(1.0), 10.0);
    EXPECT_EQ(YieldFunction::linear(50.0)(0.04), 2.0);
}

TEST(InitialMeasure, NarrowTracksConcentrateLesions) {
    auto m = linear_model(100.0, 0.0);
    m.track = AmorphousTrack{1e-6, 1e-4};
    RngStream rng(53, 0);
    for (int k = 0; k < 200; ++k) {
        const auto b = sample_track(m, kDisk, rng);
        for (const auto& q : b.xs) ASSERT_LT(distance(q, b.center), 1e-4);
    }
}

TEST(InitialMeasure, MeanMatchesTableQuadrature) {
    auto m = linear_model(0.0, 0.0);
    m.f1 = SpecificEnergyDist(TabulatedEnergy{{0.01, 0.03, 0.1}, {0.3, 0.5, 0.2}});
    m.z_f = m.f1.mean();
    m.kappa = YieldFunction{0.0, {0.0, 0.05, 0.2}, {0.0, 3.0, 4.0}};
    m.dose = 0.02;
    RngStream rng(54, 0);
    const int n = 100000;
    const auto s = sample_moments(n, [&] { return static_cast<double>(sample_initial_measure(m, kDisk, rng).n_x()); });
    const double mean = m.dose / m.z_f * m.f1.expect([&](double z) { return m.kappa(z); });
    EXPECT_NEAR(s.mean, mean, 3.0 * std::sqrt(s.var / n));
}
