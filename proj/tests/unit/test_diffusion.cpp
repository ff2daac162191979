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

#include "gsm2/diffusion.hpp"

using namespace gsm2;

namespace {

const Domain kUnitBox = Domain::box(Point(0.0, 0.0), Point(1.0, 1.0));

}  // namespace

TEST(Diffusion, StaticMotionOnlyAdvancesTime) {
    SystemState s(0.0, {Point(0.2, 0.3)}, {Point(0.7, 0.1)});
    MotionModel mm;
    RngStream rng(31, 0);
    step_all(s, mm, kUnitBox, 0.01, rng);
    EXPECT_EQ(s.xs()[0], Point(0.2, 0.3));
    EXPECT_EQ(s.ys()[0], Point(0.7, 0.1));
    EXPECT_DOUBLE_EQ(s.time(), 0.01);
    EXPECT_EQ(rng.blocks_used(), 0u);
}

TEST(Diffusion, PureDriftIsDeterministic) {
    SystemState s(0.0, {Point(0.2, 0.5)}, {});
    MotionModel mm;
    mm.x = Motion::isotropic(0.0, {1.0, 0.0, 0.0});
    mm.dt_diff = 0.1;
    RngStream rng(32, 0);
    step_all(s, mm, kUnitBox, 0.1, rng);
    EXPECT_NEAR(s.xs()[0][0], 0.3, 1e-15);
    EXPECT_EQ(s.xs()[0][1], 0.5);
}

TEST(Diffusion, DriftReflectsAtTheWall) {
    SystemState s(0.0, {Point(0.95, 0.5)}, {});
    MotionModel mm;
    mm.x = Motion::isotropic(0.0, {1.0, 0.0, 0.0});
    mm.dt_diff = 0.1;
    RngStream rng(33, 0);
    step_all(s, mm, kUnitBox, 0.1, rng);
    EXPECT_NEAR(s.xs()[0][0], 0.95, 1e-12);
}

TEST(Diffusion, IncrementCovarianceMatchesSigmaSigmaT) {
    const Domain wide = Domain::box(Point(-100.0, -100.0), Point(100.0, 100.0));
    MotionModel mm;
    mm.x.sigma[0] = {0.5, 0.0, 0.0};
    mm.x.sigma[1] = {0.3, 0.4, 0.0};
    const double dt = 0.01;
    RngStream rng(34, 0);
    const int n = 100000;
    double sxx = 0.0, syy = 0.0, sxy = 0.0, mx = 0.0;
    for (int i = 0; i < n; ++i) {
        SystemState s(0.0, {Point(0.0, 0.0)}, {});
        step_all(s, mm, wide, dt, rng);
        const Point& q = s.xs()[0];
        mx += q[0];
        sxx += q[0] * q[0];
        syy += q[1] * q[1];
        sxy += q[0] * q[1];
    }
    const double vxx = mm.x.covariance(0, 0) * dt, vyy = mm.x.covariance(1, 1) * dt;
    const double vxy = mm.x.covariance(0, 1) * dt;
    EXPECT_NEAR(vxx, 0.0025, 1e-15);
    EXPECT_NEAR(sxx / n, vxx, 5.0 * vxx * std::sqrt(2.0 / n));
    EXPECT_NEAR(syy / n, vyy, 5.0 * vyy * std::sqrt(2.0 / n));
    EXPECT_NEAR(sxy / n, vxy, 5.0 * std::sqrt((vxx * vyy + vxy * vxy) / n));
    EXPECT_NEAR(mx / n, 0.0, 5.0 * std::sqrt(vxx / n));
}

TEST(Diffusion, ReflectedPathsStayInside) {
    const Domain disk = Domain::disk(Point(0.0, 0.0), 1.0);
    MotionModel mm;
    mm.x = Motion::isotropic(2.0, {3.0, -1.0, 0.0});
    mm.y = Motion::isotropic(1.0);
    mm.dt_diff = 0.05;
    std::vector<Point> xs(50, Point(0.9, 0.0)), ys(50, Point(0.0, -0.9));
    SystemState s(0.0, xs, ys);
    RngStream rng(35, 0);
    for (int k = 0; k < 400; ++k) {
        step_all(s, mm, disk, 0.05, rng);
        for (const auto& q : s.xs()) ASSERT_TRUE(disk.contains(q));
        for (const auto& q : s.ys()) ASSERT_TRUE(disk.contains(q));
    }
    EXPECT_NEAR(s.time(), 20.0, 1e-9);
}

TEST(Diffusion, StepLengthIsChecked) {
    SystemState s(0.0, {Point(0.5, 0.5)}, {});
    MotionModel mm;
    mm.x = Motion::isotropic(1.0);
    mm.dt_diff = 0.01;
    RngStream rng(36, 0);
    EXPECT_THROW(step_all(s, mm, kUnitBox, 0.02, rng), InputError);
    EXPECT_THROW(step_all(s, mm, kUnitBox, -0.001, rng), InputError);
    EXPECT_NO_THROW(step_all(s, mm, kUnitBox, 0.005, rng));
}

TEST(Diffusion, InvalidMotionIsRejected) {
    MotionModel mm;
    mm.dt_diff = 0.0;
    EXPECT_THROW(mm.validate(), ConfigError);
    mm.dt_diff = 0.01;
    mm.y.mu[0] = std::nan("");
    EXPECT_THROW(mm.validate(), ConfigError);
}

TEST(Diffusion, MeanSquareDisplacementGrowsLinearly) {
    // Far from the walls the mean square displacement is 2 sigma^2 t in 2D.
    const Domain wide = Domain::box(Point(-50.0, -50.0), Point(50.0, 50.0));
    MotionModel mm;
    mm.x = Motion::isotropic(0.5);
    mm.dt_diff = 0.01;
    const int paths = 10000, steps = 100;
    std::vector<double> msd(steps, 0.0);
    RngStream rng(37, 0);
    for (int p = 0; p < paths; ++p) {
        SystemState s(0.0, {Point(0.0, 0.0)}, {});
        for (int k = 0; k < steps; ++k) {
            step_all(s, mm, wide, 0.01, rng);
            msd[k] += s.xs()[0].norm2() / paths;
        }
    }
    double stt = 0.0, sty = 0.0;
    for (int k = 0; k < steps; ++k) {
        const double t = 0.01 * (k + 1);
        stt += t * t;
        sty += t * msd[k];
    }
    EXPECT_NEAR(sty / stt, 2.0 * 0.25, 0.05 * 0.5);
}
