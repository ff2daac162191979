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

#include "gsm2/geometry.hpp"
#include "gsm2/grid.hpp"
#include "gsm2/random.hpp"

using namespace gsm2;

namespace {
const Domain kUnitDisk = Domain::disk(Point(0.0, 0.0), 1.0);
const Domain kUnitBox = Domain::box(Point(0.0, 0.0), Point(1.0, 1.0));
}  // namespace

TEST(Domain, ContainsExamples) {
    EXPECT_TRUE(kUnitDisk.contains(Point(0.0, 0.0)));
    EXPECT_FALSE(kUnitDisk.contains(Point(2.0, 0.0)));
    EXPECT_TRUE(kUnitBox.contains(Point(1.0, 1.0)));
}

TEST(Domain, DimensionMismatchIsInputError) {
    EXPECT_THROW(kUnitDisk.contains(Point(0.0, 0.0, 0.0)), InputError);
    EXPECT_THROW(kUnitBox.reflect(Point(0.0, 0.0, 0.0)), InputError);
}

TEST(Domain, InvalidShapesAreConfigErrors) {
    EXPECT_THROW(Domain::disk(Point(0.0, 0.0), 0.0), ConfigError);
    EXPECT_THROW(Domain::box(Point(0.0, 0.0), Point(1.0, 0.0)), ConfigError);
    EXPECT_THROW(Domain::box(Point(0.0, 0.0), Point(1.0, 1.0, 1.0)), ConfigError);
}

TEST(Domain, ReflectExamples) {
    const Point a = kUnitBox.reflect(Point(1.2, 0.5));
    EXPECT_NEAR(a[0], 0.8, 1e-15);
    EXPECT_NEAR(a[1], 0.5, 1e-15);
    const Point b = kUnitDisk.reflect(Point(0.5, 0.0));
    EXPECT_EQ(b[0], 0.5);
    EXPECT_EQ(b[1], 0.0);
    const Point c = kUnitDisk.reflect(Point(1.5, 0.0));
    EXPECT_NEAR(c[0], 0.5, 1e-14);
    EXPECT_NEAR(c[1], 0.0, 1e-14);
}

TEST(Domain, RadialReflectionMatchesMirrorFormula) {
    // For radial incidence the image sits at 2r - |q| along the same ray.
    for (double angle : {0.3, 1.7, 4.0}) {
        for (double rad : {1.1, 1.6, 1.99}) {
            const Point q(rad * std::cos(angle), rad * std::sin(angle));
            const Point p = kUnitDisk.reflect(q);
            EXPECT_NEAR(std::hypot(p[0], p[1]), 2.0 - rad, 1e-12);
            EXPECT_NEAR(std::atan2(p[1], p[0]), std::atan2(q[1], q[0]), 1e-12);
        }
    }
}

TEST(Domain, ReflectionAlwaysLandsInside) {
    RngStream rng(11, 0);
    for (int i = 0; i < 20000; ++i) {
        const Point q(rng.uniform(-2.5, 3.5), rng.uniform(-2.5, 3.5));
        EXPECT_TRUE(kUnitBox.contains(kUnitBox.reflect(q)));
        EXPECT_TRUE(kUnitDisk.contains(kUnitDisk.reflect(q)));
    }
    const Domain cube = Domain::box(Point(0.0, 0.0, 0.0), Point(1.0, 2.0, 3.0));
    for (int i = 0; i < 5000; ++i) {
        const Point q(rng.uniform(-3, 4), rng.uniform(-3, 5), rng.uniform(-3, 6));
        EXPECT_TRUE(cube.contains(cube.reflect(q)));
    }
}

TEST(Domain, PathologicalStepIsNumericalError) {
    EXPECT_THROW(kUnitDisk.reflect(Point(1e300, 0.0)), NumericalError);
}

TEST(Domain, UniformDiskMeanIsCenter) {
    RngStream rng(12, 0);
    const int n = 100000;
    double sx = 0.0, sy = 0.0;
    for (int i = 0; i < n; ++i) {
        const Point q = kUnitDisk.sample_uniform(rng);
        ASSERT_TRUE(kUnitDisk.contains(q));
        sx += q[0];
        sy += q[1];
    }
    const double tol = 3.0 * 0.5 / std::sqrt(n);
    EXPECT_NEAR(sx / n, 0.0, tol);
    EXPECT_NEAR(sy / n, 0.0, tol);
}

TEST(Domain, UniformBoxQuadrantFraction) {
    RngStream rng(13, 0);
    const int n = 100000;
    int hits = 0;
    for (int i = 0; i < n; ++i) {
        const Point q = kUnitBox.sample_uniform(rng);
        ASSERT_TRUE(kUnitBox.contains(q));
        hits += q[0] <= 0.5 && q[1] <= 0.5;
    }
    EXPECT_NEAR(static_cast<double>(hits) / n, 0.25, 3.0 * std::sqrt(0.25 * 0.75 / n));
}

TEST(Domain, Volumes) {
    EXPECT_NEAR(kUnitDisk.volume(), M_PI, 1e-15);
    EXPECT_NEAR(Domain::box(Point(0.0, 0.0, 0.0), Point(1.0, 2.0, 3.0)).volume(), 6.0, 1e-15);
    EXPECT_NEAR(Domain::disk(Point(0.0, 0.0, 0.0), 2.0).volume(), 4.0 / 3.0 * M_PI * 8.0, 1e-12);
}

TEST(Geometry, LerpWeightsFirstPoint) {
    const Point p = lerp(Point(0.0, 0.0), Point(1.0, 0.0), 0.25);
    EXPECT_NEAR(p[0], 0.75, 1e-15);
}

TEST(Grid, BoxCellsCoverDomainAndIntegrateConstants) {
    const Grid g = Grid::uniform(kUnitBox, 4);
    EXPECT_EQ(g.size(), 16u);
    EXPECT_NEAR(g.cell_volume(), 1.0 / 16.0, 1e-15);
    EXPECT_NEAR(g.integrate(std::vector<double>(g.size(), 2.0)), 2.0, 1e-14);
    EXPECT_EQ(g.locate(Point(0.1, 0.1)), g.locate(g.center(g.locate(Point(0.1, 0.1)))));
}

TEST(Grid, LinksAreSymmetric) {
    const Grid g = Grid::uniform(kUnitDisk, 9);
    for (std::size_t c = 0; c < g.size(); ++c)
        for (const auto& l : g.links(c)) {
            bool back = false;
            for (const auto& m : g.links(l.cell)) back = back || m.cell == c;
            EXPECT_TRUE(back);
        }
}

TEST(Grid, LocateReturnsContainingCell) {
    const Grid g = Grid::uniform(kUnitBox, 5);
    RngStream rng(14, 0);
    for (int i = 0; i < 1000; ++i) {
        const Point q = kUnitBox.sample_uniform(rng);
        const Point& c = g.center(g.locate(q));
        EXPECT_LE(std::abs(q[0] - c[0]), 0.1 + 1e-12);
        EXPECT_LE(std::abs(q[1] - c[1]), 0.1 + 1e-12);
    }
}
