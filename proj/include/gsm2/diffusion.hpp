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

//! \file diffusion.hpp
//! Euler-Maruyama motion of lesions with specular reflection at the boundary.

#pragma once

#include <array>
#include <cmath>
#include <vector>

#include "gsm2/errors.hpp"
#include "gsm2/geometry.hpp"
#include "gsm2/random.hpp"
#include "gsm2/state.hpp"

namespace gsm2 {

/// Constant diffusion matrix sigma and drift mu of one lesion type.
struct Motion {
    using Matrix = std::array<std::array<double, 3>, 3>;

    Matrix sigma{};      ///< row-major, only the leading dim x dim block is used
    std::array<double, 3> mu{};

    static Motion isotropic(double s, std::array<double, 3> drift = {}) {
        Motion m;
        for (int i = 0; i < 3; ++i) m.sigma[i][i] = s;
        m.mu = drift;
        return m;
    }

    bool is_static() const {
        for (int i = 0; i < 3; ++i) {
            if (mu[i] != 0.0) return false;
            for (int j = 0; j < 3; ++j)
                if (sigma[i][j] != 0.0) return false;
        }
        return true;
    }

    /// Diffusion tensor entry (sigma sigma^T)_{ij}.
    double covariance(int i, int j) const {
        double s = 0.0;
        for (int k = 0; k < 3; ++k) s += sigma[i][k] * sigma[j][k];
        return s;
    }

    bool is_isotropic() const {
        const double s = sigma[0][0];
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                if (sigma[i][j] != (i == j ? s : 0.0)) return false;
        return true;
    }
};

struct MotionModel {
    Motion x;
    Motion y;
    double dt_diff = 1e-2;  ///< hours

    void validate() const {
        if (!(dt_diff > 0.0) || !std::isfinite(dt_diff)) throw ConfigError("dt_diff must be positive");
        for (const auto* m : {&x, &y})
            for (int i = 0; i < 3; ++i) {
                if (!std::isfinite(m->mu[i])) throw ConfigError("drift must be finite");
                for (int j = 0; j < 3; ++j)
                    if (!std::isfinite(m->sigma[i][j])) throw ConfigError("sigma must be finite");
            }
    }

    bool is_static() const { return x.is_static() && y.is_static(); }
};

namespace detail {
inline void move_points(std::vector<Point>& pts, const Motion& m, const Domain& domain, double dt,
                        RngStream& rng) {
    if (m.is_static()) return;
    const double sq = std::sqrt(dt);
    for (auto& q : pts) {
        const int d = q.dim();
        std::array<double, 3> xi{};
        for (int k = 0; k < d; ++k) xi[k] = rng.normal();
        Point p = q;
        for (int i = 0; i < d; ++i) {
            double noise = 0.0;
            for (int k = 0; k < d; ++k) noise += m.sigma[i][k] * xi[k];
            p[i] += m.mu[i] * dt + noise * sq;
        }
        q = domain.reflect(p);
    }
}
}  // namespace detail

/// Moves every lesion over one step of length dt <= dt_diff and advances time.
/// X lesions draw their increments first, then Y lesions, in storage order.
inline void step_all(SystemState& state, const MotionModel& motion, const Domain& domain, double dt,
                     RngStream& rng) {
    if (!(dt >= 0.0)) throw InputError("step_all: negative time step");
    if (dt > motion.dt_diff * (1.0 + 1e-9))
        throw InputError("step_all: step " + std::to_string(dt) + " exceeds dt_diff");
    detail::move_points(detail::StateAccess::xs(state), motion.x, domain, dt, rng);
    detail::move_points(detail::StateAccess::ys(state), motion.y, domain, dt, rng);
    detail::StateAccess::set_time(state, state.time() + dt);
}

}  // namespace gsm2
