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

//! \file grid.hpp
//! Cartesian cell grid over the domain. For a box the cells tile it exactly;
//! for a disk the grid covers the bounding box and keeps only the cells whose
//! centers lie inside.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <vector>

#include "gsm2/errors.hpp"
#include "gsm2/geometry.hpp"

namespace gsm2 {

class Grid {
public:
    /// Face neighbor of an active cell, together with the face axis.
    struct Link {
        int cell;
        int axis;
    };

    Grid(const Domain& domain, std::array<int, 3> cells_per_axis) : dim_(domain.dim()) {
        auto [lo, hi] = domain.bounding_box();
        lo_ = lo;
        total_ = 1;
        for (int a = 0; a < dim_; ++a) {
            if (cells_per_axis[a] < 1) throw ConfigError("grid needs at least one cell per axis");
            n_[a] = cells_per_axis[a];
            h_[a] = (hi[a] - lo[a]) / n_[a];
            total_ *= n_[a];
        }
        for (int a = dim_; a < 3; ++a) n_[a] = 1;
        cell_volume_ = 1.0;
        for (int a = 0; a < dim_; ++a) cell_volume_ *= h_[a];

        active_of_raw_.assign(total_, -1);
        for (int raw = 0; raw < total_; ++raw) {
            const Point c = raw_center(raw);
            if (domain.contains(c)) {
                active_of_raw_[raw] = static_cast<int>(raw_of_active_.size());
                raw_of_active_.push_back(raw);
                centers_.push_back(c);
            }
        }
        if (raw_of_active_.empty()) throw ConfigError("grid has no cell inside the domain");

        links_.resize(raw_of_active_.size());
        for (std::size_t c = 0; c < raw_of_active_.size(); ++c) {
            auto idx = unravel(raw_of_active_[c]);
            for (int a = 0; a < dim_; ++a) {
                for (int step : {-1, 1}) {
                    auto nb = idx;
                    nb[a] += step;
                    if (nb[a] < 0 || nb[a] >= n_[a]) continue;
                    const int other = active_of_raw_[ravel(nb)];
                    if (other >= 0) links_[c].push_back({other, a});
                }
            }
        }
    }

    /// Equal counts on every axis.
    static Grid uniform(const Domain& domain, int cells_per_axis) {
        return Grid(domain, {cells_per_axis, cells_per_axis, cells_per_axis});
    }

    int dim() const { return dim_; }
    std::size_t size() const { return raw_of_active_.size(); }
    const Point& center(std::size_t cell) const { return centers_[cell]; }
    const std::vector<Point>& centers() const { return centers_; }
    double cell_volume() const { return cell_volume_; }
    double spacing(int axis) const { return h_[axis]; }
    double min_spacing() const {
        double m = std::numeric_limits<double>::infinity();
        for (int a = 0; a < dim_; ++a) m = std::min(m, h_[a]);
        return m;
    }
    const std::vector<Link>& links(std::size_t cell) const { return links_[cell]; }

    /// Index of the active cell holding q; points falling in a masked cell
    /// are attributed to the nearest active cell center.
    std::size_t locate(const Point& q) const {
        std::array<int, 3> idx{0, 0, 0};
        for (int a = 0; a < dim_; ++a) {
            int i = static_cast<int>(std::floor((q[a] - lo_[a]) / h_[a]));
            idx[a] = std::clamp(i, 0, n_[a] - 1);
        }
        const int active = active_of_raw_[ravel(idx)];
        if (active >= 0) return static_cast<std::size_t>(active);
        std::size_t best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < centers_.size(); ++c) {
            const double d = distance2(centers_[c], q);
            if (d < best_d) {
                best_d = d;
                best = c;
            }
        }
        return best;
    }

    /// Integral of a cell-wise density.
    double integrate(const std::vector<double>& field) const {
        double s = 0.0;
        for (double v : field) s += v;
        return s * cell_volume_;
    }

private:
    Point raw_center(int raw) const {
        auto idx = unravel(raw);
        Point c(dim_);
        for (int a = 0; a < dim_; ++a) c[a] = lo_[a] + (idx[a] + 0.5) * h_[a];
        return c;
    }
    std::array<int, 3> unravel(int raw) const {
        std::array<int, 3> idx{0, 0, 0};
        for (int a = 0; a < 3; ++a) {
            idx[a] = raw % n_[a];
            raw /= n_[a];
        }
        return idx;
    }
    int ravel(const std::array<int, 3>& idx) const {
        return idx[0] + n_[0] * (idx[1] + n_[1] * idx[2]);
    }

    int dim_;
    Point lo_;
    std::array<int, 3> n_{1, 1, 1};
    std::array<double, 3> h_{1.0, 1.0, 1.0};
    int total_ = 1;
    double cell_volume_ = 1.0;
    std::vector<int> active_of_raw_;
    std::vector<int> raw_of_active_;
    std::vector<Point> centers_;
    std::vector<std::vector<Link>> links_;
};

}  // namespace gsm2
