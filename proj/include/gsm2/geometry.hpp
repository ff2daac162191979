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

//! \file geometry.hpp
//! Points and the bounded domain Q (disk/ball or axis-aligned box in 2D/3D).
//! Lengths are micrometres.

#pragma once

#include <array>
#include <cmath>
#include <initializer_list>
#include <numbers>
#include <sstream>
#include <string>
#include <utility>
#include <variant>

#include "gsm2/errors.hpp"
#include "gsm2/random.hpp"

namespace gsm2 {

/// A point of R^d, d in {1, 2, 3}. Unused trailing coordinates stay zero.
class Point {
public:
    static constexpr int kMaxDim = 3;

    Point() = default;
    explicit Point(int dim) : dim_(check_dim(dim)) {}
    Point(double x, double y) : dim_(2), c_{x, y, 0.0} {}
    Point(double x, double y, double z) : dim_(3), c_{x, y, z} {}

    static Point from(std::initializer_list<double> coords) {
        Point p(static_cast<int>(coords.size()));
        int i = 0;
        for (double v : coords) p.c_[i++] = v;
        return p;
    }

    int dim() const { return dim_; }
    double operator[](int i) const { return c_[i]; }
    double& operator[](int i) { return c_[i]; }

    Point& operator+=(const Point& o) {
        for (int i = 0; i < dim_; ++i) c_[i] += o.c_[i];
        return *this;
    }
    Point& operator-=(const Point& o) {
        for (int i = 0; i < dim_; ++i) c_[i] -= o.c_[i];
        return *this;
    }
    Point& operator*=(double s) {
        for (int i = 0; i < dim_; ++i) c_[i] *= s;
        return *this;
    }
    friend Point operator+(Point a, const Point& b) { return a += b; }
    friend Point operator-(Point a, const Point& b) { return a -= b; }
    friend Point operator*(Point a, double s) { return a *= s; }
    friend Point operator*(double s, Point a) { return a *= s; }
    friend bool operator==(const Point& a, const Point& b) {
        if (a.dim_ != b.dim_) return false;
        for (int i = 0; i < a.dim_; ++i)
            if (a.c_[i] != b.c_[i]) return false;
        return true;
    }

    double norm2() const {
        double s = 0.0;
        for (int i = 0; i < dim_; ++i) s += c_[i] * c_[i];
        return s;
    }
    double norm() const { return std::sqrt(norm2()); }

    std::string str() const {
        std::ostringstream os;
        os.precision(17);
        os << '(';
        for (int i = 0; i < dim_; ++i) os << (i ? ", " : "") << c_[i];
        os << ')';
        return os.str();
    }

private:
    static int check_dim(int d) {
        if (d < 1 || d > kMaxDim) throw InputError("point dimension must be 1, 2 or 3");
        return d;
    }

    int dim_ = 2;
    std::array<double, kMaxDim> c_{};
};

inline double distance2(const Point& a, const Point& b) {
    double s = 0.0;
    for (int i = 0; i < a.dim(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

inline double distance(const Point& a, const Point& b) { return std::sqrt(distance2(a, b)); }

/// Point on the segment: alpha * a + (1 - alpha) * b.
inline Point lerp(const Point& a, const Point& b, double alpha) {
    Point p(a.dim());
    for (int i = 0; i < a.dim(); ++i) p[i] = alpha * a[i] + (1.0 - alpha) * b[i];
    return p;
}

struct Disk {
    Point center;
    double radius = 1.0;
};

struct Box {
    Point lo;
    Point hi;
};

/// Closed bounded domain with reflecting boundary.
class Domain {
public:
    static constexpr int kMaxReflections = 64;

    /// The unit square.
    Domain() : shape_(Box{Point(0.0, 0.0), Point(1.0, 1.0)}) {}

    static Domain disk(const Point& center, double radius) {
        if (!(radius > 0.0) || !std::isfinite(radius))
            throw ConfigError("disk radius must be positive");
        check_domain_dim(center.dim());
        return Domain(Disk{center, radius});
    }

    static Domain box(const Point& lo, const Point& hi) {
        if (lo.dim() != hi.dim()) throw ConfigError("box corners differ in dimension");
        check_domain_dim(lo.dim());
        for (int i = 0; i < lo.dim(); ++i)
            if (!(hi[i] > lo[i])) throw ConfigError("box requires hi > lo on every axis");
        return Domain(Box{lo, hi});
    }

    int dim() const {
        return std::visit([](const auto& s) { return dim_of(s); }, shape_);
    }

    bool is_disk() const { return std::holds_alternative<Disk>(shape_); }
    const Disk& as_disk() const { return std::get<Disk>(shape_); }
    const Box& as_box() const { return std::get<Box>(shape_); }

    bool contains(const Point& q) const {
        check_point(q);
        if (const auto* d = std::get_if<Disk>(&shape_))
            return distance2(q, d->center) <= d->radius * d->radius;
        const auto& b = std::get<Box>(shape_);
        for (int i = 0; i < q.dim(); ++i)
            if (q[i] < b.lo[i] || q[i] > b.hi[i]) return false;
        return true;
    }

    /// Folds a raw proposal back into the closed domain by repeated specular
    /// reflection across the boundary. Points already inside are returned as is.
    Point reflect(const Point& proposal) const {
        check_point(proposal);
        if (const auto* d = std::get_if<Disk>(&shape_)) return reflect_disk(*d, proposal);
        return reflect_box(std::get<Box>(shape_), proposal);
    }

    Point sample_uniform(RngStream& rng) const {
        if (const auto* d = std::get_if<Disk>(&shape_)) {
            const double r2 = d->radius * d->radius;
            for (;;) {
                Point q(d->center.dim());
                double s = 0.0;
                for (int i = 0; i < q.dim(); ++i) {
                    q[i] = rng.uniform(-d->radius, d->radius);
                    s += q[i] * q[i];
                }
                if (s <= r2) return q + d->center;
            }
        }
        const auto& b = std::get<Box>(shape_);
        Point q(b.lo.dim());
        for (int i = 0; i < q.dim(); ++i) q[i] = rng.uniform(b.lo[i], b.hi[i]);
        return q;
    }

    double volume() const {
        if (const auto* d = std::get_if<Disk>(&shape_)) {
            const double r = d->radius;
            return d->center.dim() == 2 ? std::numbers::pi * r * r
                                        : 4.0 / 3.0 * std::numbers::pi * r * r * r;
        }
        const auto& b = std::get<Box>(shape_);
        double v = 1.0;
        for (int i = 0; i < b.lo.dim(); ++i) v *= b.hi[i] - b.lo[i];
        return v;
    }

    std::pair<Point, Point> bounding_box() const {
        if (const auto* d = std::get_if<Disk>(&shape_)) {
            Point lo = d->center, hi = d->center;
            for (int i = 0; i < lo.dim(); ++i) {
                lo[i] -= d->radius;
                hi[i] += d->radius;
            }
            return {lo, hi};
        }
        const auto& b = std::get<Box>(shape_);
        return {b.lo, b.hi};
    }

    void check_point(const Point& q) const {
        if (q.dim() != dim())
            throw InputError("point " + q.str() + " has dimension " + std::to_string(q.dim()) +
                             ", domain has dimension " + std::to_string(dim()));
    }

private:
    explicit Domain(Disk d) : shape_(std::move(d)) {}
    explicit Domain(Box b) : shape_(std::move(b)) {}

    static int dim_of(const Disk& d) { return d.center.dim(); }
    static int dim_of(const Box& b) { return b.lo.dim(); }

    static void check_domain_dim(int d) {
        if (d != 2 && d != 3) throw ConfigError("domain dimension must be 2 or 3");
    }

    // Radial reflection through the nearest boundary point: |q'| = 2R - |q|.
    static Point reflect_disk(const Disk& d, const Point& proposal) {
        Point rel = proposal - d.center;
        double r = rel.norm();
        for (int it = 0; it < kMaxReflections; ++it) {
            if (r <= d.radius) return rel + d.center;
            const double folded = 2.0 * d.radius - r;
            rel *= folded / r;
            r = std::fabs(folded);
        }
        throw NumericalError("reflection did not converge for point " + proposal.str());
    }

    static Point reflect_box(const Box& b, const Point& proposal) {
        Point q = proposal;
        for (int i = 0; i < q.dim(); ++i) {
            int it = 0;
            while (q[i] < b.lo[i] || q[i] > b.hi[i]) {
                if (++it > kMaxReflections)
                    throw NumericalError("reflection did not converge for point " +
                                         proposal.str());
                q[i] = q[i] > b.hi[i] ? 2.0 * b.hi[i] - q[i] : 2.0 * b.lo[i] - q[i];
            }
        }
        return q;
    }

    std::variant<Disk, Box> shape_;
};

}  // namespace gsm2
