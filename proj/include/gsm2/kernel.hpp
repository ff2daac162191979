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

//! \file kernel.hpp
//! Radial interaction kernels. A kernel maps a separation distance to a
//! non-negative weight; it serves both as the concentration weighting of a
//! rate and as the separation profile of the pairwise rate.

#pragma once

#include <cmath>
#include <numbers>
#include <optional>
#include <variant>

#include "gsm2/errors.hpp"

namespace gsm2 {

/// Which lesion types a concentration kernel sums over.
enum class TypeFilter { x_only, y_only, both };

struct ConstantKernel {
    double value = 1.0;
};

/// weight * 1{d < epsilon}
struct BallIndicatorKernel {
    double epsilon = 1.0;
    double weight = 1.0;
};

/// weight / sqrt(2 pi eps^2) * exp(-d^2 / (2 eps^2))
struct GaussianKernel {
    double weight = 1.0;
    double epsilon = 1.0;
};

/// Sum of a short-range and a long-range Gaussian.
struct TwoGaussianKernel {
    GaussianKernel near;
    GaussianKernel far;
};

class Kernel {
public:
    using Variant = std::variant<ConstantKernel, BallIndicatorKernel, GaussianKernel, TwoGaussianKernel>;

    Kernel() : Kernel(ConstantKernel{1.0}) {}
    Kernel(Variant v, TypeFilter filter = TypeFilter::both) : shape_(v), filter_(filter) { validate(); }

    static Kernel constant(double c, TypeFilter f = TypeFilter::both) { return {ConstantKernel{c}, f}; }
    static Kernel ball(double epsilon, double weight = 1.0, TypeFilter f = TypeFilter::both) {
        return {BallIndicatorKernel{epsilon, weight}, f};
    }
    static Kernel gaussian(double weight, double epsilon, TypeFilter f = TypeFilter::both) {
        return {GaussianKernel{weight, epsilon}, f};
    }
    static Kernel two_gaussian(double w1, double e1, double w2, double e2,
                               TypeFilter f = TypeFilter::both) {
        return {TwoGaussianKernel{{w1, e1}, {w2, e2}}, f};
    }

    double operator()(double d) const {
        return std::visit([d](const auto& k) { return eval(k, d); }, shape_);
    }

    const Variant& shape() const { return shape_; }
    TypeFilter filter() const { return filter_; }
    bool includes_x() const { return filter_ != TypeFilter::y_only; }
    bool includes_y() const { return filter_ != TypeFilter::x_only; }

    bool is_constant() const { return std::holds_alternative<ConstantKernel>(shape_); }
    double constant_value() const { return std::get<ConstantKernel>(shape_).value; }

    /// Distance beyond which the kernel vanishes identically, if any.
    std::optional<double> support_radius() const {
        if (const auto* b = std::get_if<BallIndicatorKernel>(&shape_)) return b->epsilon;
        return std::nullopt;
    }

    /// sup over d of the kernel value.
    double upper_bound() const { return (*this)(0.0); }

    Kernel scaled(double factor) const {
        Kernel k = *this;
        std::visit([factor](auto& s) { scale(s, factor); }, k.shape_);
        return k;
    }

private:
    static double eval(const ConstantKernel& k, double) { return k.value; }
    static double eval(const BallIndicatorKernel& k, double d) { return d < k.epsilon ? k.weight : 0.0; }
    static double eval(const GaussianKernel& k, double d) {
        return k.weight / std::sqrt(2.0 * std::numbers::pi * k.epsilon * k.epsilon) *
               std::exp(-d * d / (2.0 * k.epsilon * k.epsilon));
    }
    static double eval(const TwoGaussianKernel& k, double d) { return eval(k.near, d) + eval(k.far, d); }

    static void scale(ConstantKernel& k, double f) { k.value *= f; }
    static void scale(BallIndicatorKernel& k, double f) { k.weight *= f; }
    static void scale(GaussianKernel& k, double f) { k.weight *= f; }
    static void scale(TwoGaussianKernel& k, double f) {
        k.near.weight *= f;
        k.far.weight *= f;
    }

    static void check(const GaussianKernel& g) {
        if (!(g.epsilon > 0.0)) throw ConfigError("kernel epsilon must be positive");
        if (!(g.weight >= 0.0)) throw ConfigError("kernel weight must be non-negative");
    }

    void validate() const {
        if (const auto* c = std::get_if<ConstantKernel>(&shape_)) {
            if (!(c->value >= 0.0) || !std::isfinite(c->value))
                throw ConfigError("constant kernel must be finite and non-negative");
        } else if (const auto* b = std::get_if<BallIndicatorKernel>(&shape_)) {
            if (!(b->epsilon > 0.0)) throw ConfigError("kernel epsilon must be positive");
            if (!(b->weight >= 0.0)) throw ConfigError("kernel weight must be non-negative");
        } else if (const auto* g = std::get_if<GaussianKernel>(&shape_)) {
            check(*g);
        } else {
            const auto& t = std::get<TwoGaussianKernel>(shape_);
            check(t.near);
            check(t.far);
        }
    }

    Variant shape_;
    TypeFilter filter_;
};

}  // namespace gsm2
