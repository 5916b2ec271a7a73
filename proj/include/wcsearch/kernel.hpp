#pragma once

#include <cmath>

namespace wcsearch {

// Stationary kernels written as functions of the squared scaled distance
// r2 = sum_i (x_i - y_i)^2 / l_i^2, for unit signal variance.
//
//   value(r2)  = k(r)
//   radial(r2) = k'(r) / r, finite at r = 0
//
// With these the input gradient is dk/dx_i = radial * (x_i - y_i) / l_i^2 and
// the lengthscale gradient is dk/dlog(l_i) = -radial * (x_i - y_i)^2 / l_i^2.

struct Matern52 {
    static constexpr const char* name = "matern52";

    static double value(double r2) noexcept {
        const double r = std::sqrt(r2);
        const double s = std::sqrt(5.0) * r;
        return (1.0 + s + 5.0 * r2 / 3.0) * std::exp(-s);
    }

    static double radial(double r2) noexcept {
        const double s = std::sqrt(5.0 * r2);
        return -(5.0 / 3.0) * (1.0 + s) * std::exp(-s);
    }
};

struct SquaredExp {
    static constexpr const char* name = "squared_exp";

    static double value(double r2) noexcept { return std::exp(-0.5 * r2); }
    static double radial(double r2) noexcept { return -std::exp(-0.5 * r2); }
};

enum class KernelKind { Matern52, SquaredExp };

}  // namespace wcsearch
