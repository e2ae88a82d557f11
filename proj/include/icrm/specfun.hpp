#pragma once

// Special functions: log-gamma, digamma, trigamma, tetragamma, sigmoid,
// softplus. The polygamma family uses the recurrence shift to argument >= 6
// followed by the Bernoulli-number asymptotic series, which keeps uniform
// accuracy on (0, inf) without per-function rational fits.

#include <cmath>
#include <stdexcept>
#include <string>

namespace icrm {

inline constexpr double kEulerGamma = 0.57721566490153286060651209008240;

namespace detail {

inline void require_positive(double x, const char* fn) {
    if (!(x > 0.0) || !std::isfinite(x)) {
        throw std::domain_error(std::string(fn) + ": argument must be positive and finite, got " +
                                std::to_string(x));
    }
}

inline constexpr double kShiftThreshold = 6.0;
inline constexpr int kMaxShift = 8;  // enough for any x > 0 below the threshold

// psi(y) for y >= 6:  ln y - 1/(2y) - sum_k B_{2k} / (2k y^{2k})
inline double digamma_asymptotic(double y) {
    const double w = 1.0 / (y * y);
    // B_{2k}/(2k) for k = 1..9
    double s = 1.0 / 12.0 +
               w * (-1.0 / 120.0 +
                    w * (1.0 / 252.0 +
                         w * (-1.0 / 240.0 +
                              w * (1.0 / 132.0 +
                                   w * (-691.0 / 32760.0 +
                                        w * (1.0 / 12.0 +
                                             w * (-3617.0 / 8160.0 +
                                                  w * (43867.0 / 14364.0))))))));
    return std::log(y) - 0.5 / y - w * s;
}

// psi_1(y) for y >= 6:  1/y + 1/(2y^2) + sum_k B_{2k} y^{-2k-1}
inline double trigamma_asymptotic(double y) {
    const double w = 1.0 / (y * y);
    double s = 1.0 / 6.0 +
               w * (-1.0 / 30.0 +
                    w * (1.0 / 42.0 +
                         w * (-1.0 / 30.0 +
                              w * (5.0 / 66.0 +
                                   w * (-691.0 / 2730.0 +
                                        w * (7.0 / 6.0 +
                                             w * (-3617.0 / 510.0 +
                                                  w * (43867.0 / 798.0))))))));
    return 1.0 / y + 0.5 * w + w * s / y;
}

// psi_2(y) for y >= 6:  -1/y^2 - 1/y^3 - sum_k (2k+1) B_{2k} y^{-2k-2}
inline double tetragamma_asymptotic(double y) {
    const double w = 1.0 / (y * y);
    double s = 0.5 +
               w * (-1.0 / 6.0 +
                    w * (1.0 / 6.0 +
                         w * (-3.0 / 10.0 +
                              w * (5.0 / 6.0 +
                                   w * (-691.0 / 210.0 +
                                        w * (35.0 / 2.0 +
                                             w * (-3617.0 / 30.0 +
                                                  w * (833473.0 / 798.0))))))));
    return -w - w / y - w * w * s;
}

}  // namespace detail

inline double log_gamma(double x) {
    detail::require_positive(x, "log_gamma");
    return std::lgamma(x);
}

inline double digamma(double x) {
    detail::require_positive(x, "digamma");
    // Collect the shift iterates so psi(x) and psi(x+1) share the exact same
    // anchor value and recurrence terms; the recurrence then cancels in
    // floating point instead of merely approximately.
    double iter[detail::kMaxShift];
    int n = 0;
    double y = x;
    while (y < detail::kShiftThreshold) {
        iter[n++] = y;
        y += 1.0;
    }
    double r = detail::digamma_asymptotic(y);
    for (int j = n - 1; j >= 0; --j) r -= 1.0 / iter[j];
    return r;
}

inline double trigamma(double x) {
    detail::require_positive(x, "trigamma");
    double iter[detail::kMaxShift];
    int n = 0;
    double y = x;
    while (y < detail::kShiftThreshold) {
        iter[n++] = y;
        y += 1.0;
    }
    double r = detail::trigamma_asymptotic(y);
    for (int j = n - 1; j >= 0; --j) r += 1.0 / (iter[j] * iter[j]);
    return r;
}

inline double tetragamma(double x) {
    detail::require_positive(x, "tetragamma");
    double iter[detail::kMaxShift];
    int n = 0;
    double y = x;
    while (y < detail::kShiftThreshold) {
        iter[n++] = y;
        y += 1.0;
    }
    double r = detail::tetragamma_asymptotic(y);
    for (int j = n - 1; j >= 0; --j) r -= 2.0 / (iter[j] * iter[j] * iter[j]);
    return r;
}

inline double sigmoid(double x) {
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

inline double softplus(double x) {
    return std::fmax(x, 0.0) + std::log1p(std::exp(-std::fabs(x)));
}

// log(p/(1-p)); exact inverse of sigmoid for the edge-behavior checks.
inline double logit(double p) {
    if (!(p > 0.0) || !(p < 1.0)) {
        throw std::domain_error("logit: argument must lie in (0,1)");
    }
    return std::log(p) - std::log1p(-p);
}

}  // namespace icrm
