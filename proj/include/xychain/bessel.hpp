// bessel.hpp — Bessel function of the first kind, order zero
//
// |x| <= kBesselSeam: ascending power series summed in long double.
// |x|  > kBesselSeam: Hankel asymptotic expansion truncated at its smallest term.
// The seam sits where the truncated asymptotic error (~exp(-2x)) and the
// series cancellation error are both below 1e-13.

#pragma once

#include <cmath>
#include <numbers>

namespace xychain {

inline constexpr double kBesselSeam = 17.0;

namespace detail {

inline double bessel_j0_series(double x) {
    const long double q = static_cast<long double>(x) * static_cast<long double>(x) / 4.0L;
    long double term = 1.0L;
    long double sum = 1.0L;
    for (int k = 1; k < 200; ++k) {
        term *= -q / (static_cast<long double>(k) * static_cast<long double>(k));
        sum += term;
        if (std::fabs(term) < 1e-24L) break;
    }
    return static_cast<double>(sum);
}

inline double bessel_j0_asymptotic(double x) {
    // Magnitudes m_k = prod_{j<=k} (2j-1)^2 / (k! (8x)^k); P takes even k with
    // alternating sign, Q takes odd k starting negative.
    double P = 1.0;
    double Q = 0.0;
    double m = 1.0;
    double prev = 1.0;
    for (int k = 1; k < 400; ++k) {
        const double f = static_cast<double>(2 * k - 1);
        m *= f * f / (8.0 * k * x);
        if (m > prev) break;  // asymptotic series started diverging
        if (k % 2 == 0) {
            P += ((k / 2) % 2 == 0 ? m : -m);
        } else {
            Q += (((k - 1) / 2) % 2 == 0 ? -m : m);
        }
        if (m < 1e-18) break;
        prev = m;
    }
    // cos(x - pi/4) and sin(x - pi/4) without forming x - pi/4.
    const double c = std::cos(x);
    const double s = std::sin(x);
    const double cos_chi = (c + s) * std::numbers::sqrt2 / 2.0;
    const double sin_chi = (s - c) * std::numbers::sqrt2 / 2.0;
    return std::sqrt(2.0 / (std::numbers::pi * x)) * (P * cos_chi - Q * sin_chi);
}

}  // namespace detail

// J_0(x); even in x.
inline double bessel_j0(double x) {
    const double ax = std::fabs(x);
    if (!std::isfinite(ax)) return std::isinf(ax) ? 0.0 : ax;
    return ax <= kBesselSeam ? detail::bessel_j0_series(ax) : detail::bessel_j0_asymptotic(ax);
}

}  // namespace xychain
