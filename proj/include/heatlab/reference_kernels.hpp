#pragma once

#include <cmath>
#include <numbers>
#include <span>

#include "heatlab/error.hpp"
#include "heatlab/point.hpp"

namespace heatlab {

/// Transition density of standard Brownian motion (generator Delta/2):
/// (2 pi t)^{-d/2} exp(-|x-y|^2 / 2t).
inline double log_gaussian_q(double t, std::span<const double> x, std::span<const double> y) {
    if (!(t > 0.0)) fail(ErrorKind::invalid_parameter, "gaussian_q needs t > 0");
    const int d = dimension_of(x, y);
    const double r = distance(x, y);
    return -0.5 * d * std::log(2.0 * std::numbers::pi * t) - r * r / (2.0 * t);
}

inline double gaussian_q(double t, std::span<const double> x, std::span<const double> y) {
    return std::exp(log_gaussian_q(t, x, y));
}

inline double gaussian_q(double t, double x, double y) {
    if (!(t > 0.0)) fail(ErrorKind::invalid_parameter, "gaussian_q needs t > 0");
    const double r = x - y;
    return std::exp(-r * r / (2.0 * t)) / std::sqrt(2.0 * std::numbers::pi * t);
}

/// Kernel of -1/2 d^2/dx^2 + omega^2 x^2 / 2 (Mehler's formula), evaluated
/// through coth/csch so large omega t does not overflow.
inline double mehler_kernel(double t, double x, double y, double omega) {
    if (!(t > 0.0) || !(omega > 0.0)) fail(ErrorKind::invalid_parameter, "mehler_kernel needs t, omega > 0");
    const double a = omega * t;
    const double log_sinh = a > 20.0 ? a - std::numbers::ln2 + std::log1p(-std::exp(-2.0 * a))
                                     : std::log(std::sinh(a));
    const double coth = 1.0 / std::tanh(a);
    const double csch = a > 700.0 ? 0.0 : 1.0 / std::sinh(a);
    const double expo = -0.5 * omega * ((x * x + y * y) * coth - 2.0 * x * y * csch);
    return std::exp(0.5 * std::log(omega / (2.0 * std::numbers::pi)) - 0.5 * log_sinh + expo);
}

/// Dirichlet problem for Delta/2 on (-L, L).
struct IntervalDirichletSpec {
    double half_width = 1.0;
    int n_terms = 200;
};

struct SeriesValue {
    double value = 0.0;
    bool clamped = false;     // negative truncation residue set to 0
    bool image_series = false;
    int terms = 0;
};

namespace detail {

inline void check_interval(const IntervalDirichletSpec& s, double t, double x) {
    if (!(s.half_width > 0.0)) fail(ErrorKind::invalid_parameter, "interval half_width must be positive");
    if (s.n_terms < 1) fail(ErrorKind::invalid_parameter, "n_terms must be >= 1");
    if (!(t > 0.0)) fail(ErrorKind::invalid_parameter, "t must be positive");
    if (!(std::abs(x) < s.half_width)) fail(ErrorKind::domain, "point outside the open interval");
}

/// The reflection series converges in a handful of terms for t <~ L^2,
/// the eigenseries for t >~ L^2.
inline bool use_images(const IntervalDirichletSpec& s, double t) {
    return t <= s.half_width * s.half_width;
}

inline double phi(const IntervalDirichletSpec& s, int k, double x) {
    const double L = s.half_width;
    return std::sin(k * std::numbers::pi * (x + L) / (2.0 * L)) / std::sqrt(L);
}

inline double lambda(const IntervalDirichletSpec& s, int k) {
    const double w = k * std::numbers::pi / (2.0 * s.half_width);
    return w * w;
}

inline SeriesValue finish(double sum, bool images, int terms) {
    SeriesValue v;
    v.image_series = images;
    v.terms = terms;
    if (sum < 0.0) {
        v.clamped = true;
        sum = 0.0;
    }
    v.value = sum;
    return v;
}

/// Sums f(k) for k = 1.. until the last term is below 1e-14 of the sum,
/// starting from at least n_terms.
template <class F>
double eigen_sum(const IntervalDirichletSpec& s, F&& f, int& terms) {
    double sum = 0.0;
    int k = 1;
    const int hard_cap = 1000000;
    for (;; ++k) {
        const double term = f(k);
        sum += term;
        if (k >= s.n_terms && std::abs(term) < 1e-14 * std::abs(sum)) break;
        if (k >= s.n_terms && term == 0.0) break;
        if (k >= hard_cap) break;
    }
    terms = k;
    return sum;
}

inline double std_normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

}  // namespace detail

/// Dirichlet heat kernel q_D(t,x,y) on (-L, L).
inline SeriesValue interval_dirichlet_q(const IntervalDirichletSpec& s, double t, double x, double y) {
    detail::check_interval(s, t, x);
    detail::check_interval(s, t, y);
    const double L = s.half_width;
    if (detail::use_images(s, t)) {
        // On (0, W): sum_n q(x'-y'+2nW) - q(x'+y'+2nW).
        const double W = 2.0 * L;
        const double xp = x + L, yp = y + L;
        double sum = 0.0;
        int terms = 0;
        for (int n = 0;; ++n) {
            double term = 0.0;
            for (int sgn : {1, -1}) {
                if (n == 0 && sgn == -1) continue;
                const int m = sgn * n;
                term += gaussian_q(t, xp - yp + 2.0 * m * W, 0.0) - gaussian_q(t, xp + yp + 2.0 * m * W, 0.0);
            }
            sum += term;
            ++terms;
            if (n > 1 && std::abs(term) <= 1e-17 * std::abs(sum)) break;
            if (n > 50) break;
        }
        return detail::finish(sum, true, terms);
    }
    int terms = 0;
    const double sum = detail::eigen_sum(
        s,
        [&](int k) { return std::exp(-0.5 * detail::lambda(s, k) * t) * detail::phi(s, k, x) * detail::phi(s, k, y); },
        terms);
    return detail::finish(sum, false, terms);
}

enum class Endpoint { left, right };

/// Density in t of exiting (-L, L) at the given endpoint, started from x:
/// (1/2) |d/dn q_D(t, x, .)| at the endpoint.
inline SeriesValue interval_exit_density(const IntervalDirichletSpec& s, double t, double x, Endpoint end) {
    detail::check_interval(s, t, x);
    const double L = s.half_width;
    // Left exits from x are right exits from -x.
    const double xr = end == Endpoint::right ? x : -x;
    if (detail::use_images(s, t)) {
        double sum = 0.0;
        int terms = 0;
        for (int n = 0;; ++n) {
            double term = 0.0;
            for (int sgn : {1, -1}) {
                if (n == 0 && sgn == -1) continue;
                const double u = xr - L + 4.0 * sgn * n * L;
                term += -(u / t) * gaussian_q(t, u, 0.0);
            }
            sum += term;
            ++terms;
            if (n > 1 && std::abs(term) <= 1e-17 * std::abs(sum)) break;
            if (n > 50) break;
        }
        return detail::finish(sum, true, terms);
    }
    int terms = 0;
    const double sum = detail::eigen_sum(
        s,
        [&](int k) {
            const double dphi = (k * std::numbers::pi / (2.0 * L)) / std::sqrt(L) * (k % 2 == 0 ? 1.0 : -1.0);
            return -0.5 * std::exp(-0.5 * detail::lambda(s, k) * t) * detail::phi(s, k, xr) * dphi;
        },
        terms);
    return detail::finish(sum, false, terms);
}

/// P_x(exit time <= t) for (-L, L).
inline double interval_exit_cdf(const IntervalDirichletSpec& s, double t, double x) {
    detail::check_interval(s, t, x);
    const double L = s.half_width;
    if (detail::use_images(s, t)) {
        // 1 - survival, survival = integral of the image series over (0, W).
        const double W = 2.0 * L;
        const double xp = x + L;
        const double st = std::sqrt(t);
        double surv = 0.0;
        for (int n = -8; n <= 8; ++n) {
            const double b = 2.0 * n * W;
            surv += detail::std_normal_cdf((xp + b) / st) - detail::std_normal_cdf((xp - W + b) / st);
            surv -= detail::std_normal_cdf((xp + W + b) / st) - detail::std_normal_cdf((xp + b) / st);
        }
        // For short times the exit probability is dominated by the two
        // nearest walls; use their tails directly to keep relative accuracy.
        const double near = detail::std_normal_cdf(-(L - x) / st) + detail::std_normal_cdf(-(L + x) / st);
        if (near < 1e-6) return 2.0 * near;
        return std::clamp(1.0 - surv, 0.0, 1.0);
    }
    int terms = 0;
    const double surv = detail::eigen_sum(
        s,
        [&](int k) {
            if (k % 2 == 0) return 0.0 * k;
            return std::exp(-0.5 * detail::lambda(s, k) * t) * detail::phi(s, k, x) * 4.0 * std::sqrt(L) /
                   (k * std::numbers::pi);
        },
        terms);
    return std::clamp(1.0 - surv, 0.0, 1.0);
}

/// Green function of Delta/2 on R^d, d >= 3:
/// Gamma(d/2 - 1) / (2 pi^{d/2}) |x-y|^{-(d-2)}.
inline double free_green(std::span<const double> x, std::span<const double> y) {
    const int d = dimension_of(x, y);
    if (d <= 2) fail(ErrorKind::unsupported_dimension, "free Green function diverges for d <= 2");
    const double r = distance(x, y);
    if (!(r > 0.0)) fail(ErrorKind::singular_point, "free Green function is singular at x = y");
    return std::tgamma(0.5 * d - 1.0) / (2.0 * std::pow(std::numbers::pi, 0.5 * d)) * std::pow(r, -(d - 2.0));
}

}  // namespace heatlab
