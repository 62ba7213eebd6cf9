#pragma once

#include <algorithm>
#include <cmath>
#include <span>

#include "heatlab/error.hpp"
#include "heatlab/point.hpp"
#include "heatlab/potential.hpp"

namespace heatlab {

/// Constants of a two-sided comparison c1 f(c2 .) <= value <= c3 f(c4 .).
/// c2 and c4 multiply the whole exponent of the shape.
struct ComparabilityConstants {
    double c1 = 1.0;
    double c2 = 1.0;
    double c3 = 1.0;
    double c4 = 1.0;
};

enum class ShapeId { thm1_small, thm1_large, ex11_near, ex11_far, green_gamma, custom };

inline const char* to_string(ShapeId s) {
    switch (s) {
        case ShapeId::thm1_small: return "thm1_small";
        case ShapeId::thm1_large: return "thm1_large";
        case ShapeId::ex11_near: return "ex11_near";
        case ShapeId::ex11_far: return "ex11_far";
        case ShapeId::green_gamma: return "green_gamma";
        case ShapeId::custom: return "custom";
    }
    return "?";
}

/// Values below exp(kLogUnderflow) are reported as 0 with the underflow flag.
inline constexpr double kLogUnderflow = -745.0;

struct EnvelopePair {
    double lower = 0.0;
    double upper = 0.0;
    double log_lower = 0.0;
    double log_upper = 0.0;
    ShapeId shape_id = ShapeId::custom;
    Regime regime = Regime::small_time;
    ComparabilityConstants constants;
    bool underflow = false;
};

namespace detail {

inline double exp_floor(double log_value) {
    return log_value < kLogUnderflow ? 0.0 : std::exp(log_value);
}

inline EnvelopePair make_pair(double log_lower, double log_upper, ShapeId id, Regime regime,
                              const ComparabilityConstants& c) {
    if (c.c1 <= c.c3 && c.c2 >= c.c4 && log_lower > log_upper + 1e-9 * std::abs(log_upper)) {
        fail(ErrorKind::invalid_parameter, "envelope lower exceeds upper for ordered constants");
    }
    EnvelopePair p;
    p.log_lower = log_lower;
    p.log_upper = log_upper;
    p.lower = exp_floor(log_lower);
    p.upper = exp_floor(log_upper);
    p.underflow = log_lower < kLogUnderflow || log_upper < kLogUnderflow;
    p.shape_id = id;
    p.regime = regime;
    p.constants = c;
    return p;
}

inline void check_positive(double v, const char* what) {
    if (!(v > 0.0)) fail(ErrorKind::invalid_parameter, std::string(what) + " must be positive");
}

}  // namespace detail

/// log of t^{-d/2} exp(-scale [|x-y|^2/t + t min(g(|x|),g(|y|)) + |x-y| sqrt(max(g(|x|),g(|y|)))]).
inline double log_shape_small_time(const ProfileG& profile, double t, std::span<const double> x,
                                   std::span<const double> y, double scale) {
    detail::check_positive(t, "t");
    const int d = dimension_of(x, y);
    const double r = distance(x, y);
    const double lgx = profile.log_g(norm(x));
    const double lgy = profile.log_g(norm(y));
    const double gmin = std::exp(std::min(lgx, lgy));
    const double sqrt_gmax = std::exp(0.5 * std::max(lgx, lgy));
    const double bracket = r * r / t + t * gmin + r * sqrt_gmax;
    return -0.5 * d * std::log(t) - scale * bracket;
}

inline double shape_small_time(const ProfileG& profile, double t, std::span<const double> x,
                               std::span<const double> y, double scale) {
    return detail::exp_floor(log_shape_small_time(profile, t, x, y, scale));
}

/// log psi(t,x) = -scale [(1+|x|) sqrt(g(|x|)) + (1+|x|)^2/t].
inline double log_psi(const ProfileG& profile, double t, std::span<const double> x, double scale) {
    detail::check_positive(t, "t");
    const double a = 1.0 + norm(x);
    return -scale * (a * std::exp(0.5 * profile.log_g(a - 1.0)) + a * a / t);
}

inline double psi(const ProfileG& profile, double t, std::span<const double> x, double scale) {
    return detail::exp_floor(log_psi(profile, t, x, scale));
}

inline double log_shape_large_time(const ProfileG& profile, double t, std::span<const double> x,
                                   std::span<const double> y, double scale) {
    dimension_of(x, y);
    return -scale * t + log_psi(profile, t, x, scale) + log_psi(profile, t, y, scale);
}

inline double shape_large_time(const ProfileG& profile, double t, std::span<const double> x,
                               std::span<const double> y, double scale) {
    return detail::exp_floor(log_shape_large_time(profile, t, x, y, scale));
}

/// Kernel envelope: the small-time form when t <= c0_regime t0(|x| ^ |y|),
/// the e^{-t} psi psi form otherwise.
inline EnvelopePair envelope_thm1(const ProfileG& profile, const ComparabilityConstants& c, double c0_regime,
                                  double t, std::span<const double> x, std::span<const double> y) {
    const Regime reg = regime(profile, c0_regime, t, x, y);
    if (reg == Regime::small_time) {
        return detail::make_pair(std::log(c.c1) + log_shape_small_time(profile, t, x, y, c.c2),
                                 std::log(c.c3) + log_shape_small_time(profile, t, x, y, c.c4),
                                 ShapeId::thm1_small, reg, c);
    }
    return detail::make_pair(std::log(c.c1) + log_shape_large_time(profile, t, x, y, c.c2),
                             std::log(c.c3) + log_shape_large_time(profile, t, x, y, c.c4),
                             ShapeId::thm1_large, reg, c);
}

/// Case selection for the |x|^alpha example, after ordering |x| <= |y|.
struct Ex11Case {
    bool near = true;
    bool large_branch = false;
    double threshold = 1.0;
};

inline Ex11Case ex11_case(double alpha, double t, std::span<const double> x, std::span<const double> y) {
    detail::check_positive(alpha, "alpha");
    detail::check_positive(t, "t");
    double nx = norm(x), ny = norm(y);
    if (nx > ny) std::swap(nx, ny);
    const double r = distance(x, y);
    Ex11Case c;
    c.near = r <= ny / 2.0 || ny <= 2.0;
    const double e = 1.0 - alpha / 2.0;
    c.threshold = std::max(std::pow(1.0 + nx, e), std::pow(1.0 + ny, e));
    c.large_branch = t > c.threshold;
    return c;
}

/// log of the scale-applied |x|^alpha example envelope (constants excluded).
inline double log_shape_ex11(double alpha, double t, std::span<const double> x, std::span<const double> y,
                             double scale) {
    const Ex11Case c = ex11_case(alpha, t, x, y);
    const int d = dimension_of(x, y);
    const double ny = std::max(norm(x), norm(y));
    const double r = distance(x, y);
    const double ground = std::pow(1.0 + ny, 1.0 + alpha / 2.0);
    if (c.large_branch) return -scale * (t + ground);
    if (c.near) return -0.5 * d * std::log(t) - scale * (r * r / t + t * std::pow(1.0 + ny, alpha));
    return -0.5 * d * std::log(t) - scale * (r * r / t + ground);
}

inline EnvelopePair envelope_ex11(double alpha, const ComparabilityConstants& c, double t,
                                  std::span<const double> x, std::span<const double> y) {
    const Ex11Case cs = ex11_case(alpha, t, x, y);
    return detail::make_pair(std::log(c.c1) + log_shape_ex11(alpha, t, x, y, c.c2),
                             std::log(c.c3) + log_shape_ex11(alpha, t, x, y, c.c4),
                             cs.near ? ShapeId::ex11_near : ShapeId::ex11_far,
                             cs.large_branch ? Regime::large_time : Regime::small_time, c);
}

/// log Gamma(x,y) for the Green function comparison. Only the exponent is
/// scaled; the d=2 log factor and the d=1 reciprocal are not.
inline double log_gamma_green(const ProfileG& profile, int d, std::span<const double> x,
                              std::span<const double> y, double scale) {
    if (d < 1) fail(ErrorKind::invalid_parameter, "dimension must be >= 1");
    const double dist = distance(x, y);
    if (!(dist > 0.0)) fail(ErrorKind::singular_point, "Green envelope is singular at x = y");
    const double sqrt_gmax = std::exp(0.5 * std::max(profile.log_g(norm(x)), profile.log_g(norm(y))));
    const double big_r = dist * sqrt_gmax;
    double out = -scale * big_r;
    if (d == 2) out += std::log(std::max(std::log(1.0 / big_r), 1.0));
    if (d == 1) out -= std::log(big_r);
    return out;
}

inline double gamma_green(const ProfileG& profile, int d, std::span<const double> x, std::span<const double> y,
                          double scale) {
    return detail::exp_floor(log_gamma_green(profile, d, x, y, scale));
}

/// log of |x-y|^{-(d-2)} Gamma(x,y).
inline double log_shape_green(const ProfileG& profile, int d, std::span<const double> x,
                              std::span<const double> y, double scale) {
    const double lg = log_gamma_green(profile, d, x, y, scale);
    return -(d - 2) * std::log(distance(x, y)) + lg;
}

inline EnvelopePair envelope_green(const ProfileG& profile, int d, const ComparabilityConstants& c,
                                   std::span<const double> x, std::span<const double> y) {
    return detail::make_pair(std::log(c.c1) + log_shape_green(profile, d, x, y, c.c2),
                             std::log(c.c3) + log_shape_green(profile, d, x, y, c.c4), ShapeId::green_gamma,
                             Regime::large_time, c);
}

}  // namespace heatlab
