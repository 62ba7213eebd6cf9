#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "heatlab/error.hpp"
#include "heatlab/point.hpp"
#include "heatlab/rng.hpp"

namespace heatlab {

enum class ProfileKind { power, exponential, tabulated };

struct Knot {
    double r;
    double g;
};

/// Radial profile g of a confining potential: nondecreasing, g >= 1,
/// g(2r) <= c0 g(r).
///
/// power:       g(r) = (1+r)^alpha, c0 = 2^alpha
/// exponential: g(r) = exp(rate r); no finite doubling constant
/// tabulated:   piecewise linear in (log(1+r), log g) through the knots,
///              extended by the end slopes
class ProfileG {
public:
    static ProfileG power(double alpha) {
        if (!(alpha > 0.0)) fail(ErrorKind::invalid_parameter, "power profile needs alpha > 0");
        ProfileG p;
        p.kind_ = ProfileKind::power;
        p.param_ = alpha;
        p.doubling_c0_ = std::pow(2.0, alpha);
        return p;
    }

    static ProfileG exponential(double rate) {
        if (!(rate > 0.0)) fail(ErrorKind::invalid_parameter, "exponential profile needs rate > 0");
        ProfileG p;
        p.kind_ = ProfileKind::exponential;
        p.param_ = rate;
        p.doubling_c0_ = std::numeric_limits<double>::infinity();
        return p;
    }

    /// Knots must be sorted by r with r >= 0. An empty list is accepted here
    /// and rejected on evaluation.
    static ProfileG tabulated(std::vector<Knot> knots) {
        ProfileG p;
        p.kind_ = ProfileKind::tabulated;
        for (std::size_t i = 0; i < knots.size(); ++i) {
            if (!(knots[i].r >= 0.0) || !(knots[i].g > 0.0)) {
                fail(ErrorKind::invalid_profile, "tabulated knots need r >= 0 and g > 0");
            }
            if (i > 0 && !(knots[i].r > knots[i - 1].r)) {
                fail(ErrorKind::invalid_profile, "tabulated knots must be strictly increasing in r");
            }
        }
        p.knots_ = std::move(knots);
        p.doubling_c0_ = 1.0;
        if (!p.knots_.empty()) {
            for (const auto& k : p.knots_) {
                p.doubling_c0_ = std::max(p.doubling_c0_, p.g(2.0 * k.r) / p.g(k.r));
            }
        }
        return p;
    }

    ProfileKind kind() const noexcept { return kind_; }
    double alpha() const noexcept { return param_; }
    double rate() const noexcept { return param_; }
    const std::vector<Knot>& knots() const noexcept { return knots_; }
    double doubling_c0() const noexcept { return doubling_c0_; }
    void set_doubling_c0(double c0) { doubling_c0_ = c0; }

    double g(double r) const {
        if (!(r >= 0.0)) fail(ErrorKind::invalid_parameter, "profile evaluated at negative radius");
        switch (kind_) {
            case ProfileKind::power: return std::pow(1.0 + r, param_);
            case ProfileKind::exponential: return std::exp(param_ * r);
            case ProfileKind::tabulated: return tabulated_g(r);
        }
        return 1.0;
    }

    /// log g(r), finite where g would overflow.
    double log_g(double r) const {
        switch (kind_) {
            case ProfileKind::power:
                if (!(r >= 0.0)) fail(ErrorKind::invalid_parameter, "profile evaluated at negative radius");
                return param_ * std::log1p(r);
            case ProfileKind::exponential:
                if (!(r >= 0.0)) fail(ErrorKind::invalid_parameter, "profile evaluated at negative radius");
                return param_ * r;
            case ProfileKind::tabulated: return std::log(g(r));
        }
        return 0.0;
    }

    std::string describe() const {
        std::ostringstream os;
        switch (kind_) {
            case ProfileKind::power: os << "power(alpha=" << param_ << ")"; break;
            case ProfileKind::exponential: os << "exponential(rate=" << param_ << ")"; break;
            case ProfileKind::tabulated: os << "tabulated(" << knots_.size() << " knots)"; break;
        }
        return os.str();
    }

private:
    double tabulated_g(double r) const {
        if (knots_.empty()) fail(ErrorKind::invalid_profile, "tabulated profile has no knots");
        if (knots_.size() == 1) return std::max(1.0, knots_.front().g);
        const double u = std::log1p(r);
        auto lu = [](const Knot& k) { return std::log1p(k.r); };
        auto lg = [](const Knot& k) { return std::log(k.g); };
        std::size_t hi;
        if (r <= knots_.front().r) {
            hi = 1;
        } else if (r >= knots_.back().r) {
            hi = knots_.size() - 1;
        } else {
            auto it = std::upper_bound(knots_.begin(), knots_.end(), r,
                                       [](double v, const Knot& k) { return v < k.r; });
            hi = static_cast<std::size_t>(it - knots_.begin());
            if (knots_[hi - 1].r == r) return knots_[hi - 1].g;
        }
        const Knot& a = knots_[hi - 1];
        const Knot& b = knots_[hi];
        if (r == a.r) return a.g;
        if (r == b.r) return b.g;
        const double slope = (lg(b) - lg(a)) / (lu(b) - lu(a));
        return std::max(1.0, std::exp(lg(a) + slope * (u - lu(a))));
    }

    ProfileKind kind_ = ProfileKind::power;
    double param_ = 1.0;
    std::vector<Knot> knots_;
    double doubling_c0_ = 2.0;
};

inline double eval_g(const ProfileG& profile, double r) { return profile.g(r); }

/// Reads a two-column (r, g) CSV. Lines starting with '#' and a non-numeric
/// header row are skipped.
inline ProfileG load_tabulated_profile(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::invalid_profile, "cannot open profile table " + path);
    std::vector<Knot> knots;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream ls(line);
        Knot k{};
        if (!(ls >> k.r >> k.g)) {
            if (knots.empty() && line_no == 1) continue;
            fail(ErrorKind::invalid_profile, path + ":" + std::to_string(line_no) + ": expected 'r,g'");
        }
        knots.push_back(k);
    }
    return ProfileG::tabulated(std::move(knots));
}

using PotentialFn = std::function<double(std::span<const double>)>;

/// A potential V with its comparability data: C1 g(|x|) <= V(x) <= C2 g(|x|)
/// for |x| > 1.
struct PotentialSpec {
    int dim = 1;
    PotentialFn v;
    ProfileG profile = ProfileG::power(2.0);
    double h_lower = 1.0;
    double h_upper = 1.0;
    std::string label;
    // V identically zero. Used only for free-kernel calibration; the
    // sandwich with a growing profile does not hold.
    bool zero = false;

    double operator()(std::span<const double> x) const { return v(x); }
};

/// V(x) = coefficient |x|^alpha with g = (1+r)^alpha, C1 = coefficient 2^-alpha, C2 = coefficient.
inline PotentialSpec power_potential(int dim, double alpha, double coefficient = 1.0) {
    PotentialSpec s;
    s.dim = dim;
    s.profile = ProfileG::power(alpha);
    s.v = [alpha, coefficient](std::span<const double> x) { return coefficient * std::pow(norm(x), alpha); };
    s.h_lower = coefficient * std::pow(2.0, -alpha);
    s.h_upper = coefficient;
    std::ostringstream os;
    os << coefficient << "*|x|^" << alpha;
    s.label = os.str();
    return s;
}

/// V(x) = omega^2 |x|^2 / 2, the oscillator whose kernel is Mehler's formula.
inline PotentialSpec harmonic_potential(int dim, double omega) {
    PotentialSpec s = power_potential(dim, 2.0, 0.5 * omega * omega);
    std::ostringstream os;
    os << "harmonic(omega=" << omega << ")";
    s.label = os.str();
    return s;
}

inline PotentialSpec exponential_potential(int dim, double rate) {
    PotentialSpec s;
    s.dim = dim;
    s.profile = ProfileG::exponential(rate);
    s.v = [rate](std::span<const double> x) { return std::exp(rate * norm(x)); };
    s.h_lower = 1.0;
    s.h_upper = 1.0;
    std::ostringstream os;
    os << "exp(" << rate << "|x|)";
    s.label = os.str();
    return s;
}

inline PotentialSpec zero_potential(int dim) {
    PotentialSpec s;
    s.dim = dim;
    s.v = [](std::span<const double>) { return 0.0; };
    s.zero = true;
    s.label = "zero";
    return s;
}

struct HViolation {
    Point x;
    double radius;
    double v;
    double lower;
    double upper;
};

struct AssumptionReport {
    std::size_t samples = 0;
    std::vector<HViolation> violations;
    bool ok() const { return violations.empty(); }
};

namespace detail {

/// Deterministic unit directions: +-e1 in d=1, equal angles in d=2,
/// normalized Gaussian draws from a fixed counter stream in d >= 3.
inline std::vector<Point> sphere_directions(int dim, int count) {
    std::vector<Point> dirs;
    dirs.reserve(static_cast<std::size_t>(count));
    if (dim == 1) {
        for (int k = 0; k < count; ++k) dirs.push_back({k % 2 == 0 ? 1.0 : -1.0});
    } else if (dim == 2) {
        for (int k = 0; k < count; ++k) {
            const double a = 2.0 * std::numbers::pi * k / count;
            dirs.push_back({std::cos(a), std::sin(a)});
        }
    } else {
        NormalStream rng(0x5eed5eedULL, 0, StreamTag::directions);
        for (int k = 0; k < count; ++k) {
            Point p(static_cast<std::size_t>(dim));
            double n = 0.0;
            do {
                for (auto& c : p) c = rng.next();
                n = norm(p);
            } while (n < 1e-12);
            for (auto& c : p) c /= n;
            dirs.push_back(std::move(p));
        }
    }
    return dirs;
}

}  // namespace detail

inline AssumptionReport check_assumption_h(const PotentialSpec& spec, std::span<const double> radii,
                                           int directions_per_radius) {
    if (directions_per_radius < 1) {
        fail(ErrorKind::invalid_parameter, "directions_per_radius must be >= 1");
    }
    AssumptionReport rep;
    const auto dirs = detail::sphere_directions(spec.dim, directions_per_radius);
    for (double r : radii) {
        if (!(r > 1.0)) fail(ErrorKind::invalid_parameter, "comparability radii must exceed 1");
        const double gr = spec.profile.g(r);
        for (const auto& dir : dirs) {
            Point x(dir);
            for (auto& c : x) c *= r;
            const double v = spec.v(x);
            const double lo = spec.h_lower * gr;
            const double hi = spec.h_upper * gr;
            ++rep.samples;
            // Relative slack for rounding in V and g.
            const double tol = 1e-12 * std::max(1.0, hi);
            if (!(v >= lo - tol && v <= hi + tol)) {
                rep.violations.push_back({x, r, v, lo, hi});
            }
        }
    }
    return rep;
}

struct ProfileIssue {
    double r;
    std::string what;
};

/// Checks g >= 1, monotonicity and doubling on a sampled grid.
inline std::vector<ProfileIssue> validate_profile(const ProfileG& profile, std::span<const double> grid) {
    std::vector<ProfileIssue> issues;
    double prev = -std::numeric_limits<double>::infinity();
    for (double r : grid) {
        const double gr = profile.g(r);
        if (gr < 1.0) issues.push_back({r, "g < 1"});
        if (gr < prev) issues.push_back({r, "g decreasing"});
        prev = gr;
        if (profile.g(2.0 * r) > profile.doubling_c0() * gr * (1.0 + 1e-12)) {
            issues.push_back({r, "doubling violated"});
        }
    }
    return issues;
}

/// Regime threshold t0(s) = (1+s)/sqrt(g(s)).
inline double t0(const ProfileG& profile, double s) {
    if (!(s >= 0.0)) fail(ErrorKind::invalid_parameter, "t0 needs s >= 0");
    return std::exp(std::log1p(s) - 0.5 * profile.log_g(s));
}

enum class Monotonicity { almost_increasing, almost_decreasing, constant_like, indeterminate };

inline const char* to_string(Monotonicity m) {
    switch (m) {
        case Monotonicity::almost_increasing: return "almost_increasing";
        case Monotonicity::almost_decreasing: return "almost_decreasing";
        case Monotonicity::constant_like: return "constant_like";
        case Monotonicity::indeterminate: return "indeterminate";
    }
    return "?";
}

/// Result of classify_t0. The witnesses satisfy
/// witness_cstar * h <= t0 <= witness_cupper * h for the monotone hull h.
struct MonotonicityClass {
    Monotonicity label = Monotonicity::indeterminate;
    double witness_cstar = 1.0;
    double witness_cupper = 1.0;
    double increasing_factor = 1.0;  // max of running-max(t0) / t0
    double decreasing_factor = 1.0;  // max of suffix-max(t0) / t0
};

inline constexpr double kAlmostMonotoneFactor = 4.0;

inline MonotonicityClass classify_t0(const ProfileG& profile, double r_max, int n_samples) {
    if (n_samples < 16) fail(ErrorKind::invalid_parameter, "classify_t0 needs n_samples >= 16");
    if (!(r_max > 0.0)) fail(ErrorKind::invalid_parameter, "classify_t0 needs r_max > 0");
    const auto n = static_cast<std::size_t>(n_samples);
    std::vector<double> vals(n);
    const double top = std::log1p(r_max);
    for (std::size_t i = 0; i < n; ++i) {
        const double s = std::expm1(top * static_cast<double>(i) / static_cast<double>(n - 1));
        vals[i] = t0(profile, s);
    }
    double inc = 1.0, dec = 1.0, run = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        run = std::max(run, vals[i]);
        inc = std::max(inc, run / vals[i]);
    }
    run = 0.0;
    for (std::size_t i = n; i-- > 0;) {
        run = std::max(run, vals[i]);
        dec = std::max(dec, run / vals[i]);
    }
    MonotonicityClass out;
    out.increasing_factor = inc;
    out.decreasing_factor = dec;
    const bool is_inc = inc <= kAlmostMonotoneFactor;
    const bool is_dec = dec <= kAlmostMonotoneFactor;
    if (is_inc && is_dec) {
        out.label = Monotonicity::constant_like;
        out.witness_cstar = 1.0 / std::max(inc, dec);
    } else if (is_inc) {
        out.label = Monotonicity::almost_increasing;
        out.witness_cstar = 1.0 / inc;
    } else if (is_dec) {
        out.label = Monotonicity::almost_decreasing;
        out.witness_cstar = 1.0 / dec;
    } else {
        out.label = Monotonicity::indeterminate;
        out.witness_cstar = 1.0 / std::min(inc, dec);
    }
    out.witness_cupper = 1.0;
    return out;
}

enum class Regime { small_time, large_time };

inline const char* to_string(Regime r) {
    return r == Regime::small_time ? "small_time" : "large_time";
}

/// small_time iff t <= c0_regime * t0(min(|x|,|y|)).
inline Regime regime(const ProfileG& profile, double c0_regime, double t, std::span<const double> x,
                     std::span<const double> y) {
    if (!(t > 0.0)) fail(ErrorKind::invalid_parameter, "regime needs t > 0");
    const double s = std::min(norm(x), norm(y));
    return t <= c0_regime * t0(profile, s) ? Regime::small_time : Regime::large_time;
}

}  // namespace heatlab
