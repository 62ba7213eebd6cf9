#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "heatlab/error.hpp"
#include "heatlab/parallel.hpp"
#include "heatlab/point.hpp"
#include "heatlab/potential.hpp"
#include "heatlab/reference_kernels.hpp"
#include "heatlab/rng.hpp"

namespace heatlab {

enum class Method { mc_bridge, mc_free, pde, oracle };

inline const char* to_string(Method m) {
    switch (m) {
        case Method::mc_bridge: return "mc_bridge";
        case Method::mc_free: return "mc_free";
        case Method::pde: return "pde";
        case Method::oracle: return "oracle";
    }
    return "?";
}

struct McConfig {
    std::size_t n_paths = 10000;
    std::size_t n_steps = 256;
    std::uint64_t seed = 1;
    bool antithetic = false;
    // Double n_steps until successive estimates differ by less than
    // max(1e-4 value, 0.25 stderr), up to max_steps.
    bool refine = false;
    std::size_t max_steps = 8192;
    unsigned workers = 0;  // 0: hardware concurrency
};

/// A kernel (or survival) value with its statistical error. For pde
/// estimates std_error holds the discretization error bound instead.
struct KernelEstimate {
    double value = 0.0;
    double std_error = 0.0;
    Method method = Method::oracle;
    std::size_t n_effective = 0;
    std::size_t n_steps = 0;
};

/// Discrete path: (n_steps + 1) points of dimension dim, row-major.
struct BridgePath {
    int dim = 1;
    std::size_t n_steps = 0;
    std::vector<double> coords;

    std::span<const double> point(std::size_t k) const {
        return {coords.data() + k * static_cast<std::size_t>(dim), static_cast<std::size_t>(dim)};
    }
};

namespace detail {

struct BridgeNode {
    std::size_t lo, mid, hi;
};

/// Breadth-first bisection order of the interior grid indices. For
/// power-of-two grids the schedule for n is a prefix of the schedule for
/// 2n, so refining a path reuses its coarse points.
inline std::vector<BridgeNode> bridge_schedule(std::size_t n_steps) {
    std::vector<BridgeNode> out;
    out.reserve(n_steps);
    std::vector<std::pair<std::size_t, std::size_t>> level{{0, n_steps}}, next;
    while (!level.empty()) {
        next.clear();
        for (auto [lo, hi] : level) {
            if (hi - lo < 2) continue;
            const std::size_t mid = (lo + hi) / 2;
            out.push_back({lo, mid, hi});
            next.emplace_back(lo, mid);
            next.emplace_back(mid, hi);
        }
        level.swap(next);
    }
    return out;
}

/// Fills `out` ((n+1)*d values) with a bridge from x to y over [0,t]
/// driven by `z` (one d-vector per schedule node). sign = -1 gives the
/// antithetic path reflected about the straight line.
inline void build_bridge(int d, double t, std::span<const double> x, std::span<const double> y, std::size_t n,
                         std::span<const BridgeNode> schedule, std::span<const double> z, double sign,
                         std::span<double> out) {
    const auto dd = static_cast<std::size_t>(d);
    for (std::size_t c = 0; c < dd; ++c) {
        out[c] = x[c];
        out[n * dd + c] = y[c];
    }
    const double dt = t / static_cast<double>(n);
    std::size_t zi = 0;
    for (const auto& node : schedule) {
        const double s_lo = dt * static_cast<double>(node.lo);
        const double s_mid = dt * static_cast<double>(node.mid);
        const double s_hi = dt * static_cast<double>(node.hi);
        const double w = (s_mid - s_lo) / (s_hi - s_lo);
        const double sd = std::sqrt((s_mid - s_lo) * (s_hi - s_mid) / (s_hi - s_lo));
        for (std::size_t c = 0; c < dd; ++c) {
            const double a = out[node.lo * dd + c];
            const double b = out[node.hi * dd + c];
            out[node.mid * dd + c] = a + w * (b - a) + sign * sd * z[zi++];
        }
    }
}

/// Trapezoidal integral of V along an equally spaced path.
inline double path_integral(const PotentialSpec& spec, std::span<const double> coords, int d, std::size_t n,
                            double t) {
    const auto dd = static_cast<std::size_t>(d);
    double sum = 0.0;
    for (std::size_t k = 0; k <= n; ++k) {
        const double v = spec.v(coords.subspan(k * dd, dd));
        if (!std::isfinite(v) || v < 0.0) {
            fail(ErrorKind::engine, "potential is non-finite or negative at x = " +
                                        format_point(coords.subspan(k * dd, dd)) +
                                        " (V must be nonnegative and locally bounded)");
        }
        sum += (k == 0 || k == n) ? 0.5 * v : v;
    }
    return sum * t / static_cast<double>(n);
}

inline void check_mc_inputs(const PotentialSpec& spec, const McConfig& cfg, double t, std::span<const double> x) {
    if (!(t > 0.0)) fail(ErrorKind::invalid_parameter, "t must be positive");
    if (cfg.n_steps < 2) fail(ErrorKind::invalid_parameter, "n_steps must be >= 2");
    if (cfg.n_paths < 1) fail(ErrorKind::invalid_parameter, "n_paths must be >= 1");
    if (static_cast<int>(x.size()) != spec.dim) fail(ErrorKind::invalid_parameter, "point dimension differs from potential");
}

}  // namespace detail

/// One Brownian bridge pinned at path[0] = x, path[n_steps] = y.
inline BridgePath sample_bridge(double t, std::span<const double> x, std::span<const double> y, std::size_t n_steps,
                                NormalStream& rng) {
    const int d = dimension_of(x, y);
    if (!(t > 0.0)) fail(ErrorKind::invalid_parameter, "t must be positive");
    if (n_steps < 2) fail(ErrorKind::invalid_parameter, "n_steps must be >= 2");
    const auto schedule = detail::bridge_schedule(n_steps);
    std::vector<double> z(schedule.size() * static_cast<std::size_t>(d));
    for (auto& v : z) v = rng.next();
    BridgePath p;
    p.dim = d;
    p.n_steps = n_steps;
    p.coords.resize((n_steps + 1) * static_cast<std::size_t>(d));
    detail::build_bridge(d, t, x, y, n_steps, schedule, z, 1.0, p.coords);
    return p;
}

namespace detail {

/// Mean of exp(-int V) over bridges (free == false) or free paths
/// (free == true, y ignored), with per-path counter streams.
inline MeanStd path_weight_mean(const PotentialSpec& spec, const McConfig& cfg, std::size_t n_steps, double t,
                                std::span<const double> x, std::span<const double> y, bool free) {
    // Every path weight is exp(0) = 1.
    if (spec.zero) return {1.0, 0.0};
    const int d = static_cast<int>(x.size());
    const auto dd = static_cast<std::size_t>(d);
    const auto schedule = bridge_schedule(n_steps);
    const std::size_t n_samples = cfg.antithetic ? (cfg.n_paths + 1) / 2 : cfg.n_paths;
    std::vector<double> weights(n_samples);
    const StreamTag tag = free ? StreamTag::survival : StreamTag::kernel;
    parallel_for(n_samples, cfg.workers, [&](std::size_t begin, std::size_t end) {
        std::vector<double> z(schedule.size() * dd);
        std::vector<double> endpoint(dd), target(dd);
        std::vector<double> path((n_steps + 1) * dd);
        for (std::size_t i = begin; i < end; ++i) {
            NormalStream rng(cfg.seed, i, tag);
            if (free) {
                for (std::size_t c = 0; c < dd; ++c) endpoint[c] = rng.next();
            } else {
                std::copy(y.begin(), y.end(), endpoint.begin());
            }
            for (auto& v : z) v = rng.next();
            double acc = 0.0;
            const int reps = cfg.antithetic ? 2 : 1;
            for (int rep = 0; rep < reps; ++rep) {
                const double sign = rep == 0 ? 1.0 : -1.0;
                for (std::size_t c = 0; c < dd; ++c) {
                    target[c] = free ? x[c] + sign * std::sqrt(t) * endpoint[c] : endpoint[c];
                }
                build_bridge(d, t, x, target, n_steps, schedule, z, sign, path);
                acc += std::exp(-path_integral(spec, path, d, n_steps, t));
            }
            weights[i] = acc / reps;
        }
    });
    return mean_and_stderr(weights);
}

template <class Run>
KernelEstimate refine_steps(const McConfig& cfg, Run&& run) {
    std::size_t n = cfg.n_steps;
    KernelEstimate est = run(n);
    if (!cfg.refine) return est;
    while (2 * n <= cfg.max_steps) {
        KernelEstimate finer = run(2 * n);
        const double diff = std::abs(finer.value - est.value);
        est = finer;
        n *= 2;
        if (diff < std::max(1e-4 * est.value, 0.25 * est.std_error)) break;
    }
    return est;
}

}  // namespace detail

/// p(t,x,y) = q(t,x,y) E[exp(-int_0^t V(bridge_s) ds)] over Brownian
/// bridges from x to y.
inline KernelEstimate kernel_mc(const PotentialSpec& spec, const McConfig& cfg, double t, std::span<const double> x,
                                std::span<const double> y) {
    detail::check_mc_inputs(spec, cfg, t, x);
    dimension_of(x, y);
    const double q = gaussian_q(t, x, y);
    return detail::refine_steps(cfg, [&](std::size_t n) {
        const MeanStd ms = detail::path_weight_mean(spec, cfg, n, t, x, y, false);
        KernelEstimate e;
        e.value = q * ms.mean;
        e.std_error = q * ms.std_error;
        e.method = Method::mc_bridge;
        e.n_effective = cfg.antithetic ? (cfg.n_paths + 1) / 2 : cfg.n_paths;
        e.n_steps = n;
        return e;
    });
}

/// T_t^V 1(x) = E_x[exp(-int_0^t V(B_s) ds)] over free Brownian paths.
inline KernelEstimate survival_mc(const PotentialSpec& spec, const McConfig& cfg, double t,
                                  std::span<const double> x) {
    detail::check_mc_inputs(spec, cfg, t, x);
    return detail::refine_steps(cfg, [&](std::size_t n) {
        const MeanStd ms = detail::path_weight_mean(spec, cfg, n, t, x, x, true);
        KernelEstimate e;
        e.value = ms.mean;
        e.std_error = ms.std_error;
        e.method = Method::mc_free;
        e.n_effective = cfg.antithetic ? (cfg.n_paths + 1) / 2 : cfg.n_paths;
        e.n_steps = n;
        return e;
    });
}

/// Sampler for (exit time, exit side) of B(x, r) in d = 1, started at the
/// centre, truncated at t_max. Times are found by inverting the exit-time
/// distribution function.
class IntervalExitSampler {
public:
    IntervalExitSampler(double radius, double t_max) : spec_{radius, 200}, t_max_(t_max) {
        if (!(radius > 0.0) || !(t_max > 0.0)) fail(ErrorKind::invalid_parameter, "exit sampler needs r, t > 0");
        const int n = 256;
        const double lo = 1e-4 * radius * radius;
        grid_.resize(n);
        cdf_.resize(n);
        for (int i = 0; i < n; ++i) {
            grid_[i] = (t_max <= lo) ? t_max * (i + 1) / n
                                     : lo * std::pow(t_max / lo, static_cast<double>(i) / (n - 1));
            cdf_[i] = interval_exit_cdf(spec_, grid_[i], 0.0);
        }
    }

    double exit_probability() const { return cdf_.back(); }

    /// Exit time with P(tau <= s) = u, for u <= exit_probability().
    double invert(double u) const {
        auto it = std::lower_bound(cdf_.begin(), cdf_.end(), u);
        const auto i = static_cast<std::size_t>(it - cdf_.begin());
        double lo = i == 0 ? 0.0 : grid_[i - 1];
        double hi = grid_[std::min(i, grid_.size() - 1)];
        for (int iter = 0; iter < 200 && hi - lo > 1e-14 * hi; ++iter) {
            const double mid = 0.5 * (lo + hi);
            if (interval_exit_cdf(spec_, mid, 0.0) < u) lo = mid; else hi = mid;
        }
        return 0.5 * (lo + hi);
    }

    double right_probability(double tau) const {
        const double r = interval_exit_density(spec_, tau, 0.0, Endpoint::right).value;
        const double l = interval_exit_density(spec_, tau, 0.0, Endpoint::left).value;
        return (r + l) > 0.0 ? r / (r + l) : 0.5;
    }

private:
    IntervalDirichletSpec spec_;
    double t_max_;
    std::vector<double> grid_;
    std::vector<double> cdf_;
};

struct ExitIdentityReport {
    KernelEstimate lhs;
    KernelEstimate rhs;
    double z_score = 0.0;
    double exit_probability = 0.0;
};

namespace detail {

/// Path on [0, tau] from the centre c to the wall z = c + side*r that stays
/// inside (c-r, c+r): the reversed distance to z is a 3-d Bessel bridge
/// from 0 to r, conditioned (by rejection) to stay below 2r. Returns
/// int_0^tau V along it.
inline double first_passage_integral(const PotentialSpec& spec, double c, double r, double side, double tau,
                                     std::size_t n, std::span<const BridgeNode> schedule, NormalStream& rng,
                                     std::vector<double>& buf3, std::vector<double>& z3) {
    const double origin[3] = {0.0, 0.0, 0.0};
    const double target[3] = {r, 0.0, 0.0};
    const double dt = tau / static_cast<double>(n);
    for (int attempt = 0; attempt < 100000; ++attempt) {
        for (auto& v : z3) v = rng.next();
        build_bridge(3, tau, origin, target, n, schedule, z3, 1.0, buf3);
        bool ok = true;
        double prev = 0.0;
        for (std::size_t k = 1; k <= n && ok; ++k) {
            const double* p = buf3.data() + 3 * k;
            const double rad = std::sqrt(p[0] * p[0] + p[1] * p[1] + p[2] * p[2]);
            if (rad >= 2.0 * r) {
                ok = false;
            } else {
                // Crossing of the far wall between grid points.
                const double cross = std::exp(-2.0 * (2.0 * r - prev) * (2.0 * r - rad) / dt);
                if (rng.uniform() < cross) ok = false;
            }
            prev = rad;
        }
        if (!ok) continue;
        double sum = 0.0;
        for (std::size_t k = 0; k <= n; ++k) {
            const double* p = buf3.data() + 3 * k;
            const double rad = std::sqrt(p[0] * p[0] + p[1] * p[1] + p[2] * p[2]);
            const double pos = c + side * (r - rad);
            const double v = spec.v(std::span<const double>(&pos, 1));
            if (!std::isfinite(v)) fail(ErrorKind::engine, "potential is non-finite along exit path");
            sum += (k == 0 || k == n) ? 0.5 * v : v;
        }
        return sum * dt;
    }
    fail(ErrorKind::engine, "exit path rejection sampling did not terminate");
}

}  // namespace detail

/// Compares both sides of the exit-time decomposition
///   p(t,x,y) = E_x[exp(-int_0^tau V) 1{tau <= t} p(t - tau, B_tau, y)]
/// for U = (x - r, x + r), d = 1. The rhs draws (tau, side) from the exact
/// exit law and uses one bridge sample for the inner kernel.
inline ExitIdentityReport exit_identity_check(const PotentialSpec& spec, const McConfig& cfg, double t,
                                              std::span<const double> x, std::span<const double> y,
                                              double u_radius) {
    if (spec.dim != 1 || x.size() != 1 || y.size() != 1) {
        fail(ErrorKind::unsupported_dimension, "exit identity check is implemented for d = 1 only");
    }
    if (!(u_radius > 0.0)) fail(ErrorKind::invalid_parameter, "u_radius must be positive");
    if (!(std::abs(x[0] - y[0]) > u_radius)) {
        fail(ErrorKind::precondition, "y must lie outside the closed ball around x");
    }
    detail::check_mc_inputs(spec, cfg, t, x);

    ExitIdentityReport rep;
    rep.lhs = kernel_mc(spec, cfg, t, x, y);

    const IntervalExitSampler sampler(u_radius, t);
    rep.exit_probability = sampler.exit_probability();
    const std::size_t n_samples = cfg.n_paths;
    std::vector<double> samples(n_samples);
    const double xc = x[0];
    parallel_for(n_samples, cfg.workers, [&](std::size_t begin, std::size_t end) {
        std::vector<double> buf3, z3, path, zin;
        for (std::size_t i = begin; i < end; ++i) {
            NormalStream rng(cfg.seed, i, StreamTag::exit_law);
            const double u = rng.uniform();
            if (u >= sampler.exit_probability()) {
                samples[i] = 0.0;
                continue;
            }
            const double tau = std::min(sampler.invert(u), t);
            const double side = rng.uniform() < sampler.right_probability(tau) ? 1.0 : -1.0;
            const double exit_point = xc + side * u_radius;

            const auto n_exit = std::max<std::size_t>(16, static_cast<std::size_t>(std::ceil(
                                                               static_cast<double>(cfg.n_steps) * tau / t)));
            const auto sched_exit = detail::bridge_schedule(n_exit);
            buf3.assign(3 * (n_exit + 1), 0.0);
            z3.assign(3 * sched_exit.size(), 0.0);
            const double i1 =
                detail::first_passage_integral(spec, xc, u_radius, side, tau, n_exit, sched_exit, rng, buf3, z3);

            const double rest = t - tau;
            if (!(rest > 0.0)) {
                samples[i] = 0.0;
                continue;
            }
            const auto n_in = std::max<std::size_t>(16, static_cast<std::size_t>(std::ceil(
                                                             static_cast<double>(cfg.n_steps) * rest / t)));
            const auto sched_in = detail::bridge_schedule(n_in);
            NormalStream rin(cfg.seed, i, StreamTag::exit_inner);
            zin.resize(sched_in.size());
            for (auto& v : zin) v = rin.next();
            path.resize(n_in + 1);
            const double zp[1] = {exit_point};
            detail::build_bridge(1, rest, zp, y, n_in, sched_in, zin, 1.0, path);
            const double i2 = detail::path_integral(spec, path, 1, n_in, rest);
            samples[i] = std::exp(-i1 - i2) * gaussian_q(rest, exit_point, y[0]);
        }
    });
    const MeanStd ms = mean_and_stderr(samples);
    rep.rhs.value = ms.mean;
    rep.rhs.std_error = ms.std_error;
    rep.rhs.method = Method::mc_bridge;
    rep.rhs.n_effective = n_samples;
    rep.rhs.n_steps = cfg.n_steps;
    const double se = std::hypot(rep.lhs.std_error, rep.rhs.std_error);
    const double diff = std::abs(rep.lhs.value - rep.rhs.value);
    rep.z_score = se > 0.0 ? diff / se : (diff == 0.0 ? 0.0 : std::numeric_limits<double>::infinity());
    return rep;
}

}  // namespace heatlab
