#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "heatlab/envelope.hpp"
#include "heatlab/error.hpp"
#include "heatlab/mc_feynman_kac.hpp"
#include "heatlab/pde_solver.hpp"
#include "heatlab/point.hpp"
#include "heatlab/potential.hpp"
#include "heatlab/reference_kernels.hpp"

namespace heatlab {

struct GreenEstimate {
    double value = 0.0;
    double error_bound = 0.0;
    std::size_t n_nodes = 0;
    double tail_bound = 0.0;
    double t_cut = 0.0;
    double quad_error = 0.0;   // |fine - coarse| panel sums
    double stat_error = 0.0;   // mc only
    double head_bound = 0.0;   // integral below the first node
    Monotonicity t0_class = Monotonicity::indeterminate;
};

enum class Engine { pde, mc };

inline const char* to_string(Engine e) { return e == Engine::pde ? "pde" : "mc"; }

struct GreenOptions {
    double rel_tol = 1e-3;
    McConfig mc;
    std::optional<GridSpec> grid;  // auto when unset
    EvolveOptions evolve;
    double panel_width = 0.5;      // in log t, coarse level
    int max_refinements = 4;
    double t_cut_limit = 1e5;
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

struct QuadNode {
    double t;
    double weight;  // includes the dt = t du Jacobian
};

/// Gauss-Legendre panels of width ~w in u = log t over [a, b].
inline void log_panels(double a, double b, double w, std::vector<QuadNode>& out) {
    if (!(b > a)) return;
    using GL = boost::math::quadrature::gauss<double, 8>;
    const double ua = std::log(a), ub = std::log(b);
    const auto n = static_cast<std::size_t>(std::max(1.0, std::ceil((ub - ua) / w)));
    const double pw = (ub - ua) / static_cast<double>(n);
    const auto& xs = GL::abscissa();
    const auto& ws = GL::weights();
    for (std::size_t p = 0; p < n; ++p) {
        const double mid = ua + (static_cast<double>(p) + 0.5) * pw;
        for (std::size_t k = 0; k < xs.size(); ++k) {
            for (double sgn : {-1.0, 1.0}) {
                if (xs[k] == 0.0 && sgn > 0) continue;
                const double u = mid + sgn * 0.5 * pw * xs[k];
                const double t = std::exp(u);
                out.push_back({t, 0.5 * pw * ws[k] * t});
            }
        }
    }
}

inline std::vector<QuadNode> green_nodes(std::span<const double> breaks, double w) {
    std::vector<QuadNode> out;
    for (std::size_t i = 0; i + 1 < breaks.size(); ++i) log_panels(breaks[i], breaks[i + 1], w, out);
    return out;
}

/// int_a^b (2 pi t)^{-d/2} exp(-r^2 / 2t) dt for d >= 3 via incomplete gamma.
inline double free_time_integral(int d, double r, double a, double b) {
    const double s = 0.5 * d - 1.0;
    const double half_r2 = 0.5 * r * r;
    const double pref = std::pow(2.0 * std::numbers::pi, -0.5 * d) * std::pow(half_r2, -s);
    auto lower = [&](double z) { return z <= 0.0 ? 0.0 : boost::math::tgamma_lower(s, z); };
    const double za = a > 0.0 ? half_r2 / a : std::numeric_limits<double>::infinity();
    const double zb = std::isinf(b) ? 0.0 : half_r2 / b;
    const double big = std::isinf(za) ? std::tgamma(s) : lower(za);
    return pref * (big - lower(zb));
}

/// Bound on int_0^a q(t, r) dt, using that q(., r) increases up to r^2/d.
inline double free_head_bound(int d, double r, double a) {
    const double peak_t = r * r / d;
    const double tt = std::min(a, peak_t);
    return a * std::exp(-0.5 * d * std::log(2.0 * std::numbers::pi * tt) - 0.5 * r * r / tt);
}

}  // namespace detail

/// G(x,y) = int_0^inf p(t,x,y) dt by Gauss-Legendre panels in log t,
/// split at r^2 = |x-y|^2 and at t0(min(|x|,|y|)), cut at T where the tail
/// is below 0.1 rel_tol of the integral.
inline GreenEstimate green(const PotentialSpec& spec, Engine engine, std::span<const double> x,
                           std::span<const double> y, const GreenOptions& opt = {}) {
    const int d = dimension_of(x, y);
    if (d != spec.dim) fail(ErrorKind::invalid_parameter, "point dimension differs from potential");
    const double r = distance(x, y);
    if (r == 0.0) fail(ErrorKind::singular_point, "green needs x != y");
    if (engine == Engine::pde && d > 2) fail(ErrorKind::unsupported_dimension, "pde green supports d <= 2");
    if (engine == Engine::mc && d > 3) fail(ErrorKind::unsupported_dimension, "mc green supports d <= 3");
    if (spec.zero && d <= 2) fail(ErrorKind::precondition, "free Green's function diverges for d <= 2");
    if (!(opt.rel_tol > 0.0)) fail(ErrorKind::invalid_parameter, "rel_tol must be positive");

    GreenEstimate est;
    const double s_min = std::min(norm(x), norm(y));
    if (!spec.zero) est.t0_class = classify_t0(spec.profile, 1e8, 2048).label;
    const double t0m = spec.zero ? r * r : t0(spec.profile, s_min);

    GridSpec grid;
    if (engine == Engine::pde) {
        if (opt.grid) {
            grid = *opt.grid;
        } else {
            grid.dim = d;
            grid.n_cells = d == 1 ? 1024 : 128;
        }
    }
    double t_lo = r * r / 100.0;
    if (engine == Engine::pde) {
        // Grid start time grows with h; an explicit grid fixes it now.
        if (opt.grid) t_lo = std::max(t_lo, 2.0 * grid.start_time());
    }

    double T = std::max({4.0 * r * r, 2.0 * t0m, 1.0});
    for (;;) {
        if (engine == Engine::pde && !opt.grid) {
            grid.half_width = choose_half_width(spec, T, y);
            for (double c : x) grid.half_width = std::max(grid.half_width, std::ceil(4.0 * (std::abs(c) + 1.0)) / 4.0);
            t_lo = std::max(r * r / 100.0, 2.0 * grid.start_time());
        }
        std::vector<double> breaks{t_lo};
        for (double b : {r * r, t0m}) {
            if (b > breaks.back() * 1.01 && b < T / 1.01) breaks.push_back(b);
        }
        std::sort(breaks.begin(), breaks.end());
        breaks.push_back(T);

        const double t_probe = 0.9 * T;
        auto evaluate = [&](std::span<const std::vector<detail::QuadNode>> levels) {
            std::map<double, KernelEstimate> values;
            for (const auto& lvl : levels) {
                for (const auto& n : lvl) values[n.t];
            }
            values[t_probe];
            values[T];
            if (engine == Engine::pde) {
                std::vector<double> ts;
                for (const auto& kv : values) ts.push_back(kv.first);
                const auto cols = evolve(spec, grid, y, ts, opt.evolve);
                std::size_t i = 0;
                for (auto& kv : values) {
                    const double v = cols[i++].value_at(x);
                    kv.second.value = v;
                    kv.second.std_error = opt.evolve.error_model * v;
                    kv.second.method = Method::pde;
                }
            } else {
                std::size_t i = 0;
                for (auto& kv : values) {
                    McConfig cfg = opt.mc;
                    cfg.seed = detail::splitmix64(opt.mc.seed ^ (0x51ed2701ULL * ++i));
                    kv.second = kernel_mc(spec, cfg, kv.first, x, y);
                }
            }
            return values;
        };

        int level = 0;
        std::vector<std::vector<detail::QuadNode>> levels{detail::green_nodes(breaks, opt.panel_width),
                                                          detail::green_nodes(breaks, 0.5 * opt.panel_width)};
        auto values = evaluate(levels);
        auto integrate = [&](const std::vector<detail::QuadNode>& nodes, double& stat2) {
            double s = 0.0;
            stat2 = 0.0;
            for (const auto& n : nodes) {
                const auto& e = values.at(n.t);
                s += n.weight * e.value;
                if (engine == Engine::mc) stat2 += (n.weight * e.std_error) * (n.weight * e.std_error);
            }
            return s;
        };
        double st_c = 0.0, st_f = 0.0;
        double coarse = integrate(levels[0], st_c);
        double fine = integrate(levels[1], st_f);
        while (std::abs(fine - coarse) > 0.1 * opt.rel_tol * std::abs(fine) && level < opt.max_refinements) {
            ++level;
            levels = {levels[1], detail::green_nodes(breaks, opt.panel_width / static_cast<double>(2 << level))};
            values = evaluate(levels);
            coarse = integrate(levels[0], st_c);
            fine = integrate(levels[1], st_f);
        }

        double tail = 0.0;
        double head = 0.0;
        double extra = 0.0;
        if (spec.zero) {
            extra = detail::free_time_integral(d, r, 0.0, t_lo) + detail::free_time_integral(d, r, T, INFINITY);
        } else {
            const double psi_prod = std::exp(log_psi(spec.profile, 1e300, x, 1.0) + log_psi(spec.profile, 1e300, y, 1.0));
            const double env_tail = std::exp(-T) * psi_prod;
            const double fa = values.at(t_probe).value, fb = values.at(T).value;
            double data_tail = std::numeric_limits<double>::infinity();
            if (fb <= 0.0) {
                data_tail = 0.0;
            } else if (fa > fb) {
                data_tail = fb / (std::log(fa / fb) / (T - t_probe));
            }
            tail = std::max(env_tail, data_tail);
            head = detail::free_head_bound(d, r, t_lo);
        }

        const bool tail_ok = spec.zero || tail <= 0.1 * opt.rel_tol * std::abs(fine);
        if (!tail_ok && 2.0 * T <= opt.t_cut_limit) {
            T *= 2.0;
            continue;
        }
        if (!tail_ok) fail(ErrorKind::engine, "green tail does not decay before the time limit");

        est.value = fine + extra;
        est.quad_error = std::abs(fine - coarse);
        est.stat_error = std::sqrt(st_f);
        est.tail_bound = tail;
        est.head_bound = head;
        est.t_cut = T;
        est.n_nodes = levels[1].size();
        est.error_bound = est.quad_error + est.stat_error + est.tail_bound + est.head_bound;
        if (!(est.value > 0.0)) fail(ErrorKind::engine, "green integral is not positive");
        if (engine == Engine::mc && est.stat_error > opt.rel_tol * est.value) {
            const double ratio = est.stat_error / (opt.rel_tol * est.value);
            const auto need = static_cast<std::size_t>(std::ceil(static_cast<double>(opt.mc.n_paths) * ratio * ratio));
            fail(ErrorKind::insufficient_paths,
                 "mc error exceeds rel_tol; n_paths >= " + std::to_string(need) + " required");
        }
        return est;
    }
}

}  // namespace heatlab
