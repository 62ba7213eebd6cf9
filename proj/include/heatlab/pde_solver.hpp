#pragma once

#include <algorithm>
#include <array>
#include <functional>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "heatlab/envelope.hpp"
#include "heatlab/error.hpp"
#include "heatlab/point.hpp"
#include "heatlab/potential.hpp"
#include "heatlab/reference_kernels.hpp"

namespace heatlab {

/// Box [-L, L]^dim with n_cells cells per axis and Dirichlet walls.
/// dt <= 0 selects the step automatically (see auto_time_step).
struct GridSpec {
    int dim = 1;
    double half_width = 8.0;
    std::size_t n_cells = 1024;
    double dt = 0.0;

    double h() const { return 2.0 * half_width / static_cast<double>(n_cells); }
    std::size_t nodes_per_axis() const { return n_cells + 1; }
    /// Start time of the evolution: the initial data is the short-time
    /// kernel at this time, a Gaussian of standard deviation two cells.
    double start_time() const { return 4.0 * h() * h(); }
};

struct EvolveOptions {
    // Multiply by exact-Gaussian / free-run ratio from a V = 0 solve on the same grid.
    bool calibrate = false;
    // Backward-Euler half steps at start-up (Rannacher smoothing).
    int rannacher_steps = 4;
    // Relative discretization error attached to pde estimates.
    double error_model = 1e-3;
};

/// p(t, ., y) on the grid nodes.
struct KernelColumn {
    double t = 0.0;
    Point y;
    int dim = 1;
    std::size_t n_cells = 0;
    double half_width = 0.0;
    double dt = 0.0;
    std::vector<double> values;  // nodes_per_axis^dim, row-major, walls included
    double mass = 0.0;
    double min_before_clamp = 0.0;  // most negative raw value
    bool clamped = false;
    bool truncation_warning = false;
    bool calibrated = false;

    double h() const { return 2.0 * half_width / static_cast<double>(n_cells); }
    std::size_t nodes_per_axis() const { return n_cells + 1; }
    double coord(std::size_t i) const { return -half_width + static_cast<double>(i) * h(); }
    double peak() const { return values.empty() ? 0.0 : *std::max_element(values.begin(), values.end()); }

    double node(std::size_t i) const { return values[i]; }
    double node(std::size_t i, std::size_t j) const { return values[i * nodes_per_axis() + j]; }

    /// Interpolated value: cubic Lagrange in log(value) when the stencil is
    /// positive, linear otherwise.
    double value_at(std::span<const double> x) const;
};

namespace detail {

inline double lagrange4(const double* f, double s) {
    // Nodes at -1, 0, 1, 2; s in [0, 1].
    const double a = s + 1.0, b = s, c = s - 1.0, d = s - 2.0;
    return f[0] * (-b * c * d / 6.0) + f[1] * (a * c * d / 2.0) + f[2] * (-a * b * d / 2.0) + f[3] * (a * b * c / 6.0);
}

inline void locate(double x, double L, double h, std::size_t n, std::size_t& i0, double& s) {
    double pos = (x + L) / h;
    pos = std::clamp(pos, 0.0, static_cast<double>(n));
    auto i = static_cast<std::size_t>(std::floor(pos));
    if (i >= n) i = n - 1;
    i0 = i;
    s = pos - static_cast<double>(i);
}

inline double interp_axis(const double* f4, double s, bool use_log) {
    if (use_log) {
        double lg[4];
        for (int k = 0; k < 4; ++k) lg[k] = std::log(f4[k]);
        return std::exp(lagrange4(lg, s));
    }
    return f4[1] + s * (f4[2] - f4[1]);
}

}  // namespace detail

inline double KernelColumn::value_at(std::span<const double> x) const {
    if (static_cast<int>(x.size()) != dim) fail(ErrorKind::invalid_parameter, "probe dimension differs from grid");
    const std::size_t n = n_cells;
    const double hh = h();
    for (double c : x) {
        if (std::abs(c) > half_width) fail(ErrorKind::domain, "probe outside the grid box");
    }
    auto pick = [n](std::size_t i, int off) {
        const long k = static_cast<long>(i) + off;
        return static_cast<std::size_t>(std::clamp<long>(k, 0, static_cast<long>(n)));
    };
    if (dim == 1) {
        std::size_t i;
        double s;
        detail::locate(x[0], half_width, hh, n, i, s);
        if (s == 0.0) return values[i];
        double f[4];
        bool pos = true;
        for (int k = 0; k < 4; ++k) {
            f[k] = values[pick(i, k - 1)];
            pos = pos && f[k] > 0.0;
        }
        pos = pos && i >= 1 && i + 2 <= n;
        return detail::interp_axis(f, s, pos);
    }
    std::size_t i, j;
    double s, u;
    detail::locate(x[0], half_width, hh, n, i, s);
    detail::locate(x[1], half_width, hh, n, j, u);
    const bool interior = i >= 1 && i + 2 <= n && j >= 1 && j + 2 <= n;
    double f[4][4];
    bool pos = interior;
    for (int a = 0; a < 4; ++a) {
        for (int b = 0; b < 4; ++b) {
            f[a][b] = node(pick(i, a - 1), pick(j, b - 1));
            pos = pos && f[a][b] > 0.0;
        }
    }
    double col[4];
    for (int a = 0; a < 4; ++a) col[a] = detail::interp_axis(f[a], u, pos);
    return detail::interp_axis(col, s, pos);
}

namespace detail {

/// Solves the tridiagonal system with constant off-diagonal -off (off > 0)
/// and diagonal diag[i] in place on rhs. All eliminations add positive
/// terms, so positive data gives componentwise accurate results.
inline void thomas_positive(std::span<const double> diag, double off, std::span<double> rhs,
                            std::vector<double>& scratch) {
    const std::size_t m = rhs.size();
    scratch.resize(m);
    double denom = diag[0];
    scratch[0] = off / denom;  // -c'_0 with c = -off
    rhs[0] /= denom;
    for (std::size_t i = 1; i < m; ++i) {
        denom = diag[i] - off * scratch[i - 1];
        scratch[i] = off / denom;
        rhs[i] = (rhs[i] + off * rhs[i - 1]) / denom;
    }
    for (std::size_t i = m - 1; i-- > 0;) rhs[i] += scratch[i] * rhs[i + 1];
}

inline double max_potential(std::span<const double> v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, x);
    return m;
}

/// Accuracy step min(1e-3, 0.1 / max V) further limited so the explicit
/// half of each step has nonnegative entries, which keeps the solution
/// positive.
inline double auto_time_step(const GridSpec& g, double vmax) {
    const double h = g.h();
    double dt = 1e-3;
    if (vmax > 0.0) dt = std::min(dt, 0.1 / vmax);
    if (g.dim == 1) dt = std::min(dt, 2.0 * h * h / (1.0 + h * h * vmax));
    else dt = std::min(dt, 2.0 * h * h);
    return dt;
}

class Stepper1D {
public:
    Stepper1D(std::span<const double> v_nodes, double h) : v_(v_nodes.begin(), v_nodes.end()), h_(h) {}

    /// theta = 1/2: Crank-Nicolson, theta = 1: backward Euler.
    void step(std::vector<double>& u, double k, double theta) {
        const std::size_t n = u.size() - 1;
        const std::size_t m = n - 1;
        const double lap = 1.0 / (2.0 * h_ * h_);
        rhs_.resize(m);
        diag_.resize(m);
        const double ex = (1.0 - theta) * k;
        for (std::size_t i = 1; i <= m; ++i) {
            const double a = u[i - 1] + u[i + 1];
            rhs_[i - 1] = u[i] * (1.0 - ex * (2.0 * lap + v_[i])) + ex * lap * a;
            diag_[i - 1] = 1.0 + theta * k * (2.0 * lap + v_[i]);
        }
        thomas_positive(diag_, theta * k * lap, rhs_, scratch_);
        for (std::size_t i = 1; i <= m; ++i) u[i] = rhs_[i - 1];
        u[0] = u[n] = 0.0;
    }

private:
    std::vector<double> v_;
    double h_;
    std::vector<double> rhs_, diag_, scratch_;
};

/// Strang-split potential around a Peaceman-Rachford ADI step for Delta/2.
class Stepper2D {
public:
    Stepper2D(std::span<const double> v_nodes, std::size_t n, double h)
        : v_(v_nodes.begin(), v_nodes.end()), n_(n), h_(h) {}

    void step(std::vector<double>& u, double k, bool startup) {
        apply_potential(u, 0.5 * k);
        if (startup) {
            sweep(u, 0, k, 0.0);
            sweep(u, 1, k, 0.0);
        } else {
            sweep(u, 0, 0.5 * k, 0.5 * k);
            sweep(u, 1, 0.5 * k, 0.5 * k);
        }
        apply_potential(u, 0.5 * k);
    }

private:
    void apply_potential(std::vector<double>& u, double k) const {
        for (std::size_t i = 0; i < u.size(); ++i) u[i] *= std::exp(-k * v_[i]);
    }

    /// (I - imp Ax) u' = (I + exp Ay) u with x = axis, y = the other axis.
    void sweep(std::vector<double>& u, int axis, double imp, double exp_k) {
        const std::size_t N = n_ + 1;
        const double lap = 1.0 / (2.0 * h_ * h_);
        const std::size_t m = n_ - 1;
        std::vector<double> out(u.size(), 0.0);
        auto idx = [&](std::size_t a, std::size_t b) { return axis == 0 ? a * N + b : b * N + a; };
        rhs_.resize(m);
        diag_.assign(m, 1.0 + 2.0 * imp * lap);
        for (std::size_t b = 1; b < n_; ++b) {
            for (std::size_t a = 1; a <= m; ++a) {
                const double c = u[idx(a, b)];
                const double other = u[idx(a, b - 1)] + u[idx(a, b + 1)];
                rhs_[a - 1] = c * (1.0 - 2.0 * exp_k * lap) + exp_k * lap * other;
            }
            thomas_positive(diag_, imp * lap, rhs_, scratch_);
            for (std::size_t a = 1; a <= m; ++a) out[idx(a, b)] = rhs_[a - 1];
        }
        u.swap(out);
    }

    std::vector<double> v_;
    std::size_t n_;
    double h_;
    std::vector<double> rhs_, diag_, scratch_;
};

inline void check_grid(const GridSpec& g) {
    if (g.dim != 1 && g.dim != 2) fail(ErrorKind::unsupported_dimension, "pde solver supports d = 1 and d = 2 only");
    if (g.n_cells < 64) fail(ErrorKind::invalid_parameter, "n_cells must be >= 64");
    if (!(g.half_width > 0.0)) fail(ErrorKind::invalid_parameter, "half_width must be positive");
}

/// log of (scale-1 upper envelope at the nearest wall) / (at y,y).
inline double boundary_envelope_log_ratio(const PotentialSpec& spec, double L, double t, std::span<const double> y) {
    double worst = -std::numeric_limits<double>::infinity();
    for (std::size_t axis = 0; axis < y.size(); ++axis) {
        for (double wall : {-L, L}) {
            Point b(y.begin(), y.end());
            b[axis] = wall;
            double lr;
            if (spec.zero) {
                lr = log_gaussian_q(t, b, y) - log_gaussian_q(t, y, y);
            } else {
                const ComparabilityConstants one{};
                lr = envelope_thm1(spec.profile, one, 1.0, t, b, y).log_upper -
                     envelope_thm1(spec.profile, one, 1.0, t, y, y).log_upper;
            }
            worst = std::max(worst, lr);
        }
    }
    return worst;
}

}  // namespace detail

inline constexpr double kTruncationRatio = 1e-14;

/// Smallest half-width (on a 0.25 grid) at which the scale-1 upper envelope
/// at the wall is below 1e-14 of its value at the source.
inline double choose_half_width(const PotentialSpec& spec, double t_max, std::span<const double> y) {
    double L = 1.0;
    for (double c : y) L = std::max(L, std::ceil(4.0 * (std::abs(c) + 1.0)) / 4.0);
    const double target = std::log(kTruncationRatio);
    while (detail::boundary_envelope_log_ratio(spec, L, t_max, y) >= target && L < 1e4) L += 0.25;
    return L;
}

/// Solves d/dt u = (1/2) Delta u - V u on the box from a narrow source at
/// y, returning p(t, ., y) at each time in t_out.
inline std::vector<KernelColumn> evolve(const PotentialSpec& spec, const GridSpec& grid, std::span<const double> y,
                                        std::span<const double> t_out, const EvolveOptions& opt = {}) {
    detail::check_grid(grid);
    if (spec.dim != grid.dim || static_cast<int>(y.size()) != grid.dim) {
        fail(ErrorKind::invalid_parameter, "grid, potential and source dimensions differ");
    }
    const double L = grid.half_width;
    for (double c : y) {
        if (!(std::abs(c) < L)) fail(ErrorKind::domain, "source point outside the box");
    }
    if (t_out.empty()) fail(ErrorKind::precondition, "no output times");
    const double t_start = grid.start_time();
    for (std::size_t i = 0; i < t_out.size(); ++i) {
        if (!(t_out[i] > t_start)) fail(ErrorKind::precondition, "output times must exceed the grid start time");
        if (i > 0 && !(t_out[i] > t_out[i - 1])) fail(ErrorKind::precondition, "output times must be increasing");
    }

    const std::size_t n = grid.n_cells;
    const std::size_t N = n + 1;
    const double h = grid.h();
    const std::size_t total = grid.dim == 1 ? N : N * N;

    std::vector<double> vnode(total);
    std::vector<double> u(total, 0.0);
    const double vy = spec.v(y);
    if (!std::isfinite(vy)) fail(ErrorKind::engine, "potential is non-finite at the source");
    Point xp(static_cast<std::size_t>(grid.dim));
    for (std::size_t k = 0; k < total; ++k) {
        if (grid.dim == 1) {
            xp[0] = -L + static_cast<double>(k) * h;
        } else {
            xp[0] = -L + static_cast<double>(k / N) * h;
            xp[1] = -L + static_cast<double>(k % N) * h;
        }
        const double v = spec.v(xp);
        if (!std::isfinite(v) || v < 0.0) fail(ErrorKind::engine, "potential is non-finite or negative on the grid");
        vnode[k] = v;
        u[k] = std::exp(log_gaussian_q(t_start, xp, y));
    }
    // Walls, then unit discrete mass, then the short-time potential weight.
    for (std::size_t k = 0; k < total; ++k) {
        const std::size_t i = grid.dim == 1 ? k : k / N;
        const std::size_t j = grid.dim == 1 ? 1 : k % N;
        if (i == 0 || i == n || (grid.dim == 2 && (j == 0 || j == n))) u[k] = 0.0;
    }
    double mass0 = 0.0;
    for (double v : u) mass0 += v;
    mass0 *= std::pow(h, grid.dim);
    for (std::size_t k = 0; k < total; ++k) u[k] = u[k] / mass0 * std::exp(-0.5 * t_start * (vnode[k] + vy));

    const double vmax = detail::max_potential(vnode);
    const double dt = grid.dt > 0.0 ? grid.dt : detail::auto_time_step(grid, vmax);

    std::optional<detail::Stepper1D> s1;
    std::optional<detail::Stepper2D> s2;
    if (grid.dim == 1) s1.emplace(vnode, h); else s2.emplace(vnode, n, h);

    std::vector<KernelColumn> out;
    out.reserve(t_out.size());
    double t = t_start;
    int startup_left = std::max(0, opt.rannacher_steps);
    for (double target : t_out) {
        while (target - t > 1e-12 * target) {
            const bool startup = startup_left > 0;
            const double nominal = startup ? 0.5 * dt : dt;
            double k = std::min(nominal, target - t);
            if (target - t - k < 1e-9 * nominal) k = target - t;
            if (s1) s1->step(u, k, startup ? 1.0 : 0.5);
            else s2->step(u, k, startup);
            if (startup) --startup_left;
            t += k;
        }
        t = target;
        KernelColumn col;
        col.t = target;
        col.y.assign(y.begin(), y.end());
        col.dim = grid.dim;
        col.n_cells = n;
        col.half_width = L;
        col.dt = dt;
        col.values = u;
        double lowest = 0.0;
        for (auto& v : col.values) {
            if (v < 0.0) {
                lowest = std::min(lowest, v);
                v = 0.0;
                col.clamped = true;
            }
        }
        col.min_before_clamp = lowest;
        col.truncation_warning =
            detail::boundary_envelope_log_ratio(spec, L, target, y) >= std::log(kTruncationRatio);
        out.push_back(std::move(col));
    }

    if (opt.calibrate && !spec.zero) {
        EvolveOptions free_opt = opt;
        free_opt.calibrate = false;
        GridSpec g2 = grid;
        g2.dt = dt;
        const auto free_cols = evolve(zero_potential(grid.dim), g2, y, t_out, free_opt);
        for (std::size_t c = 0; c < out.size(); ++c) {
            auto& col = out[c];
            for (std::size_t k = 0; k < total; ++k) {
                const double f = free_cols[c].values[k];
                if (!(f > 0.0)) continue;
                if (grid.dim == 1) {
                    xp[0] = col.coord(k);
                } else {
                    xp[0] = col.coord(k / N);
                    xp[1] = col.coord(k % N);
                }
                col.values[k] *= gaussian_q(col.t, xp, y) / f;
            }
            col.calibrated = true;
        }
    }
    for (auto& col : out) {
        double m = 0.0;
        for (double v : col.values) m += v;
        col.mass = m * std::pow(h, grid.dim);
    }
    return out;
}

inline KernelColumn evolve_single(const PotentialSpec& spec, const GridSpec& grid, std::span<const double> y,
                                  double t, const EvolveOptions& opt = {}) {
    const double times[1] = {t};
    return evolve(spec, grid, y, times, opt).front();
}

struct ChapmanReport {
    double max_abs_error = 0.0;
    double max_rel_error = 0.0;
    std::size_t probes = 0;
};

/// Semigroup check p(t,x,y) = int p(t-s,x,z) p(s,z,y) dz. Each probe column
/// has its source at x and time t-s; the composition is a node sum on the
/// shared grid and is compared with the full-time column at x. Probes must
/// lie in the central half of the box.
inline ChapmanReport chapman_check(const KernelColumn& half_from_y, std::span<const KernelColumn> half_from_probes,
                                   const KernelColumn& full_from_y) {
    auto same = [](const KernelColumn& a, const KernelColumn& b) {
        return a.dim == b.dim && a.n_cells == b.n_cells && a.half_width == b.half_width;
    };
    if (!same(half_from_y, full_from_y)) fail(ErrorKind::mismatched_grid, "columns on different grids");
    ChapmanReport rep;
    const double cell = std::pow(half_from_y.h(), half_from_y.dim);
    for (const auto& probe : half_from_probes) {
        if (!same(probe, half_from_y)) fail(ErrorKind::mismatched_grid, "columns on different grids");
        if (std::abs(probe.t + half_from_y.t - full_from_y.t) > 1e-9 * full_from_y.t) {
            fail(ErrorKind::precondition, "half times do not add up to the full time");
        }
        for (double c : probe.y) {
            if (std::abs(c) > 0.5 * probe.half_width) fail(ErrorKind::precondition, "probe outside central half box");
        }
        double s = 0.0;
        for (std::size_t k = 0; k < probe.values.size(); ++k) s += probe.values[k] * half_from_y.values[k];
        s *= cell;
        const double ref = full_from_y.value_at(probe.y);
        const double err = std::abs(s - ref);
        rep.max_abs_error = std::max(rep.max_abs_error, err);
        if (ref > 0.0) rep.max_rel_error = std::max(rep.max_rel_error, err / ref);
        ++rep.probes;
    }
    return rep;
}

struct ConvergenceReport {
    double order = 0.0;
    std::vector<double> errors;  // vs exact, or vs finest when no exact kernel
    std::vector<double> steps;   // h per level
};

using ExactKernel = std::function<double(double t, std::span<const double> x, std::span<const double> y)>;

/// Observed order under three refinements halving h and dt together,
/// measured at coarse nodes of the central half box. With an exact kernel
/// the order is the least-squares slope of log error vs log h; otherwise
/// it is log2(|u1-u3| / |u2-u3| - 1).
inline ConvergenceReport convergence_order(const PotentialSpec& spec, const GridSpec& grid, std::span<const double> y,
                                           double t, const ExactKernel& exact = {}) {
    detail::check_grid(grid);
    const double dt0 = grid.dt > 0.0 ? grid.dt : grid.h();
    std::vector<KernelColumn> cols;
    ConvergenceReport rep;
    for (int level = 0; level < 3; ++level) {
        GridSpec g = grid;
        g.n_cells = grid.n_cells << level;
        g.dt = dt0 / static_cast<double>(1 << level);
        cols.push_back(evolve_single(spec, g, y, t));
        rep.steps.push_back(g.h());
    }
    const std::size_t n = grid.n_cells;
    const double L = grid.half_width;
    auto for_central = [&](auto&& fn) {
        const std::size_t N = n + 1;
        if (grid.dim == 1) {
            for (std::size_t i = 0; i < N; ++i) {
                const double x = cols[0].coord(i);
                if (std::abs(x) <= 0.5 * L) fn(Point{x}, std::array<std::size_t, 3>{i, 2 * i, 4 * i});
            }
        } else {
            for (std::size_t i = 0; i < N; ++i) {
                for (std::size_t j = 0; j < N; ++j) {
                    const double a = cols[0].coord(i), b = cols[0].coord(j);
                    if (std::abs(a) <= 0.5 * L && std::abs(b) <= 0.5 * L) {
                        fn(Point{a, b}, std::array<std::size_t, 3>{i * N + j, (2 * i) * (2 * n + 1) + 2 * j,
                                                                   (4 * i) * (4 * n + 1) + 4 * j});
                    }
                }
            }
        }
    };
    if (exact) {
        std::array<double, 3> e{};
        for_central([&](const Point& x, std::array<std::size_t, 3> k) {
            const double ref = exact(t, x, y);
            for (int l = 0; l < 3; ++l) e[l] = std::max(e[l], std::abs(cols[l].values[k[l]] - ref));
        });
        rep.errors.assign(e.begin(), e.end());
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        for (int l = 0; l < 3; ++l) {
            const double lx = std::log(rep.steps[l]), ly = std::log(e[l]);
            sx += lx; sy += ly; sxx += lx * lx; sxy += lx * ly;
        }
        rep.order = (3 * sxy - sx * sy) / (3 * sxx - sx * sx);
    } else {
        double d1 = 0.0, d2 = 0.0;
        for_central([&](const Point&, std::array<std::size_t, 3> k) {
            d1 = std::max(d1, std::abs(cols[0].values[k[0]] - cols[2].values[k[2]]));
            d2 = std::max(d2, std::abs(cols[1].values[k[1]] - cols[2].values[k[2]]));
        });
        rep.errors = {d1, d2, 0.0};
        rep.order = std::log2(d1 / d2 - 1.0);
    }
    return rep;
}

}  // namespace heatlab
