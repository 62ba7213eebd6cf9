#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "heatlab/envelope.hpp"
#include "heatlab/error.hpp"
#include "heatlab/mc_feynman_kac.hpp"
#include "heatlab/parallel.hpp"
#include "heatlab/pde_solver.hpp"
#include "heatlab/point.hpp"
#include "heatlab/potential.hpp"

namespace heatlab {

/// One numerical kernel value. std_error is the mc standard error or the
/// pde error bound; 0 for closed forms.
struct DataPoint {
    double t = 0.0;
    Point x;
    Point y;
    double value = 0.0;
    double std_error = 0.0;
    Method method = Method::oracle;
    Regime regime = Regime::small_time;
};

/// log of the envelope shape at exponent scale c.
using LogShape = std::function<double(double t, std::span<const double> x, std::span<const double> y, double scale)>;

struct ShapeEvaluator {
    ShapeId id = ShapeId::custom;
    std::string name;
    LogShape log_shape;
};

inline ShapeEvaluator thm1_shape(const ProfileG& profile, Regime reg) {
    if (reg == Regime::small_time) {
        return {ShapeId::thm1_small, "thm1_small", [profile](double t, auto x, auto y, double s) {
                    return log_shape_small_time(profile, t, x, y, s);
                }};
    }
    return {ShapeId::thm1_large, "thm1_large", [profile](double t, auto x, auto y, double s) {
                return log_shape_large_time(profile, t, x, y, s);
            }};
}

/// Both near and far forms, selected per point.
inline ShapeEvaluator ex11_shape(double alpha) {
    return {ShapeId::ex11_near, "ex11", [alpha](double t, auto x, auto y, double s) {
                return log_shape_ex11(alpha, t, x, y, s);
            }};
}

inline ShapeEvaluator green_shape(const ProfileG& profile, int d) {
    return {ShapeId::green_gamma, "green_gamma", [profile, d](double, auto x, auto y, double s) {
                return log_shape_green(profile, d, x, y, s);
            }};
}

/// 33 log-spaced values in [1/8, 8].
inline std::vector<double> default_scale_grid(std::size_t n = 33, double lo = 0.125, double hi = 8.0) {
    std::vector<double> g(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double f = n == 1 ? 0.5 : static_cast<double>(i) / static_cast<double>(n - 1);
        g[i] = std::exp(std::log(lo) + f * (std::log(hi) - std::log(lo)));
    }
    if (n % 2 == 1 && lo * hi == 1.0) g[n / 2] = 1.0;
    return g;
}

struct FitOptions {
    std::vector<double> scale_grid = default_scale_grid();
    double mc_sigmas = 3.0;
    double pde_sigmas = 1.0;
    std::size_t min_points = 10;
    double underflow_log = -700.0;  // relative to the largest value
};

struct PointFit {
    bool used = false;
    bool underflow = false;
    bool violating = false;
    double env_lower = 0.0;
    double env_upper = 0.0;
    double ratio_lower = 0.0;  // value / env_lower
    double ratio_upper = 0.0;  // env_upper / value
};

struct FitReport {
    ShapeId shape_id = ShapeId::custom;
    std::string shape_name;
    ComparabilityConstants constants{0.0, 1.0, std::numeric_limits<double>::infinity(), 1.0};
    std::size_t points_total = 0;
    std::size_t points_violating = 0;
    std::size_t underflow_skipped = 0;
    double worst_lower_ratio = 0.0;
    double worst_upper_ratio = 0.0;
    double band_width = std::numeric_limits<double>::infinity();  // max upper/lower
    std::map<std::string, std::size_t> regime_breakdown;
    bool success = false;
    std::vector<PointFit> per_point;
};

/// Two-sided fit. For each scale c2, log c1(c2) is the smallest log-gap of
/// the widened-down data under the shape; for c4, log c3(c4) the largest
/// gap of the widened-up data. The pair (c2, c4) is chosen to minimize the
/// largest per-point log band width, ties going to scales nearest 1.
inline FitReport fit(const ShapeEvaluator& shape, std::span<const DataPoint> points, const FitOptions& opt = {}) {
    if (opt.scale_grid.empty()) fail(ErrorKind::invalid_parameter, "empty scale grid");
    for (double s : opt.scale_grid) {
        if (!(s > 0.0)) fail(ErrorKind::invalid_parameter, "scale grid values must be positive");
    }
    FitReport rep;
    rep.shape_id = shape.id;
    rep.shape_name = shape.name;
    rep.points_total = points.size();
    rep.per_point.resize(points.size());

    double peak = 0.0;
    for (const auto& p : points) peak = std::max(peak, p.value);
    std::vector<std::size_t> used;
    for (std::size_t i = 0; i < points.size(); ++i) {
        const auto& p = points[i];
        if (!(p.value > 0.0) || !(peak > 0.0) || std::log(p.value / peak) < opt.underflow_log) {
            rep.per_point[i].underflow = true;
            ++rep.underflow_skipped;
            continue;
        }
        used.push_back(i);
        rep.per_point[i].used = true;
    }
    if (used.empty()) fail(ErrorKind::empty_fit, "no points above the underflow floor");
    if (used.size() < opt.min_points) {
        fail(ErrorKind::precondition, "fit needs at least " + std::to_string(opt.min_points) + " usable points");
    }
    for (auto i : used) ++rep.regime_breakdown[to_string(points[i].regime)];

    const std::size_t m = used.size();
    const std::size_t ng = opt.scale_grid.size();
    std::vector<double> lo(m), hi(m);
    for (std::size_t k = 0; k < m; ++k) {
        const auto& p = points[used[k]];
        const double sig = p.method == Method::pde ? opt.pde_sigmas
                         : p.method == Method::oracle ? 0.0 : opt.mc_sigmas;
        const double w = sig * p.std_error;
        lo[k] = p.value - w > 0.0 ? std::log(p.value - w) : -std::numeric_limits<double>::infinity();
        hi[k] = std::log(p.value + w);
        if (std::isinf(lo[k])) {
            rep.per_point[used[k]].violating = true;
            ++rep.points_violating;
        }
    }
    // ls[g * m + k] = log shape of point k at scale g.
    std::vector<double> ls(ng * m);
    for (std::size_t g = 0; g < ng; ++g) {
        for (std::size_t k = 0; k < m; ++k) {
            const auto& p = points[used[k]];
            ls[g * m + k] = shape.log_shape(p.t, p.x, p.y, opt.scale_grid[g]);
        }
    }
    std::vector<double> a(ng), b(ng);
    for (std::size_t g = 0; g < ng; ++g) {
        double amin = std::numeric_limits<double>::infinity();
        double bmax = -std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < m; ++k) {
            amin = std::min(amin, lo[k] - ls[g * m + k]);
            bmax = std::max(bmax, hi[k] - ls[g * m + k]);
        }
        a[g] = amin;
        b[g] = bmax;
    }

    double best = std::numeric_limits<double>::infinity();
    double best_dist = std::numeric_limits<double>::infinity();
    std::size_t g2 = 0, g4 = 0;
    bool found = false;
    for (std::size_t i = 0; i < ng; ++i) {
        if (!std::isfinite(a[i])) continue;
        for (std::size_t j = 0; j < ng; ++j) {
            if (!std::isfinite(b[j])) continue;
            double spread = -std::numeric_limits<double>::infinity();
            for (std::size_t k = 0; k < m; ++k) spread = std::max(spread, ls[j * m + k] - ls[i * m + k]);
            const double w = b[j] - a[i] + spread;
            const double dist = std::abs(std::log(opt.scale_grid[i])) + std::abs(std::log(opt.scale_grid[j]));
            const double tol = 1e-12 * std::max(1.0, std::abs(w));
            if (w < best - tol || (std::abs(w - best) <= tol && dist < best_dist)) {
                best = w;
                best_dist = dist;
                g2 = i;
                g4 = j;
                found = true;
            }
        }
    }
    if (!found) {
        rep.success = false;
        return rep;
    }
    rep.constants = {std::exp(a[g2]), opt.scale_grid[g2], std::exp(b[g4]), opt.scale_grid[g4]};
    rep.band_width = std::exp(best);
    rep.worst_lower_ratio = std::numeric_limits<double>::infinity();
    rep.worst_upper_ratio = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < m; ++k) {
        const auto& p = points[used[k]];
        auto& pf = rep.per_point[used[k]];
        const double l_lo = a[g2] + ls[g2 * m + k];
        const double l_up = b[g4] + ls[g4 * m + k];
        pf.env_lower = std::exp(l_lo);
        pf.env_upper = std::exp(l_up);
        pf.ratio_lower = std::exp(std::log(p.value) - l_lo);
        pf.ratio_upper = std::exp(l_up - std::log(p.value));
        if (pf.ratio_lower < 1.0 - 1e-12 || pf.ratio_upper < 1.0 - 1e-12) {
            if (!pf.violating) ++rep.points_violating;
            pf.violating = true;
        }
        rep.worst_lower_ratio = std::min(rep.worst_lower_ratio, pf.ratio_lower);
        rep.worst_upper_ratio = std::min(rep.worst_upper_ratio, pf.ratio_upper);
    }
    rep.success = rep.constants.c1 > 0.0 && std::isfinite(rep.constants.c3) && rep.points_violating == 0;
    return rep;
}

struct SweepGrid {
    std::vector<double> t_list;
    std::vector<Point> x_list;
    std::vector<Point> y_list;
};

struct SweepOptions {
    McConfig mc;
    std::optional<GridSpec> grid;  // auto per source when unset
    EvolveOptions evolve;
    double target_h = 0.0;         // auto: 0.01 in d=1, 0.05 in d=2
};

struct SweepRecord {
    double t = 0.0;
    Point x;
    Point y;
    Regime regime = Regime::small_time;
    std::vector<KernelEstimate> estimates;
    std::vector<std::string> errors;  // "engine: message"
};

namespace detail {

inline GridSpec auto_grid(const PotentialSpec& spec, const SweepOptions& opt, double t_max, std::span<const double> y,
                          std::span<const Point> xs) {
    if (opt.grid) return *opt.grid;
    GridSpec g;
    g.dim = spec.dim;
    g.half_width = choose_half_width(spec, t_max, y);
    for (const auto& x : xs) {
        for (double c : x) g.half_width = std::max(g.half_width, std::ceil(4.0 * (std::abs(c) + 1.0)) / 4.0);
    }
    const double h = opt.target_h > 0.0 ? opt.target_h : (spec.dim == 1 ? 0.01 : 0.05);
    std::size_t n = 64;
    while (2.0 * g.half_width / static_cast<double>(n) > h) n *= 2;
    g.n_cells = n;
    return g;
}

}  // namespace detail

/// Evaluates the engines at every grid point and labels regimes. Engine
/// errors are recorded per point and the sweep continues.
inline std::vector<SweepRecord> regime_sweep(const PotentialSpec& spec, std::span<const Method> engines,
                                             const SweepGrid& grid, double c0_regime, const SweepOptions& opt = {}) {
    if (grid.t_list.empty() || grid.x_list.empty() || grid.y_list.empty()) {
        fail(ErrorKind::precondition, "sweep grid is empty");
    }
    if (engines.empty()) fail(ErrorKind::precondition, "no engines requested");
    std::vector<SweepRecord> out;
    for (const auto& y : grid.y_list) {
        for (const auto& x : grid.x_list) {
            for (double t : grid.t_list) {
                SweepRecord r;
                r.t = t;
                r.x = x;
                r.y = y;
                r.regime = regime(spec.profile, c0_regime, t, x, y);
                out.push_back(std::move(r));
            }
        }
    }
    std::vector<double> ts(grid.t_list);
    std::sort(ts.begin(), ts.end());
    ts.erase(std::unique(ts.begin(), ts.end()), ts.end());
    for (Method m : engines) {
        if (m == Method::pde) {
            std::size_t base = 0;
            for (const auto& y : grid.y_list) {
                std::vector<KernelColumn> cols;
                std::string err;
                try {
                    const GridSpec g = detail::auto_grid(spec, opt, ts.back(), y, grid.x_list);
                    cols = evolve(spec, g, y, ts, opt.evolve);
                } catch (const Error& e) {
                    err = e.what();
                }
                for (std::size_t k = 0; k < grid.x_list.size() * grid.t_list.size(); ++k) {
                    auto& rec = out[base + k];
                    if (!err.empty()) {
                        rec.errors.push_back("pde: " + err);
                        continue;
                    }
                    try {
                        const auto it = std::lower_bound(ts.begin(), ts.end(), rec.t);
                        const auto& col = cols[static_cast<std::size_t>(it - ts.begin())];
                        KernelEstimate e;
                        e.value = col.value_at(rec.x);
                        e.std_error = opt.evolve.error_model * e.value;
                        e.method = Method::pde;
                        e.n_steps = static_cast<std::size_t>(std::ceil(rec.t / col.dt));
                        rec.estimates.push_back(e);
                    } catch (const Error& e) {
                        rec.errors.push_back(std::string("pde: ") + e.what());
                    }
                }
                base += grid.x_list.size() * grid.t_list.size();
            }
        } else if (m == Method::mc_bridge) {
            for (auto& rec : out) {
                try {
                    rec.estimates.push_back(kernel_mc(spec, opt.mc, rec.t, rec.x, rec.y));
                } catch (const Error& e) {
                    rec.errors.push_back(std::string("mc: ") + e.what());
                }
            }
        } else {
            fail(ErrorKind::invalid_parameter, std::string("engine not usable in a sweep: ") + to_string(m));
        }
    }
    return out;
}

/// Flattens sweep records into fit input, optionally restricted to a regime
/// and an engine.
inline std::vector<DataPoint> to_points(std::span<const SweepRecord> records, std::optional<Regime> only = {},
                                        std::optional<Method> method = {}) {
    std::vector<DataPoint> out;
    for (const auto& r : records) {
        if (only && r.regime != *only) continue;
        for (const auto& e : r.estimates) {
            if (method && e.method != *method) continue;
            out.push_back({r.t, r.x, r.y, e.value, e.std_error, e.method, r.regime});
        }
    }
    return out;
}

}  // namespace heatlab
