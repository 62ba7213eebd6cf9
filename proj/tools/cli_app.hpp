#pragma once

#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "config.hpp"
#include "heatlab/heatlab.hpp"

namespace heatlab::cli {

enum ExitCode { kOk = 0, kConfigError = 2, kEngineError = 3, kFitFailure = 4 };

struct Options {
    std::string config;
    bool json = false;
    std::string out;
    std::optional<std::uint64_t> seed;
    unsigned workers = 0;
    // kernel / envelope
    std::string method = "mc";
    double t = 1.0;
    std::vector<double> x, y;
};

struct Context {
    RunConfig cfg;
    PotentialSpec spec;
    std::string out_dir;
    Provenance prov;
};

inline Context make_context(const Options& o) {
    if (o.config.empty()) fail(ErrorKind::config, "--config is required");
    Context c;
    c.cfg = load_config(o.config);
    if (o.seed) {
        c.cfg.seed = *o.seed;
        c.cfg.mc.seed = *o.seed;
    }
    c.cfg.mc.workers = o.workers;
    c.out_dir = c.cfg.outputs;
    if (!o.out.empty()) c.out_dir = o.out;
    if (const char* env = std::getenv("HEATLAB_OUT"); env && *env) c.out_dir = env;
    c.cfg.outputs = c.out_dir;
    c.spec = make_potential(c.cfg);
    c.prov.seed = c.cfg.seed;
    c.prov.config = to_json(c.cfg);
    return c;
}

inline std::string ensure_out(const Context& c) {
    std::error_code ec;
    std::filesystem::create_directories(c.out_dir, ec);
    if (ec) fail(ErrorKind::config, "cannot create output directory " + c.out_dir);
    return c.out_dir;
}

inline Point point_arg(const std::vector<double>& v, int dim, const char* name) {
    if (static_cast<int>(v.size()) != dim) {
        fail(ErrorKind::config, std::string("--") + name + " needs " + std::to_string(dim) + " coordinate(s)");
    }
    return v;
}

/// Closed-form kernel when the potential has one.
inline std::optional<double> oracle_value(const Context& c, double t, const Point& x, const Point& y) {
    if (c.spec.zero) return gaussian_q(t, x, y);
    if (c.cfg.potential.kind == "harmonic" && c.cfg.dim == 1) return mehler_kernel(t, x[0], y[0], c.cfg.potential.omega);
    return std::nullopt;
}

inline int cmd_envelope(const Options& o, std::ostream& out) {
    const Context c = make_context(o);
    const Point x = point_arg(o.x, c.cfg.dim, "x");
    const Point y = point_arg(o.y, c.cfg.dim, "y");
    const double c0 = c.cfg.c0_regime.front();
    const ComparabilityConstants one{};
    json j;
    j["t"] = o.t;
    j["x"] = x;
    j["y"] = y;
    j["c0_regime"] = c0;
    j["regime"] = to_string(regime(c.spec.profile, c0, o.t, x, y));
    j["t0"] = t0(c.spec.profile, std::min(norm(x), norm(y)));
    json env = json::array();
    auto add = [&](const EnvelopePair& e) {
        env.push_back({{"shape", to_string(e.shape_id)}, {"regime", to_string(e.regime)}, {"value", e.upper},
                       {"log_value", e.log_upper}, {"underflow", e.underflow}});
    };
    add(envelope_thm1(c.spec.profile, one, c0, o.t, x, y));
    if (c.spec.profile.kind() == ProfileKind::power) add(envelope_ex11(c.spec.profile.alpha(), one, o.t, x, y));
    if (distance(x, y) > 0.0) add(envelope_green(c.spec.profile, c.cfg.dim, one, x, y));
    j["envelopes"] = env;
    j["seed"] = c.cfg.seed;
    if (o.json) {
        out << j.dump(2) << "\n";
        return kOk;
    }
    out << "regime: " << j["regime"].get<std::string>() << "  (t0 = " << j["t0"].get<double>() << ", C0 = " << c0
        << ")\n";
    out << std::left << std::setw(14) << "shape" << std::setw(12) << "regime" << "value (scale 1)\n";
    for (const auto& e : env) {
        out << std::setw(14) << e["shape"].get<std::string>() << std::setw(12) << e["regime"].get<std::string>()
            << std::setprecision(10) << e["value"].get<double>() << "\n";
    }
    return kOk;
}

inline int cmd_kernel(const Options& o, std::ostream& out) {
    const Context c = make_context(o);
    const Point x = point_arg(o.x, c.cfg.dim, "x");
    const Point y = point_arg(o.y, c.cfg.dim, "y");
    KernelEstimate e;
    if (o.method == "mc") {
        e = kernel_mc(c.spec, c.cfg.mc, o.t, x, y);
    } else if (o.method == "pde") {
        GridSpec g;
        if (c.cfg.grid) {
            g = *c.cfg.grid;
        } else {
            g.dim = c.cfg.dim;
            g.half_width = choose_half_width(c.spec, o.t, y);
            for (double v : x) g.half_width = std::max(g.half_width, std::ceil(4.0 * (std::abs(v) + 1.0)) / 4.0);
            g.n_cells = c.cfg.dim == 1 ? 2048 : 256;
        }
        g.dim = c.cfg.dim;
        EvolveOptions eo;
        const auto col = evolve_single(c.spec, g, y, o.t, eo);
        e.value = col.value_at(x);
        e.std_error = eo.error_model * e.value;
        e.method = Method::pde;
        e.n_steps = static_cast<std::size_t>(std::ceil(o.t / col.dt));
    } else if (o.method == "oracle") {
        const auto v = oracle_value(c, o.t, x, y);
        if (!v) fail(ErrorKind::precondition, "no closed-form kernel for this potential");
        e.value = *v;
        e.method = Method::oracle;
    } else {
        fail(ErrorKind::config, "unknown method '" + o.method + "'");
    }
    json j = to_json(e, o.t, x, y, o.method == "mc" ? c.cfg.mc.n_paths : 0, c.cfg.seed);
    const auto ref = oracle_value(c, o.t, x, y);
    if (ref && o.method != "oracle") {
        j["oracle"] = *ref;
        j["rel_error"] = std::abs(e.value - *ref) / *ref;
    }
    const std::string dir = ensure_out(c);
    const std::string path = dir + "/kernel_runs.csv";
    const bool fresh = !std::filesystem::exists(path);
    {
        std::ofstream f(path, std::ios::app);
        if (!f) fail(ErrorKind::config, "cannot write " + path);
        f << std::setprecision(17);
        if (fresh) {
            heatlab::detail::write_preamble(f, c.prov);
            f << "record\n";
        }
        f << j.dump() << "\n";
    }
    if (o.json) {
        out << j.dump(2) << "\n";
        return kOk;
    }
    out << std::setprecision(12) << "method " << to_string(e.method) << "  value " << e.value << "  stderr "
        << e.std_error << "  n_steps " << e.n_steps << "\n";
    if (j.contains("oracle")) {
        out << "oracle " << j["oracle"].get<double>() << "  relative error " << j["rel_error"].get<double>() << "\n";
    }
    return kOk;
}

inline int cmd_verify(const Options& o, std::ostream& out, std::ostream& err) {
    const Context c = make_context(o);
    const auto& cfg = c.cfg;
    if (cfg.sweep.t_list.empty() || cfg.sweep.x_list.empty() || cfg.sweep.y_list.empty()) {
        fail(ErrorKind::config, "verify needs sweep.t, sweep.x and sweep.y");
    }
    std::vector<Method> engines;
    for (const auto& e : cfg.engines) engines.push_back(e == "mc" ? Method::mc_bridge : Method::pde);
    SweepOptions so;
    so.mc = cfg.mc;
    so.grid = cfg.grid;
    if (so.grid) so.grid->dim = cfg.dim;
    const std::string dir = ensure_out(c);
    std::ostringstream sink;
    std::ostream& table = o.json ? sink : out;

    FitOptions fo;
    fo.scale_grid = default_scale_grid(cfg.verify.scale_count, cfg.verify.scale_min, cfg.verify.scale_max);

    json report;
    report["seed"] = cfg.seed;
    report["config"] = c.prov.config;
    if (!c.spec.zero) {
        const auto mc = classify_t0(c.spec.profile, 1e8, 2048);
        report["t0_class"] = to_string(mc.label);
        report["outside_proved_scope"] = mc.label == Monotonicity::indeterminate;
        if (mc.label == Monotonicity::indeterminate) err << "warning: t0 is neither almost increasing nor decreasing\n";
    }
    report["fits"] = json::array();
    bool engine_failed = false;
    bool all_ok = true;
    std::vector<CloudRow> cloud;
    for (double c0 : cfg.c0_regime) {
        const auto records = regime_sweep(c.spec, engines, cfg.sweep, c0, so);
        json errors = json::array();
        for (const auto& r : records) {
            for (const auto& e : r.errors) errors.push_back({{"t", r.t}, {"x", r.x}, {"y", r.y}, {"error", e}});
        }
        if (!errors.empty()) {
            engine_failed = true;
            err << errors.size() << " engine errors at C0 = " << c0 << "\n";
        }
        for (const auto& shape : cfg.verify.shapes) {
            if (shape == "ex11" && c.spec.profile.kind() != ProfileKind::power) {
                fail(ErrorKind::config, "ex11 shape needs a power potential");
            }
            for (Regime reg : {Regime::small_time, Regime::large_time}) {
                for (Method m : engines) {
                    // ex11 is split at its own threshold, which is the t0 split at C0 = 1.
                    std::vector<DataPoint> pts;
                    if (shape == "ex11") {
                        const double alpha = c.spec.profile.alpha();
                        for (const auto& p : to_points(records, std::nullopt, m)) {
                            const bool large = ex11_case(alpha, p.t, p.x, p.y).large_branch;
                            if (large == (reg == Regime::large_time)) pts.push_back(p);
                        }
                    } else {
                        pts = to_points(records, reg, m);
                    }
                    if (pts.empty()) continue;
                    const ShapeEvaluator se =
                        shape == "ex11" ? ex11_shape(c.spec.profile.alpha()) : thm1_shape(c.spec.profile, reg);
                    json entry = {{"c0_regime", c0}, {"shape", shape}, {"regime", to_string(reg)},
                                  {"engine", to_string(m)}};
                    try {
                        FitOptions fo2 = fo;
                        fo2.min_points = std::min<std::size_t>(fo.min_points, pts.size());
                        const FitReport rep = fit(se, pts, fo2);
                        entry["report"] = to_json(rep);
                        all_ok = all_ok && rep.success;
                        append_cloud(cloud, pts, &rep);
                        table << std::left << std::setw(6) << shape << " " << std::setw(11) << to_string(reg)
                            << " C0=" << c0 << " " << std::setw(10) << to_string(m)
                            << (rep.success ? " ok  " : " FAIL") << " c=(" << rep.constants.c1 << ", "
                            << rep.constants.c2 << ", " << rep.constants.c3 << ", " << rep.constants.c4
                            << ") band " << rep.band_width << "\n";
                    } catch (const Error& e) {
                        entry["error"] = e.what();
                        all_ok = false;
                        append_cloud(cloud, pts, nullptr);
                        table << shape << " " << to_string(reg) << " C0=" << c0 << " error: " << e.what() << "\n";
                    }
                    report["fits"].push_back(entry);
                }
            }
        }
        if (!errors.empty()) report["engine_errors"] = errors;
    }
    write_json(dir + "/verify_report.json", report);
    write_points_csv(dir + "/points.csv", cloud, c.prov);
    if (o.json) out << report.dump(2) << "\n";
    if (engine_failed) return kEngineError;
    return all_ok ? kOk : kFitFailure;
}

inline int cmd_green(const Options& o, std::ostream& out) {
    const Context c = make_context(o);
    std::vector<Point> xs = c.cfg.green.x, ys = c.cfg.green.y;
    if (!o.x.empty() || !o.y.empty()) {
        xs = {point_arg(o.x, c.cfg.dim, "x")};
        ys = {point_arg(o.y, c.cfg.dim, "y")};
    }
    if (xs.empty()) fail(ErrorKind::config, "green needs green.x / green.y or --x / --y");
    GreenOptions go;
    go.rel_tol = c.cfg.green.rel_tol;
    go.mc = c.cfg.mc;
    if (c.cfg.grid) {
        go.grid = c.cfg.grid;
        go.grid->dim = c.cfg.dim;
    }
    const Engine engine = c.cfg.green.engine == "mc" ? Engine::mc : Engine::pde;
    std::vector<GreenRow> rows;
    std::vector<DataPoint> pts;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        GreenRow r{xs[i], ys[i], green(c.spec, engine, xs[i], ys[i], go), 0.0, 0.0};
        rows.push_back(r);
        pts.push_back({0.0, xs[i], ys[i], r.estimate.value, r.estimate.error_bound,
                       engine == Engine::mc ? Method::mc_bridge : Method::pde, Regime::large_time});
    }
    json j;
    j["seed"] = c.cfg.seed;
    if (!c.spec.zero) {
        const auto label = classify_t0(c.spec.profile, 1e8, 2048).label;
        j["t0_class"] = to_string(label);
        j["outside_proved_scope"] = label == Monotonicity::indeterminate;
    }
    j["rows"] = json::array();
    int code = kOk;
    std::optional<FitReport> rep;
    if (!c.spec.zero && pts.size() >= FitOptions{}.min_points) {
        FitOptions fo;
        rep = fit(green_shape(c.spec.profile, c.cfg.dim), pts, fo);
        j["fit"] = to_json(*rep);
        if (!rep->success) code = kFitFailure;
    }
    for (std::size_t i = 0; i < rows.size(); ++i) {
        auto& r = rows[i];
        if (c.spec.zero && c.cfg.dim >= 3) {
            r.env_lower = r.env_upper = free_green(r.x, r.y);
        } else {
            const ComparabilityConstants k = rep ? rep->constants : ComparabilityConstants{};
            const auto e = envelope_green(c.spec.profile, c.cfg.dim, k, r.x, r.y);
            r.env_lower = e.lower;
            r.env_upper = e.upper;
        }
        json row = to_json(r.estimate);
        row["x"] = r.x;
        row["y"] = r.y;
        row["env_lower"] = r.env_lower;
        row["env_upper"] = r.env_upper;
        j["rows"].push_back(row);
    }
    const std::string dir = ensure_out(c);
    write_green_csv(dir + "/green.csv", rows, c.prov);
    if (o.json) {
        out << j.dump(2) << "\n";
        return code;
    }
    out << std::setprecision(10);
    for (const auto& r : rows) {
        out << "x=" << format_point(r.x) << " y=" << format_point(r.y) << "  G=" << r.estimate.value
            << "  err<=" << r.estimate.error_bound << "  envelope [" << r.env_lower << ", " << r.env_upper << "]\n";
    }
    if (rep) out << "green fit " << (rep->success ? "ok" : "FAIL") << " band " << rep->band_width << "\n";
    return code;
}

/// Quick internal checks of each engine against closed forms.
inline int cmd_selftest(const Options& o, std::ostream& out) {
    int failures = 0;
    auto check = [&](const std::string& name, bool ok, const std::string& detail) {
        out << (ok ? "PASS " : "FAIL ") << name << "  " << detail << "\n";
        if (!ok) ++failures;
    };
    const Point p0{0.0}, p1{1.0};
    {
        McConfig mc;
        mc.n_paths = 1000;
        mc.workers = o.workers;
        const auto e = kernel_mc(zero_potential(1), mc, 1.0, p0, p1);
        const double q = gaussian_q(1.0, p0, p1);
        std::ostringstream d;
        d << "mc " << e.value << " vs " << q;
        check("free kernel mc", e.value == q && e.std_error == 0.0, d.str());
    }
    {
        GridSpec g{1, 5.0, 1024, 0.0};
        const auto col = evolve_single(zero_potential(1), g, p0, 1.0);
        double worst = 0.0;
        for (std::size_t i = 0; i < col.values.size(); ++i) {
            const double x = col.coord(i);
            if (std::abs(x) > 2.5) continue;
            const double q = gaussian_q(1.0, Point{x}, p0);
            worst = std::max(worst, std::abs(col.values[i] - q) / q);
        }
        std::ostringstream d;
        d << "max rel error " << worst;
        check("free kernel pde", worst < 1e-3, d.str());
    }
    {
        GridSpec g{1, 6.0, 2048, 0.0};
        const auto spec = harmonic_potential(1, 1.0);
        const auto col = evolve_single(spec, g, p0, 1.0);
        const double m = mehler_kernel(1.0, 1.0, 0.0, 1.0);
        const double v = col.value_at(p1);
        std::ostringstream d;
        d << "pde " << v << " vs mehler " << m;
        check("mehler pde", std::abs(v - m) / m < 1e-3, d.str());
    }
    {
        McConfig a, b;
        a.n_paths = b.n_paths = 2000;
        a.workers = 1;
        b.workers = 3;
        const auto spec = power_potential(1, 2.0);
        const auto ea = kernel_mc(spec, a, 0.5, p0, p1);
        const auto eb = kernel_mc(spec, b, 0.5, p0, p1);
        check("mc determinism", ea.value == eb.value && ea.std_error == eb.std_error, "workers 1 vs 3");
    }
    {
        GridSpec g{1, 6.0, 128, 0.0};
        const auto rep = convergence_order(power_potential(1, 2.0), g, p0, 1.0);
        std::ostringstream d;
        d << "order " << rep.order;
        check("pde convergence", rep.order > 1.7 && rep.order < 2.3, d.str());
    }
    out << (failures == 0 ? "selftest passed" : "selftest failed") << "\n";
    return failures == 0 ? kOk : kEngineError;
}

/// Entry point shared by the binary and the tests.
inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"heatlab: heat kernels of -1/2 Delta + V"};
    app.require_subcommand(1);
    Options o;
    auto common = [&o](CLI::App* sub, bool needs_config) {
        auto* opt = sub->add_option("--config", o.config, "YAML run configuration");
        if (needs_config) opt->required();
        sub->add_flag("--json", o.json, "print JSON instead of a table");
        sub->add_option("--out", o.out, "output directory (HEATLAB_OUT overrides)");
        sub->add_option("--seed", o.seed, "override the config seed");
        sub->add_option("--workers", o.workers, "worker threads (0: all cores)");
    };
    auto points = [&o](CLI::App* sub) {
        sub->add_option("--t", o.t, "time")->required();
        sub->add_option("--x", o.x, "point x, comma separated")->delimiter(',')->required();
        sub->add_option("--y", o.y, "point y, comma separated")->delimiter(',')->required();
    };
    auto* env = app.add_subcommand("envelope", "regime and envelope values at scale 1");
    common(env, true);
    points(env);
    auto* ker = app.add_subcommand("kernel", "one kernel estimate");
    common(ker, true);
    points(ker);
    ker->add_option("--method", o.method, "mc | pde | oracle")->check(CLI::IsMember({"mc", "pde", "oracle"}));
    auto* ver = app.add_subcommand("verify", "sweep, fit envelopes, write reports");
    common(ver, true);
    auto* grn = app.add_subcommand("green", "Green's function with envelope comparison");
    common(grn, true);
    grn->add_option("--x", o.x, "point x, comma separated")->delimiter(',');
    grn->add_option("--y", o.y, "point y, comma separated")->delimiter(',');
    auto* self = app.add_subcommand("selftest", "engine checks against closed forms");
    common(self, false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e, out, err);
        return rc == 0 ? kOk : kConfigError;
    }
    try {
        if (env->parsed()) return cmd_envelope(o, out);
        if (ker->parsed()) return cmd_kernel(o, out);
        if (ver->parsed()) return cmd_verify(o, out, err);
        if (grn->parsed()) return cmd_green(o, out);
        return cmd_selftest(o, out);
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return e.kind() == ErrorKind::config ? kConfigError : kEngineError;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kEngineError;
    }
}

}  // namespace heatlab::cli
