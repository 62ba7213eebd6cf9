#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <yaml-cpp/yaml.h>

#include "heatlab/heatlab.hpp"

namespace heatlab::cli {

struct PotentialDecl {
    std::string kind = "power";  // power | harmonic | exponential | zero | tabulated
    double alpha = 2.0;
    double coefficient = 1.0;
    double omega = 1.0;
    double rate = 1.0;
    std::string table;
};

struct GreenDecl {
    std::vector<Point> x;
    std::vector<Point> y;
    double rel_tol = 1e-2;
    std::string engine = "pde";
};

struct VerifyDecl {
    std::vector<std::string> shapes{"thm1"};
    double scale_min = 0.125;
    double scale_max = 8.0;
    std::size_t scale_count = 33;
};

struct RunConfig {
    PotentialDecl potential;
    int dim = 1;
    std::vector<double> c0_regime{1.0};
    std::vector<std::string> engines{"pde"};
    McConfig mc;
    std::optional<GridSpec> grid;
    SweepGrid sweep;
    GreenDecl green;
    VerifyDecl verify;
    std::string outputs = "out";
    std::uint64_t seed = 1;
    std::string source;  // path the config was read from
};

namespace detail {

[[noreturn]] inline void config_error(const YAML::Node& n, const std::string& msg) {
    const auto m = n.Mark();
    std::string where = m.line >= 0 ? "line " + std::to_string(m.line + 1) + ": " : "";
    fail(ErrorKind::config, where + msg);
}

inline void check_keys(const YAML::Node& n, const std::string& section, const std::set<std::string>& allowed) {
    if (!n.IsMap()) config_error(n, "'" + section + "' must be a mapping");
    for (const auto& kv : n) {
        const auto key = kv.first.as<std::string>();
        if (!allowed.count(key)) {
            config_error(kv.first, "unknown key '" + (section.empty() ? key : section + "." + key) + "'");
        }
    }
}

template <class T>
T get(const YAML::Node& n, const std::string& name) {
    try {
        return n.as<T>();
    } catch (const YAML::Exception&) {
        config_error(n, "bad value for '" + name + "'");
    }
}

inline Point get_point(const YAML::Node& n, const std::string& name, int dim) {
    Point p;
    if (n.IsScalar()) p.push_back(get<double>(n, name));
    else if (n.IsSequence()) {
        for (const auto& c : n) p.push_back(get<double>(c, name));
    } else {
        config_error(n, "'" + name + "' must be a number or a list");
    }
    if (static_cast<int>(p.size()) != dim) config_error(n, "'" + name + "' has the wrong dimension");
    return p;
}

inline std::vector<Point> get_points(const YAML::Node& n, const std::string& name, int dim) {
    if (!n.IsSequence()) config_error(n, "'" + name + "' must be a list");
    std::vector<Point> out;
    for (const auto& e : n) out.push_back(get_point(e, name, dim));
    return out;
}

inline std::vector<double> get_list(const YAML::Node& n, const std::string& name) {
    std::vector<double> out;
    if (n.IsScalar()) out.push_back(get<double>(n, name));
    else if (n.IsSequence()) {
        for (const auto& e : n) out.push_back(get<double>(e, name));
    } else {
        config_error(n, "'" + name + "' must be a number or a list");
    }
    return out;
}

inline std::vector<std::string> get_names(const YAML::Node& n, const std::string& name,
                                          const std::set<std::string>& allowed) {
    std::vector<std::string> out;
    if (!n.IsSequence()) config_error(n, "'" + name + "' must be a list");
    for (const auto& e : n) {
        auto s = get<std::string>(e, name);
        if (!allowed.count(s)) config_error(e, "unknown value '" + s + "' in '" + name + "'");
        out.push_back(s);
    }
    return out;
}

}  // namespace detail

inline RunConfig parse_config(const YAML::Node& root) {
    using namespace detail;
    RunConfig c;
    if (!root || root.IsNull()) fail(ErrorKind::config, "empty config");
    check_keys(root, "", {"potential", "dim", "c0_regime", "engines", "mc", "grid", "sweep", "green", "verify",
                          "outputs", "seed"});
    if (root["dim"]) c.dim = get<int>(root["dim"], "dim");
    if (c.dim < 1 || c.dim > 3) config_error(root["dim"], "'dim' must be 1, 2 or 3");
    if (const auto p = root["potential"]) {
        check_keys(p, "potential", {"kind", "alpha", "coefficient", "omega", "rate", "table"});
        if (p["kind"]) {
            c.potential.kind = get<std::string>(p["kind"], "potential.kind");
            static const std::set<std::string> kinds{"power", "harmonic", "exponential", "zero", "tabulated"};
            if (!kinds.count(c.potential.kind)) config_error(p["kind"], "unknown potential kind '" + c.potential.kind + "'");
        }
        if (p["alpha"]) c.potential.alpha = get<double>(p["alpha"], "potential.alpha");
        if (p["coefficient"]) c.potential.coefficient = get<double>(p["coefficient"], "potential.coefficient");
        if (p["omega"]) c.potential.omega = get<double>(p["omega"], "potential.omega");
        if (p["rate"]) c.potential.rate = get<double>(p["rate"], "potential.rate");
        if (p["table"]) c.potential.table = get<std::string>(p["table"], "potential.table");
        if (c.potential.kind == "tabulated" && c.potential.table.empty()) {
            config_error(p, "'potential.table' is required for a tabulated profile");
        }
    } else {
        fail(ErrorKind::config, "missing key 'potential'");
    }
    if (root["c0_regime"]) {
        c.c0_regime = get_list(root["c0_regime"], "c0_regime");
        for (double v : c.c0_regime) {
            if (!(v > 0.0)) config_error(root["c0_regime"], "'c0_regime' values must be positive");
        }
    }
    if (root["engines"]) {
        c.engines = get_names(root["engines"], "engines", {"mc", "pde"});
        if (c.engines.empty()) config_error(root["engines"], "'engines' needs at least one engine");
    }
    if (root["seed"]) c.seed = get<std::uint64_t>(root["seed"], "seed");
    if (const auto m = root["mc"]) {
        check_keys(m, "mc", {"n_paths", "n_steps", "antithetic", "refine", "max_steps"});
        if (m["n_paths"]) c.mc.n_paths = get<std::size_t>(m["n_paths"], "mc.n_paths");
        if (m["n_steps"]) c.mc.n_steps = get<std::size_t>(m["n_steps"], "mc.n_steps");
        if (m["antithetic"]) c.mc.antithetic = get<bool>(m["antithetic"], "mc.antithetic");
        if (m["refine"]) c.mc.refine = get<bool>(m["refine"], "mc.refine");
        if (m["max_steps"]) c.mc.max_steps = get<std::size_t>(m["max_steps"], "mc.max_steps");
    }
    if (const auto g = root["grid"]) {
        check_keys(g, "grid", {"half_width", "n_cells", "dt"});
        GridSpec gs;
        gs.dim = c.dim;
        if (g["half_width"]) gs.half_width = get<double>(g["half_width"], "grid.half_width");
        if (g["n_cells"]) gs.n_cells = get<std::size_t>(g["n_cells"], "grid.n_cells");
        if (g["dt"]) gs.dt = get<double>(g["dt"], "grid.dt");
        if (gs.n_cells < 64) config_error(g, "'grid.n_cells' must be >= 64");
        c.grid = gs;
    }
    if (const auto s = root["sweep"]) {
        check_keys(s, "sweep", {"t", "x", "y"});
        if (s["t"]) c.sweep.t_list = get_list(s["t"], "sweep.t");
        if (s["x"]) c.sweep.x_list = get_points(s["x"], "sweep.x", c.dim);
        if (s["y"]) c.sweep.y_list = get_points(s["y"], "sweep.y", c.dim);
    }
    if (const auto g = root["green"]) {
        check_keys(g, "green", {"x", "y", "rel_tol", "engine"});
        if (g["x"]) c.green.x = get_points(g["x"], "green.x", c.dim);
        if (g["y"]) c.green.y = get_points(g["y"], "green.y", c.dim);
        if (g["rel_tol"]) c.green.rel_tol = get<double>(g["rel_tol"], "green.rel_tol");
        if (g["engine"]) {
            c.green.engine = get<std::string>(g["engine"], "green.engine");
            if (c.green.engine != "pde" && c.green.engine != "mc") config_error(g["engine"], "unknown green engine");
        }
        if (c.green.x.size() != c.green.y.size()) config_error(g, "'green.x' and 'green.y' differ in length");
    }
    if (const auto v = root["verify"]) {
        check_keys(v, "verify", {"shapes", "scale_min", "scale_max", "scale_count"});
        if (v["shapes"]) c.verify.shapes = get_names(v["shapes"], "verify.shapes", {"thm1", "ex11"});
        if (v["scale_min"]) c.verify.scale_min = get<double>(v["scale_min"], "verify.scale_min");
        if (v["scale_max"]) c.verify.scale_max = get<double>(v["scale_max"], "verify.scale_max");
        if (v["scale_count"]) c.verify.scale_count = get<std::size_t>(v["scale_count"], "verify.scale_count");
    }
    if (root["outputs"]) c.outputs = get<std::string>(root["outputs"], "outputs");
    c.mc.seed = c.seed;
    return c;
}

inline RunConfig load_config(const std::string& path) {
    YAML::Node root;
    try {
        root = YAML::LoadFile(path);
    } catch (const YAML::BadFile&) {
        fail(ErrorKind::config, "cannot read config " + path);
    } catch (const YAML::ParserException& e) {
        fail(ErrorKind::config, "line " + std::to_string(e.mark.line + 1) + ": " + e.msg);
    }
    RunConfig c = parse_config(root);
    c.source = path;
    return c;
}

inline PotentialSpec make_potential(const RunConfig& c) {
    const auto& p = c.potential;
    if (p.kind == "power") return power_potential(c.dim, p.alpha, p.coefficient);
    if (p.kind == "harmonic") return harmonic_potential(c.dim, p.omega);
    if (p.kind == "exponential") return exponential_potential(c.dim, p.rate);
    if (p.kind == "zero") return zero_potential(c.dim);
    PotentialSpec s;
    s.dim = c.dim;
    s.profile = load_tabulated_profile(p.table);
    const ProfileG prof = s.profile;
    s.v = [prof](std::span<const double> x) { return prof.g(norm(x)); };
    s.label = "tabulated(" + p.table + ")";
    return s;
}

inline json points_json(const std::vector<Point>& v) {
    json a = json::array();
    for (const auto& p : v) a.push_back(p);
    return a;
}

/// Fully resolved config for the audit trail.
inline json to_json(const RunConfig& c) {
    json j;
    j["potential"] = {{"kind", c.potential.kind}, {"alpha", c.potential.alpha},
                      {"coefficient", c.potential.coefficient}, {"omega", c.potential.omega},
                      {"rate", c.potential.rate}, {"table", c.potential.table}};
    j["dim"] = c.dim;
    j["c0_regime"] = c.c0_regime;
    j["engines"] = c.engines;
    j["mc"] = {{"n_paths", c.mc.n_paths}, {"n_steps", c.mc.n_steps}, {"antithetic", c.mc.antithetic},
               {"refine", c.mc.refine}, {"max_steps", c.mc.max_steps}};
    if (c.grid) j["grid"] = {{"half_width", c.grid->half_width}, {"n_cells", c.grid->n_cells}, {"dt", c.grid->dt}};
    else j["grid"] = "auto";
    j["sweep"] = {{"t", c.sweep.t_list}, {"x", points_json(c.sweep.x_list)}, {"y", points_json(c.sweep.y_list)}};
    j["green"] = {{"x", points_json(c.green.x)}, {"y", points_json(c.green.y)}, {"rel_tol", c.green.rel_tol},
                  {"engine", c.green.engine}};
    j["verify"] = {{"shapes", c.verify.shapes}, {"scale_min", c.verify.scale_min},
                   {"scale_max", c.verify.scale_max}, {"scale_count", c.verify.scale_count}};
    j["outputs"] = c.outputs;
    j["seed"] = c.seed;
    return j;
}

}  // namespace heatlab::cli
