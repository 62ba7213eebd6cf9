#pragma once

#include <cstdint>
#include <fstream>
#include <iomanip>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "heatlab/envelope_fit.hpp"
#include "heatlab/error.hpp"
#include "heatlab/green_quad.hpp"
#include "heatlab/mc_feynman_kac.hpp"
#include "heatlab/pde_solver.hpp"

namespace heatlab {

using json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

/// Audit header carried by every CSV file: schema, seed and the resolved config.
struct Provenance {
    std::uint64_t seed = 0;
    json config = json::object();
};

namespace detail {

inline std::ofstream open_out(const std::string& path) {
    std::ofstream f(path);
    if (!f) fail(ErrorKind::config, "cannot write " + path);
    f << std::setprecision(17);
    return f;
}

inline void write_preamble(std::ostream& os, const Provenance& prov) {
    os << "# heatlab-schema: " << kSchemaVersion << "\n";
    os << "# seed: " << prov.seed << "\n";
    os << "# config: " << prov.config.dump() << "\n";
}

inline json num(double v) {
    if (std::isfinite(v)) return v;
    if (std::isnan(v)) return "nan";
    return v > 0 ? "inf" : "-inf";
}

}  // namespace detail

inline json to_json(const ComparabilityConstants& c) {
    return {{"c1", detail::num(c.c1)}, {"c2", c.c2}, {"c3", detail::num(c.c3)}, {"c4", c.c4}};
}

inline json to_json(const FitReport& r) {
    return {{"shape_id", to_string(r.shape_id)},
            {"shape_name", r.shape_name},
            {"constants", to_json(r.constants)},
            {"points_total", r.points_total},
            {"points_violating", r.points_violating},
            {"worst_lower_ratio", detail::num(r.worst_lower_ratio)},
            {"worst_upper_ratio", detail::num(r.worst_upper_ratio)},
            {"band_width", detail::num(r.band_width)},
            {"regime_breakdown", r.regime_breakdown},
            {"underflow_skipped", r.underflow_skipped},
            {"success", r.success}};
}

inline json to_json(const KernelEstimate& e, double t, std::span<const double> x, std::span<const double> y,
                    std::size_t n_paths, std::uint64_t seed) {
    return {{"t", t},
            {"x", std::vector<double>(x.begin(), x.end())},
            {"y", std::vector<double>(y.begin(), y.end())},
            {"value", detail::num(e.value)},
            {"stderr", detail::num(e.std_error)},
            {"n_paths", n_paths},
            {"n_steps", e.n_steps},
            {"seed", seed},
            {"method", to_string(e.method)}};
}

inline json to_json(const GreenEstimate& g) {
    return {{"value", g.value},
            {"error_bound", g.error_bound},
            {"n_nodes", g.n_nodes},
            {"tail_bound", g.tail_bound},
            {"t_cut", g.t_cut},
            {"quad_error", g.quad_error},
            {"stat_error", g.stat_error},
            {"head_bound", g.head_bound},
            {"t0_class", to_string(g.t0_class)}};
}

/// One row of the point cloud: a data point and, when fitted, its envelope.
struct CloudRow {
    DataPoint point;
    std::optional<PointFit> fit;
    std::string shape;
};

/// Appends rows for points[i] with report.per_point[i].
inline void append_cloud(std::vector<CloudRow>& rows, std::span<const DataPoint> points, const FitReport* report) {
    for (std::size_t i = 0; i < points.size(); ++i) {
        CloudRow r{points[i], std::nullopt, ""};
        if (report && i < report->per_point.size()) {
            r.fit = report->per_point[i];
            r.shape = report->shape_name;
        }
        rows.push_back(std::move(r));
    }
}

/// Point-cloud CSV: t, x0.., y0.., regime, method, value, stderr, env_lower,
/// env_upper, ratio_lower, ratio_upper, shape, underflow, violating.
inline void write_points_csv(const std::string& path, std::span<const CloudRow> rows, const Provenance& prov) {
    auto f = detail::open_out(path);
    detail::write_preamble(f, prov);
    const std::size_t d = rows.empty() ? 1 : rows.front().point.x.size();
    f << "t";
    for (std::size_t k = 0; k < d; ++k) f << ",x" << k;
    for (std::size_t k = 0; k < d; ++k) f << ",y" << k;
    f << ",regime,method,value,stderr,env_lower,env_upper,ratio_lower,ratio_upper,shape,underflow,violating\n";
    for (const auto& row : rows) {
        const auto& p = row.point;
        f << p.t;
        for (double c : p.x) f << "," << c;
        for (double c : p.y) f << "," << c;
        f << "," << to_string(p.regime) << "," << to_string(p.method) << "," << p.value << "," << p.std_error;
        if (row.fit && row.fit->used) {
            const auto& pf = *row.fit;
            f << "," << pf.env_lower << "," << pf.env_upper << "," << pf.ratio_lower << "," << pf.ratio_upper << ","
              << row.shape << ",0," << (pf.violating ? 1 : 0) << "\n";
        } else {
            const bool under = row.fit && row.fit->underflow;
            f << ",,,,," << row.shape << "," << (under ? 1 : 0) << ",0\n";
        }
    }
}

/// Column CSV: header, then (x..., value) rows; plus a JSON sidecar
/// {L, n_cells, dt, t, y, potential}.
inline void write_column_csv(const std::string& path, const KernelColumn& col, const std::string& potential,
                             const Provenance& prov) {
    auto f = detail::open_out(path);
    detail::write_preamble(f, prov);
    const std::size_t N = col.nodes_per_axis();
    if (col.dim == 1) {
        f << "x0,value\n";
        for (std::size_t i = 0; i < N; ++i) f << col.coord(i) << "," << col.values[i] << "\n";
    } else {
        f << "x0,x1,value\n";
        for (std::size_t i = 0; i < N; ++i) {
            for (std::size_t j = 0; j < N; ++j) f << col.coord(i) << "," << col.coord(j) << "," << col.node(i, j) << "\n";
        }
    }
    json meta = {{"L", col.half_width}, {"n_cells", col.n_cells}, {"dt", col.dt},     {"t", col.t},
                 {"y", col.y},          {"potential", potential}, {"mass", col.mass}, {"clamped", col.clamped},
                 {"truncation_warning", col.truncation_warning}, {"calibrated", col.calibrated},
                 {"seed", prov.seed},   {"config", prov.config}};
    auto side = detail::open_out(path + ".json");
    side << meta.dump(2) << "\n";
}

struct GreenRow {
    Point x;
    Point y;
    GreenEstimate estimate;
    double env_lower = 0.0;
    double env_upper = 0.0;
};

/// Green CSV: x0.., y0.., G, error_bound, env_lower, env_upper.
inline void write_green_csv(const std::string& path, std::span<const GreenRow> rows, const Provenance& prov) {
    auto f = detail::open_out(path);
    detail::write_preamble(f, prov);
    const std::size_t d = rows.empty() ? 1 : rows.front().x.size();
    for (std::size_t k = 0; k < d; ++k) f << (k ? "," : "") << "x" << k;
    for (std::size_t k = 0; k < d; ++k) f << ",y" << k;
    f << ",G,error_bound,env_lower,env_upper\n";
    for (const auto& r : rows) {
        for (std::size_t k = 0; k < d; ++k) f << (k ? "," : "") << r.x[k];
        for (double c : r.y) f << "," << c;
        f << "," << r.estimate.value << "," << r.estimate.error_bound << "," << r.env_lower << "," << r.env_upper
          << "\n";
    }
}

inline void write_json(const std::string& path, const json& j) {
    auto f = detail::open_out(path);
    f << j.dump(2) << "\n";
}

}  // namespace heatlab
