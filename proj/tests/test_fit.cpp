#include <gtest/gtest.h>

#include <cmath>

#include "heatlab/envelope_fit.hpp"

using namespace heatlab;

namespace {

const ProfileG kProfile = ProfileG::power(2.0);

std::vector<DataPoint> shape_cloud(const ShapeEvaluator& shape, double scale, double factor) {
    std::vector<DataPoint> pts;
    for (double t : {0.05, 0.1, 0.3, 0.6}) {
        for (double x : {-1.0, 0.0, 0.5, 2.0}) {
            for (double y : {0.0, 1.0}) {
                const Point px{x}, py{y};
                pts.push_back({t, px, py, factor * std::exp(shape.log_shape(t, px, py, scale)), 0.0, Method::oracle,
                               Regime::small_time});
            }
        }
    }
    return pts;
}

ErrorKind kind_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.kind();
    }
    return ErrorKind::config;
}

}  // namespace

TEST(Fit, SelfFitIsExact) {
    const auto shape = thm1_shape(kProfile, Regime::small_time);
    const auto rep = fit(shape, shape_cloud(shape, 1.0, 1.0));
    EXPECT_TRUE(rep.success);
    EXPECT_NEAR(rep.constants.c1, 1.0, 1e-12);
    EXPECT_NEAR(rep.constants.c3, 1.0, 1e-12);
    EXPECT_EQ(rep.constants.c2, 1.0);
    EXPECT_EQ(rep.constants.c4, 1.0);
    EXPECT_EQ(rep.points_violating, 0u);
    EXPECT_NEAR(rep.band_width, 1.0, 1e-12);
    EXPECT_EQ(rep.regime_breakdown.at("small_time"), rep.points_total);
}

TEST(Fit, MultiplicativeShift) {
    const auto shape = thm1_shape(kProfile, Regime::small_time);
    const auto rep = fit(shape, shape_cloud(shape, 1.0, 2.0));
    EXPECT_NEAR(rep.constants.c1, 2.0, 1e-12);
    EXPECT_NEAR(rep.constants.c3, 2.0, 1e-12);
    EXPECT_EQ(rep.constants.c2, 1.0);
}

TEST(Fit, RecoversGridScale) {
    const auto shape = thm1_shape(kProfile, Regime::small_time);
    const auto grid = default_scale_grid();
    const double s = grid[24];
    const auto rep = fit(shape, shape_cloud(shape, s, 0.3));
    EXPECT_DOUBLE_EQ(rep.constants.c2, s);
    EXPECT_DOUBLE_EQ(rep.constants.c4, s);
    EXPECT_NEAR(rep.constants.c1, 0.3, 1e-10);
    EXPECT_NEAR(rep.constants.c3, 0.3, 1e-10);
}

TEST(Fit, DefaultScaleGrid) {
    const auto g = default_scale_grid();
    ASSERT_EQ(g.size(), 33u);
    EXPECT_DOUBLE_EQ(g.front(), 0.125);
    EXPECT_DOUBLE_EQ(g.back(), 8.0);
    EXPECT_EQ(g[16], 1.0);
}

TEST(Fit, BandContainsEveryPoint) {
    const auto shape = thm1_shape(kProfile, Regime::small_time);
    auto pts = shape_cloud(shape, 1.0, 1.0);
    for (std::size_t i = 0; i < pts.size(); ++i) pts[i].value *= std::exp(0.4 * std::sin(3.0 * i));
    const auto rep = fit(shape, pts);
    EXPECT_TRUE(rep.success);
    for (std::size_t i = 0; i < pts.size(); ++i) {
        EXPECT_LE(rep.per_point[i].env_lower, pts[i].value * (1 + 1e-12));
        EXPECT_GE(rep.per_point[i].env_upper, pts[i].value * (1 - 1e-12));
    }
    EXPECT_GE(rep.worst_lower_ratio, 1.0 - 1e-12);
    EXPECT_GE(rep.worst_upper_ratio, 1.0 - 1e-12);
}

TEST(Fit, InteriorPointLeavesConstantsUnchanged) {
    const auto shape = thm1_shape(kProfile, Regime::small_time);
    auto pts = shape_cloud(shape, 1.0, 1.0);
    for (std::size_t i = 0; i < pts.size(); ++i) pts[i].value *= std::exp(0.4 * std::cos(5.0 * i));
    const auto before = fit(shape, pts);
    for (std::size_t k : {3u, 17u}) {
        DataPoint extra = pts[k];
        extra.value = std::sqrt(before.per_point[k].env_lower * before.per_point[k].env_upper);
        pts.push_back(extra);
    }
    const auto after = fit(shape, pts);
    EXPECT_DOUBLE_EQ(after.constants.c1, before.constants.c1);
    EXPECT_DOUBLE_EQ(after.constants.c2, before.constants.c2);
    EXPECT_DOUBLE_EQ(after.constants.c3, before.constants.c3);
    EXPECT_DOUBLE_EQ(after.constants.c4, before.constants.c4);
}

TEST(Fit, RefinedScaleGridNeverWidensBand) {
    const auto shape = thm1_shape(kProfile, Regime::small_time);
    auto pts = shape_cloud(shape, 1.3, 1.0);
    for (std::size_t i = 0; i < pts.size(); ++i) pts[i].value *= std::exp(0.2 * std::sin(7.0 * i));
    FitOptions coarse, fine;
    coarse.scale_grid = default_scale_grid(17);
    fine.scale_grid = default_scale_grid(65);
    const auto a = fit(shape, pts, coarse);
    const auto b = fit(shape, pts, fine);
    EXPECT_LE(b.band_width, a.band_width * (1 + 1e-12));
    EXPECT_TRUE(b.success);
}

TEST(Fit, WideningByMethod) {
    const auto shape = thm1_shape(kProfile, Regime::small_time);
    auto pts = shape_cloud(shape, 1.0, 1.0);
    const double v = pts[5].value;
    pts[5].std_error = 0.01 * v;
    pts[5].method = Method::mc_bridge;
    const auto mc = fit(shape, pts);
    EXPECT_NEAR(mc.constants.c1, 0.97, 1e-9);
    EXPECT_NEAR(mc.constants.c3, 1.03, 1e-9);
    pts[5].method = Method::pde;
    const auto pde = fit(shape, pts);
    EXPECT_NEAR(pde.constants.c1, 0.99, 1e-9);
    EXPECT_NEAR(pde.constants.c3, 1.01, 1e-9);
    pts[5].method = Method::oracle;
    EXPECT_NEAR(fit(shape, pts).constants.c1, 1.0, 1e-12);
}

TEST(Fit, UnderflowIsCountedNotFitted) {
    const auto shape = thm1_shape(kProfile, Regime::small_time);
    auto pts = shape_cloud(shape, 1.0, 1.0);
    pts[0].value = 0.0;
    double peak = 0.0;
    for (const auto& p : pts) peak = std::max(peak, p.value);
    pts[1].value = peak * std::exp(-720.0);
    const auto rep = fit(shape, pts);
    EXPECT_EQ(rep.underflow_skipped, 2u);
    EXPECT_TRUE(rep.per_point[0].underflow);
    EXPECT_TRUE(rep.per_point[1].underflow);
    EXPECT_FALSE(rep.per_point[0].violating);
    EXPECT_NEAR(rep.constants.c1, 1.0, 1e-12);
}

TEST(Fit, Errors) {
    const auto shape = thm1_shape(kProfile, Regime::small_time);
    auto pts = shape_cloud(shape, 1.0, 1.0);
    auto zeros = pts;
    for (auto& p : zeros) p.value = 0.0;
    EXPECT_EQ(kind_of([&] { fit(shape, zeros); }), ErrorKind::empty_fit);
    EXPECT_EQ(kind_of([&] { fit(shape, std::span(pts).first(5)); }), ErrorKind::precondition);
    FitOptions bad;
    bad.scale_grid = {1.0, -2.0};
    EXPECT_EQ(kind_of([&] { fit(shape, pts, bad); }), ErrorKind::invalid_parameter);
}

TEST(Fit, GreenShapeSelfFit) {
    const auto shape = green_shape(ProfileG::power(2.0), 1);
    std::vector<DataPoint> pts;
    for (double x : {0.0, 0.5, 1.0}) {
        for (double r : {0.1, 0.5, 1.0, 2.0}) {
            const Point px{x}, py{x + r};
            pts.push_back({0.0, px, py, std::exp(shape.log_shape(0.0, px, py, 1.0)), 0.0, Method::oracle,
                           Regime::small_time});
        }
    }
    const auto rep = fit(shape, pts);
    EXPECT_TRUE(rep.success);
    EXPECT_NEAR(rep.band_width, 1.0, 1e-12);
}

TEST(Sweep, RegimeLabels) {
    const auto spec = power_potential(1, 2.0);
    const SweepGrid g{{0.25, 4.0}, {Point{0.0}, Point{1.0}, Point{2.0}}, {Point{0.0}, Point{1.5}}};
    const std::vector<Method> engines{Method::pde};
    const auto recs = regime_sweep(spec, engines, g, 1.0);
    ASSERT_EQ(recs.size(), 12u);
    for (const auto& r : recs) {
        EXPECT_EQ(r.regime, r.t == 0.25 ? Regime::small_time : Regime::large_time);
        ASSERT_EQ(r.estimates.size(), 1u);
        EXPECT_GT(r.estimates[0].value, 0.0);
        EXPECT_TRUE(r.errors.empty());
    }
    EXPECT_EQ(recs[0].y, Point{0.0});
    EXPECT_EQ(recs[1].t, 4.0);
    EXPECT_EQ(to_points(recs, Regime::small_time).size(), 6u);
}

TEST(Sweep, MixedEnginesAgree) {
    const auto spec = power_potential(1, 2.0);
    const SweepGrid g{{0.5}, {Point{0.0}, Point{0.5}}, {Point{1.0}}};
    SweepOptions opt;
    opt.mc.n_paths = 20000;
    opt.mc.n_steps = 128;
    const std::vector<Method> engines{Method::pde, Method::mc_bridge};
    const auto recs = regime_sweep(spec, engines, g, 1.0, opt);
    for (const auto& r : recs) {
        ASSERT_EQ(r.estimates.size(), 2u);
        const auto& p = r.estimates[0];
        const auto& m = r.estimates[1];
        EXPECT_EQ(p.method, Method::pde);
        EXPECT_EQ(m.method, Method::mc_bridge);
        EXPECT_LE(std::abs(p.value - m.value), 3.0 * m.std_error + p.std_error);
    }
    EXPECT_EQ(to_points(recs, {}, Method::mc_bridge).size(), 2u);
}

TEST(Sweep, EngineErrorsAreRecorded) {
    const auto spec = power_potential(1, 2.0);
    SweepOptions opt;
    opt.grid = GridSpec{1, 2.0, 256, 0.0};
    const SweepGrid g{{0.5}, {Point{0.0}, Point{3.0}}, {Point{0.0}}};
    const std::vector<Method> engines{Method::pde};
    const auto recs = regime_sweep(spec, engines, g, 1.0, opt);
    EXPECT_TRUE(recs[0].errors.empty());
    ASSERT_EQ(recs[1].errors.size(), 1u);
    EXPECT_NE(recs[1].errors[0].find("domain"), std::string::npos);
    EXPECT_EQ(kind_of([&] { regime_sweep(spec, engines, SweepGrid{{}, {Point{0.0}}, {Point{0.0}}}, 1.0); }),
              ErrorKind::precondition);
}
