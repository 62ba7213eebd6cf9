#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "heatlab/io.hpp"
#include "heatlab/pde_solver.hpp"

using namespace heatlab;

namespace {

GridSpec grid1(double L, std::size_t n, double dt = 0.0) { return GridSpec{1, L, n, dt}; }

ErrorKind kind_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.kind();
    }
    return ErrorKind::config;
}

}  // namespace

TEST(Pde, FreeColumnMatchesGaussian) {
    const auto col = evolve_single(zero_potential(1), grid1(6.0, 1024), Point{0.0}, 1.0);
    double worst = 0.0;
    for (double x = -2.0; x <= 2.0; x += 0.1) {
        const double ref = gaussian_q(1.0, x, 0.0);
        worst = std::max(worst, std::abs(col.value_at(Point{x}) - ref) / ref);
    }
    EXPECT_LT(worst, 1e-3);
}

TEST(Pde, MehlerColumn) {
    const double omega = 1.0;
    const auto col = evolve_single(harmonic_potential(1, omega), grid1(6.0, 2048, 2e-4), Point{0.5}, 0.7);
    for (double x = -2.0; x <= 2.0; x += 0.25) {
        const double ref = mehler_kernel(0.7, x, 0.5, omega);
        EXPECT_NEAR(col.value_at(Point{x}) / ref, 1.0, 1e-3) << x;
    }
}

TEST(Pde, MassNonincreasingAndPositive) {
    const std::vector<double> times{0.1, 0.3, 1.0, 2.0, 4.0};
    const auto cols = evolve(power_potential(1, 2.0), grid1(8.0, 1024), Point{0.3}, times);
    double prev = 1.0 + 1e-8;
    for (const auto& c : cols) {
        EXPECT_LE(c.mass, prev);
        prev = c.mass;
        EXPECT_GE(c.min_before_clamp, -1e-13 * c.peak());
        for (double v : c.values) EXPECT_GE(v, 0.0);
    }
}

TEST(Pde, DominatedByFreeKernel) {
    const auto col = evolve_single(power_potential(1, 1.0), grid1(8.0, 1024), Point{0.0}, 1.5);
    for (std::size_t i = 0; i < col.nodes_per_axis(); ++i) {
        const double x = col.coord(i);
        if (std::abs(x) > 4.0) continue;
        EXPECT_LE(col.node(i), gaussian_q(1.5, x, 0.0) * (1.0 + 1e-3));
    }
}

TEST(Pde, SymmetricInEndpoints) {
    const auto spec = power_potential(1, 2.0);
    const auto a = evolve_single(spec, grid1(6.0, 1024), Point{0.0}, 0.8);
    const auto b = evolve_single(spec, grid1(6.0, 1024), Point{1.0}, 0.8);
    EXPECT_NEAR(a.value_at(Point{1.0}) / b.value_at(Point{0.0}), 1.0, 1e-3);
}

TEST(Pde, SecondOrderConvergence) {
    const ExactKernel free_exact = [](double t, std::span<const double> x, std::span<const double> y) {
        return gaussian_q(t, x, y);
    };
    const auto r0 = convergence_order(zero_potential(1), grid1(6.0, 128), Point{0.0}, 1.0, free_exact);
    EXPECT_GT(r0.order, 1.7);
    EXPECT_LT(r0.order, 2.3);
    const auto r2 = convergence_order(power_potential(1, 2.0), grid1(6.0, 128), Point{0.0}, 1.0);
    EXPECT_GT(r2.order, 1.7);
    EXPECT_LT(r2.order, 2.3);
    const auto r1 = convergence_order(power_potential(1, 1.0), grid1(6.0, 128), Point{0.0}, 1.0);
    EXPECT_GE(r1.order, 1.5);
}

TEST(Pde, ChapmanKolmogorov) {
    auto check = [](const PotentialSpec& spec, std::size_t n) {
        const GridSpec g = grid1(8.0, n, 1e-3);
        const Point y{0.0};
        const auto half = evolve_single(spec, g, y, 0.5);
        const auto full = evolve_single(spec, g, y, 1.0);
        std::vector<KernelColumn> probes;
        for (double x : {-1.0, 0.0, 0.5, 2.0}) probes.push_back(evolve_single(spec, g, Point{x}, 0.5));
        return chapman_check(half, probes, full);
    };
    EXPECT_LT(check(zero_potential(1), 1024).max_abs_error, 1e-6);
    const auto spec = power_potential(1, 2.0);
    const auto coarse = check(spec, 256);
    const auto mid = check(spec, 512);
    const auto fine = check(spec, 1024);
    EXPECT_LT(fine.max_abs_error, 1e-4);
    EXPECT_LT(mid.max_abs_error, coarse.max_abs_error);
    EXPECT_LT(fine.max_abs_error, mid.max_abs_error);
    EXPECT_EQ(fine.probes, 4u);
}

TEST(Pde, ChapmanRejectsMismatchedGrids) {
    const auto spec = power_potential(1, 2.0);
    const auto a = evolve_single(spec, grid1(6.0, 256), Point{0.0}, 0.5);
    const auto b = evolve_single(spec, grid1(6.0, 512), Point{0.0}, 0.5);
    const auto full = evolve_single(spec, grid1(6.0, 256), Point{0.0}, 1.0);
    const std::vector<KernelColumn> probes{b};
    EXPECT_EQ(kind_of([&] { chapman_check(a, probes, full); }), ErrorKind::mismatched_grid);
}

TEST(Pde, TwoDimensionalFreeAndHarmonic) {
    const GridSpec g{2, 5.0, 128, 0.0};
    const auto free_col = evolve_single(zero_potential(2), g, Point{0.0, 0.0}, 1.0);
    const auto harm = evolve_single(power_potential(2, 2.0), g, Point{0.0, 0.5}, 1.0);
    // |x|^2 = x0^2 + x1^2 separates into two harmonic factors with omega = sqrt 2.
    const double omega = std::sqrt(2.0);
    for (double a : {-1.0, 0.0, 0.5}) {
        for (double b : {-0.5, 0.0, 1.0}) {
            const Point x{a, b};
            EXPECT_NEAR(free_col.value_at(x) / gaussian_q(1.0, x, Point{0.0, 0.0}), 1.0, 1e-2);
            const double ref = mehler_kernel(1.0, a, 0.0, omega) * mehler_kernel(1.0, b, 0.5, omega);
            EXPECT_NEAR(harm.value_at(x) / ref, 1.0, 1e-2);
        }
    }
    EXPECT_LE(harm.mass, 1.0);
}

TEST(Pde, CalibrationReproducesFreeKernelOnFlatRun) {
    EvolveOptions opt;
    opt.calibrate = true;
    const auto col = evolve_single(power_potential(1, 2.0), grid1(6.0, 512), Point{0.0}, 1.0, opt);
    EXPECT_TRUE(col.calibrated);
    const auto plain = evolve_single(power_potential(1, 2.0), grid1(6.0, 512), Point{0.0}, 1.0);
    const double ref = mehler_kernel(1.0, 0.0, 0.0, std::sqrt(2.0));
    EXPECT_LT(std::abs(col.value_at(Point{0.0}) - ref), std::abs(plain.value_at(Point{0.0}) - ref) + 1e-4 * ref);
}

TEST(Pde, TruncationWarning) {
    EXPECT_TRUE(evolve_single(zero_potential(1), grid1(2.0, 256), Point{0.0}, 1.0).truncation_warning);
    const auto spec = power_potential(1, 2.0);
    const double L = choose_half_width(spec, 1.0, Point{1.0});
    EXPECT_GE(L, 2.0);
    EXPECT_FALSE(evolve_single(spec, grid1(L, 512), Point{1.0}, 1.0).truncation_warning);
}

TEST(Pde, InputErrors) {
    const auto spec = power_potential(1, 2.0);
    EXPECT_EQ(kind_of([&] { evolve_single(spec, grid1(3.0, 256), Point{3.5}, 1.0); }), ErrorKind::domain);
    EXPECT_EQ(kind_of([&] { evolve_single(power_potential(3, 2.0), GridSpec{3, 3.0, 64, 0.0}, Point{0, 0, 0}, 1.0); }),
              ErrorKind::unsupported_dimension);
    EXPECT_EQ(kind_of([&] { evolve_single(spec, grid1(3.0, 32), Point{0.0}, 1.0); }), ErrorKind::invalid_parameter);
    EXPECT_EQ(kind_of([&] { evolve_single(spec, grid1(3.0, 256), Point{0.0}, 1e-6); }), ErrorKind::precondition);
    PotentialSpec bad = spec;
    bad.v = [](std::span<const double> x) { return x[0] > 1.0 ? NAN : 0.0; };
    EXPECT_EQ(kind_of([&] { evolve_single(bad, grid1(3.0, 256), Point{0.0}, 1.0); }), ErrorKind::engine);
}

TEST(Pde, ColumnExport) {
    const auto col = evolve_single(power_potential(1, 2.0), grid1(4.0, 128), Point{0.0}, 0.5);
    const auto dir = std::filesystem::temp_directory_path() / "heatlab_pde_test";
    std::filesystem::create_directories(dir);
    const std::string path = (dir / "col.csv").string();
    write_column_csv(path, col, "power alpha=2", Provenance{42, json{{"k", 1}}});
    std::ifstream f(path);
    std::string line;
    std::getline(f, line);
    EXPECT_EQ(line, "# heatlab-schema: 1");
    std::stringstream rest;
    rest << f.rdbuf();
    EXPECT_NE(rest.str().find("x0,value"), std::string::npos);
    std::ifstream side(path + ".json");
    const auto meta = json::parse(side);
    EXPECT_EQ(meta["n_cells"], 128);
    EXPECT_EQ(meta["seed"], 42);
    EXPECT_NEAR(meta["mass"].get<double>(), col.mass, 1e-12);
}
