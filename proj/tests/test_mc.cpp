#include <gtest/gtest.h>

#include <cmath>

#include "heatlab/mc_feynman_kac.hpp"

using namespace heatlab;

namespace {

McConfig cfg(std::size_t paths, std::size_t steps, std::uint64_t seed = 11) {
    McConfig c;
    c.n_paths = paths;
    c.n_steps = steps;
    c.seed = seed;
    return c;
}

}  // namespace

TEST(Bridge, EndpointsExact) {
    NormalStream rng(3, 0, StreamTag::test);
    const Point x{0.25, -1.0}, y{2.0, 0.5};
    for (std::size_t n : {2u, 5u, 64u, 100u}) {
        const auto p = sample_bridge(1.7, x, y, n, rng);
        ASSERT_EQ(p.n_steps, n);
        EXPECT_EQ(p.point(0)[0], x[0]);
        EXPECT_EQ(p.point(0)[1], x[1]);
        EXPECT_EQ(p.point(n)[0], y[0]);
        EXPECT_EQ(p.point(n)[1], y[1]);
    }
}

TEST(Bridge, MidpointMoments) {
    NormalStream rng(5, 0, StreamTag::test);
    const double t = 2.0;
    const Point x{-1.0}, y{3.0};
    const int n = 100000;
    double s1 = 0.0, s2 = 0.0;
    for (int i = 0; i < n; ++i) {
        const double m = sample_bridge(t, x, y, 2, rng).point(1)[0];
        s1 += m;
        s2 += m * m;
    }
    const double mean = s1 / n;
    const double var = s2 / n - mean * mean;
    const double sigma = std::sqrt(t / 4.0);
    EXPECT_NEAR(mean, 1.0, 4.0 * sigma / std::sqrt(n));
    EXPECT_NEAR(var / (t / 4.0), 1.0, 0.05);
}

TEST(Bridge, MarginalsOnUnevenGrid) {
    NormalStream rng(6, 0, StreamTag::test);
    const double t = 1.0;
    const std::size_t steps = 6;
    const int n = 60000;
    std::vector<double> s1(steps + 1), s2(steps + 1);
    for (int i = 0; i < n; ++i) {
        const auto p = sample_bridge(t, Point{0.0}, Point{1.0}, steps, rng);
        for (std::size_t k = 0; k <= steps; ++k) {
            s1[k] += p.point(k)[0];
            s2[k] += p.point(k)[0] * p.point(k)[0];
        }
    }
    for (std::size_t k = 1; k < steps; ++k) {
        const double s = t * k / steps;
        const double mean = s1[k] / n, var = s2[k] / n - mean * mean;
        EXPECT_NEAR(mean, s / t, 5.0 * std::sqrt(s * (t - s) / t / n));
        EXPECT_NEAR(var / (s * (t - s) / t), 1.0, 0.05);
    }
}

TEST(Bridge, ScheduleIsPrefixUnderDoubling) {
    const auto a = detail::bridge_schedule(64);
    const auto b = detail::bridge_schedule(128);
    ASSERT_EQ(a.size(), 63u);
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(2 * a[i].mid, b[i].mid);
        EXPECT_EQ(2 * a[i].lo, b[i].lo);
    }
}

TEST(KernelMc, FreeKernelExact) {
    for (int d : {1, 2, 3}) {
        Point x(static_cast<std::size_t>(d), 0.1), y(static_cast<std::size_t>(d), -0.4);
        const auto e = kernel_mc(zero_potential(d), cfg(500, 32), 0.8, x, y);
        EXPECT_EQ(e.value, gaussian_q(0.8, x, y));
        EXPECT_EQ(e.std_error, 0.0);
        EXPECT_EQ(e.method, Method::mc_bridge);
    }
    EXPECT_EQ(survival_mc(zero_potential(2), cfg(500, 32), 3.0, Point{1.0, 1.0}).value, 1.0);
}

TEST(KernelMc, MehlerWithinThreeSigma) {
    const auto spec = harmonic_potential(1, 1.0);
    const auto e = kernel_mc(spec, cfg(20000, 256), 1.0, Point{0.0}, Point{0.0});
    EXPECT_LE(std::abs(e.value - mehler_kernel(1.0, 0.0, 0.0, 1.0)), 3.0 * e.std_error);
}

TEST(KernelMc, AntitheticUnbiased) {
    const auto spec = harmonic_potential(1, 1.0);
    auto c = cfg(20000, 128);
    const auto plain = kernel_mc(spec, c, 1.0, Point{0.5}, Point{-0.5});
    c.antithetic = true;
    const auto anti = kernel_mc(spec, c, 1.0, Point{0.5}, Point{-0.5});
    const double m = mehler_kernel(1.0, 0.5, -0.5, 1.0);
    EXPECT_LE(std::abs(anti.value - m), 3.0 * anti.std_error + 2e-3 * m);
    EXPECT_LE(std::abs(plain.value - m), 3.0 * plain.std_error + 2e-3 * m);
    EXPECT_EQ(anti.n_effective, 10000u);
}

TEST(KernelMc, DominatedByGaussian) {
    const auto spec = power_potential(1, 2.0);
    for (double t : {0.1, 1.0, 3.0}) {
        const auto e = kernel_mc(spec, cfg(2000, 64), t, Point{0.0}, Point{1.0});
        EXPECT_LE(e.value, gaussian_q(t, 0.0, 1.0) + 3.0 * e.std_error);
        EXPECT_GE(e.value, 0.0);
    }
}

TEST(KernelMc, SymmetricInEndpoints) {
    const auto spec = power_potential(1, 2.0);
    const auto a = kernel_mc(spec, cfg(20000, 128, 1), 0.5, Point{0.0}, Point{1.0});
    const auto b = kernel_mc(spec, cfg(20000, 128, 2), 0.5, Point{1.0}, Point{0.0});
    EXPECT_LE(std::abs(a.value - b.value), 3.0 * std::hypot(a.std_error, b.std_error));
}

TEST(KernelMc, WorkerCountInvariant) {
    const auto spec = power_potential(2, 2.0);
    auto c = cfg(3001, 32);
    c.workers = 1;
    const auto a = kernel_mc(spec, c, 0.6, Point{0.0, 1.0}, Point{1.0, 0.0});
    for (unsigned w : {2u, 5u}) {
        c.workers = w;
        const auto b = kernel_mc(spec, c, 0.6, Point{0.0, 1.0}, Point{1.0, 0.0});
        EXPECT_EQ(a.value, b.value);
        EXPECT_EQ(a.std_error, b.std_error);
    }
}

TEST(KernelMc, RefinementStopsWithinBudget) {
    auto c = cfg(2000, 16);
    c.refine = true;
    c.max_steps = 512;
    const auto e = kernel_mc(power_potential(1, 2.0), c, 1.0, Point{0.0}, Point{0.5});
    EXPECT_GE(e.n_steps, 16u);
    EXPECT_LE(e.n_steps, 512u);
}

TEST(KernelMc, TrapezoidBiasIsSecondOrder) {
    // Coarse paths are sub-samples of the fine ones, so the differences
    // carry little sampling noise.
    const auto spec = power_potential(1, 2.0);
    std::vector<double> v;
    for (std::size_t n : {4u, 8u, 16u}) v.push_back(kernel_mc(spec, cfg(100000, n), 1.0, Point{0.0}, Point{1.0}).value);
    const double order = std::log2((v[1] - v[0]) / (v[2] - v[1]));
    EXPECT_GT(order, 1.6);
}

TEST(KernelMc, NonFinitePotentialAborts) {
    PotentialSpec s = power_potential(1, 2.0);
    s.v = [](std::span<const double> x) { return x[0] > 0.5 ? INFINITY : 0.0; };
    try {
        kernel_mc(s, cfg(100, 16), 1.0, Point{0.0}, Point{1.0});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::engine);
    }
}

TEST(KernelMc, RejectsBadInputs) {
    EXPECT_THROW(kernel_mc(power_potential(1, 2.0), cfg(100, 16), 0.0, Point{0.0}, Point{1.0}), Error);
    EXPECT_THROW(kernel_mc(power_potential(1, 2.0), cfg(100, 1), 1.0, Point{0.0}, Point{1.0}), Error);
    EXPECT_THROW(kernel_mc(power_potential(1, 2.0), cfg(0, 16), 1.0, Point{0.0}, Point{1.0}), Error);
}

TEST(SurvivalMc, NonincreasingInTime) {
    const auto spec = power_potential(1, 2.0);
    const auto a = survival_mc(spec, cfg(20000, 128), 1.0, Point{0.0});
    const auto b = survival_mc(spec, cfg(20000, 128), 2.0, Point{0.0});
    EXPECT_LE(b.value, a.value + 3.0 * std::hypot(a.std_error, b.std_error));
    EXPECT_EQ(a.method, Method::mc_free);
}

TEST(SurvivalMc, DecaysGeometrically) {
    const auto spec = power_potential(1, 2.0);
    std::vector<double> lt, lv, w;
    for (double t : {1.0, 2.0, 4.0}) {
        const auto e = survival_mc(spec, cfg(20000, 256), t, Point{0.0});
        lt.push_back(t);
        lv.push_back(std::log(e.value));
        w.push_back(e.std_error / e.value);
    }
    const double slope = (lv[2] - lv[0]) / (lt[2] - lt[0]);
    const double slope_sigma = std::hypot(w[0], w[2]) / (lt[2] - lt[0]);
    EXPECT_LT(slope + 3.0 * slope_sigma, 0.0);
}

TEST(ExitSampler, InvertsTheCdf) {
    const IntervalExitSampler s(0.5, 1.0);
    const IntervalDirichletSpec spec{0.5, 200};
    for (double u : {0.01, 0.3, 0.7, 0.95}) {
        const double tau = s.invert(u * s.exit_probability());
        EXPECT_NEAR(interval_exit_cdf(spec, tau, 0.0), u * s.exit_probability(), 1e-9);
    }
    EXPECT_DOUBLE_EQ(s.right_probability(0.2), 0.5);
}

TEST(ExitIdentity, FreeKernel) {
    const auto r = exit_identity_check(zero_potential(1), cfg(20000, 64), 1.0, Point{0.0}, Point{2.0}, 0.5);
    EXPECT_LT(r.z_score, 3.0);
    EXPECT_DOUBLE_EQ(r.lhs.value, gaussian_q(1.0, 0.0, 2.0));
}

TEST(ExitIdentity, ShortTimeMassVanishes) {
    const auto r = exit_identity_check(power_potential(1, 2.0), cfg(2000, 32), 0.01, Point{0.0}, Point{2.0}, 1.0);
    EXPECT_LT(r.lhs.value, 1e-6);
    EXPECT_LT(r.rhs.value, 1e-6);
}

TEST(ExitIdentity, Preconditions) {
    try {
        exit_identity_check(zero_potential(1), cfg(100, 16), 1.0, Point{0.0}, Point{0.4}, 0.5);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::precondition);
    }
    try {
        exit_identity_check(zero_potential(2), cfg(100, 16), 1.0, Point{0.0, 0.0}, Point{2.0, 0.0}, 0.5);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::unsupported_dimension);
    }
}
