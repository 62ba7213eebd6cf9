#include <gtest/gtest.h>

#include <numbers>
#include <random>

#include "heatlab/envelope.hpp"

using namespace heatlab;

namespace {
const ProfileG p2 = ProfileG::power(2.0);
}

TEST(SmallTime, Examples) {
    const Point z{0.0}, two{2.0};
    EXPECT_NEAR(shape_small_time(p2, 1.0, z, z, 1.0), std::exp(-1.0), 1e-15);
    EXPECT_NEAR(log_shape_small_time(p2, 1.0, z, two, 1.0), -11.0, 1e-12);
    const double s1 = log_shape_small_time(p2, 0.3, z, two, 1.0);
    const double s2 = log_shape_small_time(p2, 0.3, z, two, 2.0);
    const double pre = -0.5 * std::log(0.3);
    EXPECT_NEAR(s2 - pre, 2.0 * (s1 - pre), 1e-12);
}

TEST(Psi, Examples) {
    const Point z{0.0}, one{1.0};
    EXPECT_NEAR(psi(p2, 1.0, z, 1.0), std::exp(-2.0), 1e-15);
    EXPECT_NEAR(psi(p2, 1e300, z, 1.0), std::exp(-1.0), 1e-15);
    EXPECT_NEAR(log_psi(p2, 1.0, one, 1.0), -8.0, 1e-12);
}

TEST(LargeTime, Examples) {
    const Point z{0.0};
    EXPECT_NEAR(log_shape_large_time(p2, 1.0, z, z, 1.0), -5.0, 1e-12);
    EXPECT_NEAR(log_shape_large_time(p2, 2.0, z, z, 1.0), -5.0, 1e-12);
    EXPECT_LT(shape_large_time(p2, 4.0, z, z, 1.0), shape_large_time(p2, 1.0, z, z, 1.0));
}

TEST(Envelopes, SymmetricInXY) {
    std::mt19937_64 gen(7);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    const ProfileG ps[] = {p2, ProfileG::power(1.0), ProfileG::power(4.0), ProfileG::exponential(0.5)};
    for (int i = 0; i < 200; ++i) {
        const Point x{u(gen), u(gen)}, y{u(gen), u(gen)};
        const double t = std::exp(u(gen));
        for (const auto& p : ps) {
            EXPECT_DOUBLE_EQ(log_shape_small_time(p, t, x, y, 1.3), log_shape_small_time(p, t, y, x, 1.3));
            EXPECT_DOUBLE_EQ(log_shape_large_time(p, t, x, y, 0.7), log_shape_large_time(p, t, y, x, 0.7));
            EXPECT_DOUBLE_EQ(log_gamma_green(p, 2, x, y, 1.1), log_gamma_green(p, 2, y, x, 1.1));
        }
        EXPECT_DOUBLE_EQ(log_shape_ex11(3.0, t, x, y, 1.0), log_shape_ex11(3.0, t, y, x, 1.0));
    }
}

TEST(Thm1, DispatchAndDegenerateConstants) {
    const Point x{0.3}, y{1.0};
    const ComparabilityConstants one{};
    const auto a = envelope_thm1(p2, one, 1.0, 0.5, x, y);
    EXPECT_EQ(a.shape_id, ShapeId::thm1_small);
    EXPECT_EQ(a.lower, a.upper);
    const auto b = envelope_thm1(p2, one, 1.0, 2.0, x, y);
    EXPECT_EQ(b.shape_id, ShapeId::thm1_large);
    EXPECT_EQ(b.regime, Regime::large_time);
}

TEST(Thm1, OrderedConstantsGiveOrderedPair) {
    const ComparabilityConstants c{0.5, 2.0, 3.0, 0.5};
    for (double t : {0.01, 0.3, 1.0, 5.0, 40.0}) {
        const auto e = envelope_thm1(ProfileG::power(3.0), c, 1.0, t, Point{0.5}, Point{2.5});
        EXPECT_LE(e.lower, e.upper);
        EXPECT_LE(e.log_lower, e.log_upper);
    }
}

TEST(Envelope, UnderflowFlagged) {
    const ComparabilityConstants one{};
    const auto e = envelope_thm1(p2, one, 1.0, 0.01, Point{0.0}, Point{10.0});
    EXPECT_TRUE(e.underflow);
    EXPECT_EQ(e.upper, 0.0);
    EXPECT_TRUE(std::isfinite(e.log_upper));
    EXPECT_LT(e.log_upper, kLogUnderflow);
}

TEST(Ex11, Examples) {
    const Point z{0.0}, ten{10.0};
    const ComparabilityConstants one{};
    const auto a = envelope_ex11(2.0, one, 0.5, z, z);
    EXPECT_EQ(a.shape_id, ShapeId::ex11_near);
    EXPECT_NEAR(a.upper, std::pow(0.5, -0.5) * std::exp(-0.5), 1e-14);
    const auto c = ex11_case(2.0, 0.5, z, ten);
    EXPECT_FALSE(c.near);
    EXPECT_FALSE(c.large_branch);
    // Far case small branch: exponent |x-y|^2/t + (1+|y|)^2 = 200 + 121.
    EXPECT_NEAR(log_shape_ex11(2.0, 0.5, z, ten, 1.0), -0.5 * std::log(0.5) - (200.0 + 121.0), 1e-10);
    for (const auto& y : {z, ten}) {
        const auto l = envelope_ex11(2.0, one, 2.0, z, y);
        EXPECT_EQ(l.regime, Regime::large_time);
        const double ny = norm(y);
        EXPECT_NEAR(l.log_upper, -(2.0 + std::pow(1.0 + ny, 2.0)), 1e-10);
    }
}

TEST(Ex11, RejectsNonPositiveAlpha) { EXPECT_THROW(ex11_case(0.0, 1.0, Point{0.0}, Point{1.0}), Error); }

TEST(Ex11, OrdersArgumentsByNorm) {
    const Point a{0.5}, b{6.0};
    EXPECT_DOUBLE_EQ(log_shape_ex11(1.5, 0.7, a, b, 1.0), log_shape_ex11(1.5, 0.7, b, a, 1.0));
}

TEST(GammaGreen, Rows) {
    const Point z3{0.0, 0.0, 0.0}, y3{0.5, 0.0, 0.0};
    const double R = 0.5 * std::sqrt(p2.g(0.5));
    EXPECT_NEAR(log_gamma_green(p2, 3, z3, y3, 1.7), -1.7 * R, 1e-12);
    // d=1 at R = 2: x = 0, y = 1, sqrt(g(1)) = 2.
    const Point z{0.0}, y{1.0};
    EXPECT_NEAR(gamma_green(p2, 1, z, y, 1.0), std::exp(-2.0) / 2.0, 1e-15);
}

TEST(GammaGreen, TwoDimensionalCrossoverContinuous) {
    // Choose x = 0 and small |y| so that sqrt(max g) is close to 1; solve
    // for R = 1/e numerically and compare both sides of the crossover.
    auto R_of = [](double s) { return s * (1.0 + s); };
    double lo = 0.0, hi = 1.0;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        (R_of(mid) < std::exp(-1.0) ? lo : hi) = mid;
    }
    const Point z{0.0, 0.0};
    const Point at{lo, 0.0}, below{lo * (1.0 - 1e-9), 0.0};
    const double a = log_gamma_green(p2, 2, z, at, 1.0) + R_of(lo);
    const double b = log_gamma_green(p2, 2, z, below, 1.0) + R_of(below[0]);
    EXPECT_NEAR(a, 0.0, 1e-9);
    EXPECT_NEAR(b, 0.0, 1e-7);
}

TEST(GammaGreen, SingularAtCoincidence) {
    const Point z{1.0};
    try {
        gamma_green(p2, 1, z, z, 1.0);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::singular_point);
    }
}

TEST(GreenEnvelope, Prefactors) {
    const ComparabilityConstants one{};
    const Point x1{0.0}, y1{0.4};
    const auto e1 = envelope_green(p2, 1, one, x1, y1);
    EXPECT_NEAR(e1.upper, 0.4 * gamma_green(p2, 1, x1, y1, 1.0), 1e-15);
    const Point x2{0.0, 0.0}, y2{0.4, 0.1};
    EXPECT_NEAR(envelope_green(p2, 2, one, x2, y2).upper, gamma_green(p2, 2, x2, y2, 1.0), 1e-15);
    // d=3, R -> 0: tends to 1/|x-y|.
    const Point x3{0.0, 0.0, 0.0}, y3{1e-8, 0.0, 0.0};
    EXPECT_NEAR(envelope_green(p2, 3, one, x3, y3).upper * 1e-8, 1.0, 1e-7);
}

TEST(Envelope, RegimeBoundaryRatioBounded) {
    // Ratio of the two scale-1 shapes at t = t0(|x| ^ |y|), recorded over a grid.
    for (double alpha : {1.0, 2.0, 4.0}) {
        const auto p = ProfileG::power(alpha);
        double lo = INFINITY, hi = -INFINITY;
        for (double a = 0.0; a <= 4.0; a += 0.25) {
            for (double b = 0.0; b <= 4.0; b += 0.25) {
                const Point x{a}, y{b};
                const double t = t0(p, std::min(a, b));
                const double r = log_shape_small_time(p, t, x, y, 1.0) - log_shape_large_time(p, t, x, y, 1.0);
                lo = std::min(lo, r);
                hi = std::max(hi, r);
            }
        }
        EXPECT_TRUE(std::isfinite(lo) && std::isfinite(hi));
        RecordProperty("alpha_" + std::to_string(static_cast<int>(alpha)) + "_log_ratio_range",
                       std::to_string(lo) + ".." + std::to_string(hi));
    }
}
