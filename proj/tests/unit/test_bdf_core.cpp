#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "bdfns/bdf_core.hpp"
#include "bdfns/errors.hpp"

using namespace bdfns;

namespace {

using Poly = std::vector<Rational>;

Poly multiply(const Poly& a, const Poly& b)
{
    Poly out(a.size() + b.size() - 1, Rational(0));
    for (std::size_t i = 0; i < a.size(); ++i) {
        for (std::size_t j = 0; j < b.size(); ++j) {
            out[i + j] += a[i] * b[j];
        }
    }
    return out;
}

// sum_{l=1}^q (1 - zeta)^l / l by repeated polynomial multiplication.
Poly delta_oracle(int q)
{
    Poly sum(static_cast<std::size_t>(q + 1), Rational(0));
    Poly power{Rational(1)};
    for (int l = 1; l <= q; ++l) {
        power = multiply(power, Poly{Rational(1), Rational(-1)});
        for (std::size_t i = 0; i < power.size(); ++i) {
            sum[i] += power[i] / Rational(l);
        }
    }
    return sum;
}

std::vector<Rational> rationals(std::initializer_list<std::pair<long, long>> v)
{
    std::vector<Rational> out;
    for (auto [n, d] : v) {
        out.emplace_back(n, d);
    }
    return out;
}

double trig_poly(const std::vector<Rational>& g, double theta)
{
    double s = 0.0;
    for (std::size_t k = 0; k < g.size(); ++k) {
        s += boost::rational_cast<double>(g[k]) * std::cos(static_cast<double>(k) * theta);
    }
    return s;
}

// Brute-force minimum: dense sampling followed by golden-section refinement.
double sigma_oracle(int q)
{
    const auto g = gamma_coefficients(q);
    const int samples = 200000;
    int best = 0;
    double best_val = trig_poly(g, 0.0);
    for (int i = 1; i <= samples; ++i) {
        const double v = trig_poly(g, std::numbers::pi * i / samples);
        if (v < best_val) {
            best_val = v;
            best = i;
        }
    }
    double a = std::numbers::pi * std::max(0, best - 1) / samples;
    double b = std::numbers::pi * std::min(samples, best + 1) / samples;
    const double r = (std::sqrt(5.0) - 1.0) / 2.0;
    for (int it = 0; it < 200; ++it) {
        const double c = b - r * (b - a);
        const double d = a + r * (b - a);
        if (trig_poly(g, c) < trig_poly(g, d)) {
            b = d;
        } else {
            a = c;
        }
    }
    return -std::min(best_val, trig_poly(g, 0.5 * (a + b)));
}

} // namespace

TEST(BdfCoefficients, BackwardEuler)
{
    EXPECT_EQ(bdf_coefficients(1), rationals({{1, 1}, {-1, 1}}));
}

TEST(BdfCoefficients, OrderThreeAndFive)
{
    EXPECT_EQ(bdf_coefficients(3), rationals({{11, 6}, {-3, 1}, {3, 2}, {-1, 3}}));
    EXPECT_EQ(bdf_coefficients(5), rationals({{137, 60}, {-5, 1}, {5, 1}, {-10, 3}, {5, 4}, {-1, 5}}));
}

TEST(BdfCoefficients, MatchPolynomialExpansion)
{
    for (int q = 1; q <= 5; ++q) {
        EXPECT_EQ(bdf_coefficients(q), delta_oracle(q)) << "q=" << q;
    }
}

TEST(BdfCoefficients, ConsistencyConditions)
{
    // sum delta_i = 0 and sum i delta_i = -1 (exact for constants and linears).
    for (int q = 1; q <= 5; ++q) {
        Rational s0(0);
        Rational s1(0);
        const auto d = bdf_coefficients(q);
        for (std::size_t i = 0; i < d.size(); ++i) {
            s0 += d[i];
            s1 += Rational(static_cast<long>(i)) * d[i];
        }
        EXPECT_EQ(s0, Rational(0));
        EXPECT_EQ(s1, Rational(-1));
    }
}

TEST(BdfCoefficients, InvalidOrder)
{
    EXPECT_THROW(bdf_coefficients(0), InvalidOrderError);
    EXPECT_THROW(bdf_coefficients(6), InvalidOrderError);
    EXPECT_THROW(BdfScheme(7), InvalidOrderError);
}

TEST(GammaCoefficients, TableValues)
{
    EXPECT_EQ(gamma_coefficients(3), rationals({{5, 6}, {-7, 6}, {1, 3}}));
    EXPECT_EQ(gamma_coefficients(4), rationals({{13, 12}, {-23, 12}, {13, 12}, {-1, 4}}));
    EXPECT_EQ(gamma_coefficients(5), rationals({{77, 60}, {-163, 60}, {137, 60}, {-63, 60}, {1, 5}}));
}

TEST(GammaCoefficients, DifferenceFormIdentity)
{
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    for (int q = 3; q <= 5; ++q) {
        const auto delta = bdf_coefficients(q);
        const auto gamma = gamma_coefficients(q);
        for (int trial = 0; trial < 10; ++trial) {
            std::vector<double> y(static_cast<std::size_t>(q + 2));
            for (auto& v : y) {
                v = dist(rng);
            }
            // y[i] = y_{n-i}; D y_{n-k} = y[k] - y[k+1].
            double lhs = 0.0;
            for (std::size_t i = 0; i < delta.size(); ++i) {
                lhs += boost::rational_cast<double>(delta[i]) * y[i];
            }
            double rhs = y[0] - y[1];
            for (std::size_t k = 0; k < gamma.size(); ++k) {
                rhs += boost::rational_cast<double>(gamma[k]) * (y[k] - y[k + 1]);
            }
            EXPECT_NEAR(lhs, rhs, 1e-13);
        }
    }
}

TEST(GammaCoefficients, UndefinedForAStableOrders)
{
    EXPECT_THROW(gamma_coefficients(2), InvalidOrderError);
    EXPECT_TRUE(BdfScheme(1).gamma().empty());
    EXPECT_TRUE(BdfScheme(2).gamma().empty());
}

TEST(SigmaMin, ReferenceValues)
{
    EXPECT_NEAR(sigma_min(3), 1.0 / 96.0, 1e-9);
    EXPECT_NEAR(sigma_min(4), (260.0 + 43.0 * std::sqrt(43.0)) / 2916.0, 1e-9);
    EXPECT_NEAR(sigma_min(5), 0.814454, 5e-7);
}

TEST(SigmaMin, AgreesWithBruteForce)
{
    for (int q = 3; q <= 5; ++q) {
        EXPECT_NEAR(sigma_min(q), sigma_oracle(q), 1e-10) << "q=" << q;
    }
}

TEST(SigmaMin, MinimumAtSevenEighthsForOrderThree)
{
    // gamma_0 + gamma_1 x + gamma_2 (2x^2 - 1) at x = 7/8.
    const double x = 7.0 / 8.0;
    EXPECT_NEAR(-(5.0 / 6.0 - 7.0 / 6.0 * x + (2 * x * x - 1) / 3.0), sigma_min(3), 1e-14);
}

TEST(Multiplier, TabulatedValues)
{
    EXPECT_EQ(multiplier_eta(1), 0.0);
    EXPECT_EQ(multiplier_eta(2), 0.0);
    EXPECT_DOUBLE_EQ(multiplier_eta(3), 0.0769);
    EXPECT_DOUBLE_EQ(multiplier_eta(4), 0.2878);
    EXPECT_DOUBLE_EQ(multiplier_eta(5), 0.8097);
}

TEST(BdfScheme, Accessors)
{
    const BdfScheme s3(3);
    EXPECT_EQ(s3.order(), 3);
    ASSERT_TRUE(s3.sigma());
    EXPECT_NEAR(*s3.s(), 1.0 - 1.0 / 96.0, 1e-12);
    ASSERT_EQ(s3.delta_values().size(), 4U);
    EXPECT_DOUBLE_EQ(s3.delta_values()[0], 11.0 / 6.0);
    const BdfScheme s2(2);
    EXPECT_FALSE(s2.sigma());
    EXPECT_FALSE(s2.s());
}

TEST(RationalFormat, IntegersAndFractions)
{
    EXPECT_EQ(to_string(Rational(-3)), "-3");
    EXPECT_EQ(to_string(Rational(-7, 6)), "-7/6");
    EXPECT_EQ(to_string(Rational(-63, 60)), "-21/20");
}

TEST(DividedDifference, ConstantVector)
{
    const std::vector<double> t{0, 1, 2};
    const Eigen::VectorXd c = Eigen::Vector3d(1.5, -2.0, 4.0);
    const std::vector<Eigen::VectorXd> v{c, c, c};
    EXPECT_EQ(divided_difference(t, v).norm(), 0.0);
}

TEST(DividedDifference, Square)
{
    EXPECT_DOUBLE_EQ(divided_difference(std::vector<double>{0, 1, 2}, std::vector<double>{0, 1, 4}), 1.0);
}

TEST(DividedDifference, CubicOnNonUniformNodes)
{
    const std::vector<double> t{0, 0.5, 1.5, 2};
    std::vector<double> v;
    for (double x : t) {
        v.push_back(x * x * x);
    }
    EXPECT_NEAR(divided_difference(t, v), 1.0, 1e-14);
}

TEST(DividedDifference, NodeOrderIrrelevant)
{
    const std::vector<double> t{0.3, -1.0, 2.5, 0.9, 1.7};
    const std::vector<double> s{2.5, 0.3, 1.7, -1.0, 0.9};
    const auto f = [](double x) { return std::exp(x) + x * x * x * x; };
    std::vector<double> vt;
    std::vector<double> vs;
    for (double x : t) {
        vt.push_back(f(x));
    }
    for (double x : s) {
        vs.push_back(f(x));
    }
    EXPECT_NEAR(divided_difference(t, vt), divided_difference(s, vs), 1e-12);
}

TEST(DividedDifference, RepeatedNodes)
{
    EXPECT_THROW(divided_difference(std::vector<double>{0, 1, 1}, std::vector<double>{0, 1, 2}),
                 DegenerateNodesError);
}

TEST(DerivativeWeights, UniformGridGivesBdfCoefficients)
{
    const double dt = 0.1;
    for (int q = 1; q <= 5; ++q) {
        std::vector<double> t;
        for (int j = 0; j <= q; ++j) {
            t.push_back(2.0 - j * dt);
        }
        const auto w = derivative_weights(t);
        const auto d = bdf_coefficients(q);
        for (int j = 0; j <= q; ++j) {
            EXPECT_NEAR(w[static_cast<std::size_t>(j)] * dt, boost::rational_cast<double>(d[static_cast<std::size_t>(j)]),
                        1e-10);
        }
    }
}

TEST(DerivativeWeights, ExactOnPolynomials)
{
    const std::vector<double> t{1.0, 0.8, 0.55, 0.4, 0.1};
    const auto w = derivative_weights(t);
    double d = 0.0;
    for (std::size_t j = 0; j < t.size(); ++j) {
        d += w[j] * std::pow(t[j], 4);
    }
    EXPECT_NEAR(d, 4.0, 1e-11);
}

TEST(InterpolationWeights, ReproduceCubic)
{
    const std::vector<double> t{1.0, 0.7, 0.5, 0.2};
    const auto w = interpolation_weights(t, 1.3);
    double v = 0.0;
    for (std::size_t j = 0; j < t.size(); ++j) {
        v += w[j] * (t[j] * t[j] * t[j] - t[j]);
    }
    EXPECT_NEAR(v, 1.3 * 1.3 * 1.3 - 1.3, 1e-12);
}
