#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>

#include "bdfns/fem.hpp"

using namespace bdfns;

namespace {

double factorial(int n)
{
    return std::tgamma(n + 1.0);
}

Vector random_vector(std::mt19937& rng, Eigen::Index n)
{
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    Vector v(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        v[i] = dist(rng);
    }
    return v;
}

void zero_dirichlet(const MixedSpace& space, Vector& v)
{
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (space.dirichlet_mask()[static_cast<std::size_t>(i)]) {
            v[i] = 0.0;
        }
    }
}

// Entries b(a, b, phi_i) by a direct loop over elements and quadrature points.
Vector convection_oracle(const MixedSpace& space, const Vector& a, const Vector& b)
{
    Vector out = Vector::Zero(space.n_u());
    const int nn = space.n_nodes();
    for (int t = 0; t < space.n_elements(); ++t) {
        const auto geom = space.geometry(t);
        const auto& nodes = space.element_nodes(t);
        for (const auto& qp : assembly_quadrature()) {
            const auto phi = p2_values(qp.barycentric);
            const auto dphi = p2_gradients(qp.barycentric, geom);
            Eigen::Vector2d av = Eigen::Vector2d::Zero();
            Eigen::Vector2d bv = Eigen::Vector2d::Zero();
            Eigen::Matrix2d ga = Eigen::Matrix2d::Zero();
            Eigen::Matrix2d gb = Eigen::Matrix2d::Zero();
            for (int k = 0; k < 6; ++k) {
                for (int c = 0; c < 2; ++c) {
                    const double ak = a[c * nn + nodes[static_cast<std::size_t>(k)]];
                    const double bk = b[c * nn + nodes[static_cast<std::size_t>(k)]];
                    av[c] += ak * phi[static_cast<std::size_t>(k)];
                    bv[c] += bk * phi[static_cast<std::size_t>(k)];
                    ga.row(c) += ak * dphi[static_cast<std::size_t>(k)].transpose();
                    gb.row(c) += bk * dphi[static_cast<std::size_t>(k)].transpose();
                }
            }
            const Eigen::Vector2d integrand = gb * av + 0.5 * ga.trace() * bv;
            const double w = qp.weight * geom.area;
            for (int k = 0; k < 6; ++k) {
                for (int c = 0; c < 2; ++c) {
                    out[c * nn + nodes[static_cast<std::size_t>(k)]] += w * integrand[c] * phi[static_cast<std::size_t>(k)];
                }
            }
        }
    }
    return out;
}

double max_abs_difference(const SparseMatrix& a, const SparseMatrix& b)
{
    return Eigen::MatrixXd(a - b).cwiseAbs().maxCoeff();
}

} // namespace

TEST(Quadrature, AssemblyRuleExactToDegreeFive)
{
    // Reference triangle (0,0), (1,0), (0,1): int x^a y^b = a! b! / (a + b + 2)!.
    for (int a = 0; a <= 5; ++a) {
        for (int b = 0; a + b <= 5; ++b) {
            double s = 0.0;
            for (const auto& qp : assembly_quadrature()) {
                s += 0.5 * qp.weight * std::pow(qp.barycentric[1], a) * std::pow(qp.barycentric[2], b);
            }
            EXPECT_NEAR(s, factorial(a) * factorial(b) / factorial(a + b + 2), 1e-15) << a << "," << b;
        }
    }
}

TEST(Quadrature, ErrorRuleExactToDegreeTen)
{
    for (int a = 0; a <= 10; ++a) {
        for (int b = 0; a + b <= 10; ++b) {
            double s = 0.0;
            for (const auto& qp : error_quadrature()) {
                s += 0.5 * qp.weight * std::pow(qp.barycentric[1], a) * std::pow(qp.barycentric[2], b);
            }
            EXPECT_NEAR(s, factorial(a) * factorial(b) / factorial(a + b + 2), 1e-15) << a << "," << b;
        }
    }
}

TEST(P2Basis, PartitionOfUnityAndNodalProperty)
{
    const std::array<std::array<double, 3>, 6> nodes{{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}, {0.5, 0.5, 0}, {0, 0.5, 0.5},
                                                      {0.5, 0, 0.5}}};
    for (std::size_t i = 0; i < 6; ++i) {
        const auto phi = p2_values(nodes[i]);
        for (std::size_t j = 0; j < 6; ++j) {
            EXPECT_NEAR(phi[j], i == j ? 1.0 : 0.0, 1e-15);
        }
    }
    const MixedSpace space(unit_square_mesh(1), {1});
    const auto geom = space.geometry(0);
    const auto phi = p2_values({0.2, 0.3, 0.5});
    const auto dphi = p2_gradients({0.2, 0.3, 0.5}, geom);
    EXPECT_NEAR(std::accumulate(phi.begin(), phi.end(), 0.0), 1.0, 1e-15);
    Eigen::Vector2d g = Eigen::Vector2d::Zero();
    for (const auto& d : dphi) {
        g += d;
    }
    EXPECT_LT(g.norm(), 1e-14);
}

TEST(MixedSpace, Counts)
{
    const MixedSpace s1(unit_square_mesh(1), {1});
    EXPECT_EQ(s1.n_u(), 18);
    EXPECT_EQ(s1.n_p(), 4);
    const MixedSpace s2(unit_square_mesh(2), {1});
    EXPECT_EQ(s2.n_p(), 9);
    const auto& mask = s2.dirichlet_mask();
    EXPECT_EQ(std::count(mask.begin(), mask.end(), true), 32);
    const int nn = s2.n_nodes();
    for (int k = 0; k < nn; ++k) {
        EXPECT_EQ(mask[static_cast<std::size_t>(k)], mask[static_cast<std::size_t>(nn + k)]);
        const auto x = s2.node_point(k);
        const bool on_boundary = x.x() == 0.0 || x.x() == 1.0 || x.y() == 0.0 || x.y() == 1.0;
        EXPECT_EQ(mask[static_cast<std::size_t>(k)], on_boundary);
    }
}

TEST(MixedSpace, MarkerSelection)
{
    const MixedSpace s(rectangle_mesh(4, 2, 2.0, 1.0, {1, 2, 3, 4}), {1, 3, 4});
    for (int k = 0; k < s.n_nodes(); ++k) {
        const auto x = s.node_point(k);
        const bool outflow_only = x.x() == 2.0 && x.y() > 0.0 && x.y() < 1.0;
        const bool on_boundary = x.x() == 0.0 || x.x() == 2.0 || x.y() == 0.0 || x.y() == 1.0;
        EXPECT_EQ(s.dirichlet_mask()[static_cast<std::size_t>(k)], on_boundary && !outflow_only);
    }
}

TEST(LinearOperators, MassSumsToArea)
{
    const MixedSpace space(unit_square_mesh(3, DiagonalPattern::Alternating), {1});
    const auto ops = assemble_linear_operators(space, 1.0, 0.0);
    const int nn = space.n_nodes();
    Vector e = Vector::Zero(space.n_u());
    e.head(nn).setOnes();
    EXPECT_NEAR(e.dot(ops.mass * e), 1.0, 1e-14);
    EXPECT_NEAR(ops.pressure_mean.sum(), 1.0, 1e-14);
    EXPECT_NEAR(Vector::Ones(space.n_p()).dot(ops.pressure_mass * Vector::Ones(space.n_p())), 1.0, 1e-14);
}

TEST(LinearOperators, ConstantsInStiffnessKernel)
{
    const MixedSpace space(unit_square_mesh(4), {1});
    const auto ops = assemble_linear_operators(space, 1.0, 1.0);
    const Vector u = interpolate(space, VectorField([](double, double, double) { return Eigen::Vector2d(1, 0); }), 0.0);
    EXPECT_NEAR(u.dot(ops.stiffness * u), 0.0, 1e-13);
    const Vector w = interpolate(space, VectorField([](double x, double y, double) { return Eigen::Vector2d(x, -y); }), 0.0);
    EXPECT_NEAR(w.dot(ops.grad_div * w), 0.0, 1e-13);
    EXPECT_LT((ops.divergence * w).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(LinearOperators, ViscosityAndGradDivScaling)
{
    const MixedSpace space(unit_square_mesh(3), {1});
    const auto a = assemble_linear_operators(space, 1.0, 1.0);
    const auto b = assemble_linear_operators(space, 0.25, 0.0);
    EXPECT_LT(max_abs_difference(SparseMatrix(0.25 * a.stiffness), b.stiffness), 1e-14);
    EXPECT_EQ(Eigen::MatrixXd(b.grad_div).cwiseAbs().maxCoeff(), 0.0);
    // The stiffness of u = (x^2, 0) is int |grad u|^2 = 4/3.
    const Vector u = interpolate(space, VectorField([](double x, double, double) { return Eigen::Vector2d(x * x, 0); }), 0.0);
    EXPECT_NEAR(u.dot(a.stiffness * u), 4.0 / 3.0, 1e-13);
    EXPECT_NEAR(u.dot(a.grad_div * u), 4.0 / 3.0, 1e-13);
}

TEST(LinearOperators, ShuffledAssemblyOrder)
{
    const MixedSpace space(unit_square_mesh(6, DiagonalPattern::Alternating), {1});
    std::vector<int> order(static_cast<std::size_t>(space.n_elements()));
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), std::mt19937(3));
    const auto a = assemble_linear_operators(space, 1.0, 0.5);
    const auto b = assemble_linear_operators(space, 1.0, 0.5, order);
    EXPECT_LT(max_abs_difference(a.mass, b.mass), 1e-14);
    EXPECT_LT(max_abs_difference(a.stiffness, b.stiffness), 1e-13);
    EXPECT_LT(max_abs_difference(a.divergence, b.divergence), 1e-14);
    EXPECT_LT(max_abs_difference(a.grad_div, b.grad_div), 1e-13);
}

TEST(LinearOperators, InfSupConstantBoundedBelow)
{
    // beta^2 = second smallest eigenvalue of B A^{-1} B^T v = lambda Mp v on
    // interior velocities; the smallest is the constant pressure mode.
    std::vector<double> betas;
    for (int n : {4, 8, 16}) {
        const MixedSpace space(unit_square_mesh(n), {1});
        const auto ops = assemble_linear_operators(space, 1.0, 0.0);
        std::vector<int> interior;
        for (int i = 0; i < space.n_u(); ++i) {
            if (!space.dirichlet_mask()[static_cast<std::size_t>(i)]) {
                interior.push_back(i);
            }
        }
        const auto ni = static_cast<Eigen::Index>(interior.size());
        const Eigen::MatrixXd a_full(ops.stiffness);
        const Eigen::MatrixXd b_full(ops.divergence);
        Eigen::MatrixXd a(ni, ni);
        Eigen::MatrixXd b(space.n_p(), ni);
        for (Eigen::Index j = 0; j < ni; ++j) {
            for (Eigen::Index i = 0; i < ni; ++i) {
                a(i, j) = a_full(interior[static_cast<std::size_t>(i)], interior[static_cast<std::size_t>(j)]);
            }
            b.col(j) = b_full.col(interior[static_cast<std::size_t>(j)]);
        }
        const Eigen::MatrixXd s = b * a.llt().solve(b.transpose());
        const Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> eig(s, Eigen::MatrixXd(ops.pressure_mass));
        ASSERT_EQ(eig.info(), Eigen::Success);
        EXPECT_LT(std::abs(eig.eigenvalues()[0]), 1e-10);
        betas.push_back(std::sqrt(eig.eigenvalues()[1]));
    }
    for (std::size_t k = 0; k < betas.size(); ++k) {
        EXPECT_GT(betas[k], 0.2) << "level " << k;
        if (k > 0) {
            EXPECT_GT(betas[k], 0.8 * betas[k - 1]);
        }
    }
}

TEST(Convection, ZeroWindGivesZeroMatrix)
{
    const MixedSpace space(unit_square_mesh(2), {1});
    const Vector zero = Vector::Zero(space.n_u());
    EXPECT_EQ(Eigen::MatrixXd(assemble_convection(space, zero)).cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ(Eigen::MatrixXd(assemble_convection_jacobian(space, zero)).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Convection, SkewSymmetric)
{
    const MixedSpace space(unit_square_mesh(4, DiagonalPattern::Alternating), {1});
    std::mt19937 rng(11);
    for (int trial = 0; trial < 10; ++trial) {
        const Vector w = random_vector(rng, space.n_u());
        Vector v = random_vector(rng, space.n_u());
        zero_dirichlet(space, v);
        const double scale = w.norm() * v.squaredNorm();
        EXPECT_LE(std::abs(v.dot(assemble_convection(space, w) * v)), 1e-12 * scale);
    }
}

TEST(Convection, ConstantWindClosedForm)
{
    // w = (1, 0), v = (x, 0): (w . grad) v . v = x, div w = 0, so b(w, v, v) = 1/2.
    const MixedSpace space(unit_square_mesh(3), {1});
    const Vector w = interpolate(space, VectorField([](double, double, double) { return Eigen::Vector2d(1, 0); }), 0.0);
    const Vector v = interpolate(space, VectorField([](double x, double, double) { return Eigen::Vector2d(x, 0); }), 0.0);
    EXPECT_NEAR(v.dot(assemble_convection(space, w) * v), 0.5, 1e-14);
    // w = (x, y): (w . grad) v . v = x^2 and div w = 2, so b = 1/3 + 1/3.
    const Vector w2 = interpolate(space, VectorField([](double x, double y, double) { return Eigen::Vector2d(x, y); }), 0.0);
    EXPECT_NEAR(v.dot(assemble_convection(space, w2) * v), 2.0 / 3.0, 1e-14);
}

TEST(Convection, MatchesIndependentLoop)
{
    const MixedSpace space(unit_square_mesh(3, DiagonalPattern::Alternating), {1});
    std::mt19937 rng(5);
    const Vector a = random_vector(rng, space.n_u());
    const Vector b = random_vector(rng, space.n_u());
    const Vector oracle = convection_oracle(space, a, b);
    EXPECT_LT((assemble_convection_vector(space, a, b) - oracle).norm(), 1e-13 * oracle.norm());
    EXPECT_LT((assemble_convection(space, a) * b - oracle).norm(), 1e-13 * oracle.norm());
}

TEST(Convection, JacobianIsBothRoles)
{
    const MixedSpace space(unit_square_mesh(3), {1});
    std::mt19937 rng(9);
    const Vector w = random_vector(rng, space.n_u());
    const Vector v = random_vector(rng, space.n_u());
    const Vector expected = convection_oracle(space, w, v) + convection_oracle(space, v, w);
    EXPECT_LT((assemble_convection_jacobian(space, w) * v - expected).norm(), 1e-13 * expected.norm());
}

TEST(Convection, JacobianFiniteDifference)
{
    const MixedSpace space(unit_square_mesh(3), {1});
    std::mt19937 rng(13);
    const Vector w = random_vector(rng, space.n_u());
    const Vector v = random_vector(rng, space.n_u());
    const Vector jv = assemble_convection_jacobian(space, w) * v;
    const Vector base = assemble_convection_vector(space, w, w);
    double previous = std::numeric_limits<double>::infinity();
    for (double eps : {1e-4, 1e-5, 1e-6, 1e-7, 1e-8}) {
        const Vector wp = w + eps * v;
        const Vector fd = (assemble_convection_vector(space, wp, wp) - base) / eps;
        const double err = (fd - jv).norm() / jv.norm();
        // The quadratic map has remainder exactly eps b(v, v, .).
        EXPECT_LT(err, 10.0 * eps + 1e-6);
        if (eps >= 1e-6) {
            EXPECT_LT(err, previous);
        }
        previous = err;
    }
}

TEST(Interpolation, Reproduction)
{
    const MixedSpace space(unit_square_mesh(3, DiagonalPattern::Alternating), {1});
    const VectorField quad = [](double x, double y, double) { return Eigen::Vector2d(x * x - x * y + 3, 2 * y * y - x); };
    const GradientField quad_grad = [](double x, double y, double) {
        Eigen::Matrix2d g;
        g << 2 * x - y, -x, -1, 4 * y;
        return g;
    };
    const ScalarField lin = [](double x, double y, double) { return 2 * x - y + 0.5; };
    const Vector u = interpolate(space, quad, 0.0);
    const Vector p = interpolate(space, lin, 0.0);
    const auto e = error_norms(space, u, p, {quad, quad_grad, lin}, 0.0);
    EXPECT_LE(e.l2_velocity, 1e-13);
    EXPECT_LE(e.h1_semi_velocity, 1e-12);
    EXPECT_LE(e.l2_pressure, 1e-13);

    const Vector c = interpolate(space, VectorField([](double, double, double) { return Eigen::Vector2d(2.5, -1); }), 0.0);
    EXPECT_TRUE((c.head(space.n_nodes()).array() == 2.5).all());
    EXPECT_TRUE((c.tail(space.n_nodes()).array() == -1.0).all());
}

TEST(Interpolation, ApplyDirichletTouchesOnlyMaskedUnknowns)
{
    const MixedSpace space(unit_square_mesh(2), {1});
    Vector u = Vector::Constant(space.n_u(), 7.0);
    apply_dirichlet(space, [](double x, double y, double t) { return Eigen::Vector2d(x + t, y); }, 1.0, u);
    for (int k = 0; k < space.n_nodes(); ++k) {
        const auto x = space.node_point(k);
        if (space.dirichlet_mask()[static_cast<std::size_t>(k)]) {
            EXPECT_EQ(u[k], x.x() + 1.0);
            EXPECT_EQ(u[space.n_nodes() + k], x.y());
        } else {
            EXPECT_EQ(u[k], 7.0);
        }
    }
}

TEST(ErrorNorms, ZeroFields)
{
    const MixedSpace space(unit_square_mesh(2), {1});
    const ExactSolution zero{[](double, double, double) { return Eigen::Vector2d::Zero().eval(); },
                             [](double, double, double) { return Eigen::Matrix2d::Zero().eval(); },
                             [](double, double, double) { return 0.0; }};
    const auto e = error_norms(space, Vector::Zero(space.n_u()), Vector::Zero(space.n_p()), zero, 0.0);
    EXPECT_EQ(e.l2_velocity, 0.0);
    EXPECT_EQ(e.h1_semi_velocity, 0.0);
    EXPECT_EQ(e.l2_pressure, 0.0);
}

TEST(ErrorNorms, InterpolationConvergesAtOrderThree)
{
    const double pi = std::numbers::pi;
    const VectorField u = [pi](double x, double y, double) {
        return Eigen::Vector2d(std::sin(pi * x) * std::cos(pi * y), std::exp(x * y));
    };
    const GradientField g = [pi](double x, double y, double) {
        Eigen::Matrix2d m;
        m << pi * std::cos(pi * x) * std::cos(pi * y), -pi * std::sin(pi * x) * std::sin(pi * y),
            y * std::exp(x * y), x * std::exp(x * y);
        return m;
    };
    const ScalarField p = [](double x, double y, double) { return std::sin(x + 2 * y); };
    std::vector<ErrorNorms> errs;
    for (int n : {8, 16, 32}) {
        const MixedSpace space(unit_square_mesh(n), {1});
        errs.push_back(error_norms(space, interpolate(space, u, 0.0), interpolate(space, p, 0.0), {u, g, p}, 0.0));
    }
    for (std::size_t k = 1; k < errs.size(); ++k) {
        EXPECT_NEAR(errs[k - 1].l2_velocity / errs[k].l2_velocity, 8.0, 0.4);
        EXPECT_NEAR(errs[k - 1].h1_semi_velocity / errs[k].h1_semi_velocity, 4.0, 0.25);
        EXPECT_NEAR(errs[k - 1].l2_pressure / errs[k].l2_pressure, 4.0, 0.25);
    }
}

TEST(Load, IntegratesQuadraticForcing)
{
    const MixedSpace space(unit_square_mesh(2), {1});
    const Vector f = assemble_load(space, [](double x, double y, double t) { return Eigen::Vector2d(x * y, t); }, 3.0);
    // Summing the loads of one component integrates the field.
    EXPECT_NEAR(f.head(space.n_nodes()).sum(), 0.25, 1e-14);
    EXPECT_NEAR(f.tail(space.n_nodes()).sum(), 3.0, 1e-14);
}

TEST(Vtk, WritesLegacyHeader)
{
    const MixedSpace space(unit_square_mesh(2), {1});
    const auto path = std::filesystem::temp_directory_path() / "bdfns_test_fem.vtk";
    write_vtk(space, Vector::Zero(space.n_u()), Vector::Zero(space.n_p()), path);
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    EXPECT_EQ(ss.str().rfind("# vtk DataFile Version", 0), 0U);
    EXPECT_NE(ss.str().find("UNSTRUCTURED_GRID"), std::string::npos);
}
