#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "bdfns/controller.hpp"
#include "bdfns/errors.hpp"
#include "bdfns/harness.hpp"

using namespace bdfns;

namespace {

double abs_norm(const Vector& v)
{
    return v.norm();
}

// Times t_{n+1}, t_n, ... (most recent first) with jittered spacing.
std::vector<double> jittered_times(int count, std::mt19937& rng)
{
    std::uniform_real_distribution<double> dist(0.5, 1.5);
    std::vector<double> t{1.0};
    for (int k = 1; k < count; ++k) {
        t.push_back(t.back() - 0.01 * dist(rng));
    }
    return t;
}

std::vector<Vector> sample(const std::vector<double>& times, const std::function<Vector(double)>& f)
{
    std::vector<Vector> out;
    for (double t : times) {
        out.push_back(f(t));
    }
    return out;
}

double factorial(int n)
{
    return std::tgamma(n + 1.0);
}

} // namespace

TEST(EstimateError, PolynomialTrajectoriesGiveZero)
{
    std::mt19937 rng(4);
    for (int q = 1; q <= 5; ++q) {
        for (int degree = 0; degree <= q; ++degree) {
            const auto times = jittered_times(q + 2, rng);
            const auto values = sample(times, [degree](double t) {
                Vector v(3);
                for (int i = 0; i < 3; ++i) {
                    v[i] = (i + 1.0) * std::pow(t, degree) + 0.5 * t - 2.0;
                }
                return v;
            });
            double scale = 0.0;
            for (const auto& v : values) {
                scale = std::max(scale, v.norm());
            }
            EXPECT_LE(estimate_error(q, times, values, abs_norm), 1e-12 * scale) << "q=" << q << " degree=" << degree;
        }
    }
}

TEST(EstimateError, UniformMonomialClosedForm)
{
    // For u = t^{q+1} on a uniform grid the divided difference is 1, and the
    // product of q spacings i dt gives q! dt^q, scaled by dt / ((q + 1) dt).
    const double dt = 0.1;
    for (int q = 1; q <= 5; ++q) {
        std::vector<double> times;
        for (int k = 0; k < q + 2; ++k) {
            times.push_back(1.0 - k * dt);
        }
        const auto values = sample(times, [q](double t) { return Vector::Constant(1, std::pow(t, q + 1)); });
        const double expected = factorial(q) * std::pow(dt, q) / (q + 1);
        EXPECT_NEAR(estimate_error(q, times, values, abs_norm), expected, 1e-9 * expected) << "q=" << q;
    }
}

TEST(EstimateError, Homogeneous)
{
    std::mt19937 rng(6);
    const auto times = jittered_times(5, rng);
    const auto values = sample(times, [](double t) { return Vector::Constant(2, std::exp(3 * t)); });
    std::vector<Vector> doubled;
    for (const auto& v : values) {
        doubled.push_back(2.0 * v);
    }
    const double est = estimate_error(3, times, values, abs_norm);
    EXPECT_GT(est, 0.0);
    EXPECT_NEAR(estimate_error(3, times, doubled, abs_norm), 2.0 * est, 1e-14 * est);
}

TEST(EstimateError, NeedsQPlusTwoStates)
{
    const std::vector<double> times{1.0, 0.9, 0.8};
    const auto values = sample(times, [](double t) { return Vector::Constant(1, t); });
    EXPECT_THROW(estimate_error(2, times, values, abs_norm), StateError);
    EXPECT_THROW(estimate_error(0, times, values, abs_norm), InvalidOrderError);
}

TEST(EstimateError, HistoryOverloadUsesMassNorm)
{
    const MixedSpace space(unit_square_mesh(2), {1});
    const auto ops = assemble_linear_operators(space, 1.0, 0.0);
    SolutionHistory h;
    for (int k = 0; k < 4; ++k) {
        const double t = 0.1 * k;
        h.push({t, Vector::Constant(space.n_u(), t * t * t), Vector::Zero(space.n_p())});
    }
    // u = t^3 (1, ..., 1) has mass norm sqrt(2) t^3; q = 2: EST = 2! dt^2 / 3 * sqrt(2).
    EXPECT_NEAR(estimate_error(2, h, ops.mass), 2.0 * 0.01 / 3.0 * std::sqrt(2.0), 1e-14);
}

TEST(Tolerance, Examples)
{
    const auto fixed = [](double value) { return [value](const Vector&) { return value; }; };
    const Vector z = Vector::Zero(2);
    EXPECT_DOUBLE_EQ(tolerance(1e-4, z, z, abs_norm), 1e-4 * 0.001);
    EXPECT_DOUBLE_EQ(tolerance(1e-4, Vector::Constant(1, 2.0), Vector::Constant(1, 1.0), abs_norm), 1e-4 * 2.001);
    EXPECT_DOUBLE_EQ(tolerance(1e-4, z, z, fixed(3.0)), 1e-4 * 3.001);
    const Vector a = Vector::Constant(1, 0.7);
    const Vector b = Vector::Constant(1, -0.2);
    const double base = tolerance(1e-3, a, b, abs_norm) - 1e-3 * 0.001;
    const double scaled = tolerance(1e-3, 10 * a, 10 * b, abs_norm) - 1e-3 * 0.001;
    EXPECT_NEAR(scaled, 10 * base, 1e-15);
}

TEST(NewStep, Examples)
{
    EXPECT_DOUBLE_EQ(new_step(0.1, 1e-6, 1e-6, 3), 0.09);
    EXPECT_DOUBLE_EQ(new_step(0.1, 0.0, 1e-6, 3), 0.2);
    EXPECT_DOUBLE_EQ(step_formula(0.1, 1e-6, 16e-6, 1), 0.1 * 3.6);
    EXPECT_DOUBLE_EQ(new_step(0.1, 1e-6, 16e-6, 1), 0.2);
    EXPECT_DOUBLE_EQ(new_step(0.1, 1.0, 1e-12, 2), 0.02);
    EXPECT_DOUBLE_EQ(new_step(0.1, 1e-6, 1e-6, 3, 0.05), 0.05);
    EXPECT_TRUE(std::isinf(step_formula(0.1, 0.0, 1.0, 2)));
}

TEST(NewStep, HomogeneousBeforeClamping)
{
    for (int q = 1; q <= 5; ++q) {
        const double raw = step_formula(0.1, 2e-6, 1e-6, q);
        EXPECT_NEAR(step_formula(0.3, 2e-6, 1e-6, q), 3.0 * raw, 1e-15);
        EXPECT_NEAR(step_formula(0.1, 2e-6 * std::pow(2.0, q + 1), 1e-6, q), 0.5 * raw, 1e-15);
    }
}

TEST(SelectOrder, Examples)
{
    EXPECT_EQ(select_order(3e-5, 1e-5, 2e-5, 3, 5), 3);
    EXPECT_EQ(select_order(1e-6, 1e-5, 2e-5, 3, 5), 2);
    EXPECT_EQ(select_order(3e-5, 1e-5, 2e-6, 3, 5), 4);
    EXPECT_EQ(select_order(2e-5, 1e-5, std::nullopt, 5, 5), 5);
    EXPECT_EQ(select_order(1e-6, 1e-5, 1e-9, 5, 5), 4);
    EXPECT_EQ(select_order(std::nullopt, 1e-5, 1e-6, 1, 5), 2);
    EXPECT_EQ(select_order(std::nullopt, 1e-5, 1e-4, 1, 5), 1);
    // Ties keep the current order.
    EXPECT_EQ(select_order(1e-5, 1e-5, 1e-5, 2, 5), 2);
    EXPECT_THROW(select_order(std::nullopt, 1.0, std::nullopt, 6, 5), InvalidOrderError);
    EXPECT_THROW(select_order(std::nullopt, 1.0, std::nullopt, 3, 2), InvalidOrderError);
}

TEST(Restrictions, Examples)
{
    const double h = 0.1;
    RestrictionConfig cfg;
    const auto at_boundary = check_restrictions(h * h, 1, h, 2, cfg);
    EXPECT_FALSE(at_boundary.violated.r2);
    EXPECT_TRUE(check_restrictions(h * h * 1.01, 1, h, 2, cfg).violated.r2);
    const auto r = check_restrictions(2.0 * std::pow(h, 1.0 / 3.0), 3, h, 2, cfg);
    EXPECT_TRUE(r.violated.r1);
    EXPECT_EQ(r.violated.to_string(), "R1|R2|R3");
    cfg.mode = RestrictionMode::Off;
    EXPECT_FALSE(check_restrictions(10.0, 3, h, 2, cfg).violated.any());
    EXPECT_TRUE(std::isinf(check_restrictions(10.0, 3, h, 2, cfg).max_dt));
    cfg = {};
    cfg.enable_r1 = cfg.enable_r2 = cfg.enable_r3 = false;
    EXPECT_FALSE(check_restrictions(10.0, 3, h, 2, cfg).violated.any());
}

TEST(Restrictions, MaxDtIsAdmissible)
{
    RestrictionConfig cfg;
    cfg.c1 = 2.0;
    cfg.c3 = 0.5;
    for (int q = 1; q <= 5; ++q) {
        for (double h : {0.5, 0.1, 0.01}) {
            const double m = check_restrictions(1.0, q, h, 2, cfg).max_dt;
            EXPECT_FALSE(check_restrictions(m, q, h, 2, cfg).violated.any());
            EXPECT_TRUE(check_restrictions(m * 1.001, q, h, 2, cfg).violated.any());
        }
    }
}

TEST(Restrictions, ParseAndValidate)
{
    EXPECT_EQ(parse_restriction_mode("clamp"), RestrictionMode::Clamp);
    EXPECT_EQ(to_string(RestrictionMode::Warn), "warn");
    EXPECT_THROW(parse_restriction_mode("strict"), ConfigError);
    RestrictionConfig cfg;
    cfg.c2 = 0.0;
    EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(ControllerConfig, Validation)
{
    ControllerConfig c;
    EXPECT_NO_THROW(c.validate());
    c.q_max = 6;
    EXPECT_THROW(c.validate(), ConfigError);
    c = {};
    c.tol_r = 0.0;
    EXPECT_THROW(c.validate(), ConfigError);
    c = {};
    c.T = c.t0;
    EXPECT_THROW(c.validate(), ConfigError);
}

class AdaptiveRun : public ::testing::Test {
protected:
    ManufacturedCase c = builtin_case("trigquad");
    MixedSpace space{unit_square_mesh(2), {1}};
    ExactSolution exact = c.exact();

    AdaptiveResult run(ControllerConfig cfg)
    {
        Stepper stepper(space, case_step_config(c, 1.0, 0.0, 1e-12));
        AdaptiveOptions opt;
        opt.exact = &exact;
        return adaptive_run(cfg, stepper, opt);
    }
};

TEST_F(AdaptiveRun, AcceptRuleAndMonotoneTimes)
{
    ControllerConfig cfg;
    cfg.tol_r = 1e-6;
    cfg.q_max = 3;
    cfg.restrictions.mode = RestrictionMode::Off;
    const auto r = run(cfg);
    double last = 0.0;
    int accepted = 0;
    int rejected = 0;
    for (const auto& rec : r.log) {
        EXPECT_EQ(rec.accepted, rec.est <= rec.tol);
        EXPECT_LE(rec.q, 3);
        if (rec.accepted) {
            EXPECT_GT(rec.t, last);
            last = rec.t;
            ++accepted;
        } else {
            EXPECT_GT(rec.est, rec.tol);
            ++rejected;
        }
    }
    EXPECT_EQ(accepted, r.accepted);
    EXPECT_EQ(rejected, r.rejected);
    EXPECT_EQ(last, 1.0);
    EXPECT_EQ(r.final_state.t, 1.0);
    EXPECT_EQ(r.log[0].q, 1);
    EXPECT_EQ(r.log[1].q, 1);
}

TEST_F(AdaptiveRun, ErrorTracksTolerance)
{
    ControllerConfig cfg;
    cfg.q_max = 3;
    cfg.restrictions.mode = RestrictionMode::Off;
    double previous = std::numeric_limits<double>::infinity();
    for (double tol : {1e-3, 1e-5, 1e-7}) {
        cfg.tol_r = tol;
        const auto r = run(cfg);
        const double err = error_norms(space, r.final_state.u, r.final_state.p, exact, 1.0).l2_velocity;
        EXPECT_LT(err, previous) << "tol_r=" << tol;
        previous = err;
    }
}

TEST_F(AdaptiveRun, ClampKeepsRestrictionsSatisfied)
{
    ControllerConfig cfg;
    cfg.tol_r = 1e-4;
    cfg.q_max = 3;
    cfg.restrictions.mode = RestrictionMode::Clamp;
    cfg.restrictions.enable_r2 = false;
    cfg.restrictions.c1 = 1e-4;
    const auto r = run(cfg);
    for (const auto& rec : r.log) {
        if (rec.t < 1.0 - 1e-12) {
            EXPECT_FALSE(rec.flags.any()) << "t=" << rec.t;
        }
    }
    cfg.restrictions.mode = RestrictionMode::Warn;
    bool flagged = false;
    for (const auto& rec : run(cfg).log) {
        flagged = flagged || rec.flags.r1;
    }
    EXPECT_TRUE(flagged);
}

TEST_F(AdaptiveRun, AbortsAfterConsecutiveRejections)
{
    ControllerConfig cfg;
    cfg.tol_r = 1e-30;
    cfg.max_consecutive_rejections = 2;
    EXPECT_THROW(run(cfg), NumericalFailure);
}

TEST_F(AdaptiveRun, StepLogCsv)
{
    ControllerConfig cfg;
    cfg.tol_r = 1e-4;
    cfg.q_max = 2;
    const auto r = run(cfg);
    const auto path = std::filesystem::temp_directory_path() / "bdfns_test_steps.csv";
    write_step_log_csv(r.log, path);
    std::ifstream in(path);
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "t,dt,q,EST,TOL,accepted,flags");
    std::size_t rows = 0;
    while (std::getline(in, line)) {
        ++rows;
        EXPECT_EQ(std::count(line.begin(), line.end(), ','), 6);
    }
    EXPECT_EQ(rows, r.log.size());
}
