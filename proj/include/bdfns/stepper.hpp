#pragma once

// One fully implicit BDF-q step of the Navier-Stokes equations with optional
// grad-div stabilization,
//
//   (D_q u^n, v) + nu (grad u^n, grad v) + b(u^n, u^n, v) - (p^n, div v)
//     + (div u^n, q) + mu (div u^n, div v) = (f(t_n), v),
//
// solved by Newton's method with the analytic Jacobian, plus startup and
// fixed-step trajectories.

#include <deque>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bdfns/bdf_core.hpp"
#include "bdfns/fem.hpp"
#include "bdfns/linsolve.hpp"
#include "bdfns/restrictions.hpp"

namespace bdfns {

struct State {
    double t;
    Vector u;
    Vector p;
};

/// Accepted states, most recent first, keeping at most `capacity` of them.
class SolutionHistory {
public:
    explicit SolutionHistory(std::size_t capacity = kMaxBdfOrder + 3);

    /// Throws StateError unless s.t is later than the newest stored time.
    void push(State s);
    void pop_newest();
    void clear() noexcept { states_.clear(); }

    [[nodiscard]] const State& operator[](std::size_t i) const { return states_.at(i); }
    [[nodiscard]] const State& newest() const { return states_.at(0); }
    [[nodiscard]] std::size_t size() const noexcept { return states_.size(); }
    [[nodiscard]] std::size_t capacity() const noexcept { return capacity_; }

    /// Times of the `count` most recent states, most recent first.
    [[nodiscard]] std::vector<double> times(std::size_t count) const;

    /// True if the `count` most recent states are spaced by dt (relative tolerance 1e-9).
    [[nodiscard]] bool uniform(double dt, std::size_t count) const;

private:
    std::size_t capacity_;
    std::deque<State> states_;
};

struct StepConfig {
    double nu = 1.0;
    double mu = 0.0;
    /// Newton stops once the residual norm is below newton_tol * (1 + ||rhs||).
    double newton_tol = 1e-10;
    int newton_max_iter = 25;
    /// Bound asserted on every Newton linear solve.
    double linear_residual_tol = 1e-10;
    /// Dirichlet data; zero when empty.
    VectorField bc;
    /// Body force; zero when empty.
    VectorField forcing;

    /// Throws ConfigError on invalid values.
    void validate() const;
};

struct StepResult {
    double t = 0.0;
    Vector u;
    Vector p;
    int newton_iterations = 0;
    /// Residual norm before each Newton update and after the last one.
    std::vector<double> residuals;
};

/// Owns the assembled operators of one (space, nu, mu) combination. The space
/// must outlive the stepper. Not thread-safe; use one stepper per run.
class Stepper {
public:
    Stepper(const MixedSpace& space, StepConfig config);

    [[nodiscard]] const MixedSpace& space() const noexcept { return *space_; }
    [[nodiscard]] const StepConfig& config() const noexcept { return config_; }
    [[nodiscard]] const AssembledOperators& operators() const noexcept { return ops_; }

    /// BDF-q with the scheme's coefficients; the q most recent states must be
    /// spaced by dt.
    StepResult step(const BdfScheme& scheme, const SolutionHistory& history, double dt);

    /// Variable-step BDF of order q: derivative weights of the polynomial
    /// interpolating the new state and the q most recent states.
    StepResult step_variable(int q, const SolutionHistory& history, double dt);

    /// Discrete L2 norm (u^T M u)^{1/2}.
    [[nodiscard]] double l2_norm(const Vector& u) const;

private:
    StepResult solve(std::span<const double> weights, const SolutionHistory& history, double t_new, int q);
    const SparseMatrix& linear_block(double w0);

    const MixedSpace* space_;
    StepConfig config_;
    AssembledOperators ops_;
    double cached_w0_ = 0.0;
    SparseMatrix cached_linear_;
    std::optional<LuFactorization> lu_;
};

/// Convenience wrapper assembling a stepper for a single step.
StepResult bdf_step(const BdfScheme& scheme, const SolutionHistory& history, double dt,
                    const StepConfig& config, const MixedSpace& space);

enum class StartMode {
    /// Interpolate the exact solution at t_0, ..., t_{q-1}.
    Exact,
    /// Self-starting: BDF-1 at dt / 2^q, then order + 1 and doubled step per stage.
    Ramp,
};

StartMode parse_start_mode(const std::string& text);

/// History holding q states at t0, t0 + dt, ..., t0 + (q-1) dt.
///
/// Exact mode requires `exact` (ConfigError otherwise). Ramp mode starts from
/// the interpolant of `exact` at t0, or from rest when `exact` is null.
SolutionHistory initialize_history(StartMode mode, const BdfScheme& scheme, Stepper& stepper, double dt,
                                   const ExactSolution* exact, double t0 = 0.0);

struct StepRecord {
    double t;
    double dt;
    int q;
    int newton_iterations;
    double u_l2;
    /// NaN unless an exact solution was supplied.
    double err_u_l2;
    double err_u_h1;
    double err_p_l2;
};

struct RunOptions {
    StartMode start = StartMode::Exact;
    const ExactSolution* exact = nullptr;
    double t0 = 0.0;
    /// When non-empty, the q start values (oldest first) replacing `start`.
    std::vector<State> start_states;
    /// Keep every accepted state (including the start values) in `trajectory`.
    bool store_trajectory = false;
    /// Called with each accepted state, start values included.
    std::function<void(const State&)> observer;
    RestrictionConfig restrictions{RestrictionMode::Off};
};

struct RunResult {
    State final_state;
    std::vector<StepRecord> records;
    std::vector<State> trajectory;
    std::vector<std::string> warnings;
    int steps = 0;
    /// Residual histories of every Newton solve, in step order.
    std::vector<std::vector<double>> newton_residuals;
};

/// Advances from t_{q-1} to T in uniform steps of dt. T - t0 must be an integer
/// multiple of dt. A StepFailure aborts the run and reports the failing time.
RunResult fixed_step_run(const BdfScheme& scheme, Stepper& stepper, double T, double dt,
                         const RunOptions& options = {});

/// CSV with columns t, dt, q, newton_iters, u_l2, err_u_l2, err_u_h1, err_p_l2.
void write_trajectory_csv(const std::vector<StepRecord>& records, const std::filesystem::path& path);

} // namespace bdfns
