#pragma once

// Variable-step, variable-order BDF driver. The local error of order q at
// t_{n+1} is estimated by
//
//   EST = dt_n / (t_{n+1} - t_{n-q}) * || prod_{i<q} (t_{n+1} - t_{n-i}) u[t_{n+1}, ..., t_{n-q}] ||_0
//
// and a step is accepted when EST <= TOL = TOL_r (max(|u^{n+1}|_0, |u^n|_0) + 0.001).

#include <filesystem>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bdfns/restrictions.hpp"
#include "bdfns/stepper.hpp"

namespace bdfns {

using NormFunction = std::function<double(const Vector&)>;

/// `times[0]` is the candidate time t_{n+1}, `times[q + 1]` is t_{n-q}; at
/// least q + 2 values are required (StateError otherwise).
double estimate_error(int q, std::span<const double> times, std::span<const Vector> values, const NormFunction& norm);

/// Same, reading the q + 2 most recent states of `history` (candidate first)
/// and measuring with (v^T M v)^{1/2}.
double estimate_error(int q, const SolutionHistory& history, const SparseMatrix& mass);

double tolerance(double tol_r, const Vector& u_curr, const Vector& u_prev, const NormFunction& norm);
double tolerance(double tol_r, const Vector& u_curr, const Vector& u_prev, const SparseMatrix& mass);

/// 0.9 dt (TOL / EST)^{1/(q+1)} without clamping; infinity when EST = 0.
double step_formula(double dt, double est, double tol, int q);

/// step_formula clamped to [dt / 5, 2 dt] and then to max_dt.
double new_step(double dt, double est, double tol, int q,
                double max_dt = std::numeric_limits<double>::infinity());

/// Order with the smallest estimate among the available candidates q - 1, q,
/// q + 1; ties keep the current order. Missing neighbours are std::nullopt.
int select_order(std::optional<double> est_lower, double est_current, std::optional<double> est_upper, int q,
                 int q_max);

struct ControllerConfig {
    double tol_r = 1e-6;
    int q_max = 5;
    double t0 = 0.0;
    double T = 1.0;
    /// Initial step; sqrt(tol_r) / 100 when not positive.
    double dt0 = 0.0;
    int max_consecutive_rejections = 10;
    RestrictionConfig restrictions{RestrictionMode::Warn};

    /// Throws ConfigError on invalid values.
    void validate() const;
};

struct ControllerRecord {
    /// Time the step attempted to reach.
    double t;
    double dt;
    int q;
    double est;
    double tol;
    bool accepted;
    RestrictionFlags flags;
    int newton_iterations;
};

struct AdaptiveResult {
    State final_state;
    std::vector<ControllerRecord> log;
    std::vector<State> trajectory;
    std::vector<std::string> warnings;
    int accepted = 0;
    int rejected = 0;

    /// Mean step length over accepted steps.
    [[nodiscard]] double mean_accepted_dt() const;
};

struct AdaptiveOptions {
    /// Initial value interpolated from here; the run starts from rest otherwise.
    const ExactSolution* exact = nullptr;
    bool store_trajectory = false;
};

/// Runs from config.t0 to config.T. Starts with BDF-1 and two steps of dt0;
/// if the first estimate fails, restarts from t0 with a reduced step. Aborts
/// with a NumericalFailure after more than max_consecutive_rejections
/// consecutive rejections. Newton failures count as rejections with EST = inf.
AdaptiveResult adaptive_run(const ControllerConfig& config, Stepper& stepper, const AdaptiveOptions& options = {});

/// CSV with columns t, dt, q, EST, TOL, accepted, flags.
void write_step_log_csv(const std::vector<ControllerRecord>& log, const std::filesystem::path& path);

} // namespace bdfns
