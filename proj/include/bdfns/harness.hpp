#pragma once

// Manufactured solutions and the convergence, robustness and
// Stokes-projection studies built on them.

#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "bdfns/fem.hpp"
#include "bdfns/stepper.hpp"

namespace bdfns {

using ForcingFunction = std::function<Eigen::Vector2d(double x, double y, double t, double nu)>;

struct ManufacturedCase {
    std::string name;
    std::string description;
    VectorField velocity;
    GradientField velocity_gradient;
    ScalarField pressure;
    /// f = u_t - nu lap u + (u . grad) u + grad p.
    ForcingFunction forcing;
    /// g = -nu lap u + grad p, the Stokes data whose solution is (u, p).
    ForcingFunction stokes_rhs;
    bool nu_dependent = true;
    /// u vanishes on the boundary; otherwise u itself is the Dirichlet data.
    bool homogeneous_bc = true;
    /// Polynomial degree in time, or -1.
    int time_degree = -1;

    [[nodiscard]] ExactSolution exact() const { return {velocity, velocity_gradient, pressure}; }
    [[nodiscard]] VectorField forcing_at(double nu) const;
    [[nodiscard]] VectorField stokes_rhs_at(double nu) const;
    /// Dirichlet data for StepConfig::bc; empty for homogeneous cases.
    [[nodiscard]] VectorField boundary_data() const;
};

/// "stream2", "polyq" (time degree q), "steady" and "trigquad" live on the
/// unit square; "channel" is Poiseuille flow in a channel of height 0.41.
std::vector<ManufacturedCase> builtin_cases(int q = 2);

/// Throws ConfigError for an unknown name.
ManufacturedCase builtin_case(const std::string& name, int q = 2);

/// Step configuration for a case: forcing at nu and, if needed, Dirichlet data.
StepConfig case_step_config(const ManufacturedCase& c, double nu, double mu, double newton_tol = 1e-10);

class ConvergenceTable {
public:
    ConvergenceTable() = default;
    ConvergenceTable(std::string parameter, std::vector<std::string> norms);

    void add_row(double parameter, std::vector<double> errors, std::string note = {});

    [[nodiscard]] const std::string& parameter_name() const noexcept { return parameter_; }
    [[nodiscard]] const std::vector<std::string>& norms() const noexcept { return norms_; }
    [[nodiscard]] std::size_t rows() const noexcept { return params_.size(); }
    [[nodiscard]] double parameter(std::size_t row) const { return params_.at(row); }
    [[nodiscard]] double error(std::size_t row, std::size_t col) const { return errors_.at(row).at(col); }
    [[nodiscard]] double error(std::size_t row, const std::string& norm) const { return error(row, column(norm)); }
    [[nodiscard]] const std::string& note(std::size_t row) const { return notes_.at(row); }
    /// Throws std::out_of_range for an unknown norm.
    [[nodiscard]] std::size_t column(const std::string& norm) const;

    /// log(e_{r-1} / e_r) / log(param_{r-1} / param_r); NaN for the first row.
    [[nodiscard]] double order(std::size_t row, std::size_t col) const;
    [[nodiscard]] double order(std::size_t row, const std::string& norm) const { return order(row, column(norm)); }

    std::map<std::string, std::string> metadata;

private:
    std::string parameter_;
    std::vector<std::string> norms_;
    std::vector<double> params_;
    std::vector<std::vector<double>> errors_;
    std::vector<std::string> notes_;
};

/// CSV: '#' metadata lines, then a header "param,norm,order_norm,...,note".
void export_table(const ConvergenceTable& table, const std::filesystem::path& path);
ConvergenceTable read_table(const std::filesystem::path& path);
/// Fixed-width text rendering for terminals and reports.
std::string format_table(const ConvergenceTable& table);

/// Worker count for sweeps: BDFQNS_THREADS if set to a positive integer,
/// otherwise the hardware concurrency.
unsigned sweep_threads();

/// Runs body(0) ... body(count - 1) on up to sweep_threads() workers.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body);

struct TemporalStudy {
    int q = 2;
    std::vector<double> dt_list;
    double T = 1.0;
    int n = 16;
    double nu = 1.0;
    double mu = 0.0;
    double newton_tol = 1e-12;
    /// Compare with a same-mesh run at dt_min / 8 instead of the exact solution.
    bool reference_mode = true;
    StartMode start = StartMode::Exact;
};

/// Columns u_l2 (final time), grad_nu ((dt nu sum |grad e|^2)^{1/2}), grad
/// (unweighted) and p_l2l2 ((dt sum_{n>=q} |p - p_h|^2)^{1/2}).
ConvergenceTable temporal_convergence(const ManufacturedCase& c, const TemporalStudy& study);

struct SpatialStudy {
    int q = 4;
    std::vector<int> n_list{4, 8, 16, 32};
    double T = 1.0;
    double dt = 0.02;
    double nu = 1.0;
    double mu = 0.0;
    double newton_tol = 1e-11;
    StartMode start = StartMode::Ramp;
};

/// Parameter h = 1/n. Columns u_l2, u_h1, p_l2 at T, p_l2l2, interp_u_l2 and
/// interp_u_h1 (interpolation error at T), super_h1 = |grad(s_h - u_h)| with
/// s_h the Stokes projection of (u(T), p(T)).
ConvergenceTable spatial_convergence(const ManufacturedCase& c, const SpatialStudy& study);

struct RobustnessStudy {
    int q = 2;
    std::vector<double> nu_list{1e-2, 1e-4, 1e-6};
    std::vector<double> mu_list{0.0, 0.01};
    int n = 8;
    double dt = 0.05;
    double T = 1.0;
    double newton_tol = 1e-11;
    StartMode start = StartMode::Ramp;
};

struct RobustnessResult {
    std::vector<double> nu_list;
    std::vector<double> mu_list;
    /// errors[m][k]: final L2 velocity error at mu_list[m], nu_list[k].
    std::vector<std::vector<double>> errors;

    /// max / min over the nu sweep for mu_list[m].
    [[nodiscard]] double ratio(std::size_t m) const;
    [[nodiscard]] double error(double mu, double nu) const;
};

RobustnessResult robustness_sweep(const ManufacturedCase& c, const RobustnessStudy& study);

/// CSV with columns nu, mu, u_l2.
void export_robustness(const RobustnessResult& result, const std::filesystem::path& path);
std::string format_robustness(const RobustnessResult& result);

/// Discrete Stokes problem nu (grad s, grad w) - (div w, p) = (g, w),
/// (div s, r) = 0 with zero-mean pressure and s = bc on the Dirichlet boundary
/// (zero when bc is empty).
std::pair<Vector, Vector> stokes_projection(const MixedSpace& space, double nu, const VectorField& g, double t,
                                            const VectorField& bc = {});

} // namespace bdfns
