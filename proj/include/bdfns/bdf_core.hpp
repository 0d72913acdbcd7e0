#pragma once

// Backward differentiation formulae: exact coefficients, the finite-difference
// form used by the energy analysis of the non A-stable orders, the stability
// constants derived from it, and Newton divided differences.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <boost/rational.hpp>

namespace bdfns {

using Rational = boost::rational<std::int64_t>;

/// "n" for integers, "n/d" otherwise.
std::string to_string(const Rational& r);

inline constexpr int kMaxBdfOrder = 5;

/// delta_0..delta_q of sum_{l=1}^q (1 - zeta)^l / l = sum_i delta_i zeta^i.
std::vector<Rational> bdf_coefficients(int q);

/// gamma_{q,0}..gamma_{q,q-1}, defined for q in 3..5, such that
/// sum_i delta_i y_{n-i} = D y_n + sum_k gamma_{q,k} D y_{n-k}, D y_n = y_n - y_{n-1}.
std::vector<Rational> gamma_coefficients(int q);

/// sigma_q = -min over theta of gamma_{q,0} + gamma_{q,1} cos(theta) + ... + gamma_{q,q-1} cos((q-1) theta).
///
/// The trigonometric polynomial is rewritten in x = cos(theta) through Chebyshev
/// polynomials, and the minimum over [-1, 1] is taken among the endpoints and the
/// sign-changing roots of the derivative, each bracketed on a uniform grid and
/// bisected until the bracket is narrower than `tol`. Throws NumericalFailure if a
/// bracket cannot be reduced below `tol`.
double sigma_min(int q, double tol = 1e-13);

/// Tabulated multiplier eta_q making BDF-3..5 amenable to energy estimates.
double multiplier_eta(int q);

/// Reference values of sigma_q used to self-check `sigma_min`: 1/96,
/// (260 + 43 sqrt(43)) / 2916 and the six-digit value 0.814454.
double sigma_reference(int q);

/// Tolerance at which `sigma_min` must agree with `sigma_reference`.
double sigma_reference_tolerance(int q);

/// Immutable description of one BDF order.
class BdfScheme {
public:
    /// Throws InvalidOrderError for q outside 1..5 and NumericalFailure if the
    /// computed sigma_q disagrees with its reference value.
    explicit BdfScheme(int q);

    [[nodiscard]] int order() const noexcept { return q_; }
    [[nodiscard]] const std::vector<Rational>& delta() const noexcept { return delta_; }
    [[nodiscard]] const std::vector<double>& delta_values() const noexcept { return delta_values_; }
    /// Empty for q in {1, 2}.
    [[nodiscard]] const std::vector<Rational>& gamma() const noexcept { return gamma_; }
    [[nodiscard]] double eta() const noexcept { return eta_; }
    /// Defined for q in {3, 4, 5}.
    [[nodiscard]] std::optional<double> sigma() const noexcept { return sigma_; }
    /// 1 - sigma_q, defined for q in {3, 4, 5}.
    [[nodiscard]] std::optional<double> s() const noexcept;

private:
    int q_;
    std::vector<Rational> delta_;
    std::vector<double> delta_values_;
    std::vector<Rational> gamma_;
    double eta_;
    std::optional<double> sigma_;
};

/// Newton divided difference v[t_0, ..., t_m] by the triangular recurrence,
/// applied componentwise. Nodes may come in any order but must be pairwise
/// distinct (DegenerateNodesError otherwise).
Eigen::VectorXd divided_difference(std::span<const double> times,
                                   std::span<const Eigen::VectorXd> values);

double divided_difference(std::span<const double> times, std::span<const double> values);

/// Weights w_j with p'(times[0]) = sum_j w_j y_j for the interpolating polynomial
/// p through (times[j], y_j). On a uniform grid with spacing dt these equal
/// delta_j / dt, which makes this the variable-step BDF derivative.
std::vector<double> derivative_weights(std::span<const double> times);

/// Weights w_j with p(t) = sum_j w_j y_j for the interpolating polynomial through
/// (times[j], y_j); used to extrapolate Newton predictors.
std::vector<double> interpolation_weights(std::span<const double> times, double t);

} // namespace bdfns
