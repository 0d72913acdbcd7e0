#include "bdfns/bdf_core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <boost/math/special_functions/binomial.hpp>

#include "bdfns/errors.hpp"

namespace bdfns {

namespace {

void require_order(int q, int lo, int hi, const char* what)
{
    if (q < lo || q > hi) {
        throw InvalidOrderError(std::string(what) + ": order " + std::to_string(q) + " outside " +
                                std::to_string(lo) + ".." + std::to_string(hi));
    }
}

std::int64_t binomial(int n, int k)
{
    return static_cast<std::int64_t>(
        std::llround(boost::math::binomial_coefficient<double>(static_cast<unsigned>(n),
                                                                static_cast<unsigned>(k))));
}

double to_double(const Rational& r)
{
    return boost::rational_cast<double>(r);
}

// Coefficients (lowest degree first) of sum_k c_k T_k(x).
std::vector<Rational> chebyshev_to_monomial(const std::vector<Rational>& c)
{
    const std::size_t n = c.size();
    std::vector<Rational> result(std::max<std::size_t>(n, 1), Rational(0));
    std::vector<Rational> t_prev{Rational(1)};
    std::vector<Rational> t_curr{Rational(0), Rational(1)};
    for (std::size_t k = 0; k < n; ++k) {
        const auto& tk = (k == 0) ? t_prev : t_curr;
        for (std::size_t i = 0; i < tk.size(); ++i) {
            result[i] += c[k] * tk[i];
        }
        if (k >= 1) {
            std::vector<Rational> t_next(t_curr.size() + 1, Rational(0));
            for (std::size_t i = 0; i < t_curr.size(); ++i) {
                t_next[i + 1] += 2 * t_curr[i];
            }
            for (std::size_t i = 0; i < t_prev.size(); ++i) {
                t_next[i] -= t_prev[i];
            }
            t_prev = std::move(t_curr);
            t_curr = std::move(t_next);
        }
    }
    return result;
}

double horner(const std::vector<double>& coeffs, double x)
{
    double v = 0.0;
    for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it) {
        v = v * x + *it;
    }
    return v;
}

} // namespace

std::string to_string(const Rational& r)
{
    if (r.denominator() == 1) {
        return std::to_string(r.numerator());
    }
    return std::to_string(r.numerator()) + "/" + std::to_string(r.denominator());
}

std::vector<Rational> bdf_coefficients(int q)
{
    require_order(q, 1, kMaxBdfOrder, "bdf_coefficients");
    std::vector<Rational> delta(static_cast<std::size_t>(q) + 1, Rational(0));
    for (int l = 1; l <= q; ++l) {
        for (int i = 0; i <= l; ++i) {
            const std::int64_t sign = (i % 2 == 0) ? 1 : -1;
            delta[static_cast<std::size_t>(i)] += Rational(sign * binomial(l, i), l);
        }
    }
    return delta;
}

std::vector<Rational> gamma_coefficients(int q)
{
    require_order(q, 3, kMaxBdfOrder, "gamma_coefficients");
    std::vector<Rational> gamma(static_cast<std::size_t>(q), Rational(0));
    for (int k = 0; k < q; ++k) {
        Rational sum(0);
        for (int j = std::max(k + 1, 2); j <= q; ++j) {
            sum += Rational(binomial(j - 1, k), j);
        }
        gamma[static_cast<std::size_t>(k)] = (k % 2 == 0) ? sum : -sum;
    }
    return gamma;
}

double sigma_min(int q, double tol)
{
    require_order(q, 3, kMaxBdfOrder, "sigma_min");
    if (!(tol > 0.0)) {
        throw NumericalFailure("sigma_min: tolerance must be positive");
    }

    std::vector<double> poly;
    for (const auto& c : chebyshev_to_monomial(gamma_coefficients(q))) {
        poly.push_back(to_double(c));
    }
    std::vector<double> dpoly;
    for (std::size_t i = 1; i < poly.size(); ++i) {
        dpoly.push_back(static_cast<double>(i) * poly[i]);
    }

    double best = std::min(horner(poly, -1.0), horner(poly, 1.0));

    constexpr int kGrid = 4096;
    constexpr int kMaxBisections = 200;
    for (int g = 0; g < kGrid; ++g) {
        double a = -1.0 + 2.0 * g / kGrid;
        double b = -1.0 + 2.0 * (g + 1) / kGrid;
        double fa = horner(dpoly, a);
        const double fb = horner(dpoly, b);
        if (fa == 0.0) {
            best = std::min(best, horner(poly, a));
            continue;
        }
        if (fa * fb >= 0.0) {
            continue;
        }
        int iter = 0;
        while (b - a > tol) {
            const double m = 0.5 * (a + b);
            if (m <= a || m >= b || ++iter > kMaxBisections) {
                throw NumericalFailure("sigma_min: root bracket [" + std::to_string(a) + ", " +
                                       std::to_string(b) + "] cannot be reduced below tol");
            }
            const double fm = horner(dpoly, m);
            if (fm == 0.0) {
                a = b = m;
                break;
            }
            if ((fm < 0.0) == (fa < 0.0)) {
                a = m;
                fa = fm;
            } else {
                b = m;
            }
        }
        best = std::min(best, horner(poly, 0.5 * (a + b)));
    }
    return -best;
}

double multiplier_eta(int q)
{
    require_order(q, 1, kMaxBdfOrder, "multiplier_eta");
    static constexpr double kEta[] = {0.0, 0.0, 0.0769, 0.2878, 0.8097};
    return kEta[q - 1];
}

double sigma_reference(int q)
{
    require_order(q, 3, kMaxBdfOrder, "sigma_reference");
    switch (q) {
    case 3:
        return 1.0 / 96.0;
    case 4:
        return (260.0 + 43.0 * std::sqrt(43.0)) / 2916.0;
    default:
        return 0.814454;
    }
}

double sigma_reference_tolerance(int q)
{
    require_order(q, 3, kMaxBdfOrder, "sigma_reference_tolerance");
    // The q = 5 reference carries six significant digits only.
    return q == 5 ? 5e-7 : 1e-9;
}

BdfScheme::BdfScheme(int q)
    : q_(q), delta_(bdf_coefficients(q)), eta_(multiplier_eta(q))
{
    for (const auto& d : delta_) {
        delta_values_.push_back(to_double(d));
    }
    if (q >= 3) {
        gamma_ = gamma_coefficients(q);
        const double sigma = sigma_min(q);
        if (std::abs(sigma - sigma_reference(q)) > sigma_reference_tolerance(q)) {
            throw NumericalFailure("BdfScheme: sigma_" + std::to_string(q) + " = " +
                                   std::to_string(sigma) + " disagrees with reference value");
        }
        sigma_ = sigma;
    }
}

std::optional<double> BdfScheme::s() const noexcept
{
    if (!sigma_) {
        return std::nullopt;
    }
    return 1.0 - *sigma_;
}

Eigen::VectorXd divided_difference(std::span<const double> times,
                                   std::span<const Eigen::VectorXd> values)
{
    if (times.empty() || times.size() != values.size()) {
        throw std::invalid_argument("divided_difference: need matching, nonempty nodes and values");
    }
    const std::size_t m = times.size();
    for (std::size_t i = 0; i < m; ++i) {
        if (values[i].size() != values[0].size()) {
            throw std::invalid_argument("divided_difference: vectors differ in length");
        }
        for (std::size_t j = i + 1; j < m; ++j) {
            if (times[i] == times[j]) {
                throw DegenerateNodesError("divided_difference: repeated node t=" +
                                           std::to_string(times[i]));
            }
        }
    }
    std::vector<Eigen::VectorXd> table(values.begin(), values.end());
    for (std::size_t level = 1; level < m; ++level) {
        for (std::size_t i = 0; i + level < m; ++i) {
            table[i] = (table[i + 1] - table[i]) / (times[i + level] - times[i]);
        }
    }
    return table[0];
}

double divided_difference(std::span<const double> times, std::span<const double> values)
{
    std::vector<Eigen::VectorXd> vecs;
    vecs.reserve(values.size());
    for (double v : values) {
        vecs.push_back(Eigen::VectorXd::Constant(1, v));
    }
    return divided_difference(times, std::span<const Eigen::VectorXd>(vecs))(0);
}

std::vector<double> derivative_weights(std::span<const double> times)
{
    const std::size_t m = times.size();
    std::vector<double> w(m, 0.0);
    for (std::size_t k = 1; k < m; ++k) {
        if (times[k] == times[0]) {
            throw DegenerateNodesError("derivative_weights: repeated node");
        }
        w[0] += 1.0 / (times[0] - times[k]);
    }
    for (std::size_t j = 1; j < m; ++j) {
        double num = 1.0;
        double den = 1.0;
        for (std::size_t k = 0; k < m; ++k) {
            if (k == j) {
                continue;
            }
            if (times[k] == times[j]) {
                throw DegenerateNodesError("derivative_weights: repeated node");
            }
            den *= times[j] - times[k];
            if (k != 0) {
                num *= times[0] - times[k];
            }
        }
        w[j] = num / den;
    }
    return w;
}

std::vector<double> interpolation_weights(std::span<const double> times, double t)
{
    const std::size_t m = times.size();
    std::vector<double> w(m, 1.0);
    for (std::size_t j = 0; j < m; ++j) {
        for (std::size_t k = 0; k < m; ++k) {
            if (k == j) {
                continue;
            }
            if (times[k] == times[j]) {
                throw DegenerateNodesError("interpolation_weights: repeated node");
            }
            w[j] *= (t - times[k]) / (times[j] - times[k]);
        }
    }
    return w;
}

} // namespace bdfns
