#include "bdfns/controller.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include "bdfns/errors.hpp"

namespace bdfns {

namespace {

constexpr double kSafety = 0.9;
constexpr double kMaxGrowth = 2.0;
constexpr double kMaxShrink = 5.0;
constexpr double kToleranceFloor = 0.001;

double mass_norm(const SparseMatrix& mass, const Vector& v)
{
    return std::sqrt(std::max(0.0, v.dot(mass * v)));
}

} // namespace

double estimate_error(int q, std::span<const double> times, std::span<const Vector> values, const NormFunction& norm)
{
    if (q < 1 || q > kMaxBdfOrder + 1) {
        throw InvalidOrderError("estimate_error: order must lie in 1..6");
    }
    const auto need = static_cast<std::size_t>(q + 2);
    if (times.size() < need || values.size() < need) {
        throw StateError("estimate_error: order " + std::to_string(q) + " needs " + std::to_string(need) +
                         " states including the candidate");
    }
    const Vector dd = divided_difference(times.first(need), values.first(need));
    double scale = (times[0] - times[1]) / (times[0] - times[need - 1]);
    for (int i = 0; i < q; ++i) {
        scale *= times[0] - times[static_cast<std::size_t>(i + 1)];
    }
    return std::abs(scale) * norm(dd);
}

double estimate_error(int q, const SolutionHistory& history, const SparseMatrix& mass)
{
    const auto need = static_cast<std::size_t>(q + 2);
    if (history.size() < need) {
        throw StateError("estimate_error: order " + std::to_string(q) + " needs " + std::to_string(need) +
                         " states including the candidate, history has " + std::to_string(history.size()));
    }
    const auto times = history.times(need);
    std::vector<Vector> values;
    values.reserve(need);
    for (std::size_t i = 0; i < need; ++i) {
        values.push_back(history[i].u);
    }
    return estimate_error(q, times, values, [&](const Vector& v) { return mass_norm(mass, v); });
}

double tolerance(double tol_r, const Vector& u_curr, const Vector& u_prev, const NormFunction& norm)
{
    return tol_r * (std::max(norm(u_curr), norm(u_prev)) + kToleranceFloor);
}

double tolerance(double tol_r, const Vector& u_curr, const Vector& u_prev, const SparseMatrix& mass)
{
    return tolerance(tol_r, u_curr, u_prev, [&](const Vector& v) { return mass_norm(mass, v); });
}

double step_formula(double dt, double est, double tol, int q)
{
    if (est == 0.0) {
        return std::numeric_limits<double>::infinity();
    }
    return kSafety * dt * std::pow(tol / est, 1.0 / (q + 1));
}

double new_step(double dt, double est, double tol, int q, double max_dt)
{
    if (!(dt > 0.0) || !(tol > 0.0)) {
        throw std::invalid_argument("new_step: dt and TOL must be positive");
    }
    const double raw = step_formula(dt, est, tol, q);
    const double clamped = std::clamp(raw, dt / kMaxShrink, kMaxGrowth * dt);
    return std::min(clamped, max_dt);
}

int select_order(std::optional<double> est_lower, double est_current, std::optional<double> est_upper, int q,
                 int q_max)
{
    if (q < 1 || q > q_max || q_max > kMaxBdfOrder) {
        throw InvalidOrderError("select_order: need 1 <= q <= q_max <= 5");
    }
    int best = q;
    double best_est = est_current;
    if (est_lower && q > 1 && *est_lower < best_est) {
        best = q - 1;
        best_est = *est_lower;
    }
    if (est_upper && q < q_max && *est_upper < best_est) {
        best = q + 1;
    }
    return best;
}

void ControllerConfig::validate() const
{
    if (!(tol_r > 0.0)) {
        throw ConfigError("tol_r must be positive");
    }
    if (q_max < 1 || q_max > kMaxBdfOrder) {
        throw ConfigError("q_max must lie in 1..5");
    }
    if (!(T > t0)) {
        throw ConfigError("T must exceed t0");
    }
    if (max_consecutive_rejections < 1) {
        throw ConfigError("max_consecutive_rejections must be at least 1");
    }
    restrictions.validate();
}

double AdaptiveResult::mean_accepted_dt() const
{
    double sum = 0.0;
    int n = 0;
    for (const auto& r : log) {
        if (r.accepted) {
            sum += r.dt;
            ++n;
        }
    }
    return n == 0 ? 0.0 : sum / n;
}

AdaptiveResult adaptive_run(const ControllerConfig& config, Stepper& stepper, const AdaptiveOptions& options)
{
    config.validate();
    const MixedSpace& space = stepper.space();
    const SparseMatrix& mass = stepper.operators().mass;
    const double h = space.mesh().h_min();
    const double T = config.T;
    const double span = T - config.t0;

    AdaptiveResult out;
    SolutionHistory hist(kMaxBdfOrder + 3);
    {
        State init{config.t0, Vector::Zero(space.n_u()), Vector::Zero(space.n_p())};
        if (options.exact) {
            init.u = interpolate(space, options.exact->velocity, config.t0);
            init.p = interpolate(space, options.exact->pressure, config.t0);
        }
        if (stepper.config().bc) {
            apply_dirichlet(space, stepper.config().bc, config.t0, init.u);
        }
        if (options.store_trajectory) {
            out.trajectory.push_back(init);
        }
        hist.push(std::move(init));
    }

    const auto restriction_bound = [&](int order) {
        if (config.restrictions.mode != RestrictionMode::Clamp) {
            return std::numeric_limits<double>::infinity();
        }
        return check_restrictions(1.0, order, h, 2, config.restrictions).max_dt;
    };
    const auto flags_for = [&](double dt, int order) {
        if (config.restrictions.mode == RestrictionMode::Off) {
            return RestrictionFlags{};
        }
        return check_restrictions(dt, order, h, 2, config.restrictions).violated;
    };
    int consecutive = 0;
    const auto reject = [&](double t) {
        ++out.rejected;
        if (++consecutive > config.max_consecutive_rejections) {
            throw NumericalFailure("adaptive_run: more than " + std::to_string(config.max_consecutive_rejections) +
                                   " consecutive rejections near t=" + std::to_string(t));
        }
    };
    const auto check_dt = [&](double dt, double t) {
        if (!(dt > 1e-14 * span)) {
            throw NumericalFailure("adaptive_run: step size collapsed near t=" + std::to_string(t));
        }
    };
    const auto accept_state = [&](const State& s) {
        if (options.store_trajectory) {
            out.trajectory.push_back(s);
        }
    };

    double dt = config.dt0 > 0.0 ? config.dt0 : std::sqrt(config.tol_r) / 100.0;
    dt = std::min({dt, 0.5 * span, restriction_bound(1)});

    // Startup: two BDF-1 steps, judged together by the first estimate.
    for (;;) {
        check_dt(dt, config.t0);
        const RestrictionFlags flags = flags_for(dt, 1);
        std::size_t pushed = 0;
        int iters = 0;
        double est = std::numeric_limits<double>::infinity();
        double tol = tolerance(config.tol_r, hist.newest().u, hist.newest().u, mass);
        try {
            for (int k = 0; k < 2; ++k) {
                StepResult r = stepper.step_variable(1, hist, dt);
                iters += r.newton_iterations;
                hist.push(State{r.t, std::move(r.u), std::move(r.p)});
                ++pushed;
            }
            est = estimate_error(1, hist, mass);
            tol = tolerance(config.tol_r, hist[0].u, hist[1].u, mass);
        } catch (const StepFailure&) {
        }
        const bool ok = pushed == 2 && est <= tol;
        out.log.push_back({config.t0 + dt, dt, 1, est, tol, ok, flags, iters});
        out.log.push_back({config.t0 + 2 * dt, dt, 1, est, tol, ok, flags, 0});
        if (ok) {
            out.accepted += 2;
            consecutive = 0;
            accept_state(hist[1]);
            accept_state(hist[0]);
            dt = new_step(dt, est, tol, 1, restriction_bound(std::min(2, config.q_max)));
            break;
        }
        for (; pushed > 0; --pushed) {
            hist.pop_newest();
        }
        // Both startup records are rejected; reject() counts the second one.
        ++out.rejected;
        reject(config.t0);
        dt = std::isfinite(est) ? new_step(dt, est, tol, 1, restriction_bound(1)) : dt / kMaxShrink;
        dt = std::min(dt, 0.5 * span);
    }

    int q = std::min(2, config.q_max);
    while (hist.newest().t < T) {
        const double t = hist.newest().t;
        check_dt(dt, t);
        const double remaining = T - t;
        double dt_try = dt;
        if (remaining <= dt * (1.0 + 1e-10)) {
            dt_try = remaining;
        } else if (remaining < 2.0 * dt) {
            dt_try = 0.5 * remaining;
        }
        const bool last = dt_try == remaining;
        const RestrictionFlags flags = flags_for(dt_try, q);

        std::optional<StepResult> result;
        try {
            result = stepper.step_variable(q, hist, dt_try);
        } catch (const StepFailure&) {
        }
        if (!result) {
            const double tol = tolerance(config.tol_r, hist.newest().u, hist.newest().u, mass);
            out.log.push_back({t + dt_try, dt_try, q, std::numeric_limits<double>::infinity(), tol, false, flags, 0});
            reject(t);
            dt = dt_try / kMaxShrink;
            continue;
        }
        const int iters = result->newton_iterations;
        hist.push(State{last ? T : result->t, std::move(result->u), std::move(result->p)});
        const double est = estimate_error(q, hist, mass);
        const double tol = tolerance(config.tol_r, hist[0].u, hist[1].u, mass);
        const bool ok = est <= tol;
        out.log.push_back({hist[0].t, dt_try, q, est, tol, ok, flags, iters});
        if (!ok) {
            hist.pop_newest();
            reject(t);
            dt = new_step(dt_try, est, tol, q, restriction_bound(q));
            continue;
        }
        ++out.accepted;
        consecutive = 0;
        accept_state(hist[0]);

        std::optional<double> lower;
        std::optional<double> upper;
        if (q > 1) {
            lower = estimate_error(q - 1, hist, mass);
        }
        if (q < config.q_max && hist.size() >= static_cast<std::size_t>(q + 3)) {
            upper = estimate_error(q + 1, hist, mass);
        }
        const int q_next = select_order(lower, est, upper, q, config.q_max);
        const double est_next = q_next == q ? est : (q_next < q ? *lower : *upper);
        dt = new_step(dt_try, est_next, tol, q_next, restriction_bound(q_next));
        q = q_next;
    }
    out.final_state = hist.newest();
    return out;
}

void write_step_log_csv(const std::vector<ControllerRecord>& log, const std::filesystem::path& path)
{
    std::ofstream os(path);
    if (!os) {
        throw std::runtime_error("cannot open " + path.string() + " for writing");
    }
    os << "t,dt,q,EST,TOL,accepted,flags\n";
    os << std::setprecision(17);
    for (const auto& r : log) {
        const std::string flags = r.flags.any() ? r.flags.to_string() : "none";
        os << r.t << ',' << r.dt << ',' << r.q << ',' << r.est << ',' << r.tol << ',' << (r.accepted ? 1 : 0) << ','
           << flags << '\n';
    }
    if (!os) {
        throw std::runtime_error("write to " + path.string() + " failed");
    }
}

} // namespace bdfns
