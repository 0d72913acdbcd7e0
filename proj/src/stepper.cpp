#include "bdfns/stepper.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "bdfns/errors.hpp"

namespace bdfns {

namespace {

constexpr int kMaxHalvings = 8;

std::string format(double x)
{
    std::ostringstream os;
    os << std::setprecision(3) << std::scientific << x;
    return os.str();
}

} // namespace

SolutionHistory::SolutionHistory(std::size_t capacity) : capacity_(capacity)
{
    if (capacity < 2) {
        throw std::invalid_argument("SolutionHistory: capacity must be at least 2");
    }
}

void SolutionHistory::push(State s)
{
    if (!states_.empty() && !(s.t > states_.front().t)) {
        throw StateError("SolutionHistory: times must increase (got " + std::to_string(s.t) + " after " +
                         std::to_string(states_.front().t) + ")");
    }
    states_.push_front(std::move(s));
    if (states_.size() > capacity_) {
        states_.pop_back();
    }
}

void SolutionHistory::pop_newest()
{
    if (states_.empty()) {
        throw StateError("SolutionHistory: pop from empty history");
    }
    states_.pop_front();
}

std::vector<double> SolutionHistory::times(std::size_t count) const
{
    if (count > states_.size()) {
        throw StateError("SolutionHistory: " + std::to_string(count) + " states requested, " +
                         std::to_string(states_.size()) + " stored");
    }
    std::vector<double> out(count);
    for (std::size_t i = 0; i < count; ++i) {
        out[i] = states_[i].t;
    }
    return out;
}

bool SolutionHistory::uniform(double dt, std::size_t count) const
{
    if (count > states_.size()) {
        return false;
    }
    for (std::size_t i = 0; i + 1 < count; ++i) {
        if (std::abs(states_[i].t - states_[i + 1].t - dt) > 1e-9 * dt) {
            return false;
        }
    }
    return true;
}

void StepConfig::validate() const
{
    if (!(nu > 0.0) || !std::isfinite(nu)) {
        throw ConfigError("nu must be positive");
    }
    if (!(mu >= 0.0) || !std::isfinite(mu)) {
        throw ConfigError("mu must be non-negative");
    }
    if (!(newton_tol > 0.0)) {
        throw ConfigError("newton_tol must be positive");
    }
    if (newton_max_iter < 1) {
        throw ConfigError("newton_max_iter must be at least 1");
    }
    if (!(linear_residual_tol > 0.0)) {
        throw ConfigError("linear_residual_tol must be positive");
    }
}

Stepper::Stepper(const MixedSpace& space, StepConfig config) : space_(&space), config_(std::move(config))
{
    config_.validate();
    ops_ = assemble_linear_operators(space, config_.nu, config_.mu);
}

double Stepper::l2_norm(const Vector& u) const
{
    return std::sqrt(std::max(0.0, u.dot(ops_.mass * u)));
}

const SparseMatrix& Stepper::linear_block(double w0)
{
    if (cached_linear_.rows() == 0 || w0 != cached_w0_) {
        cached_linear_ = w0 * ops_.mass + ops_.stiffness + ops_.grad_div;
        cached_linear_.makeCompressed();
        cached_w0_ = w0;
    }
    return cached_linear_;
}

StepResult Stepper::step(const BdfScheme& scheme, const SolutionHistory& history, double dt)
{
    const int q = scheme.order();
    if (!(dt > 0.0)) {
        throw std::invalid_argument("bdf_step: dt must be positive");
    }
    if (history.size() < static_cast<std::size_t>(q)) {
        throw StateError("bdf_step: BDF-" + std::to_string(q) + " needs " + std::to_string(q) +
                         " stored states, history has " + std::to_string(history.size()));
    }
    if (!history.uniform(dt, static_cast<std::size_t>(q))) {
        throw StateError("bdf_step: history is not uniformly spaced by dt; use step_variable");
    }
    std::vector<double> w(scheme.delta_values());
    for (double& x : w) {
        x /= dt;
    }
    return solve(w, history, history.newest().t + dt, q);
}

StepResult Stepper::step_variable(int q, const SolutionHistory& history, double dt)
{
    if (q < 1 || q > kMaxBdfOrder) {
        throw InvalidOrderError("step_variable: order must lie in 1..5");
    }
    if (!(dt > 0.0)) {
        throw std::invalid_argument("step_variable: dt must be positive");
    }
    if (history.size() < static_cast<std::size_t>(q)) {
        throw StateError("step_variable: order " + std::to_string(q) + " needs " + std::to_string(q) +
                         " stored states");
    }
    const double t_new = history.newest().t + dt;
    std::vector<double> nodes{t_new};
    for (double t : history.times(static_cast<std::size_t>(q))) {
        nodes.push_back(t);
    }
    const auto w = derivative_weights(nodes);
    return solve(w, history, t_new, q);
}

StepResult Stepper::solve(std::span<const double> weights, const SolutionHistory& history, double t_new, int q)
{
    const MixedSpace& space = *space_;
    const Eigen::Index nu = space.n_u();
    const Eigen::Index np = space.n_p();
    const auto& mask = space.dirichlet_mask();

    Vector hist = Vector::Zero(nu);
    for (int j = 1; j <= q; ++j) {
        hist += weights[static_cast<std::size_t>(j)] * history[static_cast<std::size_t>(j - 1)].u;
    }
    Vector rhs = -(ops_.mass * hist);
    if (config_.forcing) {
        rhs += assemble_load(space, config_.forcing, t_new);
    }
    for (Eigen::Index i = 0; i < nu; ++i) {
        if (mask[static_cast<std::size_t>(i)]) {
            rhs(i) = 0.0;
        }
    }
    const SparseMatrix& K = linear_block(weights[0]);

    // Predictor: polynomial extrapolation through the most recent states.
    const std::size_t count = std::min(history.size(), static_cast<std::size_t>(q + 1));
    const auto iw = interpolation_weights(history.times(count), t_new);
    Vector u = Vector::Zero(nu);
    Vector p = Vector::Zero(np);
    for (std::size_t j = 0; j < count; ++j) {
        u += iw[j] * history[j].u;
        p += iw[j] * history[j].p;
    }
    if (config_.bc) {
        apply_dirichlet(space, config_.bc, t_new, u);
    } else {
        for (Eigen::Index i = 0; i < nu; ++i) {
            if (mask[static_cast<std::size_t>(i)]) {
                u(i) = 0.0;
            }
        }
    }
    double lambda = 0.0;

    const auto residual = [&](const Vector& uu, const Vector& pp, double lam) {
        Vector r(nu + np + 1);
        Vector ru = K * uu + assemble_convection_vector(space, uu, uu) -
                    ops_.divergence.transpose() * pp - rhs;
        for (Eigen::Index i = 0; i < nu; ++i) {
            if (mask[static_cast<std::size_t>(i)]) {
                ru(i) = 0.0;
            }
        }
        r.head(nu) = ru;
        r.segment(nu, np) = -(ops_.divergence * uu) + lam * ops_.pressure_mean;
        r(nu + np) = ops_.pressure_mean.dot(pp);
        return r;
    };

    StepResult out;
    out.t = t_new;
    Vector r = residual(u, p, lambda);
    double rn = r.norm();
    out.residuals.push_back(rn);
    const double target = config_.newton_tol * (1.0 + rhs.norm());

    for (int it = 0;; ++it) {
        if (rn <= target) {
            out.u = std::move(u);
            out.p = std::move(p);
            out.newton_iterations = it;
            return out;
        }
        if (it == config_.newton_max_iter) {
            throw StepFailure(t_new, "Newton did not converge in " + std::to_string(it) +
                                         " iterations (residual " + format(rn) + ", target " +
                                         format(target) + ")");
        }
        BlockSystem sys;
        sys.velocity_block = K + assemble_convection_jacobian(space, u);
        sys.divergence = &ops_.divergence;
        sys.pressure_mean = &ops_.pressure_mean;
        sys.dirichlet = &mask;
        const SparseMatrix J = sys.assemble();
        if (lu_ && lu_->size() == J.rows()) {
            lu_->refactorize(J);
        } else {
            lu_.emplace(J);
        }
        const Vector b = -r;
        const Vector delta = lu_->solve(b);
        const double lin = lu_->relative_residual(delta, b);
        if (!(lin <= config_.linear_residual_tol)) {
            throw StepFailure(t_new, "linear solve residual " + format(lin) + " exceeds " +
                                         format(config_.linear_residual_tol));
        }

        double alpha = 1.0;
        for (int k = 0;; ++k) {
            Vector ut = u + alpha * delta.head(nu);
            Vector pt = p + alpha * delta.segment(nu, np);
            const double lt = lambda + alpha * delta(nu + np);
            Vector rt = residual(ut, pt, lt);
            const double rtn = rt.norm();
            if (rtn < rn || rtn <= target) {
                u = std::move(ut);
                p = std::move(pt);
                lambda = lt;
                r = std::move(rt);
                rn = rtn;
                break;
            }
            if (k == kMaxHalvings) {
                throw StepFailure(t_new, "damped Newton could not reduce the residual " + format(rn));
            }
            alpha *= 0.5;
        }
        out.residuals.push_back(rn);
    }
}

StepResult bdf_step(const BdfScheme& scheme, const SolutionHistory& history, double dt,
                    const StepConfig& config, const MixedSpace& space)
{
    Stepper stepper(space, config);
    return stepper.step(scheme, history, dt);
}

StartMode parse_start_mode(const std::string& text)
{
    if (text == "exact") {
        return StartMode::Exact;
    }
    if (text == "ramp") {
        return StartMode::Ramp;
    }
    throw ConfigError("start mode must be exact or ramp (got '" + text + "')");
}

SolutionHistory initialize_history(StartMode mode, const BdfScheme& scheme, Stepper& stepper, double dt,
                                   const ExactSolution* exact, double t0)
{
    if (!(dt > 0.0)) {
        throw std::invalid_argument("initialize_history: dt must be positive");
    }
    const MixedSpace& space = stepper.space();
    const int q = scheme.order();
    const auto sample = [&](double t) {
        return State{t, interpolate(space, exact->velocity, t), interpolate(space, exact->pressure, t)};
    };

    SolutionHistory out;
    if (mode == StartMode::Exact) {
        if (exact == nullptr) {
            throw ConfigError("start mode 'exact' requires a manufactured solution");
        }
        for (int k = 0; k < q; ++k) {
            out.push(sample(t0 + k * dt));
        }
        return out;
    }

    State initial = exact ? sample(t0) : State{t0, Vector::Zero(space.n_u()), Vector::Zero(space.n_p())};
    if (stepper.config().bc) {
        apply_dirichlet(space, stepper.config().bc, t0, initial.u);
    }
    out.push(initial);
    if (q == 1) {
        return out;
    }

    std::vector<double> sizes;
    const double h = std::ldexp(dt, -q);
    sizes.push_back(h);
    for (int k = 0; k < q; ++k) {
        sizes.push_back(std::ldexp(h, k));
    }
    for (int k = 1; k < q - 1; ++k) {
        sizes.push_back(dt);
    }

    SolutionHistory work;
    work.push(std::move(initial));
    int next_level = 1;
    for (std::size_t j = 0; j < sizes.size(); ++j) {
        const int order = std::min(static_cast<int>(j) + 1, q);
        StepResult r = stepper.step_variable(order, work, sizes[j]);
        // Snap onto the uniform grid to keep the history exactly spaced.
        const double level_t = t0 + next_level * dt;
        if (std::abs(r.t - level_t) <= 1e-9 * dt) {
            r.t = level_t;
            out.push(State{r.t, r.u, r.p});
            ++next_level;
        }
        work.push(State{r.t, std::move(r.u), std::move(r.p)});
    }
    if (out.size() != static_cast<std::size_t>(q)) {
        throw StateError("initialize_history: ramp produced " + std::to_string(out.size()) + " states");
    }
    return out;
}

RunResult fixed_step_run(const BdfScheme& scheme, Stepper& stepper, double T, double dt, const RunOptions& options)
{
    const int q = scheme.order();
    const double t0 = options.t0;
    if (!(dt > 0.0) || !(T > t0)) {
        throw ConfigError("fixed_step_run: need dt > 0 and T > t0");
    }
    const double ratio = (T - t0) / dt;
    const long steps = std::lround(ratio);
    if (std::abs(ratio - static_cast<double>(steps)) > 1e-9 * std::max(1.0, ratio)) {
        throw ConfigError("fixed_step_run: (T - t0) / dt = " + std::to_string(ratio) + " is not an integer");
    }
    if (steps < q - 1) {
        throw ConfigError("fixed_step_run: T is reached before the " + std::to_string(q) + " start values");
    }

    RunResult out;
    const MixedSpace& space = stepper.space();
    if (options.restrictions.mode != RestrictionMode::Off) {
        const auto chk = check_restrictions(dt, q, space.mesh().h_min(), 2, options.restrictions);
        if (chk.violated.any()) {
            out.warnings.push_back("dt = " + format(dt) + " violates step restrictions " + chk.violated.to_string() +
                                   " (admissible dt <= " + format(chk.max_dt) + ")");
        }
    }

    const auto record = [&](const State& s, double step_dt, int order, int iters) {
        StepRecord rec{s.t, step_dt, order, iters, stepper.l2_norm(s.u),
                       std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN(),
                       std::numeric_limits<double>::quiet_NaN()};
        if (options.exact) {
            const auto e = error_norms(space, s.u, s.p, *options.exact, s.t);
            rec.err_u_l2 = e.l2_velocity;
            rec.err_u_h1 = e.h1_semi_velocity;
            rec.err_p_l2 = e.l2_pressure;
        }
        out.records.push_back(rec);
        if (options.store_trajectory) {
            out.trajectory.push_back(s);
        }
        if (options.observer) {
            options.observer(s);
        }
    };

    SolutionHistory history;
    if (options.start_states.empty()) {
        history = initialize_history(options.start, scheme, stepper, dt, options.exact, t0);
    } else {
        if (options.start_states.size() != static_cast<std::size_t>(q)) {
            throw ConfigError("fixed_step_run: " + std::to_string(q) + " start states required");
        }
        for (const State& s : options.start_states) {
            history.push(s);
        }
        if (!history.uniform(dt, history.size()) || history[history.size() - 1].t != t0) {
            throw ConfigError("fixed_step_run: start states must sit at t0, t0 + dt, ...");
        }
    }
    for (std::size_t i = history.size(); i-- > 0;) {
        record(history[i], i + 1 == history.size() ? 0.0 : dt, q, 0);
    }
    for (long n = q; n <= steps; ++n) {
        StepResult r = stepper.step(scheme, history, dt);
        r.t = t0 + static_cast<double>(n) * dt;
        out.newton_residuals.push_back(r.residuals);
        State s{r.t, std::move(r.u), std::move(r.p)};
        record(s, dt, q, r.newton_iterations);
        history.push(std::move(s));
        ++out.steps;
    }
    out.final_state = history.newest();
    return out;
}

void write_trajectory_csv(const std::vector<StepRecord>& records, const std::filesystem::path& path)
{
    std::ofstream os(path);
    if (!os) {
        throw std::runtime_error("cannot open " + path.string() + " for writing");
    }
    os << "t,dt,q,newton_iters,u_l2,err_u_l2,err_u_h1,err_p_l2\n";
    os << std::setprecision(17);
    for (const auto& r : records) {
        os << r.t << ',' << r.dt << ',' << r.q << ',' << r.newton_iterations << ',' << r.u_l2 << ','
           << r.err_u_l2 << ',' << r.err_u_h1 << ',' << r.err_p_l2 << '\n';
    }
    if (!os) {
        throw std::runtime_error("write to " + path.string() + " failed");
    }
}

} // namespace bdfns
