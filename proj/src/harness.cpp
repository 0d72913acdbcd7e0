#include "bdfns/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <iomanip>
#include <limits>
#include <mutex>
#include <numbers>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "bdfns/errors.hpp"

namespace bdfns {

namespace {

using Eigen::Matrix2d;
using Eigen::Vector2d;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// phi(s) = s^2 (1 - s)^2 and its derivatives.
double phi0(double s) { return s * s * (1 - s) * (1 - s); }
double phi1(double s) { return 2 * s * (1 - s) * (1 - 2 * s); }
double phi2(double s) { return 2 * (1 - 6 * s + 6 * s * s); }
double phi3(double s) { return 12 * (2 * s - 1); }

ManufacturedCase stream2_case()
{
    ManufacturedCase c;
    c.name = "stream2";
    c.description = "u = curl(sin t x^2(1-x)^2 y^2(1-y)^2), p = sin t (x-1/2)(y-1/2)";
    c.velocity = [](double x, double y, double t) {
        return Vector2d(std::sin(t) * phi0(x) * phi1(y), -std::sin(t) * phi1(x) * phi0(y));
    };
    c.velocity_gradient = [](double x, double y, double t) {
        const double s = std::sin(t);
        Matrix2d g;
        g << s * phi1(x) * phi1(y), s * phi0(x) * phi2(y), -s * phi2(x) * phi0(y), -s * phi1(x) * phi1(y);
        return g;
    };
    c.pressure = [](double x, double y, double t) { return std::sin(t) * (x - 0.5) * (y - 0.5); };
    const auto laplacian = [](double x, double y, double t) {
        const double s = std::sin(t);
        return Vector2d(s * (phi2(x) * phi1(y) + phi0(x) * phi3(y)), -s * (phi3(x) * phi0(y) + phi1(x) * phi2(y)));
    };
    const auto grad_p = [](double x, double y, double t) {
        return Vector2d(std::sin(t) * (y - 0.5), std::sin(t) * (x - 0.5));
    };
    auto vel = c.velocity;
    auto grad = c.velocity_gradient;
    c.forcing = [=](double x, double y, double t, double nu) {
        const Vector2d ut(std::cos(t) * phi0(x) * phi1(y), -std::cos(t) * phi1(x) * phi0(y));
        const Vector2d u = vel(x, y, t);
        return Vector2d(ut - nu * laplacian(x, y, t) + grad(x, y, t) * u + grad_p(x, y, t));
    };
    c.stokes_rhs = [=](double x, double y, double t, double nu) {
        return Vector2d(-nu * laplacian(x, y, t) + grad_p(x, y, t));
    };
    c.nu_dependent = true;
    c.homogeneous_bc = true;
    c.time_degree = -1;
    return c;
}

// u = g(t) (x^2, -2xy), p = g(t) (x + y - 1): exactly representable in P2/P1.
ManufacturedCase quadratic_case(std::string name, std::string description, std::function<double(double)> g,
                                std::function<double(double)> dg, int time_degree)
{
    ManufacturedCase c;
    c.name = std::move(name);
    c.description = std::move(description);
    c.velocity = [g](double x, double y, double t) { return Vector2d(g(t) * x * x, -2 * g(t) * x * y); };
    c.velocity_gradient = [g](double x, double y, double t) {
        Matrix2d m;
        m << 2 * x, 0.0, -2 * y, -2 * x;
        return Matrix2d(g(t) * m);
    };
    c.pressure = [g](double x, double y, double t) { return g(t) * (x + y - 1); };
    c.forcing = [g, dg](double x, double y, double t, double nu) {
        const double a = g(t);
        return Vector2d(dg(t) * x * x - 2 * nu * a + 2 * a * a * x * x * x + a,
                        -2 * dg(t) * x * y + 2 * a * a * x * x * y + a);
    };
    c.stokes_rhs = [g](double, double, double t, double nu) {
        const double a = g(t);
        return Vector2d(-2 * nu * a + a, a);
    };
    c.nu_dependent = true;
    c.homogeneous_bc = false;
    c.time_degree = time_degree;
    return c;
}

// Poiseuille flow in a channel of height 0.41 with amplitude 1.5 sin(pi t / 8).
ManufacturedCase channel_case()
{
    constexpr double H = 0.41;
    const auto amp = [](double t) { return 1.5 * std::sin(std::numbers::pi * t / 8); };
    const auto damp = [](double t) { return 1.5 * std::numbers::pi / 8 * std::cos(std::numbers::pi * t / 8); };
    const auto profile = [](double y) { return 4 * y * (H - y) / (H * H); };
    ManufacturedCase c;
    c.name = "channel";
    c.description = "u = U(t) (4y(H-y)/H^2, 0), p = 0 on (0,L) x (0,0.41)";
    c.velocity = [=](double, double y, double t) { return Vector2d(amp(t) * profile(y), 0.0); };
    c.velocity_gradient = [=](double, double y, double t) {
        Matrix2d g = Matrix2d::Zero();
        g(0, 1) = amp(t) * 4 * (H - 2 * y) / (H * H);
        return g;
    };
    c.pressure = [](double, double, double) { return 0.0; };
    c.forcing = [=](double, double y, double t, double nu) {
        return Vector2d(damp(t) * profile(y) + nu * amp(t) * 8 / (H * H), 0.0);
    };
    c.stokes_rhs = [=](double, double, double t, double nu) { return Vector2d(nu * amp(t) * 8 / (H * H), 0.0); };
    c.nu_dependent = true;
    c.homogeneous_bc = false;
    c.time_degree = -1;
    return c;
}

ManufacturedCase polyq_case(int q)
{
    if (q < 0 || q > kMaxBdfOrder) {
        throw ConfigError("polyq: time degree must lie in 0..5");
    }
    // Truncated exponential series of degree q.
    auto g = [q](double t) {
        double sum = 0.0;
        double term = 1.0;
        for (int k = 0; k <= q; ++k) {
            sum += term;
            term *= t / (k + 1);
        }
        return sum;
    };
    auto dg = [q](double t) {
        double sum = 0.0;
        double term = 1.0;
        for (int k = 1; k <= q; ++k) {
            sum += term;
            term *= t / k;
        }
        return sum;
    };
    return quadratic_case("polyq", "u = g(t)(x^2, -2xy), p = g(t)(x+y-1), g of degree " + std::to_string(q), g, dg, q);
}

std::string format_number(double x)
{
    std::ostringstream os;
    os << std::setprecision(17) << x;
    return os.str();
}

std::vector<std::string> split_csv(const std::string& line)
{
    std::vector<std::string> out;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, ',')) {
        out.push_back(field);
    }
    if (!line.empty() && line.back() == ',') {
        out.emplace_back();
    }
    return out;
}

double parse_double(const std::string& text, const std::string& path, int line)
{
    if (text.empty()) {
        return kNaN;
    }
    try {
        std::size_t used = 0;
        const double v = std::stod(text, &used);
        if (used != text.size()) {
            throw std::invalid_argument(text);
        }
        return v;
    } catch (const std::exception&) {
        throw ParseError(path, line, "not a number: '" + text + "'");
    }
}

std::set<int> all_markers(const Mesh& mesh)
{
    std::set<int> markers;
    for (const auto& be : mesh.boundary_edges()) {
        markers.insert(be.marker);
    }
    return markers;
}

// Squared L2 norm of a pressure difference after removing its mean.
double pressure_error_sq(const AssembledOperators& ops, double area, const Vector& d)
{
    const double mean = ops.pressure_mean.dot(d);
    return std::max(0.0, d.dot(ops.pressure_mass * d) - mean * mean / area);
}

double quadratic_form(const SparseMatrix& a, const Vector& v)
{
    return std::max(0.0, v.dot(a * v));
}

} // namespace

VectorField ManufacturedCase::forcing_at(double nu) const
{
    auto f = forcing;
    return [f, nu](double x, double y, double t) { return f(x, y, t, nu); };
}

VectorField ManufacturedCase::stokes_rhs_at(double nu) const
{
    auto g = stokes_rhs;
    return [g, nu](double x, double y, double t) { return g(x, y, t, nu); };
}

VectorField ManufacturedCase::boundary_data() const
{
    if (homogeneous_bc) {
        return {};
    }
    return velocity;
}

std::vector<ManufacturedCase> builtin_cases(int q)
{
    std::vector<ManufacturedCase> out;
    out.push_back(stream2_case());
    out.push_back(polyq_case(q));
    out.push_back(quadratic_case("steady", "u = (x^2, -2xy), p = x+y-1", [](double) { return 1.0; },
                                 [](double) { return 0.0; }, 0));
    out.push_back(quadratic_case(
        "trigquad", "u = g(t)(x^2, -2xy), p = g(t)(x+y-1), g = 1 + sin(3t)/2",
        [](double t) { return 1.0 + 0.5 * std::sin(3 * t); }, [](double t) { return 1.5 * std::cos(3 * t); }, -1));
    out.push_back(channel_case());
    return out;
}

ManufacturedCase builtin_case(const std::string& name, int q)
{
    for (auto& c : builtin_cases(q)) {
        if (c.name == name) {
            return c;
        }
    }
    throw ConfigError("unknown case '" + name + "' (expected stream2, polyq, steady, trigquad or channel)");
}

StepConfig case_step_config(const ManufacturedCase& c, double nu, double mu, double newton_tol)
{
    StepConfig cfg;
    cfg.nu = nu;
    cfg.mu = mu;
    cfg.newton_tol = newton_tol;
    cfg.forcing = c.forcing_at(nu);
    cfg.bc = c.boundary_data();
    return cfg;
}

ConvergenceTable::ConvergenceTable(std::string parameter, std::vector<std::string> norms)
    : parameter_(std::move(parameter)), norms_(std::move(norms))
{
}

void ConvergenceTable::add_row(double parameter, std::vector<double> errors, std::string note)
{
    if (errors.size() != norms_.size()) {
        throw std::invalid_argument("ConvergenceTable::add_row: expected " + std::to_string(norms_.size()) +
                                    " errors");
    }
    params_.push_back(parameter);
    errors_.push_back(std::move(errors));
    std::replace(note.begin(), note.end(), ',', ';');
    std::replace(note.begin(), note.end(), '\n', ' ');
    notes_.push_back(std::move(note));
}

std::size_t ConvergenceTable::column(const std::string& norm) const
{
    const auto it = std::find(norms_.begin(), norms_.end(), norm);
    if (it == norms_.end()) {
        throw std::out_of_range("ConvergenceTable: no column '" + norm + "'");
    }
    return static_cast<std::size_t>(it - norms_.begin());
}

double ConvergenceTable::order(std::size_t row, std::size_t col) const
{
    if (row == 0 || row >= rows()) {
        return kNaN;
    }
    return std::log(error(row - 1, col) / error(row, col)) / std::log(params_[row - 1] / params_[row]);
}

void export_table(const ConvergenceTable& table, const std::filesystem::path& path)
{
    std::ofstream os(path);
    if (!os) {
        throw std::runtime_error("cannot open " + path.string() + " for writing");
    }
    for (const auto& [key, value] : table.metadata) {
        os << "# " << key << '=' << value << '\n';
    }
    os << table.parameter_name();
    for (const auto& n : table.norms()) {
        os << ',' << n << ",order_" << n;
    }
    os << ",note\n";
    for (std::size_t r = 0; r < table.rows(); ++r) {
        os << format_number(table.parameter(r));
        for (std::size_t c = 0; c < table.norms().size(); ++c) {
            os << ',' << format_number(table.error(r, c)) << ',';
            if (r > 0) {
                os << format_number(table.order(r, c));
            }
        }
        os << ',' << table.note(r) << '\n';
    }
    if (!os) {
        throw std::runtime_error("write to " + path.string() + " failed");
    }
}

ConvergenceTable read_table(const std::filesystem::path& path)
{
    std::ifstream is(path);
    if (!is) {
        throw std::runtime_error("cannot open " + path.string());
    }
    const std::string name = path.string();
    std::map<std::string, std::string> metadata;
    std::string line;
    int lineno = 0;
    std::optional<ConvergenceTable> table;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) {
            continue;
        }
        if (line[0] == '#') {
            const auto eq = line.find('=');
            if (eq == std::string::npos) {
                throw ParseError(name, lineno, "metadata line without '='");
            }
            metadata[line.substr(2, eq - 2)] = line.substr(eq + 1);
            continue;
        }
        const auto fields = split_csv(line);
        if (!table) {
            if (fields.size() < 2 || (fields.size() - 2) % 2 != 0 || fields.back() != "note") {
                throw ParseError(name, lineno, "malformed header");
            }
            std::vector<std::string> norms;
            for (std::size_t i = 1; i + 1 < fields.size(); i += 2) {
                norms.push_back(fields[i]);
            }
            table.emplace(fields[0], std::move(norms));
            continue;
        }
        const std::size_t cols = table->norms().size();
        if (fields.size() != 2 * cols + 2) {
            throw ParseError(name, lineno, "expected " + std::to_string(2 * cols + 2) + " fields");
        }
        std::vector<double> errors;
        for (std::size_t c = 0; c < cols; ++c) {
            errors.push_back(parse_double(fields[1 + 2 * c], name, lineno));
        }
        table->add_row(parse_double(fields[0], name, lineno), std::move(errors), fields.back());
    }
    if (!table) {
        throw ParseError(name, lineno, "missing header");
    }
    table->metadata = std::move(metadata);
    return *table;
}

std::string format_table(const ConvergenceTable& table)
{
    std::ostringstream os;
    for (const auto& [key, value] : table.metadata) {
        os << key << ": " << value << '\n';
    }
    os << std::setw(12) << table.parameter_name();
    for (const auto& n : table.norms()) {
        os << std::setw(14) << n << std::setw(8) << "order";
    }
    os << '\n';
    for (std::size_t r = 0; r < table.rows(); ++r) {
        os << std::setw(12) << std::setprecision(5) << std::defaultfloat << table.parameter(r);
        for (std::size_t c = 0; c < table.norms().size(); ++c) {
            os << std::setw(14) << std::setprecision(4) << std::scientific << table.error(r, c);
            if (r > 0) {
                os << std::setw(8) << std::setprecision(2) << std::fixed << table.order(r, c);
            } else {
                os << std::setw(8) << "-";
            }
        }
        os << std::defaultfloat;
        if (!table.note(r).empty()) {
            os << "  " << table.note(r);
        }
        os << '\n';
    }
    return os.str();
}

unsigned sweep_threads()
{
    if (const char* env = std::getenv("BDFQNS_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && v > 0) {
            return static_cast<unsigned>(v);
        }
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body)
{
    const std::size_t workers = std::min<std::size_t>(count, sweep_threads());
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) {
            body(i);
        }
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    {
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < count; i = next++) {
                    try {
                        body(i);
                    } catch (...) {
                        std::lock_guard lock(error_mutex);
                        if (!error) {
                            error = std::current_exception();
                        }
                    }
                }
            });
        }
    }
    if (error) {
        std::rethrow_exception(error);
    }
}

ConvergenceTable temporal_convergence(const ManufacturedCase& c, const TemporalStudy& study)
{
    if (study.dt_list.empty()) {
        throw ConfigError("temporal_convergence: dt_list is empty");
    }
    std::vector<double> dts = study.dt_list;
    std::sort(dts.begin(), dts.end(), std::greater<>());
    const BdfScheme scheme(study.q);
    const int q = study.q;
    const Mesh mesh = unit_square_mesh(study.n, DiagonalPattern::Alternating);
    const MixedSpace space(mesh, all_markers(mesh));
    const StepConfig cfg = case_step_config(c, study.nu, study.mu, study.newton_tol);
    const AssembledOperators norm_ops = assemble_linear_operators(space, 1.0, 0.0);
    const double area = norm_ops.pressure_mean.sum();
    const ExactSolution exact = c.exact();

    ConvergenceTable table("dt", {"u_l2", "grad_nu", "grad", "p_l2l2"});
    table.metadata = {{"case", c.name},
                      {"q", std::to_string(q)},
                      {"nu", format_number(study.nu)},
                      {"mu", format_number(study.mu)},
                      {"n", std::to_string(study.n)},
                      {"T", format_number(study.T)},
                      {"reference", study.reference_mode ? "same-mesh dt_min/8" : "exact solution"}};

    // Reference states at multiples of dt_min.
    const double dt_min = dts.back();
    std::vector<std::optional<State>> reference;
    if (study.reference_mode) {
        const double dt_ref = dt_min / 8.0;
        reference.resize(static_cast<std::size_t>(std::lround(study.T / dt_min)) + 1);
        Stepper stepper(space, cfg);
        RunOptions opt;
        opt.start = study.start;
        opt.exact = &exact;
        opt.observer = [&](const State& s) {
            const double k = s.t / dt_min;
            const long idx = std::lround(k);
            if (std::abs(k - static_cast<double>(idx)) < 1e-6) {
                reference.at(static_cast<std::size_t>(idx)) = s;
            }
        };
        fixed_step_run(scheme, stepper, study.T, dt_ref, opt);
    }

    std::vector<std::vector<double>> rows(dts.size());
    std::vector<std::string> notes(dts.size());
    parallel_for(dts.size(), [&](std::size_t i) {
        const double dt = dts[i];
        const long stride = std::lround(dt / dt_min);
        double grad_sum = 0.0;
        double p_sum = 0.0;
        double final_l2 = kNaN;
        try {
            Stepper stepper(space, cfg);
            RunOptions opt;
            opt.start = study.start;
            opt.exact = &exact;
            if (study.reference_mode) {
                for (int k = 0; k < q; ++k) {
                    State s = *reference.at(static_cast<std::size_t>(k * stride));
                    s.t = k * dt;
                    opt.start_states.push_back(std::move(s));
                }
            }
            opt.observer = [&](const State& s) {
                const long n = std::lround(s.t / dt);
                if (n == 0) {
                    return;
                }
                double e_l2 = 0.0;
                double e_grad_sq = 0.0;
                double e_p_sq = 0.0;
                if (study.reference_mode) {
                    const State& ref = *reference.at(static_cast<std::size_t>(n * stride));
                    const Vector du = s.u - ref.u;
                    e_l2 = std::sqrt(quadratic_form(norm_ops.mass, du));
                    e_grad_sq = quadratic_form(norm_ops.stiffness, du);
                    e_p_sq = pressure_error_sq(norm_ops, area, s.p - ref.p);
                } else {
                    const ErrorNorms e = error_norms(space, s.u, s.p, exact, s.t);
                    e_l2 = e.l2_velocity;
                    e_grad_sq = e.h1_semi_velocity * e.h1_semi_velocity;
                    e_p_sq = e.l2_pressure * e.l2_pressure;
                }
                grad_sum += dt * e_grad_sq;
                if (n >= q) {
                    p_sum += dt * e_p_sq;
                }
                final_l2 = e_l2;
            };
            fixed_step_run(scheme, stepper, study.T, dt, opt);
            rows[i] = {final_l2, std::sqrt(study.nu * grad_sum), std::sqrt(grad_sum), std::sqrt(p_sum)};
        } catch (const NumericalFailure& e) {
            rows[i] = {kNaN, kNaN, kNaN, kNaN};
            notes[i] = e.what();
        }
    });
    for (std::size_t i = 0; i < dts.size(); ++i) {
        table.add_row(dts[i], rows[i], notes[i]);
    }
    return table;
}

ConvergenceTable spatial_convergence(const ManufacturedCase& c, const SpatialStudy& study)
{
    if (study.n_list.empty()) {
        throw ConfigError("spatial_convergence: n_list is empty");
    }
    std::vector<int> ns = study.n_list;
    std::sort(ns.begin(), ns.end());
    const BdfScheme scheme(study.q);
    const int q = study.q;
    const ExactSolution exact = c.exact();

    ConvergenceTable table("h", {"u_l2", "u_h1", "p_l2", "p_l2l2", "interp_u_l2", "interp_u_h1", "super_h1"});
    table.metadata = {{"case", c.name},
                      {"q", std::to_string(q)},
                      {"nu", format_number(study.nu)},
                      {"mu", format_number(study.mu)},
                      {"dt", format_number(study.dt)},
                      {"T", format_number(study.T)}};

    std::vector<std::vector<double>> rows(ns.size());
    std::vector<std::string> notes(ns.size());
    parallel_for(ns.size(), [&](std::size_t i) {
        try {
            const Mesh mesh = unit_square_mesh(ns[i], DiagonalPattern::Alternating);
            const MixedSpace space(mesh, all_markers(mesh));
            Stepper stepper(space, case_step_config(c, study.nu, study.mu, study.newton_tol));
            double p_sum = 0.0;
            RunOptions opt;
            opt.start = study.start;
            opt.exact = &exact;
            opt.observer = [&](const State& s) {
                if (std::lround(s.t / study.dt) >= q) {
                    const double e = error_norms(space, s.u, s.p, exact, s.t).l2_pressure;
                    p_sum += study.dt * e * e;
                }
            };
            const RunResult run = fixed_step_run(scheme, stepper, study.T, study.dt, opt);
            const State& fin = run.final_state;
            const ErrorNorms e = error_norms(space, fin.u, fin.p, exact, fin.t);
            const Vector iu = interpolate(space, exact.velocity, fin.t);
            const Vector ip = interpolate(space, exact.pressure, fin.t);
            const ErrorNorms ei = error_norms(space, iu, ip, exact, fin.t);
            const auto [s_h, p_s] = stokes_projection(space, study.nu, c.stokes_rhs_at(study.nu), fin.t,
                                                      c.boundary_data());
            const AssembledOperators unit = assemble_linear_operators(space, 1.0, 0.0);
            const double sup = std::sqrt(quadratic_form(unit.stiffness, s_h - fin.u));
            rows[i] = {e.l2_velocity, e.h1_semi_velocity, e.l2_pressure, std::sqrt(p_sum),
                       ei.l2_velocity, ei.h1_semi_velocity, sup};
        } catch (const NumericalFailure& e) {
            rows[i] = std::vector<double>(7, kNaN);
            notes[i] = e.what();
        }
    });
    for (std::size_t i = 0; i < ns.size(); ++i) {
        table.add_row(1.0 / ns[i], rows[i], notes[i]);
    }
    return table;
}

double RobustnessResult::ratio(std::size_t m) const
{
    const auto& e = errors.at(m);
    const auto [lo, hi] = std::minmax_element(e.begin(), e.end());
    return *hi / *lo;
}

double RobustnessResult::error(double mu, double nu) const
{
    for (std::size_t m = 0; m < mu_list.size(); ++m) {
        for (std::size_t k = 0; k < nu_list.size(); ++k) {
            if (mu_list[m] == mu && nu_list[k] == nu) {
                return errors[m][k];
            }
        }
    }
    throw std::out_of_range("RobustnessResult: no entry for the requested (mu, nu)");
}

RobustnessResult robustness_sweep(const ManufacturedCase& c, const RobustnessStudy& study)
{
    if (study.nu_list.empty() || study.mu_list.empty()) {
        throw ConfigError("robustness_sweep: nu_list and mu_list must be non-empty");
    }
    RobustnessResult out;
    out.nu_list = study.nu_list;
    out.mu_list = study.mu_list;
    out.errors.assign(out.mu_list.size(), std::vector<double>(out.nu_list.size(), kNaN));

    const BdfScheme scheme(study.q);
    const Mesh mesh = unit_square_mesh(study.n, DiagonalPattern::Alternating);
    const MixedSpace space(mesh, all_markers(mesh));
    const ExactSolution exact = c.exact();
    const std::size_t nn = out.nu_list.size();
    parallel_for(out.mu_list.size() * nn, [&](std::size_t idx) {
        const std::size_t m = idx / nn;
        const std::size_t k = idx % nn;
        Stepper stepper(space, case_step_config(c, out.nu_list[k], out.mu_list[m], study.newton_tol));
        RunOptions opt;
        opt.start = study.start;
        opt.exact = &exact;
        const RunResult run = fixed_step_run(scheme, stepper, study.T, study.dt, opt);
        out.errors[m][k] = error_norms(space, run.final_state.u, run.final_state.p, exact, run.final_state.t)
                               .l2_velocity;
    });
    return out;
}

void export_robustness(const RobustnessResult& result, const std::filesystem::path& path)
{
    std::ofstream os(path);
    if (!os) {
        throw std::runtime_error("cannot open " + path.string() + " for writing");
    }
    os << "nu,mu,u_l2\n";
    for (std::size_t m = 0; m < result.mu_list.size(); ++m) {
        for (std::size_t k = 0; k < result.nu_list.size(); ++k) {
            os << format_number(result.nu_list[k]) << ',' << format_number(result.mu_list[m]) << ','
               << format_number(result.errors[m][k]) << '\n';
        }
    }
    if (!os) {
        throw std::runtime_error("write to " + path.string() + " failed");
    }
}

std::string format_robustness(const RobustnessResult& result)
{
    std::ostringstream os;
    os << std::setw(10) << "mu";
    for (double nu : result.nu_list) {
        os << std::setw(14) << ("nu=" + format_number(nu));
    }
    os << std::setw(10) << "ratio" << '\n';
    for (std::size_t m = 0; m < result.mu_list.size(); ++m) {
        os << std::setw(10) << result.mu_list[m];
        for (double e : result.errors[m]) {
            os << std::setw(14) << std::setprecision(4) << std::scientific << e;
        }
        os << std::setw(10) << std::setprecision(3) << std::fixed << result.ratio(m) << std::defaultfloat << '\n';
    }
    return os.str();
}

std::pair<Vector, Vector> stokes_projection(const MixedSpace& space, double nu, const VectorField& g, double t,
                                            const VectorField& bc)
{
    if (!(nu > 0.0)) {
        throw ConfigError("stokes_projection: nu must be positive");
    }
    const AssembledOperators ops = assemble_linear_operators(space, nu, 0.0);
    const auto& mask = space.dirichlet_mask();
    const Eigen::Index nu_dofs = space.n_u();
    const Eigen::Index np = space.n_p();

    Vector ud = Vector::Zero(nu_dofs);
    if (bc) {
        apply_dirichlet(space, bc, t, ud);
    }
    Vector load = g ? assemble_load(space, g, t) : Vector::Zero(nu_dofs);
    load -= ops.stiffness * ud;
    for (Eigen::Index i = 0; i < nu_dofs; ++i) {
        if (mask[static_cast<std::size_t>(i)]) {
            load(i) = ud(i);
        }
    }
    Vector rhs = Vector::Zero(nu_dofs + np + 1);
    rhs.head(nu_dofs) = load;
    rhs.segment(nu_dofs, np) = ops.divergence * ud;

    BlockSystem sys;
    sys.velocity_block = ops.stiffness;
    sys.divergence = &ops.divergence;
    sys.pressure_mean = &ops.pressure_mean;
    sys.dirichlet = &mask;
    const LuFactorization lu(sys.assemble());
    const Vector x = lu.solve(rhs);
    if (const double res = lu.relative_residual(x, rhs); res > 1e-10) {
        throw NumericalFailure("stokes_projection: linear residual " + std::to_string(res));
    }
    return {x.head(nu_dofs), x.segment(nu_dofs, np)};
}

} // namespace bdfns
