// bdfns: command-line driver for coefficient tables, convergence studies,
// robustness sweeps, adaptive runs and reports.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "bdfns/bdf_core.hpp"
#include "bdfns/controller.hpp"
#include "bdfns/errors.hpp"
#include "bdfns/fem.hpp"
#include "bdfns/harness.hpp"
#include "bdfns/mesh.hpp"
#include "bdfns/stepper.hpp"

namespace fs = std::filesystem;
using namespace bdfns;

namespace {

constexpr int kExitNumerical = 1;
constexpr int kExitUsage = 2;

// Orders are judged only where both errors exceed this floor.
constexpr double kRoundoffFloor = 1e-12;

struct MeshOptions {
    int n = 16;
    std::string path;
    std::string diagonals = "alternating";
};

void add_mesh_options(CLI::App* sub, MeshOptions& m)
{
    sub->add_option("--n", m.n, "cells per side of the generated unit-square mesh")->capture_default_str();
    sub->add_option("--mesh", m.path, "mesh file (overrides --n)");
    sub->add_option("--diagonals", m.diagonals, "single or alternating")->capture_default_str();
}

Mesh make_mesh(const MeshOptions& m)
{
    if (!m.path.empty()) {
        if (!fs::exists(m.path)) {
            throw ConfigError("mesh file not found: " + m.path);
        }
        std::vector<std::string> warnings;
        Mesh mesh = read_mesh(m.path, &warnings);
        for (const auto& w : warnings) {
            std::cerr << "warning: " << w << '\n';
        }
        return mesh;
    }
    if (m.n < 1) {
        throw ConfigError("n must be at least 1");
    }
    if (m.diagonals != "single" && m.diagonals != "alternating") {
        throw ConfigError("diagonals must be single or alternating");
    }
    return unit_square_mesh(m.n, m.diagonals == "single" ? DiagonalPattern::Single : DiagonalPattern::Alternating);
}

std::set<int> markers_of(const Mesh& mesh)
{
    std::set<int> out;
    for (const auto& be : mesh.boundary_edges()) {
        out.insert(be.marker);
    }
    return out;
}

void check_order(int q)
{
    if (q < 1 || q > kMaxBdfOrder) {
        throw ConfigError("q must lie in 1..5 (got " + std::to_string(q) + ")");
    }
}

void check_positive(double v, const char* field)
{
    if (!(v > 0.0) || !std::isfinite(v)) {
        throw ConfigError(std::string(field) + " must be positive");
    }
}

void write_table(const ConvergenceTable& table, const std::string& out)
{
    std::cout << format_table(table);
    if (!out.empty()) {
        export_table(table, out);
        std::cout << "wrote " << out << '\n';
    }
}

int verdict(bool ok, const std::string& what)
{
    std::cout << (ok ? "PASS " : "FAIL ") << what << '\n';
    return ok ? 0 : kExitNumerical;
}

std::string join(const std::vector<Rational>& v)
{
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
        s += (i ? " " : "") + to_string(v[i]);
    }
    return s;
}

int cmd_coeffs(int q)
{
    check_order(q);
    const BdfScheme scheme(q);
    std::cout << "q: " << q << '\n';
    std::cout << "delta: " << join(scheme.delta()) << '\n';
    if (!scheme.gamma().empty()) {
        std::cout << "gamma: " << join(scheme.gamma()) << '\n';
    }
    std::cout << "eta: " << scheme.eta() << '\n';
    if (scheme.sigma()) {
        std::cout << std::setprecision(10) << "sigma: " << *scheme.sigma() << '\n';
        std::cout << "s: " << *scheme.s() << '\n';
    }
    return 0;
}

struct TimeArgs {
    std::string case_name = "stream2";
    int q = 2;
    std::vector<double> dt_list;
    int n = 16;
    double T = 1.0;
    double nu = 1.0;
    double mu = 0.0;
    double newton_tol = 1e-12;
    bool no_reference = false;
    std::string start = "exact";
    std::string out;
    bool assert_mode = false;
};

/// Default halving sequence: four levels starting at T/20 (T/10 for q >= 4).
std::vector<double> default_dt_list(int q, double T)
{
    const double first = q == 5 ? T / 8 : q == 4 ? T / 10 : T / 20;
    return {first, first / 2, first / 4, first / 8};
}

double temporal_threshold(int q)
{
    return q == 5 ? 4.5 : q - 0.2;
}

int cmd_converge_time(const TimeArgs& a)
{
    check_order(a.q);
    check_positive(a.T, "T");
    check_positive(a.nu, "nu");
    TemporalStudy s;
    s.q = a.q;
    s.dt_list = a.dt_list.empty() ? default_dt_list(a.q, a.T) : a.dt_list;
    for (double dt : s.dt_list) {
        check_positive(dt, "dt-list entry");
    }
    s.T = a.T;
    s.n = a.n;
    s.nu = a.nu;
    s.mu = a.mu;
    s.newton_tol = a.newton_tol;
    s.reference_mode = !a.no_reference;
    s.start = parse_start_mode(a.start);
    const ConvergenceTable table = temporal_convergence(builtin_case(a.case_name, a.q), s);
    write_table(table, a.out);
    if (!a.assert_mode) {
        return 0;
    }
    const std::size_t col = table.column("u_l2");
    bool ok = true;
    std::size_t checked = 0;
    for (std::size_t r = 1; r < table.rows(); ++r) {
        if (table.error(r, col) > kRoundoffFloor && table.error(r - 1, col) > kRoundoffFloor) {
            ok = ok && table.order(r, col) >= temporal_threshold(a.q);
            ++checked;
        }
    }
    std::ostringstream what;
    what << "temporal order >= " << temporal_threshold(a.q) << " on " << checked << " level pairs";
    return verdict(ok && checked > 0, what.str());
}

struct SpaceArgs {
    std::string case_name = "stream2";
    int q = 4;
    std::vector<int> n_list{4, 8, 16, 32};
    double dt = 0.02;
    double T = 1.0;
    double nu = 1.0;
    double mu = 0.0;
    double newton_tol = 1e-11;
    std::string start = "ramp";
    std::string out;
    bool assert_mode = false;
};

int cmd_converge_space(const SpaceArgs& a)
{
    check_order(a.q);
    check_positive(a.dt, "dt");
    check_positive(a.T, "T");
    check_positive(a.nu, "nu");
    SpatialStudy s;
    s.q = a.q;
    s.n_list = a.n_list;
    s.dt = a.dt;
    s.T = a.T;
    s.nu = a.nu;
    s.mu = a.mu;
    s.newton_tol = a.newton_tol;
    s.start = parse_start_mode(a.start);
    const ConvergenceTable table = spatial_convergence(builtin_case(a.case_name, a.q), s);
    write_table(table, a.out);
    if (!a.assert_mode) {
        return 0;
    }
    if (table.rows() < 2) {
        throw ConfigError("--assert needs at least two meshes");
    }
    const std::size_t last = table.rows() - 1;
    int status = 0;
    if (a.mu == 0.0) {
        const double ou = table.order(last, "u_l2");
        const double op = table.order(last, "p_l2l2");
        const double os = table.order(last, "super_h1");
        status |= verdict(std::abs(ou - 3.0) <= 0.3, "velocity L2 order 3 +- 0.3 (" + std::to_string(ou) + ")");
        status |= verdict(std::abs(op - 2.0) <= 0.3, "pressure l2(L2) order 2 +- 0.3 (" + std::to_string(op) + ")");
        status |= verdict(os >= 2.7, "superconvergence order >= 2.7 (" + std::to_string(os) + ")");
    } else {
        const double ou = table.order(last, "u_l2");
        status |= verdict(ou >= 1.7, "velocity L2 order >= 1.7 (" + std::to_string(ou) + ")");
    }
    return status;
}

struct RobustArgs {
    std::string case_name = "stream2";
    int q = 2;
    std::vector<double> nu_list{1e-2, 1e-4, 1e-6};
    std::vector<double> mu_list{0.0, 0.01};
    int n = 8;
    double dt = 0.05;
    double T = 1.0;
    std::string out;
    bool assert_mode = false;
};

int cmd_robustness(const RobustArgs& a)
{
    check_order(a.q);
    RobustnessStudy s;
    s.q = a.q;
    s.nu_list = a.nu_list;
    s.mu_list = a.mu_list;
    s.n = a.n;
    s.dt = a.dt;
    s.T = a.T;
    const RobustnessResult r = robustness_sweep(builtin_case(a.case_name, a.q), s);
    std::cout << format_robustness(r);
    if (!a.out.empty()) {
        export_robustness(r, a.out);
        std::cout << "wrote " << a.out << '\n';
    }
    if (!a.assert_mode) {
        return 0;
    }
    const auto find_mu = [&](double mu) -> std::optional<std::size_t> {
        for (std::size_t m = 0; m < r.mu_list.size(); ++m) {
            if (r.mu_list[m] == mu) {
                return m;
            }
        }
        return std::nullopt;
    };
    const auto stab = find_mu(0.01);
    const auto plain = find_mu(0.0);
    if (!stab || !plain) {
        throw ConfigError("--assert needs mu = 0 and mu = 0.01 in mu-list");
    }
    int status = verdict(r.ratio(*stab) <= 3.0, "ratio at mu=0.01 <= 3");
    status |= verdict(r.ratio(*stab) < r.ratio(*plain), "ratio at mu=0.01 below ratio at mu=0");
    return status;
}

struct AdaptiveArgs {
    std::string case_name = "trigquad";
    double tolr = 1e-6;
    int qmax = 3;
    double T = 1.0;
    MeshOptions mesh{4, {}, "alternating"};
    double nu = 1.0;
    double mu = 0.0;
    double newton_tol = 1e-12;
    std::string restrict_mode = "warn";
    double c1 = 1.0;
    double c2 = 1.0;
    double c3 = 1.0;
    int max_rejections = 10;
    std::string log;
    bool assert_mode = false;
};

int cmd_adaptive(const AdaptiveArgs& a)
{
    check_positive(a.tolr, "tolr");
    check_positive(a.nu, "nu");
    ControllerConfig cfg;
    cfg.tol_r = a.tolr;
    cfg.q_max = a.qmax;
    cfg.T = a.T;
    cfg.max_consecutive_rejections = a.max_rejections;
    cfg.restrictions.mode = parse_restriction_mode(a.restrict_mode);
    cfg.restrictions.c1 = a.c1;
    cfg.restrictions.c2 = a.c2;
    cfg.restrictions.c3 = a.c3;
    cfg.validate();

    const ManufacturedCase c = builtin_case(a.case_name, a.qmax);
    const Mesh mesh = make_mesh(a.mesh);
    const MixedSpace space(mesh, markers_of(mesh));
    Stepper stepper(space, case_step_config(c, a.nu, a.mu, a.newton_tol));
    const ExactSolution exact = c.exact();
    AdaptiveOptions opt;
    opt.exact = &exact;
    const AdaptiveResult r = adaptive_run(cfg, stepper, opt);
    const ErrorNorms e = error_norms(space, r.final_state.u, r.final_state.p, exact, r.final_state.t);
    std::cout << "accepted: " << r.accepted << "\nrejected: " << r.rejected << '\n'
              << std::setprecision(6) << "mean accepted dt: " << r.mean_accepted_dt() << '\n'
              << "final q: " << (r.log.empty() ? 1 : r.log.back().q) << '\n'
              << "final L2 velocity error: " << e.l2_velocity << '\n';
    std::size_t flagged = 0;
    for (const auto& rec : r.log) {
        flagged += rec.accepted && rec.flags.any() ? 1 : 0;
    }
    if (flagged > 0) {
        std::cerr << "warning: " << flagged << " accepted steps violate step restrictions\n";
    }
    if (!a.log.empty()) {
        write_step_log_csv(r.log, a.log);
        std::cout << "wrote " << a.log << '\n';
    }
    if (!a.assert_mode) {
        return 0;
    }
    bool consistent = true;
    bool monotone = true;
    double last_t = cfg.t0;
    for (const auto& rec : r.log) {
        consistent = consistent && (rec.accepted == (rec.est <= rec.tol));
        if (rec.accepted) {
            monotone = monotone && rec.t > last_t;
            last_t = rec.t;
        }
    }
    int status = verdict(consistent, "accepted iff EST <= TOL");
    status |= verdict(monotone && last_t == cfg.T, "accepted times increase to T");
    return status;
}

struct StokesArgs {
    std::string case_name = "stream2";
    std::vector<int> n_list{4, 8, 16, 32};
    double nu = 1.0;
    double t = 1.0;
    std::string out;
};

int cmd_stokes_proj(const StokesArgs& a)
{
    check_positive(a.nu, "nu");
    const ManufacturedCase c = builtin_case(a.case_name);
    const ExactSolution exact = c.exact();
    std::vector<int> ns = a.n_list;
    std::sort(ns.begin(), ns.end());
    ConvergenceTable table("h", {"u_l2", "u_h1", "p_l2"});
    table.metadata = {{"case", c.name}, {"nu", std::to_string(a.nu)}, {"t", std::to_string(a.t)}};
    for (int n : ns) {
        const Mesh mesh = unit_square_mesh(n, DiagonalPattern::Alternating);
        const MixedSpace space(mesh, markers_of(mesh));
        const auto [s, p] = stokes_projection(space, a.nu, c.stokes_rhs_at(a.nu), a.t, c.boundary_data());
        const ErrorNorms e = error_norms(space, s, p, exact, a.t);
        table.add_row(1.0 / n, {e.l2_velocity, e.h1_semi_velocity, e.l2_pressure});
    }
    write_table(table, a.out);
    return 0;
}

struct RunArgs {
    std::string case_name = "stream2";
    int q = 2;
    double T = 1.0;
    std::optional<double> dt;
    std::optional<double> tolr;
    MeshOptions mesh;
    double nu = 1.0;
    double mu = 0.0;
    double newton_tol = 1e-10;
    std::string start = "exact";
    std::string restrict_mode = "warn";
    double c1 = 1.0;
    double c2 = 1.0;
    double c3 = 1.0;
    std::string traj;
    std::string vtk;
};

int cmd_run(const RunArgs& a)
{
    if (a.dt.has_value() == a.tolr.has_value()) {
        throw ConfigError("exactly one of dt and tolr must be set");
    }
    check_order(a.q);
    check_positive(a.T, "T");
    const ManufacturedCase c = builtin_case(a.case_name, a.q);
    const ExactSolution exact = c.exact();
    const Mesh mesh = make_mesh(a.mesh);
    const MixedSpace space(mesh, markers_of(mesh));
    Stepper stepper(space, case_step_config(c, a.nu, a.mu, a.newton_tol));
    RestrictionConfig rc;
    rc.mode = parse_restriction_mode(a.restrict_mode);
    rc.c1 = a.c1;
    rc.c2 = a.c2;
    rc.c3 = a.c3;
    rc.validate();

    State fin;
    if (a.dt) {
        check_positive(*a.dt, "dt");
        RunOptions opt;
        opt.start = parse_start_mode(a.start);
        opt.exact = &exact;
        opt.restrictions = rc;
        const RunResult r = fixed_step_run(BdfScheme(a.q), stepper, a.T, *a.dt, opt);
        for (const auto& w : r.warnings) {
            std::cerr << "warning: " << w << '\n';
        }
        int iters = 0;
        for (const auto& rec : r.records) {
            iters += rec.newton_iterations;
        }
        std::cout << "steps: " << r.steps << "\nnewton iterations: " << iters << '\n';
        if (!a.traj.empty()) {
            write_trajectory_csv(r.records, a.traj);
            std::cout << "wrote " << a.traj << '\n';
        }
        fin = r.final_state;
    } else {
        ControllerConfig cfg;
        cfg.tol_r = *a.tolr;
        cfg.q_max = a.q;
        cfg.T = a.T;
        cfg.restrictions = rc;
        AdaptiveOptions opt;
        opt.exact = &exact;
        const AdaptiveResult r = adaptive_run(cfg, stepper, opt);
        std::cout << "accepted: " << r.accepted << "\nrejected: " << r.rejected << '\n';
        if (!a.traj.empty()) {
            write_step_log_csv(r.log, a.traj);
            std::cout << "wrote " << a.traj << '\n';
        }
        fin = r.final_state;
    }
    const ErrorNorms e = error_norms(space, fin.u, fin.p, exact, fin.t);
    std::cout << std::setprecision(6) << "t: " << fin.t << "\nL2 velocity error: " << e.l2_velocity
              << "\nH1 velocity error: " << e.h1_semi_velocity << "\nL2 pressure error: " << e.l2_pressure << '\n';
    if (!a.vtk.empty()) {
        write_vtk(space, fin.u, fin.p, a.vtk);
        std::cout << "wrote " << a.vtk << '\n';
    }
    return 0;
}

int cmd_report(const std::string& dir, const std::string& out)
{
    if (!fs::is_directory(dir)) {
        throw ConfigError("report directory not found: " + dir);
    }
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".csv") {
            files.push_back(entry.path());
        }
    }
    std::sort(files.begin(), files.end());
    std::ostringstream os;
    for (const auto& f : files) {
        os << "== " << f.filename().string() << " ==\n";
        try {
            os << format_table(read_table(f));
        } catch (const Error&) {
            std::ifstream is(f);
            os << is.rdbuf();
        }
        os << '\n';
    }
    if (out.empty()) {
        std::cout << os.str();
    } else {
        std::ofstream of(out);
        of << os.str();
        if (!of) {
            throw std::runtime_error("cannot write " + out);
        }
        std::cout << "wrote " << out << " (" << files.size() << " tables)\n";
    }
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"BDF-q Navier-Stokes solver with grad-div stabilization"};
    app.set_config("--config", "", "INI file whose keys mirror the long flags");
    app.require_subcommand(1, 1);
    std::function<int()> action;

    int coeffs_q = 0;
    auto* coeffs = app.add_subcommand("coeffs", "print BDF coefficients and stability constants");
    coeffs->add_option("--q", coeffs_q, "order")->required();
    coeffs->callback([&] { action = [&] { return cmd_coeffs(coeffs_q); }; });

    TimeArgs ta;
    auto* ct = app.add_subcommand("converge-time", "temporal convergence study");
    ct->add_option("--case", ta.case_name)->capture_default_str();
    ct->add_option("--q", ta.q)->capture_default_str();
    ct->add_option("--dt-list", ta.dt_list, "comma-separated steps")->delimiter(',');
    ct->add_option("--n", ta.n)->capture_default_str();
    ct->add_option("--T", ta.T)->capture_default_str();
    ct->add_option("--nu", ta.nu)->capture_default_str();
    ct->add_option("--mu", ta.mu)->capture_default_str();
    ct->add_option("--newton-tol", ta.newton_tol)->capture_default_str();
    ct->add_flag("--no-reference", ta.no_reference, "measure against the exact solution");
    ct->add_option("--start", ta.start, "exact or ramp")->capture_default_str();
    ct->add_option("--out", ta.out, "CSV output");
    ct->add_flag("--assert", ta.assert_mode, "exit 1 unless the observed orders reach their thresholds");
    ct->callback([&] { action = [&] { return cmd_converge_time(ta); }; });

    SpaceArgs sa;
    auto* cs = app.add_subcommand("converge-space", "spatial convergence study");
    cs->add_option("--case", sa.case_name)->capture_default_str();
    cs->add_option("--q", sa.q)->capture_default_str();
    cs->add_option("--n-list", sa.n_list)->delimiter(',');
    cs->add_option("--dt", sa.dt)->capture_default_str();
    cs->add_option("--T", sa.T)->capture_default_str();
    cs->add_option("--nu", sa.nu)->capture_default_str();
    cs->add_option("--mu", sa.mu)->capture_default_str();
    cs->add_option("--newton-tol", sa.newton_tol)->capture_default_str();
    cs->add_option("--start", sa.start)->capture_default_str();
    cs->add_option("--out", sa.out);
    cs->add_flag("--assert", sa.assert_mode);
    cs->callback([&] { action = [&] { return cmd_converge_space(sa); }; });

    RobustArgs ra;
    auto* rb = app.add_subcommand("robustness", "viscosity sweep with and without grad-div");
    rb->add_option("--case", ra.case_name)->capture_default_str();
    rb->add_option("--q", ra.q)->capture_default_str();
    rb->add_option("--nu-list", ra.nu_list)->delimiter(',');
    rb->add_option("--mu-list", ra.mu_list)->delimiter(',');
    rb->add_option("--n", ra.n)->capture_default_str();
    rb->add_option("--dt", ra.dt)->capture_default_str();
    rb->add_option("--T", ra.T)->capture_default_str();
    rb->add_option("--out", ra.out);
    rb->add_flag("--assert", ra.assert_mode);
    rb->callback([&] { action = [&] { return cmd_robustness(ra); }; });

    AdaptiveArgs aa;
    auto* ad = app.add_subcommand("adaptive", "variable-step, variable-order run");
    ad->add_option("--case", aa.case_name)->capture_default_str();
    ad->add_option("--tolr", aa.tolr)->capture_default_str();
    ad->add_option("--qmax", aa.qmax)->capture_default_str();
    ad->add_option("--T", aa.T)->capture_default_str();
    add_mesh_options(ad, aa.mesh);
    ad->add_option("--nu", aa.nu)->capture_default_str();
    ad->add_option("--mu", aa.mu)->capture_default_str();
    ad->add_option("--newton-tol", aa.newton_tol)->capture_default_str();
    ad->add_option("--restrict", aa.restrict_mode, "off, warn or clamp")->capture_default_str();
    ad->add_option("--c1", aa.c1)->capture_default_str();
    ad->add_option("--c2", aa.c2)->capture_default_str();
    ad->add_option("--c3", aa.c3)->capture_default_str();
    ad->add_option("--max-rejections", aa.max_rejections)->capture_default_str();
    ad->add_option("--log", aa.log, "step-log CSV");
    ad->add_flag("--assert", aa.assert_mode);
    ad->callback([&] { action = [&] { return cmd_adaptive(aa); }; });

    StokesArgs sp;
    auto* st = app.add_subcommand("stokes-proj", "Stokes projection errors of a case");
    st->add_option("--case", sp.case_name)->capture_default_str();
    st->add_option("--n-list", sp.n_list)->delimiter(',');
    st->add_option("--nu", sp.nu)->capture_default_str();
    st->add_option("--t", sp.t, "time at which the case is projected")->capture_default_str();
    st->add_option("--out", sp.out);
    st->callback([&] { action = [&] { return cmd_stokes_proj(sp); }; });

    RunArgs rn;
    double run_dt = 0.0;
    double run_tolr = 0.0;
    auto* ru = app.add_subcommand("run", "single trajectory, fixed step (--dt) or adaptive (--tolr)");
    ru->add_option("--case", rn.case_name)->capture_default_str();
    ru->add_option("--q", rn.q, "order, or maximum order with --tolr")->capture_default_str();
    ru->add_option("--T", rn.T)->capture_default_str();
    auto* dt_opt = ru->add_option("--dt", run_dt);
    auto* tolr_opt = ru->add_option("--tolr", run_tolr);
    add_mesh_options(ru, rn.mesh);
    ru->add_option("--nu", rn.nu)->capture_default_str();
    ru->add_option("--mu", rn.mu)->capture_default_str();
    ru->add_option("--newton-tol", rn.newton_tol)->capture_default_str();
    ru->add_option("--start", rn.start)->capture_default_str();
    ru->add_option("--restrict", rn.restrict_mode)->capture_default_str();
    ru->add_option("--c1", rn.c1)->capture_default_str();
    ru->add_option("--c2", rn.c2)->capture_default_str();
    ru->add_option("--c3", rn.c3)->capture_default_str();
    ru->add_option("--traj", rn.traj, "trajectory CSV (step log when adaptive)");
    ru->add_option("--vtk", rn.vtk, "VTK dump of the final state");
    ru->callback([&] {
        if (dt_opt->count() > 0) {
            rn.dt = run_dt;
        }
        if (tolr_opt->count() > 0) {
            rn.tolr = run_tolr;
        }
        action = [&] { return cmd_run(rn); };
    });

    std::string report_dir = "results";
    std::string report_out;
    auto* rp = app.add_subcommand("report", "concatenate CSV tables into one summary");
    rp->add_option("--dir", report_dir)->capture_default_str();
    rp->add_option("--out", report_out);
    rp->callback([&] { action = [&] { return cmd_report(report_dir, report_out); }; });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitUsage;
    }

    try {
        return action ? action() : kExitUsage;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const InvalidOrderError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitNumerical;
    }
}
