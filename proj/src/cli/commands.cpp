#include <CLI11.hpp>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <json.hpp>
#include <limits>
#include <ostream>

#include "orliczfb/cli.hpp"
#include "orliczfb/field_io.hpp"
#include "orliczfb/numerics.hpp"
#include "orliczfb/oracle1d.hpp"

namespace orliczfb::cli {
namespace {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

const GFunction& require_gfunction(const RunConfig& cfg) {
    if (!cfg.gfunction) throw ConfigError("config needs a [gfunction] block");
    return *cfg.gfunction;
}

fs::path out_path(const RunConfig& cfg, const std::string& name) {
    fs::create_directories(cfg.out_dir);
    return fs::path(cfg.out_dir) / name;
}

void write_json(const fs::path& path, const json& j) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

// NaN and infinities become null in JSON.
json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json ball_json(const BallReport& r) {
    json rows = json::array();
    for (const auto& s : r.per_radius) {
        rows.push_back({{"r", s.r}, {"min", s.min}, {"max", s.max}, {"mean", s.mean}, {"samples", s.samples}});
    }
    return {{"conclusive", r.conclusive}, {"pass", r.pass}, {"min", num(r.min)}, {"max", num(r.max)}, {"per_radius", rows}};
}

void write_ball_csv(const fs::path& path, const BallReport& r) {
    std::ofstream out(path);
    out << std::setprecision(12) << "r,min,max,mean,samples\n";
    for (const auto& s : r.per_radius) out << s.r << ',' << s.min << ',' << s.max << ',' << s.mean << ',' << s.samples << '\n';
}

json diagnostics_json(const SolveDiagnostics& d) {
    json stages = json::array();
    for (const auto& s : d.stages) {
        stages.push_back({{"eps", s.eps},
                          {"iterations", s.iterations},
                          {"energy", num(s.energy)},
                          {"converged", s.converged},
                          {"aborted", s.aborted},
                          {"trace_offset", s.trace_offset}});
    }
    json trace = json::array();
    for (double e : d.energy_trace) trace.push_back(num(e));
    return {{"energy", num(d.energy)},
            {"eta", d.eta},
            {"eps_schedule", d.eps_schedule},
            {"stages", stages},
            {"restart_energies", d.restart_energies},
            {"selected_run", d.selected_run},
            {"zeroed_nodes", d.zeroed_nodes},
            {"zero_level", d.zero_level},
            {"residual_max", num(d.residual_max)},
            {"residual_ok", d.residual_ok},
            {"messages", d.messages},
            {"energy_trace", trace}};
}

bool solve_failed(const SolveDiagnostics& d) {
    for (const auto& s : d.stages) {
        if (s.aborted) return true;
    }
    return !d.residual_ok;
}

struct StripErrors {
    double sup = std::numeric_limits<double>::quiet_NaN();
    double fb = std::numeric_limits<double>::quiet_NaN();
    double fb_gradient = std::numeric_limits<double>::quiet_NaN();
};

// Errors against the plane solution (a - lambda* x)^+ of the strip preset.
StripErrors strip_errors(const Field& u, const GFunction& f, double lambda, double a) {
    StripErrors e;
    if (!(lambda > 0.0)) return e;
    const double ls = lambda_star(f, lambda);
    const Grid& g = u.grid();
    e.sup = 0.0;
    for (std::size_t n = 0; n < u.size(); ++n) e.sup = std::max(e.sup, std::abs(u[n] - std::max(0.0, a - ls * g.node_x(n))));
    const auto fb = extract_free_boundary(u);
    if (!fb.empty()) {
        e.fb = 0.0;
        for (const auto& p : fb.points) e.fb = std::max(e.fb, std::abs(p.x[0] - a / ls));
        e.fb_gradient = std::abs(fb_gradient_stats(u, f, lambda).mean - ls);
    }
    return e;
}

Point2 centre_point(const FreeBoundarySet& fb) {
    Point2 c{0.0, 0.0};
    for (const auto& p : fb.points) {
        c[0] += p.x[0] / fb.size();
        c[1] += p.x[1] / fb.size();
    }
    Point2 best = fb.points.front().x;
    for (const auto& p : fb.points) {
        if (std::hypot(p.x[0] - c[0], p.x[1] - c[1]) < std::hypot(best[0] - c[0], best[1] - c[1])) best = p.x;
    }
    return best;
}

}  // namespace

int cmd_gcheck(const RunConfig& cfg, std::ostream& out) {
    const GFunction& f = require_gfunction(cfg);
    const auto cond = check_condition(f, 1e-6, 1e6, 1000);
    const auto ts = log_grid(1e-6, 1e6, 200);
    const auto ss = log_grid(1e-3, 1e3, 13);
    const auto suite = inequality_suite(f, ts, ss);
    double defect = 0.0;
    for (double t : log_grid(1e-4, 1e4, 41)) {
        defect = std::max(defect, std::abs(conjugate_identity_defect(f, t)) / (t * f.g(t)));
    }
    json checks = json::array();
    for (const auto& c : suite.checks) {
        checks.push_back({{"name", c.name}, {"worst_slack", c.worst_slack}, {"at", {c.at_first, c.at_second}}});
    }
    const bool pass = cond.bracketed && !cond.non_finite_at && suite.worst_slack() >= -1e-9 && defect <= 1e-7;
    const json report = {{"gfunction", f.describe()},
                         {"delta", f.delta()},
                         {"g0", f.g0()},
                         {"delta_emp", cond.delta_emp},
                         {"g0_emp", cond.g0_emp},
                         {"bracketed", cond.bracketed},
                         {"worst_slack", suite.worst_slack()},
                         {"inequalities", checks},
                         {"conjugate_identity_defect", defect},
                         {"pass", pass}};
    out << report.dump(2) << '\n';
    write_json(out_path(cfg, "gcheck.json"), report);
    return pass ? kPass : kNumericalFailure;
}

int cmd_lambda_star(const RunConfig& cfg, std::ostream& out) {
    const GFunction& f = require_gfunction(cfg);
    const double ls = lambda_star(f, cfg.lambda);
    const double residual = std::abs(bernoulli_phi(f, ls) - cfg.lambda);
    const bool pass = residual <= 1e-10 * std::max(1.0, cfg.lambda);
    const json report = {{"gfunction", f.describe()},
                         {"lambda", cfg.lambda},
                         {"lambda_star", ls},
                         {"residual", residual},
                         {"pass", pass}};
    out << std::setprecision(17) << report.dump(2) << '\n';
    return pass ? kPass : kNumericalFailure;
}

int cmd_solve1d(const RunConfig& cfg, std::ostream& out) {
    const GFunction& f = require_gfunction(cfg);
    const auto& o = cfg.oracle1d;
    if (o.n < 3) throw ConfigError("[oracle1d] n must be >= 3");
    const Profile1D exact = exact_solve_1d(o.a, o.b, o.L, f, cfg.lambda);
    const Profile1D brute = brute_force_1d(o.a, o.b, o.L, f, cfg.lambda, o.n);
    const double energy_gap = brute.energy - exact.energy;
    const double energy_tol = 3.0 / o.n * std::max(1.0, std::abs(exact.energy));
    const auto fe = exact.free_boundary(), fbr = brute.free_boundary();
    double fb_gap = 0.0;
    if (fe.size() != fbr.size()) {
        fb_gap = std::numeric_limits<double>::infinity();
    } else {
        for (std::size_t i = 0; i < fe.size(); ++i) fb_gap = std::max(fb_gap, std::abs(fe[i] - fbr[i]));
    }
    const double fb_tol = 2.0 * o.L / (o.n - 1);
    const bool agree = energy_gap >= -1e-12 && energy_gap <= energy_tol && fb_gap <= fb_tol;

    auto grid = std::make_shared<const Grid>(Grid::rectangle(o.n, 1, o.L, 0.0));
    Field u(grid);
    for (int i = 0; i < o.n; ++i) u[grid->index(i, 0)] = exact.value_at(grid->x(i));
    write_field(out_path(cfg, "field1d.txt").string(), u);

    const json report = {{"gfunction", f.describe()},
                         {"lambda", cfg.lambda},
                         {"lambda_star", cfg.lambda > 0.0 ? lambda_star(f, cfg.lambda) : 0.0},
                         {"shape", to_string(exact.shape)},
                         {"exact_energy", exact.energy},
                         {"brute_energy", brute.energy},
                         {"free_boundary_exact", fe},
                         {"free_boundary_brute", fbr},
                         {"energy_gap", energy_gap},
                         {"energy_tolerance", energy_tol},
                         {"fb_gap", num(fb_gap)},
                         {"fb_tolerance", fb_tol},
                         {"agree", agree}};
    write_json(out_path(cfg, "solve1d.json"), report);
    out << report.dump(2) << '\n';
    return agree ? kPass : kNumericalFailure;
}

int cmd_solve2d(const RunConfig& cfg, std::ostream& out) {
    const GFunction& f = require_gfunction(cfg);
    if (cfg.refine.empty()) {
        const SolveResult res = minimize(build_grid(cfg), f, cfg.lambda, cfg.solve);
        write_field(out_path(cfg, "field.txt").string(), res.u);
        json d = diagnostics_json(res.diagnostics);
        write_json(out_path(cfg, "diagnostics.json"), d);
        const bool failed = solve_failed(res.diagnostics);
        out << json({{"energy", num(res.diagnostics.energy)},
                     {"residual_max", num(res.diagnostics.residual_max)},
                     {"residual_ok", res.diagnostics.residual_ok},
                     {"failed", failed}})
                   .dump(2)
            << '\n';
        return failed ? kNumericalFailure : kPass;
    }
    if (cfg.phi0.kind != Phi0Kind::Strip) throw ConfigError("[solve] refine requires the strip preset");
    std::ofstream csv(out_path(cfg, "refinement.csv"));
    csv << std::setprecision(12) << "h,energy,sup_error,fb_error,fb_gradient_error,residual_max,failed\n";
    bool any_failed = false;
    json levels = json::array();
    for (int cells : cfg.refine) {
        const auto grid = build_grid(cfg, cells);
        const SolveResult res = minimize(grid, f, cfg.lambda, cfg.solve);
        const bool failed = solve_failed(res.diagnostics);
        any_failed = any_failed || failed;
        const StripErrors e = strip_errors(res.u, f, cfg.lambda, cfg.phi0.a);
        const std::string tag = "n" + std::to_string(cells);
        write_field(out_path(cfg, "field_" + tag + ".txt").string(), res.u);
        write_json(out_path(cfg, "diagnostics_" + tag + ".json"), diagnostics_json(res.diagnostics));
        csv << grid->h() << ',' << res.diagnostics.energy << ',' << e.sup << ',' << e.fb << ',' << e.fb_gradient << ','
            << res.diagnostics.residual_max << ',' << (failed ? 1 : 0) << '\n';
        csv.flush();
        levels.push_back({{"h", grid->h()},
                          {"energy", num(res.diagnostics.energy)},
                          {"sup_error", num(e.sup)},
                          {"fb_error", num(e.fb)},
                          {"fb_gradient_error", num(e.fb_gradient)},
                          {"failed", failed}});
    }
    out << levels.dump(2) << '\n';
    return any_failed ? kNumericalFailure : kPass;
}

int cmd_verify(const RunConfig& cfg, const std::string& field_path, std::ostream& out) {
    const GFunction& f = require_gfunction(cfg);
    const Field u = read_field(field_path);
    const PropertyReport rep = weak_solution_check(u, f, cfg.lambda, cfg.verify);
    bool pass = rep.pass;
    // Minimizers must also satisfy the two-sided density bound.
    if (cfg.verify.mode == VerifyMode::Minimizer && rep.fb_points > 0) pass = pass && rep.density.pass;

    json conditions = json::array();
    for (const auto& c : rep.conditions) {
        conditions.push_back(
            {{"name", c.name}, {"pass", c.pass}, {"evaluated", c.evaluated}, {"value", num(c.value)}, {"detail", c.detail}});
    }
    json flat = json::array();
    for (const auto& fl : rep.flatness) flat.push_back({{"rho", fl[0]}, {"sigma_plus", fl[1]}, {"sigma_minus", fl[2]}});
    const auto& gs = rep.fb_gradient;
    const json report = {
        {"mode", cfg.verify.mode == VerifyMode::Minimizer ? "minimizer" : "weak"},
        {"lambda", rep.lambda},
        {"lambda_star", rep.lambda_star},
        {"g_lambda_star", rep.g_lambda_star},
        {"gamma", rep.gamma},
        {"fb_points", rep.fb_points},
        {"lipschitz_max", rep.lipschitz_max},
        {"residual_max", rep.residual_max},
        {"density", ball_json(rep.density)},
        {"nondegeneracy", ball_json(rep.nondegeneracy)},
        {"fb_gradient",
         {{"mean", gs.mean}, {"max", gs.max}, {"min", gs.min}, {"elements", gs.elements}, {"collar", gs.collar}}},
        {"qu_mean_ratio", rep.qu_mean_ratio},
        {"qu_samples", rep.qu_ratios.size()},
        {"qu_radius", rep.qu_radius},
        {"qu_source", "full discrete interface (reduced boundary not separable)"},
        {"perimeter", ball_json(rep.perimeter)},
        {"flatness", flat},
        {"zero_ball_growth", rep.zero_ball_growth ? json(*rep.zero_ball_growth) : json(nullptr)},
        {"tau_measured", rep.tau_measured},
        {"conditions", conditions},
        {"pass", pass}};
    write_json(out_path(cfg, "report.json"), report);
    write_ball_csv(out_path(cfg, "density.csv"), rep.density);
    write_ball_csv(out_path(cfg, "nondegeneracy.csv"), rep.nondegeneracy);
    {
        std::ofstream csv(out_path(cfg, "perimeter.csv"));
        csv << std::setprecision(12) << "r,ratio\n";
        for (const auto& s : rep.perimeter.per_radius) csv << s.r << ',' << s.mean << '\n';
    }
    {
        std::ofstream csv(out_path(cfg, "flatness.csv"));
        csv << std::setprecision(12) << "rho,sigma_plus,sigma_minus\n";
        for (const auto& fl : rep.flatness) csv << fl[0] << ',' << fl[1] << ',' << fl[2] << '\n';
    }
    out << report.dump(2) << '\n';
    return pass ? kPass : kNumericalFailure;
}

int cmd_blowup(const RunConfig& cfg, const std::string& field_path, std::ostream& out) {
    const GFunction& f = require_gfunction(cfg);
    const Field u = read_field(field_path);
    const Grid& g = u.grid();
    const double ls = cfg.lambda > 0.0 ? lambda_star(f, cfg.lambda) : 0.0;
    if (!(ls > 0.0)) throw ConfigError("blowup needs lambda > 0");
    Point2 x0{};
    if (cfg.blowup.x0) {
        x0 = *cfg.blowup.x0;
    } else {
        const auto fb = extract_free_boundary(u);
        if (fb.empty()) {
            out << json({{"error", "field has no free boundary"}}).dump(2) << '\n';
            return kNumericalFailure;
        }
        x0 = centre_point(fb);
    }
    std::vector<double> rhos = cfg.blowup.rho;
    if (rhos.empty()) {
        const double room = std::min({x0[0], g.Lx() - x0[0], g.one_dimensional() ? 1e300 : std::min(x0[1], g.Ly() - x0[1])});
        for (double r = 4.0 * g.h(); r <= room; r *= 2.0) rhos.push_back(r);
    }
    std::ofstream csv(out_path(cfg, "blowup.csv"));
    csv << std::setprecision(12) << "rho,sigma_plus,sigma_minus,nu_x,nu_y,plane_deviation\n";
    json rows = json::array();
    int conclusive = 0;
    for (std::size_t k = 0; k < rhos.size(); ++k) {
        const double rho = rhos[k];
        const Flatness fl = flatness_measure(u, x0, rho, ls);
        const Field v = blow_up(u, x0, rho, cfg.blowup.m);
        double dev = std::numeric_limits<double>::quiet_NaN();
        if (fl.conclusive) {
            ++conclusive;
            dev = 0.0;
            for (std::size_t n = 0; n < v.size(); ++n) {
                const double zx = v.grid().node_x(n) - 1.0, zy = v.grid().node_y(n) - 1.0;
                if (zx * zx + zy * zy > 1.0) continue;
                dev = std::max(dev, std::abs(v[n] - ls * std::max(0.0, -(zx * fl.nu[0] + zy * fl.nu[1]))));
            }
        }
        write_field(out_path(cfg, "blowup_" + std::to_string(k) + ".txt").string(), v);
        csv << rho << ',' << fl.sigma_plus << ',' << fl.sigma_minus << ',' << fl.nu[0] << ',' << fl.nu[1] << ',' << dev << '\n';
        rows.push_back({{"rho", rho},
                        {"sigma_plus", fl.sigma_plus},
                        {"sigma_minus", fl.sigma_minus},
                        {"nu", {fl.nu[0], fl.nu[1]}},
                        {"conclusive", fl.conclusive},
                        {"plane_deviation", num(dev)}});
    }
    const json report = {{"x0", {x0[0], x0[1]}}, {"lambda_star", ls}, {"schedule", rows}};
    write_json(out_path(cfg, "blowup.json"), report);
    out << report.dump(2) << '\n';
    return conclusive > 0 ? kPass : kNumericalFailure;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Orlicz free-boundary solver and property verifier", "orliczfb"};
    app.require_subcommand(1);
    std::string config_path, field_path, out_dir, mode;
    std::optional<long> seed;
    auto add_common = [&](CLI::App* sub, bool needs_field) {
        sub->add_option("--config", config_path, "Run configuration file")->required();
        if (needs_field) sub->add_option("--field", field_path, "ORLICZFB field file")->required();
        sub->add_option("--out", out_dir, "Output directory (overrides [output] dir)");
        sub->add_option("--seed", seed, "Restart seed (overrides [solve] seed)");
        sub->add_option("--mode", mode, "Verification mode")->check(CLI::IsMember({"minimizer", "weak"}));
    };
    CLI::App* gcheck = app.add_subcommand("gcheck", "Certify the ellipticity condition and inequality suite");
    CLI::App* lstar = app.add_subcommand("lambda-star", "Free-boundary slope for the configured lambda");
    CLI::App* s1 = app.add_subcommand("solve1d", "Exact and brute-force one-dimensional minimizers");
    CLI::App* s2 = app.add_subcommand("solve2d", "Two-dimensional minimization (optionally a refinement sweep)");
    CLI::App* verify = app.add_subcommand("verify", "Measure the properties of a field");
    CLI::App* blowup = app.add_subcommand("blowup", "Blow-up and flatness over a radius schedule");
    for (CLI::App* sub : {gcheck, lstar, s1, s2}) add_common(sub, false);
    for (CLI::App* sub : {verify, blowup}) add_common(sub, true);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kPass;
    } catch (const CLI::ParseError& e) {
        err << "orliczfb: " << e.what() << '\n' << app.help();
        return kUsageError;
    }

    try {
        RunConfig cfg = load_config(config_path);
        if (!out_dir.empty()) cfg.out_dir = out_dir;
        if (seed) cfg.solve.seed = static_cast<std::uint64_t>(*seed);
        if (mode == "minimizer") cfg.verify.mode = VerifyMode::Minimizer;
        if (mode == "weak") cfg.verify.mode = VerifyMode::Weak;
        if (*gcheck) return cmd_gcheck(cfg, out);
        if (*lstar) return cmd_lambda_star(cfg, out);
        if (*s1) return cmd_solve1d(cfg, out);
        if (*s2) return cmd_solve2d(cfg, out);
        if (*verify || *blowup) {
            if (!fs::exists(field_path)) {
                err << "orliczfb: field file not found: " << field_path << '\n';
                return kUsageError;
            }
            return *verify ? cmd_verify(cfg, field_path, out) : cmd_blowup(cfg, field_path, out);
        }
    } catch (const ConfigError& e) {
        err << "orliczfb: " << e.what() << '\n';
        return kUsageError;
    } catch (const DomainError& e) {
        err << "orliczfb: " << e.what() << '\n';
        return kUsageError;
    } catch (const NumericalError& e) {
        err << "orliczfb: numerical failure: " << e.what() << '\n';
        return kNumericalFailure;
    } catch (const fs::filesystem_error& e) {
        err << "orliczfb: " << e.what() << '\n';
        return kUsageError;
    }
    return kUsageError;
}

}  // namespace orliczfb::cli
