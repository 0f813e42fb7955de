// Acceptance suite: one PASS/FAIL line per criterion, exit status 0 iff all pass.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <memory>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "orliczfb/analysis.hpp"
#include "orliczfb/gfunction.hpp"
#include "orliczfb/oracle1d.hpp"
#include "orliczfb/solver.hpp"

using namespace orliczfb;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Outcome {
    bool pass = false;
    std::string detail;
};

int failures = 0;

void report(int id, const char* title, const Outcome& o, double secs) {
    std::printf("%s %d %s: %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", id, title, o.detail.c_str(), secs);
    std::fflush(stdout);
    if (!o.pass) ++failures;
}

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

// Values at or below this level are solver round-off; a sequence that has reached
// it counts as non-increasing.
constexpr double kErrorFloor = 1e-9;

bool decreasing(const std::vector<double>& e) {
    for (std::size_t k = 1; k < e.size(); ++k) {
        if (!(e[k] < e[k - 1] || e[k] <= kErrorFloor)) return false;
    }
    return true;
}

// ------------------------------------------------------------------ 1

Outcome law_suite() {
    const std::vector<GFunction> family{
        GFunction::power(1.5),
        GFunction::power(2),
        GFunction::power(3),
        GFunction::power(4),
        GFunction::power_log(1, 1, 1),
        GFunction::spliced(1, 2, 1),
        GFunction::sum({{1.0, GFunction::power(2)}, {1.0, GFunction::power(3)}}),
        GFunction::product(GFunction::power(2), GFunction::power_log(1, 1, 1)),
        GFunction::compose(GFunction::power(2), GFunction::power(3)),
    };
    const auto grid = log_grid(1e-6, 1e6, 200);
    double worst = INFINITY, worst_identity = 0.0;
    std::string worst_name;
    bool bracketed = true;
    for (const auto& f : family) {
        const auto rep = inequality_suite(f, grid, grid);
        for (const auto& c : rep.checks) {
            if (c.worst_slack < worst) {
                worst = c.worst_slack;
                worst_name = f.describe() + " " + c.name;
            }
        }
        for (double t : grid) {
            worst_identity = std::max(worst_identity, std::abs(conjugate_identity_defect(f, t)) / (t * f.g(t)));
        }
        bracketed = bracketed && check_condition(f, 1e-6, 1e6, 200).bracketed;
    }
    const bool pass = worst >= -1e-7 && worst_identity <= 1e-7 && bracketed;
    return {pass, fmt("%zu families, worst relative slack %.2e (%s), conjugate identity defect %.2e, condition bracketed %s",
                      family.size(), worst, worst_name.c_str(), worst_identity, bracketed ? "yes" : "no")};
}

// ------------------------------------------------------------------ 2

Outcome lambda_star_closed_forms() {
    const double a = lambda_star(GFunction::power(2), 0.5);
    const double b = lambda_star(GFunction::power(3), 2.0 / 3.0);
    std::mt19937 rng(2);
    std::uniform_real_distribution<double> P(1.1, 6.0), L(-3.0, 2.0);
    double worst = 0.0;
    for (int k = 0; k < 100; ++k) {
        const GFunction f = GFunction::power(P(rng));
        const double lambda = std::pow(10.0, L(rng));
        const double s = lambda_star(f, lambda);
        worst = std::max(worst, std::abs(s * f.g(s) - f.G(s) - lambda) / std::max(1.0, lambda));
    }
    const bool pass = std::abs(a - 1.0) <= 1e-10 && std::abs(b - 1.0) <= 1e-10 && worst <= 1e-10;
    return {pass, fmt("p=2: %.15f, p=3: %.15f, worst round-trip defect %.2e over 100 draws", a, b, worst)};
}

// ------------------------------------------------------------------ 3

Outcome oracle_agreement() {
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    const int n = 101;
    const double energy_tol = 3.0 / n, fb_tol = 2.0 / (n - 1);
    double worst_e = 0.0, worst_fb = 0.0;
    int failed = 0;
    for (int k = 0; k < 50; ++k) {
        GFunction f = GFunction::power(1.5 + 2.5 * U(rng));
        if (k % 5 == 3) f = GFunction::power_log(1, 1, 1);
        if (k % 5 == 4) f = GFunction::spliced(1, 2, 1);
        const double a = 2.0 * U(rng), b = U(rng) < 0.4 ? 0.0 : 2.0 * U(rng);
        const double L = 0.5 + 1.5 * U(rng), lambda = 0.1 + 1.5 * U(rng);
        const auto exact = exact_solve_1d(a, b, L, f, lambda);
        const auto brute = brute_force_1d(a, b, L, f, lambda, n);
        const double de = std::abs(exact.energy - brute.energy);
        const auto fe = exact.free_boundary(), fbb = brute.free_boundary();
        double dfb = fe.size() == fbb.size() ? 0.0 : INFINITY;
        for (std::size_t i = 0; i < fe.size() && i < fbb.size(); ++i) dfb = std::max(dfb, std::abs(fe[i] - fbb[i]));
        worst_e = std::max(worst_e, de);
        worst_fb = std::max(worst_fb, dfb);
        if (de > energy_tol || dfb > fb_tol) ++failed;
    }
    return {failed == 0, fmt("50 instances, worst energy gap %.2e (tol %.2e), worst FB gap %.2e (tol %.2e), %d outside",
                             worst_e, energy_tol, worst_fb, fb_tol, failed)};
}

// ------------------------------------------------------------------ 4

struct StripLevel {
    double h = 0.0;
    double sup = 0.0;
    double fb = 0.0;
    double grad = 0.0;
    double seconds = 0.0;
    bool solver_ok = false;
};

// Free-boundary abscissa per grid row: the zero of the linear continuation of the
// last two positive nodes.
double row_fb_error(const Field& u, double x_exact) {
    const Grid& g = u.grid();
    double worst = 0.0;
    for (int j = 1; j + 1 < g.ny(); ++j) {
        int last = -1;
        for (int i = 0; i < g.nx(); ++i) {
            if (u[g.index(i, j)] > 0.0) last = i;
        }
        if (last < 1 || last + 1 >= g.nx()) return INFINITY;
        const double ul = u[g.index(last, j)], up = u[g.index(last - 1, j)];
        const double slope = (up - ul) / g.hx();
        const double x = slope > 0.0 ? g.x(last) + ul / slope : g.x(last) + 0.5 * g.hx();
        worst = std::max(worst, std::abs(x - x_exact));
    }
    return worst;
}

std::optional<Field> strip_p2_finest;

Outcome strip_convergence() {
    struct Case {
        double p, lambda;
    };
    bool pass = true;
    std::string detail;
    for (const Case c : {Case{2.0, 0.5}, Case{3.0, 2.0 / 3.0}}) {
        const GFunction f = GFunction::power(c.p);
        const double ls = lambda_star(f, c.lambda);
        std::vector<StripLevel> levels;
        for (int n : {32, 64, 128}) {
            const auto start = Clock::now();
            auto grid = std::make_shared<const Grid>(
                Grid::rectangle(2 * n + 1, n + 1, 2.0, 1.0).with_dirichlet([](double x, double) { return std::max(0.0, 1.0 - x); }));
            const SolveResult res = minimize(grid, f, c.lambda);
            StripLevel lv;
            lv.h = grid->h();
            for (std::size_t i = 0; i < res.u.size(); ++i) {
                lv.sup = std::max(lv.sup, std::abs(res.u[i] - std::max(0.0, 1.0 - grid->node_x(i))));
            }
            lv.fb = row_fb_error(res.u, 1.0 / ls);
            lv.grad = std::abs(fb_gradient_stats(res.u, f, c.lambda).mean - ls);
            lv.solver_ok = res.diagnostics.residual_ok;
            for (const auto& s : res.diagnostics.stages) lv.solver_ok = lv.solver_ok && !s.aborted;
            lv.seconds = seconds_since(start);
            levels.push_back(lv);
            if (c.p == 2.0 && n == 128) strip_p2_finest = res.u;
        }
        std::vector<double> sup, fb, grad;
        for (const auto& lv : levels) {
            sup.push_back(lv.sup);
            fb.push_back(lv.fb);
            grad.push_back(lv.grad);
        }
        const StripLevel& fine = levels.back();
        const bool ok = decreasing(sup) && decreasing(fb) && decreasing(grad) && fine.sup <= 0.05 &&
                        fine.fb <= 2.0 * fine.h && fine.grad <= 0.1 * ls;
        pass = pass && ok;
        for (const auto& lv : levels) {
            std::printf("    p=%g h=1/%-3d sup %.2e  fb %.2e  |grad-1| %.2e  solver %s  %.1f s\n", c.p,
                        static_cast<int>(std::lround(1.0 / lv.h)), lv.sup, lv.fb, lv.grad, lv.solver_ok ? "ok" : "fail",
                        lv.seconds);
        }
        detail += fmt("p=%g: h=1/128 sup %.1e fb %.1e grad %.1e, monotone %s; ", c.p, fine.sup, fine.fb, fine.grad,
                      decreasing(sup) && decreasing(fb) && decreasing(grad) ? "yes" : "no");
    }
    detail += fmt("errors <= %.0e count as converged", kErrorFloor);
    return {pass, detail};
}

// ------------------------------------------------------------------ 5

// Mean of (<z, e>^-)^gamma over the unit ball in dimension 1 or 2, by quadrature.
double half_space_moment(int dim, double gamma) {
    const int n = 2000;
    double acc = 0.0;
    if (dim == 1) {
        for (int i = 0; i < n; ++i) acc += std::pow((i + 0.5) / n, gamma) / n;  // over [0, 1], half of [-1, 1]
        return acc / 2.0;
    }
    for (int i = 0; i < n; ++i) {
        const double rho = (i + 0.5) / n;
        for (int k = 0; k < n; ++k) {
            const double c = std::cos(2.0 * std::numbers::pi * (k + 0.5) / n);
            if (c < 0.0) acc += std::pow(-rho * c, gamma) * rho;
        }
    }
    return acc * (1.0 / n) * (2.0 * std::numbers::pi / n) / std::numbers::pi;
}

Outcome plane_exactness() {
    const GFunction f = GFunction::power(3);
    const double lambda = 1.0, ls = lambda_star(f, lambda);
    const double angle = 0.3;
    const Point2 x0{0.5, 0.5}, nu{std::cos(angle), std::sin(angle)};
    auto grid = std::make_shared<const Grid>(Grid::rectangle(129, 129, 1.0, 1.0));
    const double h = grid->h();
    const Field u = Field::sample(
        grid, [&](double x, double y) { return ls * std::max(0.0, -((x - x0[0]) * nu[0] + (y - x0[1]) * nu[1])); });
    const auto radii = default_radii(*grid, 0.25);

    const auto dens = verify_density(u, radii);
    const bool dens_ok = dens.conclusive && std::abs(dens.min - 0.5) <= 0.05 && std::abs(dens.max - 0.5) <= 0.05;

    const std::vector<double> prad{0.0625, 0.125, 0.25};
    const auto per = perimeter_growth(u, x0, prad);
    const bool per_ok = per.conclusive && std::abs(per.min - 2.0) <= 0.1 && std::abs(per.max - 2.0) <= 0.1;

    const double qu = estimate_qu(u, f, x0, 0.125) / f.g(ls);
    const bool qu_ok = std::abs(qu - 1.0) <= 0.05;

    double sig = 0.0;
    bool flat_ok = true;
    for (double rho : prad) {
        const auto fl = flatness_measure(u, x0, rho, ls);
        flat_ok = flat_ok && fl.conclusive && fl.sigma_plus <= 2.0 * h / rho && fl.sigma_minus <= 2.0 * h / rho;
        sig = std::max({sig, fl.sigma_plus * rho / h, fl.sigma_minus * rho / h});
    }

    // Q in the plane against the disc average, and on a line against the interval average.
    const double q2 = ls * std::sqrt(half_space_moment(2, 2.0));
    const auto nd = verify_nondegeneracy(u, radii, 2.0);
    const double q2_dev = std::max(std::abs(nd.min / q2 - 1.0), std::abs(nd.max / q2 - 1.0));
    auto line = std::make_shared<const Grid>(Grid::rectangle(257, 1, 2.0, 0.0));
    const Field w = Field::sample(line, [&](double x, double) { return ls * std::max(0.0, 1.0 - x); });
    const double q1 = ls * std::sqrt(half_space_moment(1, 2.0));
    const auto nd1 = verify_nondegeneracy(w, {0.0625, 0.125, 0.25, 0.5}, 2.0);
    const double q1_dev = std::max(std::abs(nd1.min / q1 - 1.0), std::abs(nd1.max / q1 - 1.0));
    const bool q_ok = nd.conclusive && nd1.conclusive && q2_dev <= 0.05 && q1_dev <= 0.05;

    const bool pass = dens_ok && per_ok && qu_ok && flat_ok && q_ok;
    return {pass, fmt("density [%.3f, %.3f], perimeter [%.4f, %.4f], q_u/g(l*) %.4f, max sigma %.2f h/rho, "
                      "Q/l* plane [%.4f, %.4f] vs 1/sqrt8=%.4f, line [%.4f, %.4f] vs 1/sqrt6=%.4f",
                      dens.min, dens.max, per.min, per.max, qu, sig, nd.min / ls, nd.max / ls, q2 / ls, nd1.min / ls,
                      nd1.max / ls, q1 / ls)};
}

// ------------------------------------------------------------------ 6

Outcome comparison_principle() {
    std::mt19937 rng(6);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    const std::vector<GFunction> family{GFunction::power(1.5), GFunction::power(2), GFunction::power(3),
                                        GFunction::power_log(1, 1, 1)};
    auto grid = std::make_shared<const Grid>(Grid::rectangle(17, 17, 1.0, 1.0));
    double worst = -INFINITY;
    for (int k = 0; k < 20; ++k) {
        std::vector<double> low(grid->node_count(), 0.0), high(grid->node_count(), 0.0);
        for (std::size_t i = 0; i < low.size(); ++i) {
            if (!grid->is_boundary(i)) continue;
            low[i] = U(rng);
            high[i] = low[i] + 0.5 * U(rng);
        }
        worst = std::max(worst, comparison_check(grid, family[k % family.size()], low, high).max_violation);
    }
    std::vector<double> low(grid->node_count(), 0.0), high(grid->node_count(), 0.0);
    for (std::size_t i = 0; i < low.size(); ++i) {
        low[i] = grid->is_boundary(i) ? 0.5 * (1.0 + std::sin(3.0 * grid->node_x(i)) * grid->node_y(i)) : 0.0;
        high[i] = low[i] + 1.0;
    }
    const auto t = comparison_check(grid, GFunction::power(3), low, high);
    const double shift_err = std::max(std::abs(t.min_difference - 1.0), std::abs(t.max_difference - 1.0));
    return {worst <= 1e-8 && shift_err <= 1e-8,
            fmt("worst violation %.2e over 20 pairs, translated data difference within %.2e of 1", worst, shift_err)};
}

// ------------------------------------------------------------------ 7

Outcome barrier() {
    struct Case {
        double p;
        int N;
        double r2, r1;
    };
    bool pass = true;
    std::string detail;
    for (const Case c : {Case{2, 2, 0.5, 1}, Case{3, 2, 0.25, 1}}) {
        const GFunction f = GFunction::power(c.p);
        const double mu = suggested_barrier_mu(f, c.N, c.r2, 0.5);
        const auto good = barrier_check(f, 1.0, mu, c.r1, c.r2, c.N, 1000);
        const auto bad = barrier_check(f, 1.0, mu / 10.0, c.r1, c.r2, c.N, 1000);
        pass = pass && good.min_value > 0.0 && bad.min_value < 0.0;
        detail += fmt("p=%g r2=%g: mu=%.3f min Lw %.3e, mu/10 min Lw %.3e; ", c.p, c.r2, mu, good.min_value, bad.min_value);
    }
    return {pass, detail};
}

// ------------------------------------------------------------------ 8

Outcome two_regime() {
    std::mt19937 rng(8);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    auto base = Grid::rectangle(25, 25, 1.0, 1.0);
    double worst = INFINITY;
    bool finite = true;
    for (int k = 0; k < 20; ++k) {
        const GFunction f = GFunction::power(1.5 + 2.0 * U(rng));
        const double a = U(rng), b = U(rng), c = 2.0 * U(rng);
        auto grid = std::make_shared<const Grid>(base.with_dirichlet([&](double x, double y) { return a + b * x * y + c * x * x; }));
        Field u(grid);
        for (std::size_t i = 0; i < u.size(); ++i) u[i] = grid->is_boundary(i) ? grid->dirichlet()[i] : 2.0 * U(rng);
        const auto region = ball_region(*grid, 0.3 + 0.4 * U(rng), 0.3 + 0.4 * U(rng), 0.15 + 0.15 * U(rng));
        const Field v = harmonic_replacement(u, f, region);
        const auto t = two_regime_terms(u, v, f, region);
        worst = std::min(worst, t.energy_gap);
        finite = finite && std::isfinite(t.near_term) && std::isfinite(t.far_term);
    }
    return {worst >= -1e-9 && finite, fmt("min energy gap %.3e over 20 fields, terms finite %s", worst, finite ? "yes" : "no")};
}

// ------------------------------------------------------------------ 9

Outcome weak_solution() {
    const GFunction f = GFunction::power(2);
    const double lambda = 0.5, ls = lambda_star(f, lambda);
    if (!strip_p2_finest) return {false, "strip minimizer unavailable"};
    VerifyConfig cfg;
    cfg.mode = VerifyMode::Weak;
    cfg.tau = 0.15;
    const auto rep = weak_solution_check(*strip_p2_finest, f, lambda, cfg);
    bool ok = rep.tau_measured <= 0.15;
    for (const char* name : {"pde", "nondegeneracy", "flux", "gradient_bound"}) {
        const auto* c = rep.find(name);
        ok = ok && c && c->pass && c->evaluated;
    }

    auto grid = std::make_shared<const Grid>(Grid::rectangle(129, 129, 1.0, 1.0));
    const Field wrong = Field::sample(grid, [&](double x, double) { return 2.0 * ls * std::max(0.0, 0.5 - x); });
    const auto bad = weak_solution_check(wrong, f, lambda, cfg);
    const bool rejected = !bad.find("gradient_bound")->pass;
    return {ok && rejected,
            fmt("strip h=1/128: residual %.1e, min Q %.3f, q_u/g(l*) %.4f, max|grad| %.6f, tau %.2e; "
                "slope 2l* plane gradient bound %s (max|grad|/l* = %.3f)",
                rep.residual_max, rep.nondegeneracy.min, rep.qu_mean_ratio, rep.fb_gradient.max, rep.tau_measured,
                rejected ? "fails" : "passes", bad.fb_gradient.max / ls)};
}

void timed(int id, const char* title, double budget, const std::function<Outcome()>& fn) {
    const auto start = Clock::now();
    Outcome o = fn();
    const double secs = seconds_since(start);
    if (budget > 0.0 && secs > budget) {
        o.pass = false;
        o.detail += fmt(" (exceeded %.0f s budget)", budget);
    }
    report(id, title, o, secs);
}

}  // namespace

int main() {
    timed(1, "G-function law suite", 10.0, law_suite);
    timed(2, "lambda* closed forms", 1.0, lambda_star_closed_forms);
    timed(3, "1D oracle agreement", 30.0, oracle_agreement);
    timed(4, "2D strip convergence", 300.0, strip_convergence);
    timed(5, "plane verifier exactness", 30.0, plane_exactness);
    timed(6, "comparison principle", 0.0, comparison_principle);
    timed(7, "barrier", 0.0, barrier);
    timed(8, "two-regime sign", 0.0, two_regime);
    timed(9, "weak-solution check", 0.0, weak_solution);
    std::printf("%d of 9 criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
