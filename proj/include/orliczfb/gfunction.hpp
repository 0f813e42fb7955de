#pragma once

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace orliczfb {

namespace detail {
class GNode;
}

enum class Family { Power, PowerLog, Spliced, Sum, Product, Compose };

/// The derivative g = G' of an N-function G, together with certified bounds
/// delta <= t g'(t) / g(t) <= g0 for all t > 0.
///
/// Values are immutable and cheap to copy (shared structure), so one instance
/// may be shared freely between threads. Composite families are built from
/// other GFunction values.
class GFunction {
public:
    /// g(t) = t^(p-1), p > 1.
    static GFunction power(double p);
    /// g(t) = t^a log(b t + c), a, b > 0, c >= 1.
    static GFunction power_log(double a, double b, double c);
    /// C^1 splice: c1 t^a1 below s, c2 t^a2 + d above s, with c2 and d fixed by
    /// matching value and slope at s.
    static GFunction spliced(double a1, double a2, double s, double c1 = 1.0);
    /// Positive linear combination sum_i w_i g_i.
    static GFunction sum(std::vector<std::pair<double, GFunction>> terms);
    /// Pointwise product g_1 g_2.
    static GFunction product(GFunction first, GFunction second);
    /// Composition outer(inner(t)).
    static GFunction compose(GFunction outer, GFunction inner);

    /// Parses the textual form produced by describe(), e.g.
    /// "sum(1:power(2), 0.5:powerlog(1,1,1))". Throws DomainError.
    static GFunction parse(const std::string& text);

    Family family() const;
    double delta() const;
    double g0() const;

    /// g(t); throws DomainError for negative or non-finite t.
    double g(double t) const;
    /// g'(t) for t > 0.
    double dg(double t) const;
    /// G(t) = int_0^t g; closed form where available, adaptive quadrature otherwise.
    double G(double t) const;
    /// F(t) = g(t) / t, the flux coefficient of the g-Laplacian.
    double flux_coefficient(double t) const;

    /// True when G is evaluated in closed form (no quadrature).
    bool has_closed_form_primitive() const;

    std::string describe() const;

    /// Internal points where g' may jump (used to split quadrature).
    std::vector<double> breakpoints() const;

private:
    explicit GFunction(std::shared_ptr<const detail::GNode> node);
    std::shared_ptr<const detail::GNode> node_;
};

double eval_g(const GFunction& f, double t);
double eval_G(const GFunction& f, double t);

/// G at many arguments at once; equivalent to calling eval_G per entry but
/// integrates cumulatively over the sorted arguments.
std::vector<double> eval_G_many(const GFunction& f, std::span<const double> ts);

struct ConditionCheck {
    double delta_emp = 0.0;
    double g0_emp = 0.0;
    /// delta <= delta_emp <= g0_emp <= g0 (to a relative 1e-9 slack).
    bool bracketed = false;
    /// First sample where t g'/g was not finite, if any.
    std::optional<double> non_finite_at;
};

/// min/max of t g'(t)/g(t) over n log-spaced samples in [tmin, tmax].
ConditionCheck check_condition(const GFunction& f, double tmin, double tmax, int n);

/// t >= 0 with g(t) = y, to relative tolerance 1e-12.
double g_inverse(const GFunction& f, double y);

/// Young conjugate G~(y) = int_0^y g^{-1}.
double conjugate_Gtilde(const GFunction& f, double y);

/// G~ at many arguments at once (cumulative quadrature over the sorted arguments).
std::vector<double> conjugate_Gtilde_many(const GFunction& f, std::span<const double> ys);

/// G~(g(t)) + G(t) - t g(t); zero up to quadrature error.
double conjugate_identity_defect(const GFunction& f, double t);

/// Phi(s) = s g(s) - G(s), strictly increasing with Phi(0) = 0.
double bernoulli_phi(const GFunction& f, double s);

/// The free-boundary slope: the unique s with s g(s) - G(s) = lambda.
double lambda_star(const GFunction& f, double lambda);

struct InequalityCheck {
    std::string name;
    /// Worst relative slack (rhs - lhs) / max(|lhs|, |rhs|); negative means violated.
    double worst_slack = 0.0;
    /// Sample point (s or a, t or b) where the worst slack occurred.
    double at_first = 0.0;
    double at_second = 0.0;
    long evaluations = 0;
};

struct InequalityReport {
    std::vector<InequalityCheck> checks;
    double worst_slack() const;
    const InequalityCheck* find(const std::string& name) const;
};

/// Evaluates the structural inequalities satisfied by every g obeying the
/// ellipticity condition: scaling bounds for g, G, g^{-1}, G~; the bracket
/// t g/(1+g0) <= G <= t g and its conjugate counterpart; quasi-triangle
/// inequality for G; Young's inequality (plain and epsilon-weighted);
/// G~(g(t)) <= g0 G(t); and the conjugate identity.
///
/// `t_grid` is used for single-argument bounds and pairs (a, b); `s_grid` holds
/// the scaling factors.
InequalityReport inequality_suite(const GFunction& f, std::span<const double> t_grid,
                                  std::span<const double> s_grid);

/// n log-spaced points on [lo, hi].
std::vector<double> log_grid(double lo, double hi, int n);

struct LuxemburgResult {
    double norm = 0.0;
    /// int G(|u|) dmu
    double modular = 0.0;
    /// max{(2(1+g0) I)^(1/(1+delta)), (2(1+g0) I)^(1/(1+g0))} with I the modular.
    double structural_bound = 0.0;
};

/// inf{k > 0 : sum_i mu_i G(|u_i| / k) <= 1} by monotone bisection.
LuxemburgResult luxemburg_norm(const GFunction& f, std::span<const double> values,
                               std::span<const double> measures);

}  // namespace orliczfb
