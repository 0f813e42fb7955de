#pragma once

#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace orliczfb {

/// Raised when an argument lies outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Raised when an iterative numerical method fails to reach its tolerance.
class NumericalError : public std::runtime_error {
public:
    NumericalError(const std::string& what, double achieved)
        : std::runtime_error(what), achieved_(achieved) {}

    double achieved() const noexcept { return achieved_; }

private:
    double achieved_;
};

struct QuadratureResult {
    double value = 0.0;
    double error_estimate = 0.0;
    bool converged = true;
    int evaluations = 0;
};

struct QuadratureOptions {
    double abs_tol = 1e-10;
    double rel_tol = 1e-10;
    int max_depth = 60;
};

/// Adaptive Simpson quadrature of `f` over [a, b].
///
/// The tolerance used on each subinterval is max(abs_tol, rel_tol * |I|) scaled
/// by the subinterval's share of [a, b], where |I| is a coarse composite
/// estimate of the integral. Richardson extrapolation is applied on acceptance.
QuadratureResult integrate_simpson(const std::function<double(double)>& f, double a, double b,
                                   const QuadratureOptions& opts = {});

/// Integral of `f` over [0, t] computed via the substitution x = t*s^3, which
/// smooths integrands that behave like x^a (a > -1) at the origin. Throws
/// NumericalError on non-convergence.
double integrate_from_origin(const std::function<double(double)>& f, double t,
                             const QuadratureOptions& opts = {});

/// Values of int_0^{x_i} f for ascending x_i > 0, accumulated segment by
/// segment; the relative accuracy of each entry follows `opts.rel_tol` when f >= 0.
std::vector<double> cumulative_integrals(const std::function<double(double)>& f,
                                         std::span<const double> ascending,
                                         const QuadratureOptions& opts = {});

struct RootOptions {
    double rel_tol = 1e-13;
    double abs_tol = 0.0;
    int max_iter = 400;
};

/// Root of an increasing function `f` on the bracket [lo, hi] (f(lo) <= 0 <= f(hi)).
/// Safeguarded secant/bisection hybrid: a secant (regula falsi, Illinois
/// weighting) step is taken when it lands strictly inside the bracket and
/// shrinks it fast enough, otherwise the bracket is bisected.
double find_root_increasing(const std::function<double(double)>& f, double lo, double hi,
                            const RootOptions& opts = {});

}  // namespace orliczfb
