#include "orliczfb/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace orliczfb {
namespace {

struct SimpsonState {
    const std::function<double(double)>& f;
    int max_depth;
    int evaluations = 0;
    bool converged = true;
    double error = 0.0;

    double eval(double x) {
        ++evaluations;
        return f(x);
    }

    double recurse(double a, double b, double fa, double fm, double fb, double whole, double tol,
                   int depth) {
        const double m = 0.5 * (a + b);
        const double lm = 0.5 * (a + m);
        const double rm = 0.5 * (m + b);
        const double flm = eval(lm);
        const double frm = eval(rm);
        const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        const double diff = left + right - whole;
        const double rounding = 64.0 * std::numeric_limits<double>::epsilon() * (std::abs(left) + std::abs(right));
        const double accept = std::max(15.0 * tol, rounding);
        if (std::abs(diff) <= accept || depth >= max_depth || !(m > a && b > m)) {
            if (std::abs(diff) > accept) converged = false;
            error += std::abs(diff) / 15.0;
            return left + right + diff / 15.0;
        }
        return recurse(a, m, fa, flm, fm, left, 0.5 * tol, depth + 1) +
               recurse(m, b, fm, frm, fb, right, 0.5 * tol, depth + 1);
    }
};

}  // namespace

QuadratureResult integrate_simpson(const std::function<double(double)>& f, double a, double b,
                                   const QuadratureOptions& opts) {
    QuadratureResult out;
    if (a == b) return out;

    constexpr int kPanels = 16;
    SimpsonState st{f, opts.max_depth};
    const double width = (b - a) / kPanels;
    double nodes[2 * kPanels + 1];
    for (int i = 0; i <= 2 * kPanels; ++i) {
        const double x = (i == 2 * kPanels) ? b : a + 0.5 * width * i;
        nodes[i] = st.eval(x);
    }
    double coarse = 0.0;
    double panel_est[kPanels];
    for (int p = 0; p < kPanels; ++p) {
        panel_est[p] = width / 6.0 * (nodes[2 * p] + 4.0 * nodes[2 * p + 1] + nodes[2 * p + 2]);
        coarse += panel_est[p];
    }
    if (!std::isfinite(coarse)) {
        throw NumericalError("quadrature: non-finite integrand", std::numeric_limits<double>::infinity());
    }
    const double tol = std::max(opts.abs_tol, opts.rel_tol * std::abs(coarse)) / kPanels;

    double total = 0.0;
    for (int p = 0; p < kPanels; ++p) {
        const double pa = a + width * p;
        const double pb = (p == kPanels - 1) ? b : pa + width;
        total += st.recurse(pa, pb, nodes[2 * p], nodes[2 * p + 1], nodes[2 * p + 2], panel_est[p], tol, 0);
    }
    out.value = total;
    out.error_estimate = st.error;
    out.converged = st.converged;
    out.evaluations = st.evaluations;
    return out;
}

double integrate_from_origin(const std::function<double(double)>& f, double t,
                             const QuadratureOptions& opts) {
    if (t == 0.0) return 0.0;
    // x = t s^3, dx = 3 t s^2 ds
    auto integrand = [&](double s) {
        if (s == 0.0) return 0.0;
        return f(t * s * s * s) * 3.0 * t * s * s;
    };
    QuadratureOptions scaled = opts;
    const QuadratureResult r = integrate_simpson(integrand, 0.0, 1.0, scaled);
    if (!r.converged) {
        throw NumericalError("quadrature did not converge on [0, " + std::to_string(t) + "]",
                             r.error_estimate);
    }
    return r.value;
}

std::vector<double> cumulative_integrals(const std::function<double(double)>& f,
                                         std::span<const double> ascending,
                                         const QuadratureOptions& opts) {
    std::vector<double> out(ascending.size());
    double acc = 0.0;
    double prev = 0.0;
    for (std::size_t i = 0; i < ascending.size(); ++i) {
        const double x = ascending[i];
        if (x < prev) throw DomainError("cumulative_integrals: points must be ascending");
        if (i == 0) {
            acc = integrate_from_origin(f, x, opts);
        } else if (x > prev) {
            // accuracy relative to the running total, not to the (possibly tiny) segment
            QuadratureOptions seg = opts;
            seg.abs_tol = std::max(opts.abs_tol, 1e-3 * opts.rel_tol * std::abs(acc));
            const QuadratureResult r = integrate_simpson(f, prev, x, seg);
            if (!r.converged) throw NumericalError("cumulative quadrature did not converge", r.error_estimate);
            acc += r.value;
        }
        out[i] = acc;
        prev = x;
    }
    return out;
}

double find_root_increasing(const std::function<double(double)>& f, double lo, double hi,
                            const RootOptions& opts) {
    double flo = f(lo);
    double fhi = f(hi);
    if (flo == 0.0) return lo;
    if (fhi == 0.0) return hi;
    if (!(flo < 0.0 && fhi > 0.0)) {
        throw NumericalError("root bracket does not straddle zero", std::abs(hi - lo));
    }

    int side = 0;  // -1: lo moved last step, +1: hi moved last step
    double width_two_ago = hi - lo;
    double width_one_ago = hi - lo;
    for (int it = 0; it < opts.max_iter; ++it) {
        const double width = hi - lo;
        const double scale = std::max(std::abs(lo), std::abs(hi));
        if (width <= std::max(opts.abs_tol, opts.rel_tol * scale)) break;

        double x = lo - flo * (hi - lo) / (fhi - flo);
        const bool stalled = width > 0.5 * width_two_ago;
        if (!(x > lo && x < hi) || stalled) x = 0.5 * (lo + hi);
        if (!(x > lo && x < hi)) break;  // bracket below floating-point resolution

        const double fx = f(x);
        width_two_ago = width_one_ago;
        if (fx == 0.0) return x;
        if (fx < 0.0) {
            lo = x;
            flo = fx;
            if (side == -1) fhi *= 0.5;
            side = -1;
        } else {
            hi = x;
            fhi = fx;
            if (side == 1) flo *= 0.5;
            side = 1;
        }
        width_one_ago = hi - lo;
    }
    return (std::abs(flo) < std::abs(fhi)) ? lo : hi;
}

}  // namespace orliczfb
