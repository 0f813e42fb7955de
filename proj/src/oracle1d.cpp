#include "orliczfb/oracle1d.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <utility>

#include "orliczfb/numerics.hpp"

namespace orliczfb {
namespace {

bool better(double energy, double support, double best_energy, double best_support) {
    const double tie = 1e-12 * std::max(1.0, std::abs(best_energy));
    if (energy < best_energy - tie) return true;
    if (energy > best_energy + tie) return false;
    return support > best_support;
}

std::vector<Interval> merge_support(const std::vector<Segment>& segs) {
    std::vector<Interval> out;
    for (const Segment& s : segs) {
        if (s.value_start <= 0.0 && s.value_end <= 0.0) continue;
        if (!out.empty() && out.back().hi >= s.x_start) {
            out.back().hi = s.x_end;
        } else {
            out.push_back({s.x_start, s.x_end});
        }
    }
    return out;
}

Profile1D make_profile(Profile1DShape shape, std::vector<Segment> segs, const GFunction& f, double lambda) {
    Profile1D p;
    p.shape = shape;
    p.segments = std::move(segs);
    p.support = merge_support(p.segments);
    p.energy = profile_energy(p, f, lambda);
    return p;
}

void validate(double a, double b, double L, double lambda) {
    if (!(a >= 0.0) || !(b >= 0.0) || !std::isfinite(a) || !std::isfinite(b)) {
        throw DomainError("1D solve: boundary values must be finite and >= 0");
    }
    if (!(L > 0.0) || !std::isfinite(L)) throw DomainError("1D solve: length must be > 0");
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw DomainError("1D solve: lambda must be >= 0");
}

}  // namespace

const char* to_string(Profile1DShape shape) {
    switch (shape) {
        case Profile1DShape::Zero: return "zero";
        case Profile1DShape::Linear: return "linear";
        case Profile1DShape::LeftWedge: return "left_wedge";
        case Profile1DShape::RightWedge: return "right_wedge";
        case Profile1DShape::TwoWedges: return "two_wedges";
        case Profile1DShape::Discrete: return "discrete";
    }
    return "unknown";
}

double Profile1D::support_measure() const {
    double m = 0.0;
    for (const Interval& i : support) m += i.length();
    return m;
}

double Profile1D::value_at(double x) const {
    for (const Segment& s : segments) {
        if (x >= s.x_start && x <= s.x_end) {
            const double w = s.x_end - s.x_start;
            if (w <= 0.0) return s.value_start;
            const double th = (x - s.x_start) / w;
            return (1.0 - th) * s.value_start + th * s.value_end;
        }
    }
    throw DomainError("Profile1D::value_at: x outside [0, L]");
}

std::vector<double> Profile1D::free_boundary() const {
    std::vector<double> out;
    const double L = length();
    for (const Interval& i : support) {
        if (i.lo > 0.0) out.push_back(i.lo);
        if (i.hi < L) out.push_back(i.hi);
    }
    return out;
}

double profile_energy(const Profile1D& profile, const GFunction& f, double lambda) {
    double e = 0.0;
    for (const Segment& s : profile.segments) {
        const double w = s.x_end - s.x_start;
        if (w <= 0.0) continue;
        e += w * f.G(std::abs(s.value_end - s.value_start) / w);
        if (s.value_start > 0.0 || s.value_end > 0.0) e += lambda * w;
    }
    return e;
}

Profile1D exact_solve_1d(double a, double b, double L, const GFunction& f, double lambda) {
    validate(a, b, L, lambda);
    if (a == 0.0 && b == 0.0) return make_profile(Profile1DShape::Zero, {{0.0, L, 0.0, 0.0}}, f, lambda);

    std::vector<Profile1D> candidates;
    candidates.push_back(make_profile(Profile1DShape::Linear, {{0.0, L, a, b}}, f, lambda));

    const double slope = lambda_star(f, lambda);
    if (slope > 0.0) {
        const double left = a / slope;
        const double right = b / slope;
        if (a > 0.0 && b == 0.0 && left < L) {
            candidates.push_back(
                make_profile(Profile1DShape::LeftWedge, {{0.0, left, a, 0.0}, {left, L, 0.0, 0.0}}, f, lambda));
        }
        if (a == 0.0 && b > 0.0 && right < L) {
            candidates.push_back(make_profile(Profile1DShape::RightWedge,
                                              {{0.0, L - right, 0.0, 0.0}, {L - right, L, 0.0, b}}, f, lambda));
        }
        if (a > 0.0 && b > 0.0 && left < L - right) {
            candidates.push_back(make_profile(
                Profile1DShape::TwoWedges,
                {{0.0, left, a, 0.0}, {left, L - right, 0.0, 0.0}, {L - right, L, 0.0, b}}, f, lambda));
        }
    }

    std::size_t best = 0;
    for (std::size_t i = 1; i < candidates.size(); ++i) {
        if (better(candidates[i].energy, candidates[i].support_measure(), candidates[best].energy,
                   candidates[best].support_measure())) {
            best = i;
        }
    }
    return candidates[best];
}

namespace {

struct DiscreteProblem {
    const GFunction& f;
    double lambda;
    double h;
    int n;

    double energy(const std::vector<double>& u) const {
        double e = 0.0;
        for (int i = 0; i + 1 < n; ++i) {
            e += h * f.G(std::abs(u[i + 1] - u[i]) / h);
            if (u[i] > 0.0 || u[i + 1] > 0.0) e += lambda * h;
        }
        return e;
    }

    double positive_measure(const std::vector<double>& u) const {
        double m = 0.0;
        for (int i = 0; i + 1 < n; ++i) {
            if (u[i] > 0.0 || u[i + 1] > 0.0) m += h;
        }
        return m;
    }

    // Energy and positive measure of pattern(a, b, zero_lo, zero_hi) without building it.
    std::pair<double, double> pattern_cost(double a, double b, int zero_lo, int zero_hi) const {
        double e = 0.0, m = 0.0;
        auto wedge = [&](double top, int edges) {
            if (edges == 0 || top == 0.0) return;
            e += edges * h * (f.G(top / (edges * h)) + lambda);
            m += edges * h;
        };
        wedge(a, zero_lo);
        wedge(b, n - 1 - zero_hi);
        return {e, m};
    }

    // Exact discrete minimizer for a fixed zero-node pattern: linear on each
    // positive component (Jensen), zero in between.
    std::vector<double> pattern(double a, double b, int zero_lo, int zero_hi) const {
        std::vector<double> u(static_cast<std::size_t>(n), 0.0);
        for (int k = 0; k < zero_lo; ++k) u[k] = a * (zero_lo - k) / zero_lo;
        const int right = n - 1 - zero_hi;
        for (int k = zero_hi + 1; k < n; ++k) u[k] = b * (k - zero_hi) / right;
        return u;
    }
};

// Cubic Hermite table of G on [0, tmax] with the exact derivative g.
class PrimitiveTable {
public:
    PrimitiveTable(const GFunction& f, double tmax, int cells) : f_(f), dt_(tmax / cells) {
        std::vector<double> ts(static_cast<std::size_t>(cells) + 1);
        for (int k = 0; k <= cells; ++k) ts[k] = k * dt_;
        G_ = eval_G_many(f, ts);
        g_.resize(ts.size());
        for (std::size_t k = 0; k < ts.size(); ++k) g_[k] = f.g(ts[k]);
    }

    double operator()(double t) const {
        const double x = t / dt_;
        const auto k = static_cast<std::size_t>(x);
        if (k + 1 >= G_.size()) return f_.G(t);
        const double s = x - static_cast<double>(k), s2 = s * s, s3 = s2 * s;
        return (2 * s3 - 3 * s2 + 1) * G_[k] + (s3 - 2 * s2 + s) * dt_ * g_[k] + (-2 * s3 + 3 * s2) * G_[k + 1] +
               (s3 - s2) * dt_ * g_[k + 1];
    }

private:
    const GFunction& f_;
    double dt_;
    std::vector<double> G_, g_;
};

// Projected gradient descent on the smoothed discrete energy; returns the zero pattern found.
std::vector<double> smoothed_descent(const DiscreteProblem& pb, std::vector<double> u, double a, double b,
                                     int iters) {
    const int n = pb.n;
    const double top = std::max(a, b);
    const double eps = 0.05 * top;
    std::vector<double> grad(static_cast<std::size_t>(n));
    const PrimitiveTable G(pb.f, top / pb.h, 4096);
    auto smooth_energy = [&](const std::vector<double>& v) {
        double e = 0.0;
        for (int i = 0; i + 1 < n; ++i) {
            e += pb.h * G(std::abs(v[i + 1] - v[i]) / pb.h);
            const double s = std::clamp(0.5 * (v[i] + v[i + 1]) / eps, 0.0, 1.0);
            e += pb.lambda * pb.h * s * s * (3.0 - 2.0 * s);
        }
        return e;
    };
    double step = pb.h;
    double e = smooth_energy(u);
    for (int it = 0; it < iters; ++it) {
        std::fill(grad.begin(), grad.end(), 0.0);
        for (int i = 0; i + 1 < n; ++i) {
            const double d = (u[i + 1] - u[i]) / pb.h;
            const double flux = (d == 0.0) ? 0.0 : std::copysign(pb.f.g(std::abs(d)), d);
            grad[i] -= flux;
            grad[i + 1] += flux;
            const double s = 0.5 * (u[i] + u[i + 1]) / eps;
            if (s > 0.0 && s < 1.0) {
                const double dh = pb.lambda * pb.h * 6.0 * s * (1.0 - s) / eps * 0.5;
                grad[i] += dh;
                grad[i + 1] += dh;
            }
        }
        grad.front() = 0.0;
        grad.back() = 0.0;
        bool accepted = false;
        for (int bt = 0; bt < 30 && !accepted; ++bt) {
            std::vector<double> trial = u;
            for (int i = 1; i + 1 < n; ++i) trial[i] = std::clamp(u[i] - step * grad[i], 0.0, top);
            const double et = smooth_energy(trial);
            if (et <= e) {
                u.swap(trial);
                e = et;
                accepted = true;
                step *= 1.5;
            } else {
                step *= 0.5;
            }
        }
        if (!accepted) break;
    }
    return u;
}

}  // namespace

Profile1D brute_force_1d(double a, double b, double L, const GFunction& f, double lambda, int n,
                         const BruteForceOptions& opts) {
    validate(a, b, L, lambda);
    if (n < 2) throw DomainError("brute_force_1d: need at least 2 nodes");
    const DiscreteProblem pb{f, lambda, L / (n - 1), n};

    std::vector<double> best_u(static_cast<std::size_t>(n), 0.0);
    best_u.front() = a;
    best_u.back() = b;
    double best_e = std::numeric_limits<double>::infinity();
    double best_m = -1.0;
    auto consider = [&](const std::vector<double>& u) {
        const double e = pb.energy(u);
        const double m = pb.positive_measure(u);
        if (better(e, m, best_e, best_m)) {
            best_u = u;
            best_e = e;
            best_m = m;
        }
    };

    if (a == 0.0 && b == 0.0) {
        consider(std::vector<double>(static_cast<std::size_t>(n), 0.0));
    } else {
        if (a > 0.0 && b > 0.0) {
            std::vector<double> lin(static_cast<std::size_t>(n));
            for (int k = 0; k < n; ++k) lin[k] = a + (b - a) * k / (n - 1);
            consider(lin);
        }
        // exhaustive search over the dead-core node interval [lo, hi]
        const int lo_min = a > 0.0 ? 1 : 0;
        const int hi_max = b > 0.0 ? n - 2 : n - 1;
        for (int lo = lo_min; lo <= hi_max; ++lo) {
            if (a == 0.0 && lo > 0) break;
            for (int hi = lo; hi <= hi_max; ++hi) {
                if (b == 0.0 && hi < n - 1) continue;
                const auto [e, m] = pb.pattern_cost(a, b, lo, hi);
                if (better(e, m, best_e, best_m)) consider(pb.pattern(a, b, lo, hi));
            }
        }
        // two-sided patterns with a == 0 or b == 0 are covered above; for
        // a, b > 0 every (lo, hi) with lo <= hi is enumerated.

        std::mt19937_64 rng(opts.seed);
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        const double top = std::max(a, b);
        for (int s = 0; s < opts.starts; ++s) {
            std::vector<double> u0(static_cast<std::size_t>(n));
            for (int k = 0; k < n; ++k) u0[k] = top * unit(rng);
            u0.front() = a;
            u0.back() = b;
            std::vector<double> u = smoothed_descent(pb, u0, a, b, opts.descent_iters);
            // snap to the nearest admissible pattern: first and last zero node
            int first_zero = -1, last_zero = -1;
            for (int k = 0; k < n; ++k) {
                if (u[k] < 1e-3 * top) {
                    if (first_zero < 0) first_zero = k;
                    last_zero = k;
                }
            }
            if (first_zero >= 0) consider(pb.pattern(a, b, a > 0.0 ? std::max(first_zero, 1) : 0,
                                                     b > 0.0 ? std::min(last_zero, n - 2) : n - 1));
            consider(u);
        }
    }

    std::vector<Segment> segs;
    segs.reserve(static_cast<std::size_t>(n - 1));
    for (int k = 0; k + 1 < n; ++k) segs.push_back({k * pb.h, (k + 1) * pb.h, best_u[k], best_u[k + 1]});
    segs.back().x_end = L;
    Profile1D p;
    p.shape = Profile1DShape::Discrete;
    p.segments = std::move(segs);
    p.support = merge_support(p.segments);
    p.energy = best_e;
    return p;
}

}  // namespace orliczfb
