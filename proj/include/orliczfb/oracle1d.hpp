#pragma once

#include <cstdint>
#include <vector>

#include "orliczfb/gfunction.hpp"

namespace orliczfb {

struct Segment {
    double x_start = 0.0;
    double x_end = 0.0;
    double value_start = 0.0;
    double value_end = 0.0;
};

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
    double length() const { return hi - lo; }
};

enum class Profile1DShape { Zero, Linear, LeftWedge, RightWedge, TwoWedges, Discrete };

const char* to_string(Profile1DShape shape);

/// A continuous, piecewise-linear, nonnegative profile on [0, L].
struct Profile1D {
    Profile1DShape shape = Profile1DShape::Zero;
    std::vector<Segment> segments;
    /// Maximal intervals where u > 0.
    std::vector<Interval> support;
    double energy = 0.0;

    double length() const { return segments.empty() ? 0.0 : segments.back().x_end; }
    double support_measure() const;
    double value_at(double x) const;
    /// Interior points of the boundary of {u > 0} (domain ends excluded).
    std::vector<double> free_boundary() const;
};

/// int_0^L G(|u'|) + lambda |{u > 0}| for a piecewise-linear profile.
double profile_energy(const Profile1D& profile, const GFunction& f, double lambda);

/// Global minimizer of the one-dimensional functional with u(0) = a, u(L) = b,
/// chosen among the finitely many admissible structures (linear interpolant,
/// one or two wedges of slope lambda* bounding a dead core, zero). Ties go to
/// the larger support.
Profile1D exact_solve_1d(double a, double b, double L, const GFunction& f, double lambda);

struct BruteForceOptions {
    int starts = 4;
    int descent_iters = 400;
    std::uint64_t seed = 12345;
};

/// Minimizer of the discrete energy sum_e h G(|du/h|) + lambda h [u > 0 on e]
/// over nodal values on n uniform nodes: exhaustive search over the dead-core
/// node interval combined with projected descent from random starts.
Profile1D brute_force_1d(double a, double b, double L, const GFunction& f, double lambda, int n,
                         const BruteForceOptions& opts = {});

}  // namespace orliczfb
