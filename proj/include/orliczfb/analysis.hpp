#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "orliczfb/gfunction.hpp"
#include "orliczfb/solver.hpp"

namespace orliczfb {

using Point2 = std::array<double, 2>;

/// Discrete boundary of {u > 0}: one point per grid edge joining a positive node
/// to a zero node, placed where u extrapolated linearly from the positive side
/// vanishes (the edge midpoint when no gradient is available).
struct FreeBoundarySet {
    struct Point {
        Point2 x{};
        std::size_t positive_node = 0;
        std::size_t zero_node = 0;
        /// Unit normal pointing from {u > 0} into {u = 0}; zero when the local
        /// fit is ill-conditioned.
        Point2 normal{};
        bool reduced = false;
    };
    /// Interface piece inside an element with mixed signs: the segment joining the
    /// points on its two mixed edges.
    struct Piece {
        Point2 a{}, b{};
    };

    std::vector<Point> points;
    std::vector<Piece> pieces;
    double h = 0.0;
    bool one_dimensional = false;

    bool empty() const { return points.empty(); }
    std::size_t size() const { return points.size(); }
    /// Length of the interface inside the closed disc B_r(c) (in 1D: the number of points).
    double length_in_ball(const Point2& c, double r) const;
};

/// Interface points with least-squares normals fitted over a radius of
/// `normal_radius` mesh widths. Deterministic in the nodal values.
FreeBoundarySet extract_free_boundary(const Field& u, double normal_radius = 3.0);

struct Box {
    double x0 = -1e300, x1 = 1e300, y0 = -1e300, y1 = 1e300;
};

/// max |grad u_T| over elements whose nodes all lie in `subdomain`.
double measure_lipschitz(const Field& u, const Box& subdomain = {});

/// Per-radius summary of a quantity sampled over free-boundary points.
struct RadiusStats {
    double r = 0.0;
    double min = 0.0;
    double max = 0.0;
    double mean = 0.0;
    int samples = 0;
};

struct BallReport {
    std::vector<RadiusStats> per_radius;
    double min = 0.0;
    double max = 0.0;
    /// False when no free-boundary point admitted any radius.
    bool conclusive = false;
    bool pass = false;
};

/// Geometric radii 4h, 8h, ... not exceeding max_radius.
std::vector<double> default_radii(const Grid& grid, double max_radius);

/// Q(x, r) = (1/r) (mean over B_r(x) of u^gamma)^(1/gamma) at free-boundary points x,
/// for radii r >= 4h with B_{2r}(x) inside the domain. Ball averages weight each node
/// by the part of its dual cell inside the ball. Passes iff c_min <= min and max <= C_max.
BallReport verify_nondegeneracy(const Field& u, const std::vector<double>& radii, double gamma = 2.0,
                                double c_min = 0.05, double C_max = 10.0);

enum class VerifyMode { Minimizer, Weak };

/// |B_r(x) ∩ {u > 0}| / |B_r(x)| at free-boundary points. Passes iff all fractions are
/// >= c and, in minimizer mode, <= 1 - c.
BallReport verify_density(const Field& u, const std::vector<double>& radii, double c = 0.05,
                          VerifyMode mode = VerifyMode::Minimizer);

struct GradientStats {
    double mean = 0.0;
    double max = 0.0;
    double min = 0.0;
    int elements = 0;
    double lambda_star = 0.0;
    double collar = 0.0;
    /// max / lambda_star - 1 and 1 - mean / lambda_star.
    double excess_max = 0.0;
    double deficit_mean = 0.0;
    bool pass = false;
};

/// |grad u_T| over elements with all nodes positive whose centroid lies within
/// `collar_widths` mesh widths of the free boundary. Passes iff
/// max <= lambda*(1 + tau) and mean >= lambda*(1 - tau). Empty free boundary gives
/// an empty, passing report.
GradientStats fb_gradient_stats(const Field& u, const GFunction& f, double lambda, double tau = 0.15,
                                double collar_widths = 2.0);

/// Outward flux of F(|grad u|) grad u through the circle of radius r about x0,
/// restricted to {u > 0}, divided by the interface length inside the disc.
/// Throws DomainError if r < 4h, the disc leaves the domain, or contains no interface.
double estimate_qu(const Field& u, const GFunction& f, const Point2& x0, double r);

/// Interface length inside B_r(x0) divided by r^(N-1); passes iff every ratio is in [c, C].
BallReport perimeter_growth(const Field& u, const Point2& x0, const std::vector<double>& radii, double c = 0.5,
                            double C = 8.0);

/// v(z) = u(x0 + rho z) / rho on an m x m grid covering [-1, 1]^2 (node (i, j) sits at
/// z = (-1 + 2i/(m-1), -1 + 2j/(m-1))), bilinear in each grid cell. Sample points
/// outside the domain use the nearest domain point.
Field blow_up(const Field& u, const Point2& x0, double rho, int m);

struct Flatness {
    double sigma_plus = 1.0;
    double sigma_minus = 1.0;
    Point2 nu{};
    bool conclusive = false;
};

/// Flatness of u in B_rho(x0) with respect to the fitted interface normal nu:
/// sigma_plus is the least s with u = 0 on {<x - x0, nu> >= s rho}, sigma_minus the
/// least s with u >= -lambda_star (<x - x0, nu> + s rho) on {<x - x0, nu> <= -s rho};
/// both clamped to [0, 1].
Flatness flatness_measure(const Field& u, const Point2& x0, double rho, double lambda_star);

struct VerifyConfig {
    VerifyMode mode = VerifyMode::Minimizer;
    double gamma = 2.0;
    double c_min = 0.05;
    double C_max = 10.0;
    double density_c = 0.05;
    double tau = 0.15;
    /// Residual bound relative to g(lambda*) on nodes whose whole star is positive.
    double residual_tol = 1e-6;
    double perimeter_c = 0.5;
    double perimeter_C = 8.0;
    /// Radii for the ball-based checks; empty selects default_radii(grid, max_radius).
    std::vector<double> radii;
    double max_radius = 0.25;
    /// Radius of the flux circle; non-positive selects 8h, or 4h when no
    /// interface point admits 8h.
    double qu_radius = 0.0;
    /// Flatness radii; empty selects the ball radii.
    std::vector<double> flatness_radii;
};

struct ConditionResult {
    std::string name;
    bool pass = false;
    bool evaluated = false;
    double value = 0.0;
    std::string detail;
};

/// Everything measured about a candidate solution.
struct PropertyReport {
    double lambda = 0.0;
    double lambda_star = 0.0;
    double g_lambda_star = 0.0;
    double gamma = 2.0;
    std::size_t fb_points = 0;
    double lipschitz_max = 0.0;
    double residual_max = 0.0;
    BallReport density;
    BallReport nondegeneracy;
    GradientStats fb_gradient;
    /// q_u estimates divided by g(lambda*), one per admissible free-boundary point.
    std::vector<double> qu_ratios;
    double qu_mean_ratio = 0.0;
    double qu_radius = 0.0;
    BallReport perimeter;
    /// (rho, sigma_plus, sigma_minus) at the free-boundary point closest to the
    /// interface centroid.
    std::vector<std::array<double, 3>> flatness;
    /// lim sup u / dist to an interior zero ball touching the interface (weak solutions II),
    /// as the largest ratio over nearby positive nodes, minimized over touching points.
    std::optional<double> zero_ball_growth;
    /// Measured tau: max of |q_u / g(lambda*) - 1| (mean) and the fb-gradient excess.
    double tau_measured = 0.0;
    std::vector<ConditionResult> conditions;
    bool pass = false;

    const ConditionResult* find(const std::string& name) const;
};

/// Checks the defining conditions of a weak solution: g-harmonic in {u > 0}
/// ("pde"), two-sided nondegeneracy ("nondegeneracy"), flux density q_u = g(lambda*)
/// ("flux"), and the gradient bound lim sup |grad u| <= lambda* ("gradient_bound").
/// Density, perimeter, flatness and the zero-ball growth are measured and reported.
PropertyReport weak_solution_check(const Field& u, const GFunction& f, double lambda, const VerifyConfig& cfg = {});

}  // namespace orliczfb
