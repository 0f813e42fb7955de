#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "orliczfb/gfunction.hpp"

namespace orliczfb {

/// Uniform node grid on [0, Lx] x [0, Ly] with boundary data phi0 >= 0.
///
/// In 2D every cell is split along its lower-left to upper-right diagonal into
/// two triangles. With ny == 1 the grid is a chain of nx nodes on [0, Lx] whose
/// elements are the segments between consecutive nodes.
class Grid {
public:
    static Grid rectangle(int nx, int ny, double Lx, double Ly);

    /// Copy of this grid with boundary values phi0(x, y). Interior values are ignored.
    Grid with_dirichlet(const std::function<double(double, double)>& phi0) const;
    /// Copy with boundary values given per node (entries at interior nodes are ignored).
    Grid with_dirichlet_values(std::vector<double> values) const;

    int nx() const { return nx_; }
    int ny() const { return ny_; }
    double hx() const { return hx_; }
    double hy() const { return hy_; }
    double Lx() const { return Lx_; }
    double Ly() const { return Ly_; }
    /// Largest mesh width.
    double h() const;
    bool one_dimensional() const { return ny_ == 1; }

    std::size_t node_count() const { return static_cast<std::size_t>(nx_) * ny_; }
    std::size_t index(int i, int j) const { return static_cast<std::size_t>(j) * nx_ + i; }
    double x(int i) const { return i * hx_; }
    double y(int j) const { return j * hy_; }
    double node_x(std::size_t n) const { return x(static_cast<int>(n % nx_)); }
    double node_y(std::size_t n) const { return y(static_cast<int>(n / nx_)); }

    bool is_boundary(std::size_t n) const { return boundary_[n] != 0; }
    const std::vector<std::uint8_t>& boundary_mask() const { return boundary_; }
    /// phi0 at boundary nodes, 0 elsewhere.
    const std::vector<double>& dirichlet() const { return dirichlet_; }
    double sup_phi0() const { return sup_phi0_; }

    std::size_t element_count() const;
    /// Nodes of element e (the third entry is unused in 1D).
    std::array<std::size_t, 3> element_nodes(std::size_t e) const;
    int nodes_per_element() const { return one_dimensional() ? 2 : 3; }
    double element_area() const;
    /// Constant gradient of the linear interpolant on element e.
    std::array<double, 2> element_gradient(std::size_t e, const std::vector<double>& u) const;
    /// Gradients of the nodal hat functions on element e, in element_nodes order.
    std::array<std::array<double, 2>, 3> hat_gradients(std::size_t e) const;
    /// Sum of |T|/nodes_per_element over the elements containing node n.
    std::vector<double> node_volumes() const;

private:
    Grid() = default;
    int nx_ = 0, ny_ = 0;
    double hx_ = 0.0, hy_ = 0.0, Lx_ = 0.0, Ly_ = 0.0;
    std::vector<std::uint8_t> boundary_;
    std::vector<double> dirichlet_;
    double sup_phi0_ = 0.0;
};

/// Nodal values of a continuous piecewise-linear function on a grid.
class Field {
public:
    explicit Field(std::shared_ptr<const Grid> grid);
    Field(std::shared_ptr<const Grid> grid, std::vector<double> values);

    /// Boundary nodes set to phi0, interior nodes to `interior`.
    static Field from_boundary(std::shared_ptr<const Grid> grid, double interior = 0.0);
    /// Field sampled from u(x, y) at every node.
    static Field sample(std::shared_ptr<const Grid> grid, const std::function<double(double, double)>& u);

    const Grid& grid() const { return *grid_; }
    const std::shared_ptr<const Grid>& grid_ptr() const { return grid_; }
    const std::vector<double>& values() const { return values_; }
    std::vector<double>& values() { return values_; }
    double operator[](std::size_t n) const { return values_[n]; }
    double& operator[](std::size_t n) { return values_[n]; }
    std::size_t size() const { return values_.size(); }

private:
    std::shared_ptr<const Grid> grid_;
    std::vector<double> values_;
};

enum class StepRule { Armijo, BarzilaiBorwein };

struct SolveOptions {
    /// Strictly decreasing smoothing widths; empty selects the default schedule
    /// 0.25 sup phi0 halved down to max(2h, 1e-3 sup phi0).
    std::vector<double> eps_schedule;
    /// Gradient regularization; non-positive selects 1e-6 times the free-boundary
    /// slope (or times sup phi0 / diameter when lambda = 0).
    double eta = 0.0;
    int max_iters = 5000;
    /// A stage ends when the energy drops by less than energy_tol (relative)
    /// over `stall_window` iterations.
    double energy_tol = 1e-10;
    int stall_window = 50;
    StepRule step_rule = StepRule::BarzilaiBorwein;
    int restarts = 3;
    std::uint64_t seed = 20240917;
    /// Relative amplitude of the nonnegative restart perturbations.
    double perturbation = 0.1;
    /// Nodes with u < zero_threshold * eps_final are set to zero before the final
    /// frozen-support pass. Unset selects tail_zero_level(f, lambda).
    std::optional<double> zero_threshold;
    /// Residual target of the convex (fixed-support) solves, relative to g(scale).
    double residual_tol = 1e-9;
};

struct StageRecord {
    double eps = 0.0;
    /// Index of the stage's first entry in SolveDiagnostics::energy_trace.
    std::size_t trace_offset = 0;
    int iterations = 0;
    double energy = 0.0;
    bool converged = false;
    bool aborted = false;
};

struct SolveDiagnostics {
    /// Energy of the returned field (sharp indicator, eta-regularized G).
    double energy = 0.0;
    double eta = 0.0;
    std::vector<double> eps_schedule;
    /// Stage records of the run that produced the returned field.
    std::vector<StageRecord> stages;
    /// Energies after every accepted step of the selected run.
    std::vector<double> energy_trace;
    /// Sharp energy of every run (index 0 is the unperturbed start).
    std::vector<double> restart_energies;
    int selected_run = 0;
    int zeroed_nodes = 0;
    /// Level below which nodes were set to zero before the final pass.
    double zero_level = 0.0;
    /// max |r_i| over interior nodes with u_i > eps_final after the final pass.
    double residual_max = 0.0;
    bool residual_ok = false;
    std::vector<std::string> messages;
};

struct SolveResult {
    Field u;
    SolveDiagnostics diagnostics;
};

/// Clamped cubic smoothstep: 0 for t <= 0, 3s^2 - 2s^3 with s = t/eps on [0, eps], 1 above.
double smoothstep(double t, double eps);

/// sum_T |T| [G(t_eta) - G(eta) + lambda H_eps(mean_T u)], t_eta = sqrt(|grad u_T|^2 + eta^2).
/// With eps <= 0 the indicator is sharp ([mean > 0]); with eta = 0 this is sum |T| G(|grad u_T|).
double assemble_energy(const Field& u, const GFunction& f, double lambda, double eps, double eta = 0.0);

/// Exact derivative of assemble_energy(u, f, lambda, eps, eta) with respect to the
/// nodal values; zero at boundary nodes. Requires eps > 0.
Field energy_gradient(const Field& u, const GFunction& f, double lambda, double eps, double eta);

/// Default regularization used by minimize().
double default_eta(const Grid& grid, const GFunction& f, double lambda);

/// Fraction theta of eps at which the smoothed one-dimensional profile crosses the
/// free boundary of the sharp problem: the solution of
/// int_theta^1 s*(lambda) / s*(lambda H_1(s)) ds = 1, with s* the free-boundary slope.
/// Below level eps the smoothed profile flattens, so the sharp boundary sits at
/// level theta eps rather than at zero.
double tail_zero_level(const GFunction& f, double lambda);

/// Default smoothing schedule used by minimize().
std::vector<double> default_eps_schedule(const Grid& grid);

/// Approximate minimizer of the free-boundary functional with boundary data phi0.
SolveResult minimize(std::shared_ptr<const Grid> grid, const GFunction& f, double lambda,
                     const SolveOptions& opts = {});

/// Weak g-Laplacian residual per node: sum_T |T| F_eta(|grad u_T|) grad u_T . grad phi_i,
/// divided by the node volume; zero at boundary nodes.
Field g_laplacian_residual(const Field& u, const GFunction& f, double eta);

struct ConvexSolveOptions {
    double eta = 0.0;
    /// Stop when max_i |r_i| <= residual_tol * max(g(scale), tiny), where scale is the
    /// typical gradient magnitude of the data.
    double residual_tol = 1e-10;
    int max_newton = 200;
    int max_cg = 5000;
};

struct ConvexSolveReport {
    double residual_max = 0.0;
    int newton_iterations = 0;
    int cg_iterations = 0;
    bool converged = false;
};

/// Minimizes sum_T |T| G(t_eta(grad v_T)) over v agreeing with u off `free_nodes`
/// (node mask). Throws NumericalError if the residual target is not met.
Field solve_g_harmonic(const Field& u, const GFunction& f, const std::vector<std::uint8_t>& free_nodes,
                       const ConvexSolveOptions& opts = {}, ConvexSolveReport* report = nullptr);

/// The G-harmonic function agreeing with u outside `region` (node mask of interior nodes).
Field harmonic_replacement(const Field& u, const GFunction& f, const std::vector<std::uint8_t>& region,
                           const ConvexSolveOptions& opts = {}, ConvexSolveReport* report = nullptr);

/// Node mask of interior nodes strictly inside the disc of radius r about (cx, cy).
std::vector<std::uint8_t> ball_region(const Grid& grid, double cx, double cy, double r);

struct ComparisonReport {
    /// max_i (u_low - u_high)_i; <= 0 when the comparison principle holds.
    double max_violation = 0.0;
    double min_difference = 0.0;
    double max_difference = 0.0;
    double residual_low = 0.0;
    double residual_high = 0.0;
};

/// Solves the lambda = 0 problem for both boundary data (given as full nodal
/// vectors whose boundary entries are used) and compares the solutions.
ComparisonReport comparison_check(std::shared_ptr<const Grid> grid, const GFunction& f,
                                  const std::vector<double>& phi0_low, const std::vector<double>& phi0_high,
                                  const ConvexSolveOptions& opts = {});

struct TwoRegimeReport {
    /// sum_B [G(|grad u|) - G(|grad v|)]
    double energy_gap = 0.0;
    /// sum over {|grad u - grad v| <= 2|grad u|} of |T| F(|grad u|) |grad u - grad v|^2
    double near_term = 0.0;
    /// sum over the complement of |T| G(|grad u - grad v|)
    double far_term = 0.0;
    int near_elements = 0;
    int far_elements = 0;
    /// energy_gap / (near_term + far_term), or 0 when both terms vanish.
    double ratio = 0.0;
};

/// Compares u with its G-harmonic replacement v on the elements touching `region`.
TwoRegimeReport two_regime_terms(const Field& u, const Field& v, const GFunction& f,
                                 const std::vector<std::uint8_t>& region);

struct BarrierReport {
    double min_value = 0.0;
    double argmin_radius = 0.0;
    /// Smallest sampled radius with L w <= 0, if any.
    std::optional<double> first_failing_radius;
    std::vector<double> radii;
    std::vector<double> values;
};

/// g-Laplacian of w(x) = eps_amp exp(-mu |x|^2) in N dimensions as a function of r = |x|.
double barrier_operator(const GFunction& f, double eps_amp, double mu, int N, double r);

/// Samples barrier_operator at `samples` radii spread over the open interval (r2, r1).
BarrierReport barrier_check(const GFunction& f, double eps_amp, double mu, double r1, double r2, int N,
                            int samples);

/// mu = K / (4 delta r2^2) (1 + margin), K = 2N if g0 <= 1 and 2(g0 - 1) + 2N otherwise.
/// For such mu the bracket (A - 1)(4 mu r^2 - 2) + 4 mu r^2 - 2N, A = t g'/g, stays
/// above 4 mu r^2 delta - K > 0 for r >= r2.
double suggested_barrier_mu(const GFunction& f, int N, double r2, double margin);

}  // namespace orliczfb
