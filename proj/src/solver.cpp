#include "orliczfb/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <numeric>
#include <random>

#include "orliczfb/numerics.hpp"

namespace orliczfb {

// ---------------------------------------------------------------- Grid

Grid Grid::rectangle(int nx, int ny, double Lx, double Ly) {
    if (nx < 2) throw DomainError("Grid: nx must be >= 2");
    if (ny < 1) throw DomainError("Grid: ny must be >= 1");
    if (!(Lx > 0.0) || !std::isfinite(Lx)) throw DomainError("Grid: Lx must be > 0");
    if (ny > 1 && (!(Ly > 0.0) || !std::isfinite(Ly))) throw DomainError("Grid: Ly must be > 0");
    Grid g;
    g.nx_ = nx;
    g.ny_ = ny;
    g.Lx_ = Lx;
    g.Ly_ = ny > 1 ? Ly : 0.0;
    g.hx_ = Lx / (nx - 1);
    g.hy_ = ny > 1 ? Ly / (ny - 1) : 0.0;
    g.boundary_.assign(g.node_count(), 0);
    g.dirichlet_.assign(g.node_count(), 0.0);
    for (int j = 0; j < ny; ++j) {
        for (int i = 0; i < nx; ++i) {
            const bool edge = i == 0 || i == nx - 1 || (ny > 1 && (j == 0 || j == ny - 1));
            g.boundary_[g.index(i, j)] = edge ? 1 : 0;
        }
    }
    return g;
}

Grid Grid::with_dirichlet(const std::function<double(double, double)>& phi0) const {
    std::vector<double> values(node_count(), 0.0);
    for (std::size_t n = 0; n < node_count(); ++n) {
        if (boundary_[n]) values[n] = phi0(node_x(n), node_y(n));
    }
    return with_dirichlet_values(std::move(values));
}

Grid Grid::with_dirichlet_values(std::vector<double> values) const {
    if (values.size() != node_count()) throw DomainError("Grid: boundary data size mismatch");
    Grid g = *this;
    g.sup_phi0_ = 0.0;
    for (std::size_t n = 0; n < node_count(); ++n) {
        if (!boundary_[n]) {
            values[n] = 0.0;
            continue;
        }
        if (!std::isfinite(values[n]) || values[n] < 0.0) {
            throw DomainError("Grid: boundary data must be finite and >= 0");
        }
        g.sup_phi0_ = std::max(g.sup_phi0_, values[n]);
    }
    g.dirichlet_ = std::move(values);
    return g;
}

double Grid::h() const { return std::max(hx_, hy_); }

std::size_t Grid::element_count() const {
    if (one_dimensional()) return static_cast<std::size_t>(nx_ - 1);
    return 2 * static_cast<std::size_t>(nx_ - 1) * (ny_ - 1);
}

std::array<std::size_t, 3> Grid::element_nodes(std::size_t e) const {
    if (one_dimensional()) return {e, e + 1, e + 1};
    const std::size_t cell = e / 2;
    const int i = static_cast<int>(cell % (nx_ - 1));
    const int j = static_cast<int>(cell / (nx_ - 1));
    if (e % 2 == 0) return {index(i, j), index(i + 1, j), index(i + 1, j + 1)};
    return {index(i, j), index(i + 1, j + 1), index(i, j + 1)};
}

double Grid::element_area() const { return one_dimensional() ? hx_ : 0.5 * hx_ * hy_; }

std::array<std::array<double, 2>, 3> Grid::hat_gradients(std::size_t e) const {
    if (one_dimensional()) return {{{-1.0 / hx_, 0.0}, {1.0 / hx_, 0.0}, {0.0, 0.0}}};
    if (e % 2 == 0) return {{{-1.0 / hx_, 0.0}, {1.0 / hx_, -1.0 / hy_}, {0.0, 1.0 / hy_}}};
    return {{{0.0, -1.0 / hy_}, {1.0 / hx_, 0.0}, {-1.0 / hx_, 1.0 / hy_}}};
}

std::array<double, 2> Grid::element_gradient(std::size_t e, const std::vector<double>& u) const {
    const auto nodes = element_nodes(e);
    const auto b = hat_gradients(e);
    std::array<double, 2> p{0.0, 0.0};
    for (int k = 0; k < nodes_per_element(); ++k) {
        p[0] += b[k][0] * u[nodes[k]];
        p[1] += b[k][1] * u[nodes[k]];
    }
    return p;
}

std::vector<double> Grid::node_volumes() const {
    std::vector<double> vol(node_count(), 0.0);
    const double share = element_area() / nodes_per_element();
    for (std::size_t e = 0; e < element_count(); ++e) {
        const auto nodes = element_nodes(e);
        for (int k = 0; k < nodes_per_element(); ++k) vol[nodes[k]] += share;
    }
    return vol;
}

// ---------------------------------------------------------------- Field

Field::Field(std::shared_ptr<const Grid> grid) : grid_(std::move(grid)) {
    if (!grid_) throw DomainError("Field: null grid");
    values_.assign(grid_->node_count(), 0.0);
}

Field::Field(std::shared_ptr<const Grid> grid, std::vector<double> values)
    : grid_(std::move(grid)), values_(std::move(values)) {
    if (!grid_) throw DomainError("Field: null grid");
    if (values_.size() != grid_->node_count()) throw DomainError("Field: value count does not match grid");
}

Field Field::from_boundary(std::shared_ptr<const Grid> grid, double interior) {
    Field u(grid);
    for (std::size_t n = 0; n < u.size(); ++n) u[n] = grid->is_boundary(n) ? grid->dirichlet()[n] : interior;
    return u;
}

Field Field::sample(std::shared_ptr<const Grid> grid, const std::function<double(double, double)>& fn) {
    Field u(grid);
    for (std::size_t n = 0; n < u.size(); ++n) u[n] = fn(grid->node_x(n), grid->node_y(n));
    return u;
}

// ---------------------------------------------------------------- kernels

namespace {

// Cubic Hermite table of G on a log grid, built once per distinct g.
struct PrimitiveTable {
    static constexpr double kTmin = 1e-12;
    static constexpr double kTmax = 1e8;
    std::vector<double> nodes, G, g;
    double inv_log_ratio = 0.0;
    double low_exponent = 2.0;

    explicit PrimitiveTable(const GFunction& f) {
        const int per_decade = 400;
        const int n = static_cast<int>((std::log10(kTmax) - std::log10(kTmin)) * per_decade) + 1;
        nodes = log_grid(kTmin, kTmax, n);
        G = eval_G_many(f, nodes);
        g.resize(nodes.size());
        for (std::size_t i = 0; i < nodes.size(); ++i) g[i] = f.g(nodes[i]);
        inv_log_ratio = (n - 1) / std::log(kTmax / kTmin);
        low_exponent = nodes[0] * g[0] / G[0];
    }
};

std::shared_ptr<const PrimitiveTable> primitive_table(const GFunction& f) {
    static std::mutex mutex;
    static std::map<std::string, std::shared_ptr<const PrimitiveTable>> cache;
    const std::string key = f.describe();
    {
        std::lock_guard<std::mutex> lock(mutex);
        auto it = cache.find(key);
        if (it != cache.end()) return it->second;
    }
    auto table = std::make_shared<const PrimitiveTable>(f);
    std::lock_guard<std::mutex> lock(mutex);
    if (cache.size() >= 64) cache.clear();
    return cache.emplace(key, table).first->second;
}

// G, g, g' with G tabulated when no closed form exists.
class Law {
public:
    explicit Law(const GFunction& f) : f_(f), closed_(f.has_closed_form_primitive()) {
        if (!closed_) table_ = primitive_table(f);
    }

    double G(double t) const {
        if (t <= 0.0) return 0.0;
        if (closed_) return f_.G(t);
        const PrimitiveTable& tab = *table_;
        if (t < PrimitiveTable::kTmin) return tab.G[0] * std::pow(t / PrimitiveTable::kTmin, tab.low_exponent);
        if (t >= PrimitiveTable::kTmax) return f_.G(t);
        const std::size_t last = tab.nodes.size() - 2;
        std::size_t k = static_cast<std::size_t>(std::log(t / PrimitiveTable::kTmin) * tab.inv_log_ratio);
        k = std::min(k, last);
        while (k > 0 && t < tab.nodes[k]) --k;
        while (k < last && t > tab.nodes[k + 1]) ++k;
        const double t0 = tab.nodes[k], dt = tab.nodes[k + 1] - t0;
        const double s = (t - t0) / dt;
        const double s2 = s * s, s3 = s2 * s;
        return (2 * s3 - 3 * s2 + 1) * tab.G[k] + (s3 - 2 * s2 + s) * dt * tab.g[k] +
               (-2 * s3 + 3 * s2) * tab.G[k + 1] + (s3 - s2) * dt * tab.g[k + 1];
    }
    double g(double t) const { return t <= 0.0 ? f_.g(0.0) : f_.g(t); }
    double dg(double t) const { return f_.dg(t); }

private:
    GFunction f_;
    bool closed_;
    std::shared_ptr<const PrimitiveTable> table_;
};

double smoothstep_derivative(double t, double eps) {
    if (t <= 0.0 || t >= eps) return 0.0;
    const double s = t / eps;
    return 6.0 * s * (1.0 - s) / eps;
}

// Element-wise evaluation of the regularized energy, its gradient and the
// Hessian of the gradient part.
class Kernel {
public:
    Kernel(const Grid& grid, const Law& law, double lambda, double eps, double eta)
        : grid_(grid), law_(law), lambda_(lambda), eps_(eps), eta_(eta), area_(grid.element_area()),
          npe_(grid.nodes_per_element()), G_eta_(law.G(eta)) {
        const std::size_t ne = grid.element_count();
        nodes_.resize(ne);
        for (std::size_t e = 0; e < ne; ++e) nodes_[e] = grid.element_nodes(e);
        hats_[0] = grid.hat_gradients(0);
        hats_[1] = grid.one_dimensional() ? hats_[0] : grid.hat_gradients(1);
    }

    void set_eps(double eps) { eps_ = eps; }
    void set_lambda(double lambda) { lambda_ = lambda; }

    std::array<double, 2> gradient(std::size_t e, const std::vector<double>& u) const {
        const auto& b = hats_[kind(e)];
        const auto& n = nodes_[e];
        std::array<double, 2> p{0.0, 0.0};
        for (int k = 0; k < npe_; ++k) {
            p[0] += b[k][0] * u[n[k]];
            p[1] += b[k][1] * u[n[k]];
        }
        return p;
    }

    double mean(std::size_t e, const std::vector<double>& u) const {
        const auto& n = nodes_[e];
        double m = 0.0;
        for (int k = 0; k < npe_; ++k) m += u[n[k]];
        return m / npe_;
    }

    double indicator(double m) const {
        if (eps_ > 0.0) return smoothstep(m, eps_);
        return m > 0.0 ? 1.0 : 0.0;
    }

    double energy(const std::vector<double>& u) const {
        double total = 0.0;
        for (std::size_t e = 0; e < nodes_.size(); ++e) {
            const auto p = gradient(e, u);
            const double s = std::sqrt(p[0] * p[0] + p[1] * p[1] + eta_ * eta_);
            double local = law_.G(s) - G_eta_;
            if (lambda_ > 0.0) local += lambda_ * indicator(mean(e, u));
            total += local;
        }
        return total * area_;
    }

    // Energy and gradient; gradient entries at boundary nodes are zeroed.
    double energy_gradient(const std::vector<double>& u, std::vector<double>& grad) const {
        grad.assign(u.size(), 0.0);
        double total = 0.0;
        for (std::size_t e = 0; e < nodes_.size(); ++e) {
            const auto& b = hats_[kind(e)];
            const auto& n = nodes_[e];
            const auto p = gradient(e, u);
            const double s = std::sqrt(p[0] * p[0] + p[1] * p[1] + eta_ * eta_);
            total += law_.G(s) - G_eta_;
            const double F = s > 0.0 ? law_.g(s) / s : 0.0;
            double dH = 0.0;
            if (lambda_ > 0.0) {
                const double m = mean(e, u);
                total += lambda_ * indicator(m);
                dH = lambda_ * smoothstep_derivative(m, eps_) / npe_;
            }
            for (int k = 0; k < npe_; ++k) {
                grad[n[k]] += area_ * (F * (b[k][0] * p[0] + b[k][1] * p[1]) + dH);
            }
        }
        for (std::size_t i = 0; i < u.size(); ++i) {
            if (grid_.is_boundary(i)) grad[i] = 0.0;
        }
        return total * area_;
    }

    // Hessian of the gradient energy at u applied to v (masked by `free`), plus its diagonal.
    void hessian(const std::vector<double>& u, const std::vector<std::uint8_t>& free, const std::vector<double>& v,
                 std::vector<double>& out, std::vector<double>* diag) const {
        out.assign(u.size(), 0.0);
        if (diag) diag->assign(u.size(), 0.0);
        for (std::size_t e = 0; e < nodes_.size(); ++e) {
            const auto& b = hats_[kind(e)];
            const auto& n = nodes_[e];
            const auto p = gradient(e, u);
            const double s = std::sqrt(p[0] * p[0] + p[1] * p[1] + eta_ * eta_);
            if (s <= 0.0) continue;
            const double gs = law_.g(s);
            const double F = gs / s;
            const double c = (law_.dg(s) * s - gs) / (s * s * s);
            std::array<double, 2> q{0.0, 0.0};
            for (int k = 0; k < npe_; ++k) {
                if (!free[n[k]]) continue;
                q[0] += b[k][0] * v[n[k]];
                q[1] += b[k][1] * v[n[k]];
            }
            const double pq = p[0] * q[0] + p[1] * q[1];
            const double hq0 = F * q[0] + c * pq * p[0];
            const double hq1 = F * q[1] + c * pq * p[1];
            for (int k = 0; k < npe_; ++k) {
                if (!free[n[k]]) continue;
                out[n[k]] += area_ * (b[k][0] * hq0 + b[k][1] * hq1);
                if (diag) {
                    const double pb = p[0] * b[k][0] + p[1] * b[k][1];
                    (*diag)[n[k]] += area_ * (F * (b[k][0] * b[k][0] + b[k][1] * b[k][1]) + c * pb * pb);
                }
            }
        }
    }

    std::size_t element_count() const { return nodes_.size(); }
    const std::array<std::size_t, 3>& nodes(std::size_t e) const { return nodes_[e]; }
    const std::array<std::array<double, 2>, 3>& hats(std::size_t e) const { return hats_[kind(e)]; }
    int nodes_per_element() const { return npe_; }
    double area() const { return area_; }
    const Law& law() const { return law_; }
    double eta() const { return eta_; }

private:
    std::size_t kind(std::size_t e) const { return grid_.one_dimensional() ? 0 : e % 2; }

    const Grid& grid_;
    const Law& law_;
    double lambda_, eps_, eta_, area_;
    int npe_;
    double G_eta_;
    std::vector<std::array<std::size_t, 3>> nodes_;
    std::array<std::array<std::array<double, 2>, 3>, 2> hats_{};
};

double dot_masked(const std::vector<double>& a, const std::vector<double>& b, const std::vector<std::uint8_t>& m) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (m[i]) s += a[i] * b[i];
    }
    return s;
}

double max_abs_masked(const std::vector<double>& a, const std::vector<std::uint8_t>& m) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (m[i]) s = std::max(s, std::abs(a[i]));
    }
    return s;
}

std::vector<std::uint8_t> interior_mask(const Grid& grid) {
    std::vector<std::uint8_t> m(grid.node_count());
    for (std::size_t i = 0; i < m.size(); ++i) m[i] = grid.is_boundary(i) ? 0 : 1;
    return m;
}

void check_same_grid(const Field& u, const std::vector<std::uint8_t>& mask) {
    if (mask.size() != u.size()) throw DomainError("node mask size does not match grid");
}

// Typical gradient magnitude implied by the fixed values: range over the diameter.
double data_gradient_scale(const Field& u, const std::vector<std::uint8_t>& free) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (std::size_t i = 0; i < u.size(); ++i) {
        if (free[i]) continue;
        lo = std::min(lo, u[i]);
        hi = std::max(hi, u[i]);
    }
    const Grid& g = u.grid();
    const double diam = std::hypot(g.Lx(), g.Ly());
    if (!(hi > lo)) return 0.0;
    return (hi - lo) / diam;
}

struct NewtonOutcome {
    double residual = 0.0;
    int newton = 0;
    int cg = 0;
    bool converged = false;
};

// Newton iteration with preconditioned conjugate gradients for the convex
// gradient energy over the free nodes (lambda term absent).
NewtonOutcome newton_g_harmonic(const Kernel& kernel, std::vector<double>& u, const std::vector<std::uint8_t>& free,
                                const std::vector<double>& volumes, double target, int max_newton, int max_cg) {
    NewtonOutcome out;
    const std::size_t n = u.size();
    std::vector<double> grad, grad_new, d(n), r(n), z(n), pdir(n), hp(n), diag, trial(n);
    auto residual_of = [&](const std::vector<double>& gr) {
        double m = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (free[i]) m = std::max(m, std::abs(gr[i]) / volumes[i]);
        }
        return m;
    };
    double E = kernel.energy_gradient(u, grad);
    for (std::size_t i = 0; i < n; ++i) {
        if (!free[i]) grad[i] = 0.0;
    }
    out.residual = residual_of(grad);
    const double g0norm = std::sqrt(dot_masked(grad, grad, free));
    while (out.newton < max_newton) {
        if (out.residual <= target) {
            out.converged = true;
            break;
        }
        ++out.newton;
        // PCG on H d = -grad.
        kernel.hessian(u, free, grad, hp, &diag);
        std::fill(d.begin(), d.end(), 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            r[i] = free[i] ? -grad[i] : 0.0;
            z[i] = free[i] && diag[i] > 0.0 ? r[i] / diag[i] : 0.0;
        }
        pdir = z;
        double rz = dot_masked(r, z, free);
        const double gnorm = std::sqrt(dot_masked(grad, grad, free));
        const double forcing = std::min(0.1, std::sqrt(gnorm / std::max(g0norm, 1e-300)));
        const double cg_tol = forcing * gnorm;
        for (int k = 0; k < max_cg; ++k) {
            kernel.hessian(u, free, pdir, hp, nullptr);
            const double php = dot_masked(pdir, hp, free);
            if (!(php > 0.0)) break;
            const double alpha = rz / php;
            for (std::size_t i = 0; i < n; ++i) {
                if (!free[i]) continue;
                d[i] += alpha * pdir[i];
                r[i] -= alpha * hp[i];
            }
            ++out.cg;
            if (std::sqrt(dot_masked(r, r, free)) <= cg_tol) break;
            for (std::size_t i = 0; i < n; ++i) z[i] = free[i] && diag[i] > 0.0 ? r[i] / diag[i] : 0.0;
            const double rz_new = dot_masked(r, z, free);
            const double beta = rz_new / rz;
            rz = rz_new;
            for (std::size_t i = 0; i < n; ++i) pdir[i] = free[i] ? z[i] + beta * pdir[i] : 0.0;
        }
        const double slope = dot_masked(grad, d, free);
        if (!(slope < 0.0)) {
            // Not a descent direction (CG broke down); fall back to the preconditioned gradient.
            for (std::size_t i = 0; i < n; ++i) d[i] = free[i] && diag[i] > 0.0 ? -grad[i] / diag[i] : 0.0;
        }
        const double slope2 = dot_masked(grad, d, free);
        double step = 1.0;
        bool accepted = false;
        for (int ls = 0; ls < 40; ++ls) {
            for (std::size_t i = 0; i < n; ++i) trial[i] = free[i] ? u[i] + step * d[i] : u[i];
            const double En = kernel.energy_gradient(trial, grad_new);
            for (std::size_t i = 0; i < n; ++i) {
                if (!free[i]) grad_new[i] = 0.0;
            }
            const double res_new = residual_of(grad_new);
            const bool armijo = En <= E + 1e-4 * step * slope2;
            const bool flat = std::abs(En - E) <= 1e-13 * std::max(1.0, std::abs(E)) && res_new < out.residual;
            if (armijo || flat) {
                u.swap(trial);
                grad.swap(grad_new);
                E = En;
                out.residual = res_new;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) break;
    }
    if (out.residual <= target) out.converged = true;
    return out;
}

double residual_target(const Law& law, const Field& u, const std::vector<std::uint8_t>& free, double rel_tol) {
    const double scale = data_gradient_scale(u, free);
    if (scale <= 0.0) return rel_tol;
    return rel_tol * std::max(law.g(scale), 1e-300);
}

Field run_g_harmonic(const Field& u, const GFunction& f, const std::vector<std::uint8_t>& free,
                     const ConvexSolveOptions& opts, ConvexSolveReport* report, bool throw_on_failure) {
    check_same_grid(u, free);
    const Grid& grid = u.grid();
    std::vector<std::uint8_t> mask = free;
    for (std::size_t i = 0; i < mask.size(); ++i) {
        if (grid.is_boundary(i)) mask[i] = 0;
    }
    const Law law(f);
    double eta = opts.eta;
    if (!(eta > 0.0)) eta = 1e-6 * std::max(data_gradient_scale(u, mask), 1e-3);
    const Kernel kernel(grid, law, 0.0, 1.0, eta);
    std::vector<double> v = u.values();
    const double target = residual_target(law, u, mask, opts.residual_tol);
    const NewtonOutcome o =
        newton_g_harmonic(kernel, v, mask, grid.node_volumes(), target, opts.max_newton, opts.max_cg);
    if (report) *report = {o.residual, o.newton, o.cg, o.converged};
    if (!o.converged && throw_on_failure) {
        throw NumericalError("G-harmonic solve did not reach its residual target", o.residual);
    }
    return Field(u.grid_ptr(), std::move(v));
}

}  // namespace

double smoothstep(double t, double eps) {
    if (t <= 0.0) return 0.0;
    if (t >= eps) return 1.0;
    const double s = t / eps;
    return s * s * (3.0 - 2.0 * s);
}

double assemble_energy(const Field& u, const GFunction& f, double lambda, double eps, double eta) {
    if (lambda < 0.0) throw DomainError("assemble_energy: lambda must be >= 0");
    const Law law(f);
    return Kernel(u.grid(), law, lambda, eps, eta).energy(u.values());
}

Field energy_gradient(const Field& u, const GFunction& f, double lambda, double eps, double eta) {
    if (!(eps > 0.0)) throw DomainError("energy_gradient: eps must be > 0");
    const Law law(f);
    std::vector<double> grad;
    Kernel(u.grid(), law, lambda, eps, eta).energy_gradient(u.values(), grad);
    return Field(u.grid_ptr(), std::move(grad));
}

double default_eta(const Grid& grid, const GFunction& f, double lambda) {
    if (lambda > 0.0) return 1e-6 * lambda_star(f, lambda);
    const double diam = std::hypot(grid.Lx(), grid.Ly());
    return 1e-6 * std::max(grid.sup_phi0() / diam, 1e-3);
}

double tail_zero_level(const GFunction& f, double lambda) {
    if (!(lambda > 0.0)) throw DomainError("tail_zero_level: lambda must be > 0");
    const double slope = lambda_star(f, lambda);
    QuadratureOptions q;
    q.abs_tol = 0.0;
    q.rel_tol = 1e-9;
    // Integrate in v = log s so the 1/s-type growth near 0 stays benign.
    auto length = [&](double theta) {
        auto integrand = [&](double v) {
            const double s = std::exp(v);
            return s * slope / lambda_star(f, lambda * smoothstep(s, 1.0));
        };
        return integrate_simpson(integrand, std::log(theta), 0.0, q).value;
    };
    double lo = 1e-12, hi = 1.0;
    if (length(lo) <= 1.0) return 0.0;
    for (int k = 0; k < 60 && hi - lo > 1e-10; ++k) {
        const double mid = k < 20 ? std::sqrt(lo * hi) : 0.5 * (lo + hi);
        (length(mid) > 1.0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

std::vector<double> default_eps_schedule(const Grid& grid) {
    const double M = grid.sup_phi0();
    if (!(M > 0.0)) return {};
    const double final_eps = std::max(2.0 * grid.h(), 1e-3 * M);
    std::vector<double> out;
    double eps = 0.25 * M;
    while (eps > final_eps * (1.0 + 1e-12)) {
        out.push_back(eps);
        eps *= 0.5;
    }
    out.push_back(final_eps);
    return out;
}

Field g_laplacian_residual(const Field& u, const GFunction& f, double eta) {
    const Law law(f);
    const Kernel kernel(u.grid(), law, 0.0, 1.0, eta);
    std::vector<double> grad;
    kernel.energy_gradient(u.values(), grad);
    const auto vol = u.grid().node_volumes();
    for (std::size_t i = 0; i < grad.size(); ++i) grad[i] = u.grid().is_boundary(i) ? 0.0 : grad[i] / vol[i];
    return Field(u.grid_ptr(), std::move(grad));
}

Field solve_g_harmonic(const Field& u, const GFunction& f, const std::vector<std::uint8_t>& free_nodes,
                       const ConvexSolveOptions& opts, ConvexSolveReport* report) {
    return run_g_harmonic(u, f, free_nodes, opts, report, true);
}

Field harmonic_replacement(const Field& u, const GFunction& f, const std::vector<std::uint8_t>& region,
                           const ConvexSolveOptions& opts, ConvexSolveReport* report) {
    check_same_grid(u, region);
    for (std::size_t i = 0; i < region.size(); ++i) {
        if (region[i] && u.grid().is_boundary(i)) {
            throw DomainError("harmonic_replacement: region must consist of interior nodes");
        }
    }
    return run_g_harmonic(u, f, region, opts, report, true);
}

std::vector<std::uint8_t> ball_region(const Grid& grid, double cx, double cy, double r) {
    std::vector<std::uint8_t> m(grid.node_count(), 0);
    for (std::size_t n = 0; n < m.size(); ++n) {
        if (grid.is_boundary(n)) continue;
        if (std::hypot(grid.node_x(n) - cx, grid.node_y(n) - cy) < r) m[n] = 1;
    }
    return m;
}

ComparisonReport comparison_check(std::shared_ptr<const Grid> grid, const GFunction& f,
                                  const std::vector<double>& phi0_low, const std::vector<double>& phi0_high,
                                  const ConvexSolveOptions& opts) {
    if (phi0_low.size() != grid->node_count() || phi0_high.size() != grid->node_count()) {
        throw DomainError("comparison_check: boundary data size mismatch");
    }
    const auto interior = interior_mask(*grid);
    auto start = [&](const std::vector<double>& phi) {
        std::vector<double> v(grid->node_count(), 0.0);
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (!grid->is_boundary(i)) continue;
            lo = std::min(lo, phi[i]);
            hi = std::max(hi, phi[i]);
        }
        const double mid = 0.5 * (lo + hi);
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = grid->is_boundary(i) ? phi[i] : mid;
        return Field(grid, std::move(v));
    };
    ConvexSolveOptions o = opts;
    if (!(o.eta > 0.0)) {
        // Share one regularization between the two problems so that translation
        // invariance holds exactly at the discrete level.
        o.eta = 1e-6 * std::max({data_gradient_scale(start(phi0_low), interior),
                                 data_gradient_scale(start(phi0_high), interior), 1e-3});
    }
    ConvexSolveReport rl, rh;
    const Field ul = run_g_harmonic(start(phi0_low), f, interior, o, &rl, true);
    const Field uh = run_g_harmonic(start(phi0_high), f, interior, o, &rh, true);
    ComparisonReport rep;
    rep.max_violation = -std::numeric_limits<double>::infinity();
    rep.min_difference = std::numeric_limits<double>::infinity();
    rep.max_difference = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < ul.size(); ++i) {
        const double diff = uh[i] - ul[i];
        rep.max_violation = std::max(rep.max_violation, -diff);
        rep.min_difference = std::min(rep.min_difference, diff);
        rep.max_difference = std::max(rep.max_difference, diff);
    }
    rep.residual_low = rl.residual_max;
    rep.residual_high = rh.residual_max;
    return rep;
}

TwoRegimeReport two_regime_terms(const Field& u, const Field& v, const GFunction& f,
                                 const std::vector<std::uint8_t>& region) {
    check_same_grid(u, region);
    if (u.size() != v.size()) throw DomainError("two_regime_terms: field size mismatch");
    const Grid& grid = u.grid();
    const double area = grid.element_area();
    TwoRegimeReport rep;
    for (std::size_t e = 0; e < grid.element_count(); ++e) {
        const auto nodes = grid.element_nodes(e);
        bool touches = false;
        for (int k = 0; k < grid.nodes_per_element(); ++k) touches = touches || region[nodes[k]];
        if (!touches) continue;
        const auto pu = grid.element_gradient(e, u.values());
        const auto pv = grid.element_gradient(e, v.values());
        const double a = std::hypot(pu[0], pu[1]);
        const double b = std::hypot(pv[0], pv[1]);
        const double d = std::hypot(pu[0] - pv[0], pu[1] - pv[1]);
        rep.energy_gap += area * (f.G(a) - f.G(b));
        if (d <= 2.0 * a) {
            ++rep.near_elements;
            if (d > 0.0) rep.near_term += area * f.flux_coefficient(a) * d * d;
        } else {
            ++rep.far_elements;
            rep.far_term += area * f.G(d);
        }
    }
    const double denom = rep.near_term + rep.far_term;
    rep.ratio = denom > 0.0 ? rep.energy_gap / denom : 0.0;
    return rep;
}

double barrier_operator(const GFunction& f, double eps_amp, double mu, int N, double r) {
    if (!(eps_amp > 0.0) || !(mu > 0.0) || N < 1 || !(r > 0.0)) {
        throw DomainError("barrier_operator: eps_amp, mu, r must be > 0 and N >= 1");
    }
    const double e = std::exp(-mu * r * r);
    const double t = 2.0 * eps_amp * mu * r * e;  // |grad w|
    const double gt = f.g(t);
    const double A = t * f.dg(t) / gt;
    const double bracket = (A - 1.0) * (4.0 * mu * r * r - 2.0) + (4.0 * mu * r * r - 2.0 * N);
    return gt / t * eps_amp * mu * e * bracket;
}

BarrierReport barrier_check(const GFunction& f, double eps_amp, double mu, double r1, double r2, int N,
                            int samples) {
    if (!(r1 > r2) || !(r2 > 0.0)) throw DomainError("barrier_check: need r1 > r2 > 0");
    if (samples < 1) throw DomainError("barrier_check: samples must be >= 1");
    BarrierReport rep;
    rep.min_value = std::numeric_limits<double>::infinity();
    for (int k = 0; k < samples; ++k) {
        const double r = r2 + (r1 - r2) * (k + 0.5) / samples;
        const double val = barrier_operator(f, eps_amp, mu, N, r);
        rep.radii.push_back(r);
        rep.values.push_back(val);
        if (val < rep.min_value) {
            rep.min_value = val;
            rep.argmin_radius = r;
        }
        if (val <= 0.0 && !rep.first_failing_radius) rep.first_failing_radius = r;
    }
    return rep;
}

double suggested_barrier_mu(const GFunction& f, int N, double r2, double margin) {
    if (N < 1 || !(r2 > 0.0) || !(margin >= 0.0)) throw DomainError("suggested_barrier_mu: invalid arguments");
    const double g0 = f.g0();
    const double K = g0 <= 1.0 ? 2.0 * N : 2.0 * (g0 - 1.0) + 2.0 * N;
    return K / (4.0 * f.delta() * r2 * r2) * (1.0 + margin);
}

// ---------------------------------------------------------------- minimize

namespace {

// Projected descent on [0, M]^free for the smoothed energy at one eps.
StageRecord descend(const Kernel& kernel, std::vector<double>& u, const std::vector<std::uint8_t>& free, double upper,
                    const SolveOptions& opts, std::vector<double>& trace) {
    StageRecord rec;
    const std::size_t n = u.size();
    std::vector<double> grad, grad_new, trial(n);
    double E = kernel.energy_gradient(u, grad);
    std::vector<double> history{E};
    auto project = [&](double alpha) {
        for (std::size_t i = 0; i < n; ++i) {
            trial[i] = free[i] ? std::clamp(u[i] - alpha * grad[i], 0.0, upper) : u[i];
        }
    };
    const double gmax = max_abs_masked(grad, free);
    double alpha = gmax > 0.0 ? 0.01 * upper / gmax : 1.0;
    int failures = 0;
    bool bb_long = true;
    for (int it = 0; it < opts.max_iters; ++it) {
        project(alpha);
        double gd = 0.0;
        for (std::size_t i = 0; i < n; ++i) gd += grad[i] * (trial[i] - u[i]);
        if (!(gd < 0.0)) {
            rec.converged = true;
            break;
        }
        const double gd_full = gd;
        double step = alpha;
        bool accepted = false;
        double En = E;
        for (int ls = 0; ls < 50; ++ls) {
            En = kernel.energy_gradient(trial, grad_new);
            if (En <= E + 1e-4 * gd) {
                accepted = true;
                break;
            }
            step *= 0.5;
            project(step);
            gd = 0.0;
            for (std::size_t i = 0; i < n; ++i) gd += grad[i] * (trial[i] - u[i]);
            if (!(gd < 0.0)) break;
        }
        ++rec.iterations;
        if (!accepted || En >= E) {
            if (++failures >= 3) {
                // A predicted decrease below the energy's rounding level means the
                // iterate is already stationary to working precision.
                if (-gd_full <= 1e3 * std::numeric_limits<double>::epsilon() * std::abs(E)) {
                    rec.converged = true;
                } else {
                    rec.aborted = true;
                }
                break;
            }
            alpha = step;
            if (!accepted) continue;
        } else {
            failures = 0;
        }
        double ss = 0.0, sy = 0.0, yy = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (!free[i]) continue;
            const double s = trial[i] - u[i], y = grad_new[i] - grad[i];
            ss += s * s;
            sy += s * y;
            yy += y * y;
        }
        u.swap(trial);
        grad.swap(grad_new);
        E = En;
        trace.push_back(E);
        history.push_back(E);
        if (opts.step_rule == StepRule::BarzilaiBorwein) {
            if (sy > 0.0) {
                alpha = bb_long ? ss / sy : sy / yy;
                bb_long = !bb_long;
            } else {
                alpha = step * 4.0;
            }
        } else {
            alpha = step * 2.0;
        }
        alpha = std::clamp(alpha, 1e-20, 1e20);
        const int w = opts.stall_window;
        if (static_cast<int>(history.size()) > w) {
            const double old = history[history.size() - 1 - w];
            if (old - E <= opts.energy_tol * std::max(std::abs(E), 1e-300)) {
                rec.converged = true;
                break;
            }
        }
    }
    rec.energy = E;
    return rec;
}

struct RunResult {
    std::vector<double> u;
    std::vector<StageRecord> stages;
    std::vector<double> trace;
    double energy = 0.0;
    int zeroed = 0;
};

}  // namespace

SolveResult minimize(std::shared_ptr<const Grid> grid, const GFunction& f, double lambda, const SolveOptions& opts) {
    if (!grid) throw DomainError("minimize: null grid");
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw DomainError("minimize: lambda must be >= 0");
    if (opts.max_iters < 1 || opts.stall_window < 1 || opts.restarts < 0) {
        throw DomainError("minimize: invalid iteration limits");
    }
    const Grid& g = *grid;
    const double M = g.sup_phi0();
    SolveDiagnostics diag;
    if (!(M > 0.0)) {
        Field zero(grid);
        diag.residual_ok = true;
        diag.restart_energies.push_back(0.0);
        diag.messages.push_back("boundary data vanish; the minimizer is zero");
        return {zero, diag};
    }
    std::vector<double> schedule = opts.eps_schedule.empty() ? default_eps_schedule(g) : opts.eps_schedule;
    for (std::size_t k = 0; k < schedule.size(); ++k) {
        if (!(schedule[k] > 0.0) || (k > 0 && !(schedule[k] < schedule[k - 1]))) {
            throw DomainError("minimize: eps schedule must be positive and strictly decreasing");
        }
    }
    const double eta = opts.eta > 0.0 ? opts.eta : default_eta(g, f, lambda);
    diag.eta = eta;
    diag.eps_schedule = schedule;
    const double eps_final = schedule.back();
    const double theta = lambda > 0.0 ? opts.zero_threshold.value_or(tail_zero_level(f, lambda)) : 0.0;
    diag.zero_level = theta * eps_final;

    const Law law(f);
    Kernel kernel(g, law, lambda, schedule.front(), eta);
    const auto interior = interior_mask(g);
    const auto volumes = g.node_volumes();
    const double gscale = lambda > 0.0 ? lambda_star(f, lambda) : M / std::hypot(g.Lx(), g.Ly());
    const double target = opts.residual_tol * law.g(gscale);

    // G-harmonic start (lambda = 0): an upper barrier for the minimizer.
    std::vector<double> start = Field::from_boundary(grid, 0.5 * M).values();
    {
        Kernel harmonic(g, law, 0.0, 1.0, eta);
        newton_g_harmonic(harmonic, start, interior, volumes, target, 200, 5000);
        for (double& v : start) v = std::clamp(v, 0.0, M);
    }

    std::mt19937_64 rng(opts.seed);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    std::vector<RunResult> runs;
    for (int run = 0; run <= opts.restarts; ++run) {
        RunResult rr;
        rr.u = start;
        if (run > 0) {
            for (std::size_t i = 0; i < rr.u.size(); ++i) {
                if (interior[i]) rr.u[i] = std::clamp(rr.u[i] + opts.perturbation * M * unit(rng), 0.0, M);
            }
        }
        if (lambda > 0.0) {
            for (double eps : schedule) {
                kernel.set_eps(eps);
                const std::size_t offset = rr.trace.size();
                StageRecord rec = descend(kernel, rr.u, interior, M, opts, rr.trace);
                rec.eps = eps;
                rec.trace_offset = offset;
                rr.stages.push_back(rec);
            }
            {
                const double level = theta * eps_final;
                for (std::size_t i = 0; i < rr.u.size(); ++i) {
                    if (interior[i] && rr.u[i] < level && rr.u[i] != 0.0) {
                        rr.u[i] = 0.0;
                        ++rr.zeroed;
                    } else if (interior[i] && rr.u[i] < level) {
                        rr.u[i] = 0.0;
                    }
                }
            }
        }
        // Frozen-support pass: G-harmonic on the positive set, zeros held fixed.
        std::vector<std::uint8_t> active(rr.u.size(), 0);
        for (std::size_t i = 0; i < rr.u.size(); ++i) active[i] = interior[i] && rr.u[i] > 0.0;
        Kernel harmonic(g, law, 0.0, 1.0, eta);
        newton_g_harmonic(harmonic, rr.u, active, volumes, target, 200, 5000);
        for (std::size_t i = 0; i < rr.u.size(); ++i) rr.u[i] = std::clamp(rr.u[i], 0.0, M);
        kernel.set_eps(0.0);
        rr.energy = kernel.energy(rr.u);
        diag.restart_energies.push_back(rr.energy);
        runs.push_back(std::move(rr));
        if (lambda == 0.0) break;  // convex problem: restarts are pointless
    }

    std::size_t best = 0;
    for (std::size_t r = 1; r < runs.size(); ++r) {
        if (runs[r].energy < runs[best].energy) best = r;
    }
    RunResult& chosen = runs[best];
    diag.selected_run = static_cast<int>(best);
    diag.energy = chosen.energy;
    diag.stages = chosen.stages;
    diag.energy_trace = std::move(chosen.trace);
    diag.zeroed_nodes = chosen.zeroed;
    for (const StageRecord& s : diag.stages) {
        if (s.aborted) diag.messages.push_back("stage at eps=" + std::to_string(s.eps) + " aborted: no decrease");
        if (!s.converged && !s.aborted) {
            diag.messages.push_back("stage at eps=" + std::to_string(s.eps) + " hit the iteration limit");
        }
    }

    Field u(grid, std::move(chosen.u));
    const Field res = g_laplacian_residual(u, f, eta);
    for (std::size_t i = 0; i < u.size(); ++i) {
        if (interior[i] && u[i] > eps_final) diag.residual_max = std::max(diag.residual_max, std::abs(res[i]));
    }
    diag.residual_ok = diag.residual_max <= std::max(target, 1e-6 * law.g(gscale));
    return {u, diag};
}

}  // namespace orliczfb
