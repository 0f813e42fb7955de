#include "orliczfb/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "orliczfb/numerics.hpp"

namespace orliczfb {
namespace {

double dist(const Point2& a, const Point2& b) { return std::hypot(a[0] - b[0], a[1] - b[1]); }

Point2 node_point(const Grid& g, std::size_t n) { return {g.node_x(n), g.node_y(n)}; }

// Nodes of the grid within distance r of c (closed disc), in index order.
template <class Fn>
void for_nodes_in_ball(const Grid& g, const Point2& c, double r, Fn&& fn) {
    const int i0 = std::max(0, static_cast<int>(std::ceil((c[0] - r) / g.hx() - 1e-9)));
    const int i1 = std::min(g.nx() - 1, static_cast<int>(std::floor((c[0] + r) / g.hx() + 1e-9)));
    int j0 = 0, j1 = 0;
    if (!g.one_dimensional()) {
        j0 = std::max(0, static_cast<int>(std::ceil((c[1] - r) / g.hy() - 1e-9)));
        j1 = std::min(g.ny() - 1, static_cast<int>(std::floor((c[1] + r) / g.hy() + 1e-9)));
    }
    for (int j = j0; j <= j1; ++j) {
        for (int i = i0; i <= i1; ++i) {
            const std::size_t n = g.index(i, j);
            if (dist(node_point(g, n), c) <= r) fn(n);
        }
    }
}

// Distance from c to the boundary of the domain.
double boundary_distance(const Grid& g, const Point2& c) {
    double d = std::min(c[0], g.Lx() - c[0]);
    if (!g.one_dimensional()) d = std::min({d, c[1], g.Ly() - c[1]});
    return d;
}

bool ball_inside(const Grid& g, const Point2& c, double r) { return boundary_distance(g, c) >= r - 1e-12; }

// Smallest-eigenvalue eigenvector of the 2x2 covariance of the points; returns
// false when fewer than three points or the spread is not clearly one-dimensional.
bool fit_normal(const std::vector<Point2>& pts, Point2& normal) {
    if (pts.size() < 3) return false;
    double mx = 0.0, my = 0.0;
    for (const auto& p : pts) {
        mx += p[0];
        my += p[1];
    }
    mx /= pts.size();
    my /= pts.size();
    double sxx = 0.0, syy = 0.0, sxy = 0.0;
    for (const auto& p : pts) {
        sxx += (p[0] - mx) * (p[0] - mx);
        syy += (p[1] - my) * (p[1] - my);
        sxy += (p[0] - mx) * (p[1] - my);
    }
    const double tr = sxx + syy;
    const double det = sxx * syy - sxy * sxy;
    const double disc = std::sqrt(std::max(0.0, 0.25 * tr * tr - det));
    const double lmax = 0.5 * tr + disc, lmin = 0.5 * tr - disc;
    if (!(lmax > 0.0) || lmin > 0.25 * lmax) return false;
    // Eigenvector for lmax, then rotate by 90 degrees.
    Point2 t;
    if (std::abs(sxy) > 1e-300) {
        t = {lmax - syy, sxy};
    } else {
        t = sxx >= syy ? Point2{1.0, 0.0} : Point2{0.0, 1.0};
    }
    const double len = std::hypot(t[0], t[1]);
    normal = {-t[1] / len, t[0] / len};
    return true;
}

// Signed orientation so that the normal points from positive to zero nodes.
void orient(const Grid& g, const std::vector<const FreeBoundarySet::Point*>& near, Point2& normal) {
    double s = 0.0;
    for (const auto* p : near) {
        const Point2 zp = node_point(g, p->zero_node), pp = node_point(g, p->positive_node);
        s += normal[0] * (zp[0] - pp[0]) + normal[1] * (zp[1] - pp[1]);
    }
    if (s < 0.0) normal = {-normal[0], -normal[1]};
}

// Length of the part of segment ab inside the closed disc B_r(c).
double clipped_length(const Point2& a, const Point2& b, const Point2& c, double r) {
    const double dx = b[0] - a[0], dy = b[1] - a[1];
    const double len2 = dx * dx + dy * dy;
    if (len2 <= 0.0) return 0.0;
    const double fx = a[0] - c[0], fy = a[1] - c[1];
    const double B = 2.0 * (fx * dx + fy * dy);
    const double C = fx * fx + fy * fy - r * r;
    const double D = B * B - 4.0 * len2 * C;
    if (D <= 0.0) return 0.0;
    const double sq = std::sqrt(D);
    const double t0 = std::max(0.0, (-B - sq) / (2.0 * len2));
    const double t1 = std::min(1.0, (-B + sq) / (2.0 * len2));
    return t1 > t0 ? (t1 - t0) * std::sqrt(len2) : 0.0;
}

// Element containing p (clamped into the domain) and the P1 value there.
struct Located {
    std::size_t element = 0;
    double value = 0.0;
};

Located locate(const Grid& g, const std::vector<double>& u, Point2 p) {
    p[0] = std::clamp(p[0], 0.0, g.Lx());
    const int i = std::min(g.nx() - 2, static_cast<int>(p[0] / g.hx()));
    const double s = p[0] / g.hx() - i;
    if (g.one_dimensional()) {
        return {static_cast<std::size_t>(i), (1 - s) * u[g.index(i, 0)] + s * u[g.index(i + 1, 0)]};
    }
    p[1] = std::clamp(p[1], 0.0, g.Ly());
    const int j = std::min(g.ny() - 2, static_cast<int>(p[1] / g.hy()));
    const double t = p[1] / g.hy() - j;
    const std::size_t cell = static_cast<std::size_t>(j) * (g.nx() - 1) + i;
    const double u00 = u[g.index(i, j)], u10 = u[g.index(i + 1, j)], u11 = u[g.index(i + 1, j + 1)],
                 u01 = u[g.index(i, j + 1)];
    if (t <= s) return {2 * cell, u00 + s * (u10 - u00) + t * (u11 - u10)};
    return {2 * cell + 1, u00 + s * (u11 - u01) + t * (u01 - u00)};
}

double bilinear(const Grid& g, const std::vector<double>& u, Point2 p) {
    p[0] = std::clamp(p[0], 0.0, g.Lx());
    const int i = std::min(g.nx() - 2, static_cast<int>(p[0] / g.hx()));
    const double s = p[0] / g.hx() - i;
    if (g.one_dimensional()) return (1 - s) * u[g.index(i, 0)] + s * u[g.index(i + 1, 0)];
    p[1] = std::clamp(p[1], 0.0, g.Ly());
    const int j = std::min(g.ny() - 2, static_cast<int>(p[1] / g.hy()));
    const double t = p[1] / g.hy() - j;
    return (1 - s) * (1 - t) * u[g.index(i, j)] + s * (1 - t) * u[g.index(i + 1, j)] +
           s * t * u[g.index(i + 1, j + 1)] + (1 - s) * t * u[g.index(i, j + 1)];
}

struct Accumulator {
    double min = std::numeric_limits<double>::infinity();
    double max = -std::numeric_limits<double>::infinity();
    double sum = 0.0;
    int n = 0;
    void add(double v) {
        min = std::min(min, v);
        max = std::max(max, v);
        sum += v;
        ++n;
    }
};

// Evaluates `measure(x, r)` at every free-boundary point admitting radius r.
template <class Measure>
BallReport ball_survey(const Field& u, const FreeBoundarySet& fb, const std::vector<double>& radii, Measure&& measure) {
    const Grid& g = u.grid();
    BallReport rep;
    Accumulator all;
    for (double r : radii) {
        if (!(r >= 4.0 * g.h() * (1 - 1e-12))) continue;
        Accumulator acc;
        for (const auto& p : fb.points) {
            if (!ball_inside(g, p.x, 2.0 * r)) continue;
            const double v = measure(p.x, r);
            acc.add(v);
            all.add(v);
        }
        if (acc.n == 0) continue;
        rep.per_radius.push_back({r, acc.min, acc.max, acc.sum / acc.n, acc.n});
    }
    rep.conclusive = all.n > 0;
    if (rep.conclusive) {
        rep.min = all.min;
        rep.max = all.max;
    }
    return rep;
}

// Visits nodes whose dual cell meets B_r(c), passing the node volume scaled by
// the fraction of the dual cell inside the disc (sampled on an 8 x 8 lattice where
// the cell straddles the circle).
template <class Fn>
void for_weighted_nodes_in_ball(const Grid& g, const std::vector<double>& vol, const Point2& c, double r, Fn&& fn) {
    const double ax = 0.5 * g.hx(), ay = g.one_dimensional() ? 0.0 : 0.5 * g.hy();
    for_nodes_in_ball(g, c, r + std::hypot(ax, ay), [&](std::size_t n) {
        const double x0 = std::max(0.0, g.node_x(n) - ax), x1 = std::min(g.Lx(), g.node_x(n) + ax);
        const double y0 = std::max(0.0, g.node_y(n) - ay), y1 = std::min(g.Ly(), g.node_y(n) + ay);
        double frac = 0.0;
        if (g.one_dimensional()) {
            frac = std::max(0.0, std::min(x1, c[0] + r) - std::max(x0, c[0] - r)) / (x1 - x0);
        } else {
            const double fx = std::max(std::abs(x0 - c[0]), std::abs(x1 - c[0]));
            const double fy = std::max(std::abs(y0 - c[1]), std::abs(y1 - c[1]));
            if (std::hypot(fx, fy) <= r) {
                frac = 1.0;
            } else {
                constexpr int k = 8;
                int inside = 0;
                for (int a = 0; a < k; ++a) {
                    for (int b = 0; b < k; ++b) {
                        const Point2 q{x0 + (x1 - x0) * (a + 0.5) / k, y0 + (y1 - y0) * (b + 0.5) / k};
                        inside += dist(q, c) <= r ? 1 : 0;
                    }
                }
                frac = static_cast<double>(inside) / (k * k);
            }
        }
        if (frac > 0.0) fn(n, frac * vol[n]);
    });
}

double positive_fraction(const Field& u, const std::vector<double>& vol, const Point2& c, double r) {
    double pos = 0.0, total = 0.0;
    for_weighted_nodes_in_ball(u.grid(), vol, c, r, [&](std::size_t n, double w) {
        total += w;
        if (u[n] > 0.0) pos += w;
    });
    return total > 0.0 ? pos / total : 0.0;
}

double q_value(const Field& u, const std::vector<double>& vol, const Point2& c, double r, double gamma) {
    double acc = 0.0, total = 0.0;
    for_weighted_nodes_in_ball(u.grid(), vol, c, r, [&](std::size_t n, double w) {
        total += w;
        acc += w * std::pow(u[n], gamma);
    });
    return total > 0.0 ? std::pow(acc / total, 1.0 / gamma) / r : 0.0;
}

void check_nonnegative(const Field& u) {
    for (double v : u.values()) {
        if (!(v >= 0.0) || !std::isfinite(v)) throw DomainError("analysis: field values must be finite and >= 0");
    }
}

}  // namespace

double FreeBoundarySet::length_in_ball(const Point2& c, double r) const {
    if (one_dimensional) {
        double count = 0.0;
        for (const auto& p : points) count += dist(p.x, c) <= r ? 1.0 : 0.0;
        return count;
    }
    double len = 0.0;
    for (const auto& piece : pieces) len += clipped_length(piece.a, piece.b, c, r);
    return len;
}

FreeBoundarySet extract_free_boundary(const Field& u, double normal_radius) {
    const Grid& g = u.grid();
    FreeBoundarySet fb;
    fb.h = g.h();
    fb.one_dimensional = g.one_dimensional();
    // Zero crossing on a mixed edge, found by extrapolating u from the positive node
    // with the mean gradient of its fully positive elements (edge midpoint if there
    // are none).
    std::vector<std::array<double, 2>> node_grad(g.node_count(), {0.0, 0.0});
    std::vector<int> node_count(g.node_count(), 0);
    for (std::size_t e = 0; e < g.element_count(); ++e) {
        const auto nodes = g.element_nodes(e);
        const int npe = g.nodes_per_element();
        bool positive = true;
        for (int k = 0; k < npe; ++k) positive = positive && u[nodes[k]] > 0.0;
        if (!positive) continue;
        const auto p = g.element_gradient(e, u.values());
        for (int k = 0; k < npe; ++k) {
            const std::size_t n = nodes[k];
            node_grad[n][0] += p[0];
            node_grad[n][1] += p[1];
            ++node_count[n];
        }
    }
    auto crossing = [&](std::size_t a, std::size_t b) {
        if (!(u[a] > 0.0)) std::swap(a, b);
        const Point2 pa = node_point(g, a), pb = node_point(g, b);
        double t = 0.5;
        if (node_count[a] > 0) {
            const double drop = -(node_grad[a][0] * (pb[0] - pa[0]) + node_grad[a][1] * (pb[1] - pa[1])) / node_count[a];
            if (drop > 0.0) t = std::min(1.0, u[a] / drop);
        }
        return Point2{pa[0] + t * (pb[0] - pa[0]), pa[1] + t * (pb[1] - pa[1])};
    };
    auto add_edge = [&](std::size_t a, std::size_t b) {
        const bool pa = u[a] > 0.0, pb = u[b] > 0.0;
        if (pa == pb) return;
        FreeBoundarySet::Point p;
        p.positive_node = pa ? a : b;
        p.zero_node = pa ? b : a;
        p.x = crossing(a, b);
        fb.points.push_back(p);
    };
    for (int j = 0; j < g.ny(); ++j) {
        for (int i = 0; i < g.nx(); ++i) {
            if (i + 1 < g.nx()) add_edge(g.index(i, j), g.index(i + 1, j));
            if (j + 1 < g.ny()) add_edge(g.index(i, j), g.index(i, j + 1));
            if (i + 1 < g.nx() && j + 1 < g.ny()) add_edge(g.index(i, j), g.index(i + 1, j + 1));
        }
    }
    if (fb.one_dimensional) {
        for (auto& p : fb.points) {
            p.normal = {g.node_x(p.zero_node) > g.node_x(p.positive_node) ? 1.0 : -1.0, 0.0};
            p.reduced = true;
        }
        return fb;
    }
    // Interface pieces join the crossings on the two mixed edges of each mixed triangle.
    for (std::size_t e = 0; e < g.element_count(); ++e) {
        const auto nodes = g.element_nodes(e);
        const bool s0 = u[nodes[0]] > 0.0, s1 = u[nodes[1]] > 0.0, s2 = u[nodes[2]] > 0.0;
        if (s0 == s1 && s1 == s2) continue;
        // The lone vertex differs in sign from the other two.
        const int lone = (s0 != s1 && s0 != s2) ? 0 : (s1 != s0 && s1 != s2) ? 1 : 2;
        const std::size_t L = nodes[lone], A = nodes[(lone + 1) % 3], B = nodes[(lone + 2) % 3];
        fb.pieces.push_back({crossing(L, A), crossing(L, B)});
    }
    // Normals by local least squares; bucket points on the grid for neighbour search.
    const double radius = normal_radius * fb.h;
    const int bx = g.nx(), by = g.ny();
    std::vector<std::vector<std::size_t>> buckets(static_cast<std::size_t>(bx) * by);
    auto bucket_of = [&](const Point2& x) {
        const int i = std::clamp(static_cast<int>(x[0] / g.hx()), 0, bx - 1);
        const int j = std::clamp(static_cast<int>(x[1] / g.hy()), 0, by - 1);
        return std::pair<int, int>{i, j};
    };
    for (std::size_t k = 0; k < fb.points.size(); ++k) {
        const auto [i, j] = bucket_of(fb.points[k].x);
        buckets[static_cast<std::size_t>(j) * bx + i].push_back(k);
    }
    const int reach = static_cast<int>(std::ceil(normal_radius)) + 1;
    std::vector<Point2> pts;
    std::vector<const FreeBoundarySet::Point*> near;
    for (auto& p : fb.points) {
        pts.clear();
        near.clear();
        const auto [ci, cj] = bucket_of(p.x);
        for (int j = std::max(0, cj - reach); j <= std::min(by - 1, cj + reach); ++j) {
            for (int i = std::max(0, ci - reach); i <= std::min(bx - 1, ci + reach); ++i) {
                for (std::size_t k : buckets[static_cast<std::size_t>(j) * bx + i]) {
                    if (dist(fb.points[k].x, p.x) <= radius) {
                        pts.push_back(fb.points[k].x);
                        near.push_back(&fb.points[k]);
                    }
                }
            }
        }
        Point2 nrm{};
        if (fit_normal(pts, nrm)) {
            orient(g, near, nrm);
            p.normal = nrm;
            p.reduced = true;
        }
    }
    return fb;
}

double measure_lipschitz(const Field& u, const Box& box) {
    const Grid& g = u.grid();
    double m = 0.0;
    for (std::size_t e = 0; e < g.element_count(); ++e) {
        const auto nodes = g.element_nodes(e);
        bool inside = true;
        for (int k = 0; k < g.nodes_per_element(); ++k) {
            const double x = g.node_x(nodes[k]), y = g.node_y(nodes[k]);
            inside = inside && x >= box.x0 && x <= box.x1 && y >= box.y0 && y <= box.y1;
        }
        if (!inside) continue;
        const auto p = g.element_gradient(e, u.values());
        m = std::max(m, std::hypot(p[0], p[1]));
    }
    return m;
}

std::vector<double> default_radii(const Grid& grid, double max_radius) {
    std::vector<double> r;
    for (double v = 4.0 * grid.h(); v <= max_radius * (1 + 1e-12); v *= 2.0) r.push_back(v);
    return r;
}

BallReport verify_nondegeneracy(const Field& u, const std::vector<double>& radii, double gamma, double c_min,
                                double C_max) {
    if (!(gamma > 1.0)) throw DomainError("verify_nondegeneracy: gamma must be > 1");
    check_nonnegative(u);
    const auto fb = extract_free_boundary(u);
    const auto vol = u.grid().node_volumes();
    BallReport rep = ball_survey(u, fb, radii, [&](const Point2& x, double r) { return q_value(u, vol, x, r, gamma); });
    rep.pass = rep.conclusive && rep.min >= c_min && rep.max <= C_max;
    return rep;
}

BallReport verify_density(const Field& u, const std::vector<double>& radii, double c, VerifyMode mode) {
    check_nonnegative(u);
    const auto fb = extract_free_boundary(u);
    const auto vol = u.grid().node_volumes();
    BallReport rep = ball_survey(u, fb, radii, [&](const Point2& x, double r) { return positive_fraction(u, vol, x, r); });
    rep.pass = rep.conclusive && rep.min >= c && (mode == VerifyMode::Weak || rep.max <= 1.0 - c);
    return rep;
}

GradientStats fb_gradient_stats(const Field& u, const GFunction& f, double lambda, double tau, double collar_widths) {
    const Grid& g = u.grid();
    GradientStats st;
    st.lambda_star = lambda > 0.0 ? lambda_star(f, lambda) : 0.0;
    st.collar = collar_widths * g.h();
    const auto fb = extract_free_boundary(u);
    if (fb.empty()) {
        st.pass = true;
        return st;
    }
    std::vector<std::uint8_t> mark(g.element_count(), 0);
    const int reach = static_cast<int>(std::ceil(collar_widths)) + 1;
    for (const auto& p : fb.points) {
        const int ci = static_cast<int>(p.x[0] / g.hx());
        const int cj = g.one_dimensional() ? 0 : static_cast<int>(p.x[1] / g.hy());
        const int cells_x = g.nx() - 1;
        const int cells_y = g.one_dimensional() ? 1 : g.ny() - 1;
        for (int j = std::max(0, cj - reach); j <= std::min(cells_y - 1, cj + reach); ++j) {
            for (int i = std::max(0, ci - reach); i <= std::min(cells_x - 1, ci + reach); ++i) {
                const std::size_t cell = static_cast<std::size_t>(j) * cells_x + i;
                const int per_cell = g.one_dimensional() ? 1 : 2;
                for (int k = 0; k < per_cell; ++k) {
                    const std::size_t e = cell * per_cell + k;
                    const auto nodes = g.element_nodes(e);
                    Point2 c{0.0, 0.0};
                    bool positive = true;
                    for (int a = 0; a < g.nodes_per_element(); ++a) {
                        c[0] += g.node_x(nodes[a]) / g.nodes_per_element();
                        c[1] += g.node_y(nodes[a]) / g.nodes_per_element();
                        positive = positive && u[nodes[a]] > 0.0;
                    }
                    if (positive && dist(c, p.x) <= st.collar) mark[e] = 1;
                }
            }
        }
    }
    Accumulator acc;
    for (std::size_t e = 0; e < mark.size(); ++e) {
        if (!mark[e]) continue;
        const auto p = g.element_gradient(e, u.values());
        acc.add(std::hypot(p[0], p[1]));
    }
    if (acc.n == 0) {
        st.pass = false;
        return st;
    }
    st.elements = acc.n;
    st.mean = acc.sum / acc.n;
    st.max = acc.max;
    st.min = acc.min;
    if (st.lambda_star > 0.0) {
        st.excess_max = st.max / st.lambda_star - 1.0;
        st.deficit_mean = 1.0 - st.mean / st.lambda_star;
    }
    st.pass = st.max <= st.lambda_star * (1.0 + tau) && st.mean >= st.lambda_star * (1.0 - tau);
    return st;
}

double estimate_qu(const Field& u, const GFunction& f, const Point2& x0, double r) {
    const Grid& g = u.grid();
    if (r < 4.0 * g.h() * (1 - 1e-12)) throw DomainError("estimate_qu: radius must be >= 4h");
    if (!ball_inside(g, x0, r)) throw DomainError("estimate_qu: disc leaves the domain");
    const auto fb = extract_free_boundary(u);
    const double len = fb.length_in_ball(x0, r);
    if (!(len > 0.0)) throw DomainError("estimate_qu: no interface inside the disc");
    auto flux_at = [&](const Point2& p, const Point2& n) {
        const Located loc = locate(g, u.values(), p);
        if (!(loc.value > 0.0)) return 0.0;
        const auto grad = g.element_gradient(loc.element, u.values());
        const double t = std::hypot(grad[0], grad[1]);
        if (t <= 0.0) return 0.0;
        return f.flux_coefficient(t) * (grad[0] * n[0] + grad[1] * n[1]);
    };
    double flux = 0.0;
    if (g.one_dimensional()) {
        flux = flux_at({x0[0] + r, 0.0}, {1.0, 0.0}) + flux_at({x0[0] - r, 0.0}, {-1.0, 0.0});
    } else {
        const int M = std::max(256, static_cast<int>(std::ceil(8.0 * 2.0 * std::numbers::pi * r / g.h())));
        const double ds = 2.0 * std::numbers::pi * r / M;
        for (int k = 0; k < M; ++k) {
            const double th = 2.0 * std::numbers::pi * (k + 0.5) / M;
            const Point2 n{std::cos(th), std::sin(th)};
            flux += flux_at({x0[0] + r * n[0], x0[1] + r * n[1]}, n) * ds;
        }
    }
    return flux / len;
}

BallReport perimeter_growth(const Field& u, const Point2& x0, const std::vector<double>& radii, double c, double C) {
    const Grid& g = u.grid();
    const auto fb = extract_free_boundary(u);
    BallReport rep;
    Accumulator all;
    if (fb.empty()) return rep;
    for (double r : radii) {
        if (!ball_inside(g, x0, r)) continue;
        const double ratio = fb.length_in_ball(x0, r) / (g.one_dimensional() ? 1.0 : r);
        rep.per_radius.push_back({r, ratio, ratio, ratio, 1});
        all.add(ratio);
    }
    rep.conclusive = all.n > 0;
    if (rep.conclusive) {
        rep.min = all.min;
        rep.max = all.max;
    }
    rep.pass = rep.conclusive && rep.min >= c && rep.max <= C;
    return rep;
}

Field blow_up(const Field& u, const Point2& x0, double rho, int m) {
    const Grid& g = u.grid();
    if (m < 2) throw DomainError("blow_up: resolution must be >= 2");
    if (rho < 4.0 * g.h() * (1 - 1e-12)) throw DomainError("blow_up: rho must be >= 4h");
    if (!ball_inside(g, x0, rho)) throw DomainError("blow_up: ball leaves the domain");
    auto out = std::make_shared<const Grid>(Grid::rectangle(m, m, 2.0, 2.0));
    Field v(out);
    for (int j = 0; j < m; ++j) {
        for (int i = 0; i < m; ++i) {
            const double zx = -1.0 + 2.0 * i / (m - 1), zy = -1.0 + 2.0 * j / (m - 1);
            v[out->index(i, j)] = bilinear(g, u.values(), {x0[0] + rho * zx, x0[1] + rho * zy}) / rho;
        }
    }
    return v;
}

Flatness flatness_measure(const Field& u, const Point2& x0, double rho, double lstar) {
    const Grid& g = u.grid();
    if (rho < 4.0 * g.h() * (1 - 1e-12)) throw DomainError("flatness_measure: rho must be >= 4h");
    if (!ball_inside(g, x0, rho)) throw DomainError("flatness_measure: ball leaves the domain");
    if (!(lstar > 0.0)) throw DomainError("flatness_measure: lambda* must be > 0");
    const auto fb = extract_free_boundary(u);
    Flatness out;
    std::vector<Point2> pts;
    std::vector<const FreeBoundarySet::Point*> near;
    for (const auto& p : fb.points) {
        if (dist(p.x, x0) <= rho) {
            pts.push_back(p.x);
            near.push_back(&p);
        }
    }
    if (g.one_dimensional()) {
        if (near.empty()) return out;
        out.nu = near.front()->normal;
    } else {
        if (!fit_normal(pts, out.nu)) return out;
        orient(g, near, out.nu);
    }
    out.conclusive = true;
    double sp = 0.0, sm = 0.0;
    for_nodes_in_ball(g, x0, rho, [&](std::size_t n) {
        const Point2 x = node_point(g, n);
        const double d = (x[0] - x0[0]) * out.nu[0] + (x[1] - x0[1]) * out.nu[1];
        if (u[n] > 0.0) sp = std::max(sp, d / rho);
        if (d < 0.0) sm = std::max(sm, (-d - u[n] / lstar) / rho);
    });
    out.sigma_plus = std::clamp(sp, 0.0, 1.0);
    out.sigma_minus = std::clamp(sm, 0.0, 1.0);
    return out;
}

const ConditionResult* PropertyReport::find(const std::string& name) const {
    for (const auto& c : conditions) {
        if (c.name == name) return &c;
    }
    return nullptr;
}

PropertyReport weak_solution_check(const Field& u, const GFunction& f, double lambda, const VerifyConfig& cfg) {
    check_nonnegative(u);
    const Grid& g = u.grid();
    PropertyReport rep;
    rep.lambda = lambda;
    rep.gamma = cfg.gamma;
    rep.lambda_star = lambda > 0.0 ? lambda_star(f, lambda) : 0.0;
    rep.g_lambda_star = f.g(rep.lambda_star);
    const auto fb = extract_free_boundary(u);
    rep.fb_points = fb.size();
    rep.lipschitz_max = measure_lipschitz(u);
    const std::vector<double> radii = cfg.radii.empty() ? default_radii(g, cfg.max_radius) : cfg.radii;

    // (pde) residual on nodes whose whole star lies in {u > 0}
    {
        std::vector<std::uint8_t> star_positive(g.node_count(), 1);
        for (std::size_t e = 0; e < g.element_count(); ++e) {
            const auto nodes = g.element_nodes(e);
            bool all = true;
            for (int k = 0; k < g.nodes_per_element(); ++k) all = all && u[nodes[k]] > 0.0;
            if (all) continue;
            for (int k = 0; k < g.nodes_per_element(); ++k) star_positive[nodes[k]] = 0;
        }
        const double eta = 1e-6 * std::max(rep.lambda_star, 1e-3);
        const Field res = g_laplacian_residual(u, f, eta);
        for (std::size_t n = 0; n < g.node_count(); ++n) {
            if (!g.is_boundary(n) && star_positive[n]) rep.residual_max = std::max(rep.residual_max, std::abs(res[n]));
        }
        const double scale = rep.g_lambda_star > 0.0 ? rep.g_lambda_star : 1.0;
        ConditionResult c{"pde", rep.residual_max <= cfg.residual_tol * scale, true, rep.residual_max / scale,
                          "max |residual| / g(lambda*) on nodes with positive star"};
        rep.conditions.push_back(c);
    }

    if (fb.empty()) {
        for (const char* name : {"nondegeneracy", "flux", "gradient_bound"}) {
            rep.conditions.push_back({name, true, false, 0.0, "no free boundary"});
        }
        rep.pass = rep.conditions.front().pass;
        return rep;
    }

    rep.density = verify_density(u, radii, cfg.density_c, cfg.mode);
    rep.nondegeneracy = verify_nondegeneracy(u, radii, cfg.gamma, cfg.c_min, cfg.C_max);
    rep.conditions.push_back({"nondegeneracy", rep.nondegeneracy.pass, rep.nondegeneracy.conclusive,
                              rep.nondegeneracy.min, "min Q over free-boundary points and radii"});

    // (flux) q_u against g(lambda*), over the interface (full discrete boundary used as
    // a proxy for the reduced boundary)
    std::vector<double> flux_radii{cfg.qu_radius};
    if (!(cfg.qu_radius > 0.0)) flux_radii = {8.0 * g.h(), 4.0 * g.h()};
    Accumulator q;
    for (double qr : flux_radii) {
        for (const auto& p : fb.points) {
            if (!ball_inside(g, p.x, qr)) continue;
            if (!(fb.length_in_ball(p.x, qr) > 0.0)) continue;
            const double ratio = estimate_qu(u, f, p.x, qr) / rep.g_lambda_star;
            rep.qu_ratios.push_back(ratio);
            q.add(ratio);
        }
        if (q.n > 0) {
            rep.qu_radius = qr;
            break;
        }
    }
    double qu_dev = 0.0;
    if (q.n > 0) {
        rep.qu_mean_ratio = q.sum / q.n;
        qu_dev = std::abs(rep.qu_mean_ratio - 1.0);
    }
    rep.conditions.push_back({"flux", q.n > 0 && qu_dev <= cfg.tau, q.n > 0, rep.qu_mean_ratio,
                              "mean q_u / g(lambda*) over admissible interface points"});

    rep.fb_gradient = fb_gradient_stats(u, f, lambda, cfg.tau);
    rep.conditions.push_back({"gradient_bound", rep.fb_gradient.max <= rep.lambda_star * (1.0 + cfg.tau),
                              rep.fb_gradient.elements > 0, rep.fb_gradient.max,
                              "max |grad u| over positive elements in a 2h collar"});

    rep.tau_measured = std::max({qu_dev, rep.fb_gradient.excess_max, 0.0});

    // Perimeter and flatness at the point closest to the interface centroid.
    Point2 centroid{0.0, 0.0};
    for (const auto& p : fb.points) {
        centroid[0] += p.x[0] / fb.size();
        centroid[1] += p.x[1] / fb.size();
    }
    const FreeBoundarySet::Point* centre = &fb.points.front();
    for (const auto& p : fb.points) {
        if (dist(p.x, centroid) < dist(centre->x, centroid)) centre = &p;
    }
    rep.perimeter = perimeter_growth(u, centre->x, radii, cfg.perimeter_c, cfg.perimeter_C);
    const auto& frad = cfg.flatness_radii.empty() ? radii : cfg.flatness_radii;
    for (double rho : frad) {
        if (rho < 4.0 * g.h() * (1 - 1e-12) || !ball_inside(g, centre->x, rho)) continue;
        const Flatness fl = flatness_measure(u, centre->x, rho, rep.lambda_star);
        if (fl.conclusive) rep.flatness.push_back({rho, fl.sigma_plus, fl.sigma_minus});
    }

    // Growth away from interior zero balls touching the interface.
    if (!g.one_dimensional() && rep.lambda_star > 0.0) {
        const double R = 3.0 * g.h(), reach = 8.0 * g.h();
        std::optional<double> worst;
        for (const auto& p : fb.points) {
            if (!p.reduced || !ball_inside(g, p.x, 2.0 * R + reach)) continue;
            const Point2 c{p.x[0] + R * p.normal[0], p.x[1] + R * p.normal[1]};
            bool zero_ball = true;
            for_nodes_in_ball(g, c, R, [&](std::size_t n) { zero_ball = zero_ball && u[n] == 0.0; });
            if (!zero_ball) continue;
            double best = 0.0;
            for_nodes_in_ball(g, p.x, reach, [&](std::size_t n) {
                if (!(u[n] > 0.0)) return;
                const double d = dist(node_point(g, n), c) - R;
                if (d > 0.0) best = std::max(best, u[n] / d);
            });
            worst = worst ? std::min(*worst, best) : best;
        }
        if (worst) rep.zero_ball_growth = *worst / rep.lambda_star;
    }

    rep.pass = true;
    for (const auto& c : rep.conditions) rep.pass = rep.pass && c.pass;
    return rep;
}

}  // namespace orliczfb
