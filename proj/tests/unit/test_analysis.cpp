#include <gtest/gtest.h>

#include <cmath>
#include <memory>
#include <numbers>
#include <random>

#include "orliczfb/analysis.hpp"
#include "orliczfb/numerics.hpp"

using namespace orliczfb;

namespace {

std::shared_ptr<const Grid> square(int n, double L = 1.0) {
    return std::make_shared<const Grid>(Grid::rectangle(n + 1, n + 1, L, L));
}

// slope * <x - x0, nu>^-
Field plane(const std::shared_ptr<const Grid>& g, double slope, double angle, Point2 x0) {
    const double nx = std::cos(angle), ny = std::sin(angle);
    return Field::sample(g, [=](double x, double y) {
        return slope * std::max(0.0, -((x - x0[0]) * nx + (y - x0[1]) * ny));
    });
}

// (mean over the unit disc of (<z, e>^-)^2)^(1/2) by a polar midpoint rule.
double half_plane_disc_rms() {
    const int n = 400;
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
        const double rho = (i + 0.5) / n;
        for (int k = 0; k < n; ++k) {
            const double th = 2.0 * std::numbers::pi * (k + 0.5) / n;
            const double v = std::max(0.0, -rho * std::cos(th));
            acc += v * v * rho;
        }
    }
    acc *= (1.0 / n) * (2.0 * std::numbers::pi / n);
    return std::sqrt(acc / std::numbers::pi);
}

// Same over the interval [-1, 1].
double half_line_rms() {
    const int n = 100000;
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
        const double z = -1.0 + 2.0 * (i + 0.5) / n;
        acc += std::pow(std::max(0.0, -z), 2) * (2.0 / n);
    }
    return std::sqrt(acc / 2.0);
}

}  // namespace

TEST(FreeBoundary, EmptyForConstantFields) {
    auto g = square(16);
    EXPECT_TRUE(extract_free_boundary(Field::sample(g, [](double, double) { return 1.0; })).empty());
    EXPECT_TRUE(extract_free_boundary(Field(g)).empty());
}

TEST(FreeBoundary, PointsLieOnEdgesBetweenPositiveAndZeroNodes) {
    auto g = square(32);
    const Field u = plane(g, 1.0, 0.4, {0.51, 0.47});
    const auto fb = extract_free_boundary(u);
    ASSERT_FALSE(fb.empty());
    for (const auto& p : fb.points) {
        EXPECT_GT(u[p.positive_node], 0.0);
        EXPECT_EQ(u[p.zero_node], 0.0);
        const Point2 a{g->node_x(p.positive_node), g->node_y(p.positive_node)};
        const Point2 b{g->node_x(p.zero_node), g->node_y(p.zero_node)};
        const double da = std::hypot(p.x[0] - a[0], p.x[1] - a[1]), db = std::hypot(p.x[0] - b[0], p.x[1] - b[1]);
        const double edge = std::hypot(b[0] - a[0], b[1] - a[1]);
        EXPECT_LE(edge, std::sqrt(2.0) * g->h() * (1 + 1e-12));
        EXPECT_NEAR(da + db, edge, 1e-12);
        // On a plane the point is the exact zero crossing of the edge.
        const double level = (p.x[0] - 0.51) * std::cos(0.4) + (p.x[1] - 0.47) * std::sin(0.4);
        EXPECT_NEAR(level, 0.0, 1e-12);
    }
}

TEST(FreeBoundary, NormalsPointIntoZeroSet) {
    auto g = square(64);
    for (double angle : {0.0, 0.3, 1.0, 2.5, -2.0}) {
        const Field u = plane(g, 1.0, angle, {0.5, 0.5});
        const auto fb = extract_free_boundary(u);
        int fitted = 0;
        for (const auto& p : fb.points) {
            if (!p.reduced) continue;
            ++fitted;
            EXPECT_NEAR(std::hypot(p.normal[0], p.normal[1]), 1.0, 1e-12);
            EXPECT_GT(p.normal[0] * std::cos(angle) + p.normal[1] * std::sin(angle), 0.99) << angle;
        }
        EXPECT_GT(fitted, static_cast<int>(fb.size()) / 2);
    }
}

TEST(FreeBoundary, TranslationAlongGridAxes) {
    auto g = std::make_shared<const Grid>(Grid::rectangle(65, 49, 2.0, 1.5));
    const double h = g->hx();
    const int shift_i = 5, shift_j = 3;
    auto bump = [](double x, double y) { return std::max(0.0, 0.2 - std::hypot(x - 0.6, y - 0.6)); };
    const Field u = Field::sample(g, bump);
    const Field v = Field::sample(g, [&](double x, double y) { return bump(x - shift_i * h, y - shift_j * h); });
    const auto a = extract_free_boundary(u), b = extract_free_boundary(v);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t k = 0; k < a.size(); ++k) {
        EXPECT_NEAR(b.points[k].x[0] - a.points[k].x[0], shift_i * h, 1e-12);
        EXPECT_NEAR(b.points[k].x[1] - a.points[k].x[1], shift_j * h, 1e-12);
        EXPECT_NEAR(b.points[k].normal[0], a.points[k].normal[0], 1e-9);
        EXPECT_NEAR(b.points[k].normal[1], a.points[k].normal[1], 1e-9);
    }
}

TEST(FreeBoundary, CircleLengthApproachesCircumference) {
    auto g = square(128);
    const Field u = Field::sample(g, [](double x, double y) { return std::max(0.0, 0.3 - std::hypot(x - 0.5, y - 0.5)); });
    const auto fb = extract_free_boundary(u);
    EXPECT_NEAR(fb.length_in_ball({0.5, 0.5}, 0.45), 2.0 * std::numbers::pi * 0.3, 0.01);
}

TEST(Lipschitz, ScalesWithSlopeAndRespectsBox) {
    auto g = square(32);
    EXPECT_NEAR(measure_lipschitz(plane(g, 2.5, 0.7, {0.5, 0.5})), 2.5, 1e-12);
    const Field u = Field::sample(g, [](double x, double) { return x < 0.5 ? 3.0 * (0.5 - x) : x - 0.5; });
    EXPECT_NEAR(measure_lipschitz(u), 3.0, 1e-12);
    EXPECT_NEAR(measure_lipschitz(u, Box{0.5, 1.0, 0.0, 1.0}), 1.0, 1e-12);
}

TEST(PlaneField, DensityPerimeterGradientAndFlux) {
    const auto f = GFunction::power(2.0);
    const double lambda = 0.5, ls = lambda_star(f, lambda);
    auto g = square(128);
    const double h = g->h();
    for (double angle : {0.0, 0.3, std::numbers::pi / 4, 1.2}) {
        const Field u = plane(g, ls, angle, {0.5, 0.5});
        const auto radii = default_radii(*g, 0.25);
        const auto dens = verify_density(u, radii);
        for (const auto& rs : dens.per_radius) {
            EXPECT_NEAR(rs.min, 0.5, 2.0 * h / rs.r) << angle;
            EXPECT_NEAR(rs.max, 0.5, 2.0 * h / rs.r) << angle;
        }
        const auto per = perimeter_growth(u, {0.5, 0.5}, {0.0625, 0.125, 0.25});
        ASSERT_TRUE(per.conclusive);
        EXPECT_NEAR(per.min, 2.0, 0.01);
        EXPECT_NEAR(per.max, 2.0, 0.01);
        const auto gs = fb_gradient_stats(u, f, lambda);
        EXPECT_NEAR(gs.max, ls, 1e-12);
        EXPECT_NEAR(gs.mean, ls, 1e-12);
        EXPECT_TRUE(gs.pass);
        EXPECT_NEAR(estimate_qu(u, f, {0.5, 0.5}, 0.125) / f.g(ls), 1.0, 0.05) << angle;
    }
}

TEST(PlaneField, NondegeneracyMatchesDiscAverage) {
    const auto f = GFunction::power(3.0);
    const double ls = lambda_star(f, 0.7);
    auto g = square(128);
    const double expected = ls * half_plane_disc_rms();
    EXPECT_NEAR(half_plane_disc_rms(), 1.0 / std::sqrt(8.0), 1e-4);
    for (double angle : {0.0, 0.5}) {
        const auto rep = verify_nondegeneracy(plane(g, ls, angle, {0.5, 0.5}), default_radii(*g, 0.25));
        ASSERT_TRUE(rep.conclusive);
        EXPECT_TRUE(rep.pass);
        for (const auto& rs : rep.per_radius) EXPECT_NEAR(rs.mean / expected, 1.0, 0.05) << rs.r;
    }
}

TEST(PlaneField, OneDimensionalWedgeMatchesIntervalAverage) {
    const auto f = GFunction::power(2.0);
    const double ls = lambda_star(f, 0.5);
    auto g = std::make_shared<const Grid>(Grid::rectangle(257, 1, 2.0, 0.0));
    const Field u = Field::sample(g, [&](double x, double) { return ls * std::max(0.0, 1.0 - x); });
    const auto rep = verify_nondegeneracy(u, {0.0625, 0.125, 0.25});
    ASSERT_TRUE(rep.conclusive);
    for (const auto& rs : rep.per_radius) EXPECT_NEAR(rs.mean / (ls * half_line_rms()), 1.0, 0.05);
    EXPECT_NEAR(half_line_rms(), 1.0 / std::sqrt(6.0), 1e-6);
    const auto dens = verify_density(u, {0.0625, 0.125});
    EXPECT_NEAR(dens.min, 0.5, 0.05);
    EXPECT_NEAR(estimate_qu(u, f, {1.0, 0.0}, 0.125) / f.g(ls), 1.0, 1e-9);
}

TEST(PlaneField, FlatnessIsSmall) {
    auto g = square(128);
    const double h = g->h();
    for (double angle : {0.0, 0.3, 2.0}) {
        const Field u = plane(g, 1.0, angle, {0.5, 0.5});
        const auto fb = extract_free_boundary(u);
        for (double rho : {0.0625, 0.125, 0.25}) {
            const auto fl = flatness_measure(u, {0.5, 0.5}, rho, 1.0);
            ASSERT_TRUE(fl.conclusive);
            EXPECT_LE(fl.sigma_plus, 2.0 * h / rho);
            EXPECT_LE(fl.sigma_minus, 2.0 * h / rho);
            EXPECT_GT(fl.nu[0] * std::cos(angle) + fl.nu[1] * std::sin(angle), 0.999);
        }
    }
}

TEST(PlaneField, BlowUpOfPlaneIsThePlane) {
    auto g = square(128);
    const Field u = plane(g, 1.0, 0.0, {0.5, 0.5});
    for (double rho : {0.0625, 0.25}) {
        const Field v = blow_up(u, {0.5, 0.5}, rho, 33);
        for (std::size_t n = 0; n < v.size(); ++n) {
            EXPECT_NEAR(v[n], std::max(0.0, -v.grid().node_x(n) + 1.0), 1e-12);
        }
    }
    EXPECT_THROW(blow_up(u, {0.5, 0.5}, 2.0 * g->h(), 33), DomainError);
    EXPECT_THROW(blow_up(u, {0.05, 0.5}, 0.1, 33), DomainError);
    EXPECT_THROW(flatness_measure(u, {0.5, 0.5}, 2.0 * g->h(), 1.0), DomainError);
}

TEST(ScalingCovariance, BallQuantitiesAreInvariant) {
    auto g1 = square(64, 1.0), g2 = square(64, 2.0);
    auto bump = [](double x, double y) { return std::max(0.0, 0.25 - std::hypot(x - 0.5, y - 0.45)); };
    const Field u = Field::sample(g1, bump);
    const Field us = Field::sample(g2, [&](double x, double y) { return 2.0 * bump(x / 2.0, y / 2.0); });
    const std::vector<double> r1{0.0625, 0.125}, r2{0.125, 0.25};
    const auto q1 = verify_nondegeneracy(u, r1), q2 = verify_nondegeneracy(us, r2);
    const auto d1 = verify_density(u, r1), d2 = verify_density(us, r2);
    ASSERT_EQ(q1.per_radius.size(), q2.per_radius.size());
    for (std::size_t k = 0; k < q1.per_radius.size(); ++k) {
        EXPECT_NEAR(q1.per_radius[k].mean, q2.per_radius[k].mean, 1e-12);
        EXPECT_NEAR(d1.per_radius[k].mean, d2.per_radius[k].mean, 1e-12);
    }
    const auto p1 = perimeter_growth(u, {0.25, 0.45}, r1), p2 = perimeter_growth(us, {0.5, 0.9}, r2);
    EXPECT_NEAR(p1.min, p2.min, 1e-12);
    const auto f1 = flatness_measure(u, {0.25, 0.45}, 0.125, 1.0), f2 = flatness_measure(us, {0.5, 0.9}, 0.25, 1.0);
    EXPECT_NEAR(f1.sigma_plus, f2.sigma_plus, 1e-12);
    EXPECT_NEAR(f1.sigma_minus, f2.sigma_minus, 1e-12);
}

TEST(Inconclusive, NoAdmissibleRadius) {
    auto g = square(16);
    const Field u = plane(g, 1.0, 0.0, {0.5, 0.5});
    const auto rep = verify_density(u, {0.01});
    EXPECT_FALSE(rep.conclusive);
    EXPECT_FALSE(rep.pass);
    EXPECT_THROW(estimate_qu(u, GFunction::power(2.0), {0.5, 0.5}, 0.1), DomainError);
}

TEST(Inconclusive, RejectsNegativeValues) {
    auto g = square(8);
    Field u = plane(g, 1.0, 0.0, {0.5, 0.5});
    u[3] = -1e-3;
    EXPECT_THROW(verify_density(u, {0.5}), DomainError);
}

TEST(WeakCheck, PlaneWithCorrectSlopePasses) {
    const auto f = GFunction::power(2.0);
    const double lambda = 0.5, ls = lambda_star(f, lambda);
    auto g = square(128);
    const auto rep = weak_solution_check(plane(g, ls, 0.3, {0.5, 0.5}), f, lambda);
    EXPECT_TRUE(rep.pass);
    for (const char* name : {"pde", "nondegeneracy", "flux", "gradient_bound"}) {
        ASSERT_NE(rep.find(name), nullptr);
        EXPECT_TRUE(rep.find(name)->pass) << name;
        EXPECT_TRUE(rep.find(name)->evaluated) << name;
    }
    EXPECT_LE(rep.tau_measured, 0.05);
    ASSERT_TRUE(rep.zero_ball_growth.has_value());
    EXPECT_NEAR(*rep.zero_ball_growth, 1.0, 0.15);
}

TEST(WeakCheck, WrongSlopeFailsGradientBound) {
    const auto f = GFunction::power(3.0);
    const double lambda = 0.6, ls = lambda_star(f, lambda);
    auto g = square(64);
    const auto rep = weak_solution_check(plane(g, 2.0 * ls, 0.0, {0.5, 0.5}), f, lambda);
    EXPECT_FALSE(rep.pass);
    EXPECT_FALSE(rep.find("gradient_bound")->pass);
    EXPECT_FALSE(rep.find("flux")->pass);
    EXPECT_NEAR(rep.fb_gradient.excess_max, 1.0, 1e-9);
}

TEST(WeakCheck, CurvedFieldFailsPde) {
    const auto f = GFunction::power(2.0);
    auto g = square(64);
    const Field u = Field::sample(g, [](double x, double y) { return std::max(0.0, 0.5 - x) * (1.0 + y * y); });
    const auto rep = weak_solution_check(u, f, 0.5);
    EXPECT_FALSE(rep.find("pde")->pass);
}

TEST(WeakCheck, PositiveFieldHasNoInterfaceConditions) {
    const auto f = GFunction::power(2.0);
    auto g = square(16);
    const auto rep = weak_solution_check(Field::sample(g, [](double x, double) { return 1.0 + x; }), f, 0.5);
    EXPECT_TRUE(rep.pass);
    EXPECT_EQ(rep.fb_points, 0u);
    EXPECT_FALSE(rep.find("flux")->evaluated);
}

TEST(Properties, DensityOfRandomSupportsIsAFraction) {
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> U(0.3, 0.7), R(0.1, 0.28);
    auto g = square(48);
    for (int trial = 0; trial < 20; ++trial) {
        const double cx = U(rng), cy = U(rng), r = R(rng);
        const Field u = Field::sample(g, [&](double x, double y) { return std::max(0.0, r - std::hypot(x - cx, y - cy)); });
        const auto rep = verify_density(u, {4.0 * g->h(), 8.0 * g->h()}, 0.05, VerifyMode::Weak);
        for (const auto& rs : rep.per_radius) {
            EXPECT_GE(rs.min, 0.0);
            EXPECT_LE(rs.max, 1.0);
            EXPECT_LE(rs.min, rs.mean);
            EXPECT_LE(rs.mean, rs.max);
        }
        const auto fb = extract_free_boundary(u);
        const double L = fb.length_in_ball({cx, cy}, 1.0);
        EXPECT_GT(L, 0.9 * 2.0 * std::numbers::pi * r);
        EXPECT_LT(L, 1.1 * 2.0 * std::numbers::pi * r);
    }
}

TEST(Properties, QIsHomogeneousInAmplitude) {
    std::mt19937 rng(5);
    std::uniform_real_distribution<double> A(0.1, 10.0);
    auto g = square(32);
    const Field u = plane(g, 1.0, 0.2, {0.5, 0.5});
    const auto base = verify_nondegeneracy(u, {0.125});
    for (int trial = 0; trial < 10; ++trial) {
        const double a = A(rng);
        Field v = u;
        for (auto& x : v.values()) x *= a;
        const auto rep = verify_nondegeneracy(v, {0.125}, 2.0, 0.0, 1e9);
        EXPECT_NEAR(rep.min, a * base.min, 1e-12 * a);
        EXPECT_NEAR(rep.max, a * base.max, 1e-12 * a);
    }
}

TEST(WeakCheck, StripMinimizerPasses) {
    const auto f = GFunction::power(2.0);
    const double lambda = 0.5;
    auto g = std::make_shared<const Grid>(
        Grid::rectangle(65, 33, 2.0, 1.0).with_dirichlet([](double x, double) { return std::max(0.0, 1.0 - x); }));
    SolveOptions opts;
    opts.restarts = 0;
    const auto sol = minimize(g, f, lambda, opts);
    const auto rep = weak_solution_check(sol.u, f, lambda);
    EXPECT_TRUE(rep.pass);
    EXPECT_LE(rep.tau_measured, 0.15);
    EXPECT_TRUE(rep.density.pass);
    EXPECT_TRUE(rep.perimeter.pass);
    EXPECT_NEAR(rep.lipschitz_max, 1.0, 1e-6);
}
