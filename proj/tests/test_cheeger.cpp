#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>
#include <tuple>

#include "polytv/cheeger.hpp"
#include "polytv/errors.hpp"
#include "polytv/radial_oracle.hpp"
#include "support.hpp"

using namespace polytv;

namespace {

const QuadratureSpec qs{};
const double pi = std::numbers::pi;

// Quadrature refined well below the finite-difference truncation error.
QuadratureSpec tight() {
    QuadratureSpec q;
    q.refine_tol = 1e-14;
    q.max_subdivision_depth = 30;
    return q;
}

const auto gauss = [](const Point2& p) { return testing::gaussian(p); };

double J_at(const std::vector<Point2>& x, const ScalarField& eta, const QuadratureSpec& q) {
    return cheeger_objective(SimplePolygon(x), eta, q);
}

double radius_cv(const SimplePolygon& p, Point2 c) {
    double mean = 0.0, sq = 0.0;
    for (const auto& v : p.vertices()) mean += distance(v, c);
    mean /= static_cast<double>(p.size());
    for (const auto& v : p.vertices()) sq += std::pow(distance(v, c) - mean, 2);
    return std::sqrt(sq / static_cast<double>(p.size())) / mean;
}

double mean_radius(const SimplePolygon& p, Point2 c) {
    double mean = 0.0;
    for (const auto& v : p.vertices()) mean += distance(v, c);
    return mean / static_cast<double>(p.size());
}

}  // namespace

TEST_CASE("cheeger objective examples") {
    std::mt19937_64 rng(41);
    const auto one = [](const Point2&) { return 1.0; };
    for (int trial = 0; trial < 10; ++trial) {
        const SimplePolygon p(testing::random_star(rng, 8));
        CHECK(cheeger_objective(p, one, qs) == doctest::Approx(signed_area(p.span()) / perimeter(p)).epsilon(1e-12));
        const auto shifted = [](const Point2& x) { return testing::gaussian(x - Point2{0.3, 0.2}); };
        const auto negated = [&](const Point2& x) { return -shifted(x); };
        CHECK(cheeger_objective(p, shifted, qs) == doctest::Approx(cheeger_objective(p, negated, qs)).epsilon(1e-15));
    }
    const auto g = radial::RadialProfile::gaussian(1.0);
    const double Rs = radial::R_star(g);
    const double J64 = cheeger_objective(regular_polygon({0, 0}, Rs, 64), gauss, qs);
    CHECK(std::abs(J64 - radial::G(g, Rs)) / radial::G(g, Rs) < 2e-3);
    // and equal to the polygon formula itself
    CHECK(J64 == doctest::Approx(radial::G_n(g, 64, Rs)).epsilon(1e-7));
}

TEST_CASE("shape gradient is radial and symmetric for a centered field") {
    for (int n : {3, 5, 8}) {
        const auto p = regular_polygon({0, 0}, 1.2, n, 0.3);
        const auto th = shape_gradient(p, gauss, qs);
        const double r0 = norm(th[0]);
        for (int j = 0; j < n; ++j) {
            const Point2 v = p[static_cast<std::size_t>(j)];
            CHECK(std::abs(cross(th[static_cast<std::size_t>(j)], v)) < 1e-10 * r0 * norm(v));
            CHECK(norm(th[static_cast<std::size_t>(j)]) == doctest::Approx(r0).epsilon(1e-9));
        }
    }
}

TEST_CASE("perimeter gradient matches finite differences") {
    std::mt19937_64 rng(42);
    for (int trial = 0; trial < 20; ++trial) {
        auto x = testing::random_star(rng, 6 + trial % 7);
        const auto g = perimeter_gradient(x);
        const double eps = 1e-6 * diameter(x);
        double worst = 0.0, scale = 0.0;
        for (std::size_t j = 0; j < x.size(); ++j)
            for (int c = 0; c < 2; ++c) {
                auto xp = x, xm = x;
                (c ? xp[j].y : xp[j].x) += eps;
                (c ? xm[j].y : xm[j].x) -= eps;
                const double fd = (perimeter(xp) - perimeter(xm)) / (2 * eps);
                worst = std::max(worst, std::abs(fd - (c ? g[j].y : g[j].x)));
                scale = std::max(scale, std::abs(c ? g[j].y : g[j].x));
            }
        CHECK(worst <= 1e-6 * scale);
    }
}

TEST_CASE("shape gradient matches central finite differences on random polygons") {
    std::mt19937_64 rng(43);
    std::uniform_real_distribution<double> off(-0.5, 0.5);
    const QuadratureSpec q = tight();
    for (int trial = 0; trial < 20; ++trial) {
        const Point2 c{off(rng), off(rng)};
        const auto eta = [c](const Point2& p) { return testing::gaussian(p - c); };
        const auto x = testing::random_star(rng, 5 + trial % 8);
        const auto th = shape_gradient(SimplePolygon(x), eta, q);
        const double eps = 1e-6 * diameter(x);
        double worst = 0.0, scale = 0.0;
        for (std::size_t j = 0; j < x.size(); ++j)
            for (int k = 0; k < 2; ++k) {
                auto xp = x, xm = x;
                (k ? xp[j].y : xp[j].x) += eps;
                (k ? xm[j].y : xm[j].x) -= eps;
                const double fd = (J_at(xp, eta, q) - J_at(xm, eta, q)) / (2 * eps);
                const double an = k ? th[j].y : th[j].x;
                worst = std::max(worst, std::abs(fd - an));
                scale = std::max(scale, std::abs(an));
            }
        CHECK(worst <= 1e-4 * scale);

        // directional derivative along theta is |theta|^2
        double sq = 0.0;
        for (const auto& t : th) sq += dot(t, t);
        auto xp = x, xm = x;
        for (std::size_t j = 0; j < x.size(); ++j) {
            xp[j] += (eps / std::sqrt(sq)) * th[j];
            xm[j] -= (eps / std::sqrt(sq)) * th[j];
        }
        const double dd = (J_at(xp, eta, q) - J_at(xm, eta, q)) / (2 * eps / std::sqrt(sq));
        CHECK(std::abs(dd - sq) <= 1e-4 * sq);
    }
}

TEST_CASE("optimality residual examples") {
    const auto g = radial::RadialProfile::gaussian(1.0);
    for (int n : {3, 4, 8, 16}) {
        const double Rn = radial::R_star_n(g, n);
        const auto crit = regular_polygon({0, 0}, Rn, n);
        CHECK(optimality_residual(crit, gauss, qs) < 1e-3);
        const auto dilated = regular_polygon({0, 0}, 1.5 * Rn, n);
        CHECK(optimality_residual(dilated, gauss, qs) > 0.05);
    }
    // a straight vertex has turn angle 0; the residual is finite and large
    const SimplePolygon straight({{0, 0}, {1, 0}, {2, 0}, {2, 2}, {0, 2}});
    CHECK(optimality_residual(straight, [](const Point2&) { return 1.0; }, qs) > 0.1);
    // a vanishing weighted area leaves no reference scale
    const SimplePolygon sq({{-1, -1}, {1, -1}, {1, 1}, {-1, 1}});
    CHECK_THROWS_AS(optimality_residual(sq, [](const Point2& p) { return p.x; }, qs), DegenerateAngle);
}

TEST_CASE("turn angles") {
    const auto t = turn_angles(testing::unit_square());
    for (double a : t) CHECK(a == doctest::Approx(pi / 2));
    const std::vector<Point2> spike{{0, 0}, {1, 0}, {0, 1e-11}};
    const auto s = turn_angles(spike);
    CHECK(pi - std::abs(s[1]) < 1e-9);
}

TEST_CASE("refine from an inscribed square converges to the critical square") {
    const auto g = radial::RadialProfile::gaussian(1.0);
    const SimplePolygon start({{0.5, 0.0}, {0.0, 0.5}, {-0.5, 0.0}, {0.0, -0.5}});
    std::ostringstream trace;
    const auto r = refine(start, gauss, RefineConfig{}, qs, &trace);
    CHECK(r.objective >= r.initial_objective);
    const Point2 c = vertex_centroid(r.polygon.span());
    CHECK(radius_cv(r.polygon, c) < 1e-2);
    CHECK(mean_radius(r.polygon, c) == doctest::Approx(radial::R_star_n(g, 4)).epsilon(1e-2));
    CHECK(optimality_residual(r.polygon, gauss, qs) < 1e-3);

    // the trace is monotone in J
    std::istringstream in(trace.str());
    std::string line;
    std::getline(in, line);
    CHECK(line == "iter,J,step,grad_norm");
    double prev = -1.0;
    int rows = 0;
    while (std::getline(in, line)) {
        const double J = std::stod(line.substr(line.find(',') + 1));
        CHECK(J >= prev);
        prev = J;
        ++rows;
    }
    CHECK(rows == r.iterations + 1);
}

TEST_CASE("refine leaves a critical polygon in place") {
    const auto g = radial::RadialProfile::gaussian(1.0);
    const auto crit = regular_polygon({0, 0}, radial::R_star_n(g, 6), 6);
    const auto r = refine(crit, gauss, RefineConfig{}, qs);
    CHECK(r.iterations <= 1);
    for (std::size_t j = 0; j < crit.size(); ++j) CHECK(distance(r.polygon[j], crit[j]) < 1e-9);
}

TEST_CASE("refine under a compactly supported bump stays inside the support") {
    const auto bump = [](const Point2& p) {
        const double s = 1.0 - (p.x * p.x + p.y * p.y);
        return s > 0.0 ? s * s : 0.0;
    };
    const auto r = refine(regular_polygon({0.1, -0.05}, 0.2, 12), bump, RefineConfig{}, qs);
    CHECK(r.objective > r.initial_objective);
    for (const auto& v : r.polygon.vertices()) {
        CHECK(std::abs(v.x) <= 1.0);
        CHECK(std::abs(v.y) <= 1.0);
    }
}

TEST_CASE("refine is equivariant under rotations") {
    const auto eta = [](const Point2& p) {
        return testing::gaussian(p - Point2{0.4, 0.0}, 0.8) + 0.6 * testing::gaussian(p + Point2{0.5, 0.3}, 0.6);
    };
    const auto start = regular_polygon({0.0, 0.0}, 0.6, 10, 0.1);
    const double angle = 0.7;
    std::vector<Point2> rotated;
    for (const auto& v : start.vertices()) rotated.push_back(rotate(v, angle));
    const auto eta_rot = [&](const Point2& p) { return eta(rotate(p, -angle)); };

    auto compare = [&](const RefineConfig& cfg) {
        const auto a = refine(start, eta, cfg, qs);
        const auto b = refine(SimplePolygon(rotated), eta_rot, cfg, qs);
        REQUIRE(a.polygon.size() == b.polygon.size());
        const std::size_t n = a.polygon.size();
        double best = 1e300;
        for (std::size_t s = 0; s < n; ++s) {
            double worst = 0.0;
            for (std::size_t j = 0; j < n; ++j)
                worst = std::max(worst, distance(rotate(a.polygon[j], angle), b.polygon[(j + s) % n]));
            best = std::min(best, worst);
        }
        std::vector<Point2> back;
        for (const auto& v : a.polygon.vertices()) back.push_back(rotate(v, angle));
        return std::tuple{best / diameter(a.polygon), std::abs(a.objective - b.objective),
                          hausdorff_distance(back, b.polygon.span()) / diameter(a.polygon)};
    };

    // a fixed iteration budget: the two runs follow the same path
    RefineConfig short_run;
    short_run.max_iters = 50;
    const auto [vertex_gap, dJ, haus] = compare(short_run);
    CHECK(vertex_gap <= 1e-6);
    CHECK(dJ <= 1e-12);

    // run to the stopping rule: rounding differences move the two runs apart
    // along a nearly flat valley of critical 10-gons, so only the shape is compared
    const auto [gap_full, dJ_full, haus_full] = compare(RefineConfig{});
    CHECK(dJ_full <= 1e-9);
    CHECK(haus_full <= 1e-3);
    MESSAGE("converged runs differ by " << gap_full << " diam at the vertices");
}

TEST_CASE("refine configuration validation") {
    RefineConfig c;
    c.armijo_c = 1.0;
    CHECK_THROWS_AS(c.validate(), InvalidArgument);
    c = {};
    c.step_shrink = 0.0;
    CHECK_THROWS_AS(c.validate(), InvalidArgument);
    c = {};
    c.max_iters = 0;
    CHECK_THROWS_AS(c.validate(), InvalidArgument);
}
