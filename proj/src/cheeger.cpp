#include "polytv/cheeger.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numbers>
#include <ostream>

#include "polytv/errors.hpp"

namespace polytv {

void RefineConfig::validate() const {
    if (max_iters < 1) throw InvalidArgument("RefineConfig: max_iters must be >= 1");
    if (!(step_init > 0.0) || !(grad_tol > 0.0) || !(min_step > 0.0))
        throw InvalidArgument("RefineConfig: step_init, grad_tol and min_step must be positive");
    if (!(armijo_c > 0.0 && armijo_c < 1.0)) throw InvalidArgument("RefineConfig: armijo_c must lie in (0,1)");
    if (!(step_shrink > 0.0 && step_shrink < 1.0))
        throw InvalidArgument("RefineConfig: step_shrink must lie in (0,1)");
}

double cheeger_objective(const SimplePolygon& poly, const ScalarField& eta, const QuadratureSpec& quad) {
    return std::abs(weighted_area(poly, eta, quad)) / perimeter(poly);
}

namespace {

Point2 unit_tangent(const Point2& a, const Point2& b) { return (b - a) / distance(a, b); }
// outward normal of a counter-clockwise edge
Point2 outward(const Point2& t) { return {t.y, -t.x}; }

}  // namespace

std::vector<Point2> perimeter_gradient(std::span<const Point2> v) {
    const std::size_t n = v.size();
    std::vector<Point2> g(n);
    for (std::size_t j = 0; j < n; ++j) {
        const Point2 t_prev = unit_tangent(v[(j + n - 1) % n], v[j]);
        const Point2 t_next = unit_tangent(v[j], v[(j + 1) % n]);
        g[j] = t_prev - t_next;
    }
    return g;
}

std::vector<double> turn_angles(std::span<const Point2> v) {
    const std::size_t n = v.size();
    std::vector<double> out(n);
    for (std::size_t j = 0; j < n; ++j) {
        const Point2 a = v[j] - v[(j + n - 1) % n];
        const Point2 b = v[(j + 1) % n] - v[j];
        out[j] = std::atan2(cross(a, b), dot(a, b));
    }
    return out;
}

std::vector<Point2> shape_gradient(const SimplePolygon& poly, const ScalarField& eta,
                                   const QuadratureSpec& quad) {
    const auto v = poly.span();
    const std::size_t n = v.size();
    const double A = weighted_area(poly, eta, quad);
    const double P = perimeter(poly);
    const auto hats = edge_hat_integrals(poly, eta, quad);
    const auto dP = perimeter_gradient(v);
    const double s = A >= 0.0 ? 1.0 : -1.0;
    std::vector<Point2> g(n);
    for (std::size_t j = 0; j < n; ++j) {
        const Point2 nu_prev = outward(unit_tangent(v[(j + n - 1) % n], v[j]));
        const Point2 nu_next = outward(unit_tangent(v[j], v[(j + 1) % n]));
        const Point2 dA = hats[j].minus * nu_prev + hats[j].plus * nu_next;
        g[j] = s * (P * dA - A * dP[j]) / (P * P);
    }
    return g;
}

double optimality_residual(const SimplePolygon& poly, const ScalarField& eta, const QuadratureSpec& quad) {
    const auto v = poly.span();
    const std::size_t n = v.size();
    const auto angles = turn_angles(v);
    for (std::size_t j = 0; j < n; ++j)
        if (std::numbers::pi - std::abs(angles[j]) <= 1e-9)
            throw DegenerateAngle("optimality_residual: exterior angle at vertex " + std::to_string(j) +
                                  " is within 1e-9 of +-pi");
    const double P = perimeter(poly);
    const double rho = weighted_area(poly, eta, quad) / P;
    if (rho == 0.0) throw DegenerateAngle("optimality_residual: int_E eta vanishes");
    const auto hats = edge_hat_integrals(poly, eta, quad);
    double worst = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        const double target = rho * std::tan(0.5 * angles[j]);
        worst = std::max({worst, std::abs(hats[j].plus - target), std::abs(hats[j].minus - target)});
    }
    return worst / (std::abs(rho) * P / static_cast<double>(n));
}

std::string to_string(RefineStop s) {
    switch (s) {
        case RefineStop::gradient: return "gradient";
        case RefineStop::min_step: return "min_step";
        case RefineStop::max_iters: return "max_iters";
    }
    return "unknown";
}

RefineResult refine(const SimplePolygon& poly0, const ScalarField& eta, const RefineConfig& cfg,
                    const QuadratureSpec& quad, std::ostream* trace) {
    cfg.validate();
    RefineResult res{poly0};
    double J = cheeger_objective(poly0, eta, quad);
    res.initial_objective = J;
    if (trace) *trace << "iter,J,step,grad_norm\n" << std::setprecision(17);

    std::vector<Point2> x(poly0.vertices()), x_prev;
    std::vector<Point2> theta_prev;
    double last_step = 0.0;
    for (int it = 0;; ++it) {
        const SimplePolygon current(x);
        const auto theta = shape_gradient(current, eta, quad);
        double sq = 0.0, peak = 0.0;
        for (const auto& t : theta) {
            sq += dot(t, t);
            peak = std::max(peak, norm(t));
        }
        const double gnorm = std::sqrt(sq);
        const double diam = diameter(current);
        res.grad_norm = gnorm;
        if (trace) *trace << it << ',' << J << ',' << last_step << ',' << gnorm << '\n';
        if (!(J > 0.0) || gnorm * diam / J < cfg.grad_tol) {
            res.stopped_by = RefineStop::gradient;
            break;
        }
        if (it >= cfg.max_iters) {
            res.stopped_by = RefineStop::max_iters;
            break;
        }

        // first trial: Barzilai-Borwein step when the last move saw concavity, else the rule step
        const double rule = cfg.step_init * diam / peak;
        const double cap = 0.25 * diam / peak;
        double alpha = rule;
        if (!x_prev.empty()) {
            double ss = 0.0, sy = 0.0, yy = 0.0;
            for (std::size_t j = 0; j < x.size(); ++j) {
                const Point2 s = x[j] - x_prev[j], d = theta[j] - theta_prev[j];
                ss += dot(s, s);
                sy += dot(s, d);
                yy += dot(d, d);
            }
            if (sy < 0.0) alpha = it % 2 ? ss / -sy : -sy / yy;
        }
        alpha = std::min(alpha, cap);
        bool accepted = false, saw_simple = false;
        std::vector<Point2> trial(x.size());
        while (alpha * peak >= cfg.min_step * diam) {
            for (std::size_t j = 0; j < x.size(); ++j) trial[j] = x[j] + alpha * theta[j];
            if (is_simple(trial)) {
                saw_simple = true;
                const double Jt = cheeger_objective(SimplePolygon(trial), eta, quad);
                if (Jt >= J + cfg.armijo_c * alpha * sq) {
                    x_prev = x;
                    theta_prev = theta;
                    x = trial;
                    J = Jt;
                    last_step = alpha;
                    accepted = true;
                    break;
                }
            }
            alpha *= cfg.step_shrink;
        }
        if (!accepted) {
            if (!saw_simple)
                throw StalledAtNonSimple("refine: every trial step down to min_step breaks simplicity");
            res.stopped_by = RefineStop::min_step;
            break;
        }
        ++res.iterations;
    }
    res.polygon = SimplePolygon(x);
    res.objective = J;
    return res;
}

}  // namespace polytv
