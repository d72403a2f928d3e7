#include "polytv/quadrature.hpp"

#include <cmath>
#include <numbers>

namespace polytv::quad {

Rule1D gauss_legendre(int n) {
    if (n < 1) throw InvalidArgument("gauss_legendre: order must be >= 1");
    Rule1D rule;
    rule.nodes.assign(n, 0.5);
    rule.weights.assign(n, 1.0);
    if (n == 1) return rule;

    // Legendre P_n and its derivative at x.
    auto legendre = [n](double x, double& dp) {
        double p0 = 1.0, p1 = x;
        for (int k = 2; k <= n; ++k) {
            const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
            p0 = p1;
            p1 = p2;
        }
        dp = n * (x * p1 - p0) / (x * x - 1.0);
        return p1;
    };
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            const double dx = legendre(x, dp) / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16) break;
        }
        legendre(x, dp);
        const double w = 1.0 / ((1.0 - x * x) * dp * dp);  // half of the [-1,1] weight
        rule.nodes[i] = 0.5 * (1.0 - x);
        rule.nodes[n - 1 - i] = 0.5 * (1.0 + x);
        rule.weights[i] = w;
        rule.weights[n - 1 - i] = w;
    }
    return rule;
}

TriangleRule triangle_rule(int order) {
    TriangleRule r;
    if (order == 1) {
        r.xi = {1.0 / 3.0};
        r.eta = {1.0 / 3.0};
        r.weights = {1.0};
    } else if (order == 3) {
        r.xi = {1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0};
        r.eta = {1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0};
        r.weights = {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
    } else if (order == 7) {
        // degree-5 rule with D3 symmetry
        const double s15 = std::sqrt(15.0);
        const double a1 = (6.0 - s15) / 21.0, b1 = 1.0 - 2.0 * a1, w1 = (155.0 - s15) / 1200.0;
        const double a2 = (6.0 + s15) / 21.0, b2 = 1.0 - 2.0 * a2, w2 = (155.0 + s15) / 1200.0;
        r.xi = {1.0 / 3.0, a1, b1, a1, a2, b2, a2};
        r.eta = {1.0 / 3.0, a1, a1, b1, a2, a2, b2};
        r.weights = {9.0 / 40.0, w1, w1, w1, w2, w2, w2};
    } else if (order >= 1) {
        // collapsed Gauss product on the square (u, v) -> (u, v (1 - u))
        const int k = std::max(1, static_cast<int>(std::ceil(std::sqrt(static_cast<double>(order)))));
        const Rule1D g = gauss_legendre(k);
        for (int i = 0; i < k; ++i)
            for (int j = 0; j < k; ++j) {
                const double u = g.nodes[i], v = g.nodes[j];
                r.xi.push_back(u);
                r.eta.push_back(v * (1.0 - u));
                r.weights.push_back(2.0 * g.weights[i] * g.weights[j] * (1.0 - u));
            }
    } else {
        throw InvalidArgument("triangle_rule: order must be >= 1");
    }
    return r;
}

namespace {

double gl_segment(const std::function<double(double)>& f, const Rule1D& rule, double a, double b) {
    double acc = 0.0;
    for (std::size_t k = 0; k < rule.nodes.size(); ++k)
        acc += rule.weights[k] * f(a + (b - a) * rule.nodes[k]);
    return (b - a) * acc;
}

double adapt_1d(const std::function<double(double)>& f, const Rule1D& rule, double a, double b,
                double whole, double threshold, int depth, int max_depth) {
    const double m = 0.5 * (a + b);
    const double left = gl_segment(f, rule, a, m);
    const double right = gl_segment(f, rule, m, b);
    if (std::abs(left + right - whole) <= threshold) return left + right;
    if (depth >= max_depth)
        throw QuadratureNotConverged("integrate_1d exceeded max depth");
    return adapt_1d(f, rule, a, m, left, threshold, depth + 1, max_depth) +
           adapt_1d(f, rule, m, b, right, threshold, depth + 1, max_depth);
}

}  // namespace

double integrate_1d(const std::function<double(double)>& f, double a, double b, double rel_tol,
                    int max_depth) {
    if (a == b) return 0.0;
    static const Rule1D rule = gauss_legendre(10);
    // magnitude estimate on a uniform 16-piece split
    double magnitude = 0.0;
    const int pieces = 16;
    std::vector<double> parts(pieces);
    for (int i = 0; i < pieces; ++i) {
        const double lo = a + (b - a) * i / pieces, hi = a + (b - a) * (i + 1) / pieces;
        parts[i] = gl_segment(f, rule, lo, hi);
        magnitude += std::abs(parts[i]);
    }
    const double threshold = rel_tol * magnitude / pieces;
    double total = 0.0;
    for (int i = 0; i < pieces; ++i) {
        const double lo = a + (b - a) * i / pieces, hi = a + (b - a) * (i + 1) / pieces;
        total += adapt_1d(f, rule, lo, hi, parts[i], threshold, 1, max_depth);
    }
    return total;
}

}  // namespace polytv::quad
