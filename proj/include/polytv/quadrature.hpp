#pragma once

// Adaptive Gauss quadrature over triangles, polygon fans and segments.
// Integrands are "kernels" so that one pass can integrate a whole vector of
// functions (all sensing functions of an operator) at once.

#include <Eigen/Core>

#include <concepts>
#include <span>
#include <string>
#include <vector>

#include "polytv/errors.hpp"
#include "polytv/geometry.hpp"

namespace polytv::quad {

struct Rule1D {
    std::vector<double> nodes;    // on [0, 1]
    std::vector<double> weights;  // sum to 1
};

struct TriangleRule {
    std::vector<double> xi, eta;  // reference triangle (0,0),(1,0),(0,1)
    std::vector<double> weights;  // sum to 1
};

/// Gauss-Legendre rule with n points mapped to [0, 1].
Rule1D gauss_legendre(int n);
/// Symmetric rule for 1, 3 or 7 points, otherwise a collapsed k x k product rule.
TriangleRule triangle_rule(int order);

template <class K>
concept Kernel = requires(const K& k, const Point2& p, typename K::value_type& v) {
    { k.zero() } -> std::convertible_to<typename K::value_type>;
    k.evaluate(p, v);
};

inline void set_zero(double& v) { v = 0.0; }
inline void set_zero(Eigen::VectorXd& v) { v.setZero(); }
inline void axpy(double& acc, double w, const double& v) { acc += w * v; }
inline void axpy(Eigen::VectorXd& acc, double w, const Eigen::VectorXd& v) { acc.noalias() += w * v; }
inline double norm_inf(double v) { return std::abs(v); }
inline double norm_inf(const Eigen::VectorXd& v) { return v.size() ? v.lpNorm<Eigen::Infinity>() : 0.0; }
inline double diff_norm_inf(double a, double b) { return std::abs(a - b); }
inline double diff_norm_inf(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    return a.size() ? (a - b).lpNorm<Eigen::Infinity>() : 0.0;
}
inline void add_abs(double& acc, double v) { acc += std::abs(v); }
inline void add_abs(Eigen::VectorXd& acc, const Eigen::VectorXd& v) { acc += v.cwiseAbs(); }

/// Wraps a ScalarField as a kernel.
struct ScalarKernel {
    using value_type = double;
    const ScalarField* field;
    double zero() const { return 0.0; }
    void evaluate(const Point2& p, double& out) const { out = (*field)(p); }
};

namespace detail {

template <Kernel K>
class TriangleIntegrator {
public:
    using V = typename K::value_type;

    TriangleIntegrator(const K& kernel, const QuadratureSpec& spec)
        : kernel_(kernel), spec_(spec), rule_(triangle_rule(spec.triangle_rule_order)),
          sample_(kernel.zero()) {}

    // Signed integral over triangle (a, b, c) with the plain rule.
    V rule(const Point2& a, const Point2& b, const Point2& c) {
        V acc = kernel_.zero();
        const Point2 e1 = b - a, e2 = c - a;
        const double jac = 0.5 * cross(e1, e2);
        for (std::size_t k = 0; k < rule_.weights.size(); ++k) {
            kernel_.evaluate(a + rule_.xi[k] * e1 + rule_.eta[k] * e2, sample_);
            axpy(acc, jac * rule_.weights[k], sample_);
        }
        return acc;
    }

    // Dyadic refinement: accept the 4-child sum when it agrees with the parent
    // estimate to within `threshold` in the max norm.
    void adaptive(const Point2& a, const Point2& b, const Point2& c, const V& parent, double threshold,
                  int depth, V& out) {
        const Point2 ab = 0.5 * (a + b), bc = 0.5 * (b + c), ca = 0.5 * (c + a);
        V q0 = rule(a, ab, ca);
        V q1 = rule(ab, b, bc);
        V q2 = rule(ca, bc, c);
        V q3 = rule(ab, bc, ca);
        V sum = q0;
        sum += q1;
        sum += q2;
        sum += q3;
        if (diff_norm_inf(sum, parent) <= threshold) {
            out += sum;
            return;
        }
        if (depth >= spec_.max_subdivision_depth)
            throw QuadratureNotConverged("triangle quadrature exceeded max_subdivision_depth=" +
                                         std::to_string(spec_.max_subdivision_depth));
        adaptive(a, ab, ca, q0, threshold, depth + 1, out);
        adaptive(ab, b, bc, q1, threshold, depth + 1, out);
        adaptive(ca, bc, c, q2, threshold, depth + 1, out);
        adaptive(ab, bc, ca, q3, threshold, depth + 1, out);
    }

private:
    const K& kernel_;
    const QuadratureSpec& spec_;
    TriangleRule rule_;
    V sample_;
};

}  // namespace detail

/// Winding-number weighted integral over a closed polyline: fan of signed
/// triangles from the vertex centroid.
template <Kernel K>
typename K::value_type integrate_polygon(std::span<const Point2> vertices, const K& kernel,
                                         const QuadratureSpec& spec) {
    using V = typename K::value_type;
    spec.validate();
    const std::size_t n = vertices.size();
    V total = kernel.zero();
    if (n < 3) return total;
    const Point2 a = vertex_centroid(vertices);
    detail::TriangleIntegrator<K> integ(kernel, spec);

    std::vector<V> coarse;
    coarse.reserve(n);
    V magnitude = kernel.zero();
    for (std::size_t i = 0; i < n; ++i) {
        coarse.push_back(integ.rule(a, vertices[i], vertices[(i + 1) % n]));
        add_abs(magnitude, coarse.back());
    }
    const double threshold = spec.refine_tol * norm_inf(magnitude);
    for (std::size_t i = 0; i < n; ++i)
        integ.adaptive(a, vertices[i], vertices[(i + 1) % n], coarse[i], threshold, 1, total);
    return total;
}

/// Hat-weighted line integrals over every edge [x_j, x_{j+1}]:
/// plus[j] = len * int_0^1 f (1 - t) dt,  minus[j + 1] = len * int_0^1 f t dt.
template <Kernel K>
void integrate_edge_hats(std::span<const Point2> vertices, const K& kernel, const QuadratureSpec& spec,
                         std::vector<typename K::value_type>& minus,
                         std::vector<typename K::value_type>& plus) {
    using V = typename K::value_type;
    spec.validate();
    const std::size_t n = vertices.size();
    const Rule1D rule = gauss_legendre(spec.edge_rule_order);
    minus.assign(n, kernel.zero());
    plus.assign(n, kernel.zero());
    V sample = kernel.zero();

    // Integral over t in [t0, t1] of the segment, returning both hat moments.
    auto segment = [&](const Point2& p, const Point2& q, double len, double t0, double t1, V& lo,
                       V& hi) {
        set_zero(lo);
        set_zero(hi);
        const double width = t1 - t0;
        for (std::size_t k = 0; k < rule.nodes.size(); ++k) {
            const double t = t0 + width * rule.nodes[k];
            kernel.evaluate(p + t * (q - p), sample);
            const double w = len * width * rule.weights[k];
            axpy(lo, w * (1.0 - t), sample);
            axpy(hi, w * t, sample);
        }
    };

    std::vector<V> coarse_lo(n, kernel.zero()), coarse_hi(n, kernel.zero());
    V magnitude = kernel.zero();
    for (std::size_t j = 0; j < n; ++j) {
        const Point2& p = vertices[j];
        const Point2& q = vertices[(j + 1) % n];
        segment(p, q, distance(p, q), 0.0, 1.0, coarse_lo[j], coarse_hi[j]);
        add_abs(magnitude, coarse_lo[j]);
        add_abs(magnitude, coarse_hi[j]);
    }
    const double threshold = spec.refine_tol * norm_inf(magnitude);

    V lo_a = kernel.zero(), hi_a = kernel.zero(), lo_b = kernel.zero(), hi_b = kernel.zero();
    struct Pending {
        double t0, t1;
        V lo, hi;
        int depth;
    };
    for (std::size_t j = 0; j < n; ++j) {
        const Point2& p = vertices[j];
        const Point2& q = vertices[(j + 1) % n];
        const double len = distance(p, q);
        std::vector<Pending> stack;
        stack.push_back({0.0, 1.0, coarse_lo[j], coarse_hi[j], 1});
        while (!stack.empty()) {
            Pending cur = std::move(stack.back());
            stack.pop_back();
            const double tm = 0.5 * (cur.t0 + cur.t1);
            segment(p, q, len, cur.t0, tm, lo_a, hi_a);
            segment(p, q, len, tm, cur.t1, lo_b, hi_b);
            V lo_sum = lo_a;
            lo_sum += lo_b;
            V hi_sum = hi_a;
            hi_sum += hi_b;
            const double err =
                std::max(diff_norm_inf(lo_sum, cur.lo), diff_norm_inf(hi_sum, cur.hi));
            if (err <= threshold) {
                plus[j] += lo_sum;
                minus[(j + 1) % n] += hi_sum;
                continue;
            }
            if (cur.depth >= spec.max_subdivision_depth)
                throw QuadratureNotConverged("edge quadrature exceeded max_subdivision_depth=" +
                                             std::to_string(spec.max_subdivision_depth));
            stack.push_back({cur.t0, tm, lo_a, hi_a, cur.depth + 1});
            stack.push_back({tm, cur.t1, lo_b, hi_b, cur.depth + 1});
        }
    }
}

/// Adaptive Gauss-Legendre on [a, b] for a scalar function of one variable.
double integrate_1d(const std::function<double(double)>& f, double a, double b, double rel_tol = 1e-13,
                    int max_depth = 40);

}  // namespace polytv::quad
