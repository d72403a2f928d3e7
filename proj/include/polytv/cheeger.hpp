#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "polytv/geometry.hpp"

namespace polytv {

struct RefineConfig {
    int max_iters = 2000;
    double step_init = 0.1;      // first trial displacement, as a fraction of diam(E)
    double armijo_c = 1e-4;
    double step_shrink = 0.5;
    double grad_tol = 1e-6;      // stop when ||theta|| diam / J < grad_tol
    double min_step = 1e-12;     // stop when the largest trial displacement < min_step * diam

    void validate() const;
};

/// J(E) = |int_E eta| / P(E).
double cheeger_objective(const SimplePolygon& poly, const ScalarField& eta, const QuadratureSpec& quad);

/// Gradient of J with respect to the vertex coordinates, one 2-vector per vertex.
std::vector<Point2> shape_gradient(const SimplePolygon& poly, const ScalarField& eta,
                                   const QuadratureSpec& quad);

/// Vertex-wise first derivative of the perimeter, -(tau_j - tau_{j-1}).
std::vector<Point2> perimeter_gradient(std::span<const Point2> vertices);

/// Signed turn angle at every vertex, from x_j - x_{j-1} to x_{j+1} - x_j.
std::vector<double> turn_angles(std::span<const Point2> vertices);

/// max_j |w_j^{+/-} - rho tan(theta_j / 2)| / (|rho| P / n) with rho = int_E eta / P.
double optimality_residual(const SimplePolygon& poly, const ScalarField& eta, const QuadratureSpec& quad);

enum class RefineStop { gradient, min_step, max_iters };

struct RefineResult {
    SimplePolygon polygon;
    double objective = 0.0;
    double initial_objective = 0.0;
    int iterations = 0;  // accepted steps
    double grad_norm = 0.0;
    RefineStop stopped_by = RefineStop::max_iters;
};

std::string to_string(RefineStop s);

/// Armijo ascent on J over polygons with a fixed vertex count.
/// `trace`, when given, receives `iter,J,step,grad_norm` rows.
RefineResult refine(const SimplePolygon& poly0, const ScalarField& eta, const RefineConfig& cfg,
                    const QuadratureSpec& quad, std::ostream* trace = nullptr);

}  // namespace polytv
