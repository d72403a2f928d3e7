#pragma once

#include <iosfwd>
#include <vector>

#include "polytv/gaussian_operator.hpp"
#include "polytv/geometry.hpp"

namespace polytv {

/// Piecewise-constant function on the N x N square mesh of [-R, R]^2.
/// Cell (i, j), 0-based, is [-R + i h, -R + (i+1) h] x [-R + j h, -R + (j+1) h].
class GridFunction {
public:
    GridFunction(int n, double half_width);

    int n() const { return n_; }
    double half_width() const { return half_width_; }
    double cell() const { return 2.0 * half_width_ / n_; }

    double& operator()(int i, int j) { return values_[static_cast<std::size_t>(i) * n_ + j]; }
    double operator()(int i, int j) const { return values_[static_cast<std::size_t>(i) * n_ + j]; }
    /// Zero outside [0, n)^2.
    double padded(int i, int j) const {
        return (i < 0 || j < 0 || i >= n_ || j >= n_) ? 0.0 : (*this)(i, j);
    }

    Point2 cell_center(int i, int j) const;
    std::vector<double>& values() { return values_; }
    const std::vector<double>& values() const { return values_; }
    double max_abs() const;
    /// h^2 <a, b>.
    double inner(const GridFunction& other) const;

private:
    int n_;
    double half_width_;
    std::vector<double> values_;
};

/// Forward differences on the (N+1) x (N+1) staggered index set [0, N]^2.
struct GradientField {
    int n = 0;  // N; arrays hold (N+1)^2 entries
    std::vector<double> gx, gy;

    explicit GradientField(int n_cells = 0)
        : n(n_cells), gx(static_cast<std::size_t>(n_cells + 1) * (n_cells + 1), 0.0), gy(gx) {}
    std::size_t index(int i, int j) const { return static_cast<std::size_t>(i) * (n + 1) + j; }
    /// sum of node 2-norms
    double norm_21() const;
    double norm_11() const;
};

struct PrimalDualConfig {
    int max_iters = 20000;
    double tau = 0.0;         // 0 selects 0.99 / ||D||
    double sigma_step = 0.0;  // 0 selects 0.99 / ||D||
    double gap_tol = 1e-7;
    int window = 100;         // iterations between convergence checks

    void validate(double operator_norm) const;
};

GridFunction discretize_field(const ScalarField& eta, double R, int N, const QuadratureSpec& quad);

GradientField discrete_gradient(const GridFunction& u);
/// Negative adjoint of discrete_gradient.
GridFunction discrete_divergence(const GradientField& phi, double half_width);

/// J^h(u) = h ||grad^h u||_{2,1}.
double discrete_tv(const GridFunction& u);
/// h ||grad^h u||_{1,1}; the exact total variation of the piecewise-constant extension.
double exact_block_tv(const GridFunction& u);

/// Euclidean projection onto { ||phi||_{2,1} <= radius }.
GradientField project_l21_ball(const GradientField& phi, double radius = 1.0);

/// Power-iteration estimate of ||h grad^h|| (50 iterations).
double gradient_operator_norm(int N, double h, int iterations = 50);

struct RelaxedCheegerResult {
    GridFunction u;
    bool converged = false;
    int iterations = 0;
    double objective = 0.0;                     // h^2 <eta_bar, u>
    std::vector<double> averaged_objectives;    // ergodic iterate objective, one per window
};

/// min h^2 <eta_bar, u> s.t. J^h(u) <= 1, by the primal-dual iteration.
RelaxedCheegerResult solve_relaxed_cheeger(const GridFunction& eta_bar, const PrimalDualConfig& cfg);

struct ExtractedPolygon {
    SimplePolygon polygon;
    int sign = 1;        // sign of int_E eta
    double ratio = 0.0;  // |int_E eta| / P(E)
    double level = 0.0;
};

/// Level-set contours of u and -u at {0.25, 0.5, 0.75} max|u|, resampled to
/// n_target vertices; returns the candidate of largest Cheeger ratio.
ExtractedPolygon extract_polygon(const GridFunction& u, const ScalarField& eta, int n_target,
                                 const QuadratureSpec& quad);

/// Closed contours of the piecewise-bilinear interpolant of the cell-center
/// values at level t (zero-padded, so every contour closes).
std::vector<std::vector<Point2>> level_contours(const GridFunction& u, double level);

struct FixedGridResult {
    GridFunction u;
    bool converged = false;
    int iterations = 0;
    double objective = 0.0;                     // discrete objective
    std::vector<double> averaged_objectives;
};

/// Cell-center sampled operator: column (i, j) = h^2 phi(cell center).
Eigen::MatrixXd sampled_operator_matrix(const GaussianOperator& op, double R, int N);
/// Exact cell integrals of every phi_j (error-function products).
Eigen::MatrixXd cell_integral_matrix(const GaussianOperator& op, double R, int N);

/// min 1/2 ||Phi^h u - y||^2 + lambda h ||grad^h u||_{2,1}.
FixedGridResult solve_fixed_grid_tv(const GaussianOperator& op, const Measurements& y, double lambda,
                                    double R, int N, const PrimalDualConfig& cfg);

/// Discrete objective with Phi^h and isotropic TV.
double fixed_grid_discrete_objective(const GaussianOperator& op, const Measurements& y, double lambda,
                                     const GridFunction& u);
/// T_lambda of the piecewise-constant function itself: exact cell integrals and exact TV.
double fixed_grid_continuous_objective(const GaussianOperator& op, const Measurements& y,
                                       double lambda, const GridFunction& u);

void write_grid_csv(std::ostream& os, const GridFunction& u);
/// 8-bit binary PGM, min-max scaled, top row is +y.
void write_grid_pgm(std::ostream& os, const GridFunction& u);

}  // namespace polytv
