#pragma once

#include <Eigen/Core>

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "polytv/atomic_function.hpp"
#include "polytv/cheeger.hpp"
#include "polytv/gaussian_operator.hpp"
#include "polytv/grid_solver.hpp"

namespace polytv {

/// T_lambda(u) = 1/2 ||Phi u - y||^2 + lambda sum |a_i| P(E_i).
double objective(const AtomicFunction& u, const GaussianOperator& op, const Measurements& y, double lambda,
                 const QuadratureSpec& quad);

struct LassoResult {
    Eigen::VectorXd a;
    bool converged = false;
    int iterations = 0;
    double kkt = 0.0;  // largest violation of the optimality conditions
};

/// min 1/2 ||M a - y||^2 + sum w_i |a_i| by accelerated proximal gradient with
/// backtracking and restart, finished by an active-set solve when the support settles.
LassoResult solve_weighted_lasso(const Eigen::MatrixXd& M, const Eigen::VectorXd& y, const Eigen::VectorXd& w,
                                 double tol, const Eigen::VectorXd* warm_start = nullptr, int max_iters = 20000);

/// Columns (int_{E_i} phi_j)_j, one per support.
Eigen::MatrixXd support_matrix(const std::vector<SimplePolygon>& supports, const GaussianOperator& op,
                               const QuadratureSpec& quad);

LassoResult solve_amplitudes(const std::vector<SimplePolygon>& supports, const GaussianOperator& op,
                             const Measurements& y, double lambda, const QuadratureSpec& quad, double tol,
                             const Eigen::VectorXd* warm_start = nullptr);

struct SlideConfig {
    int max_iters = 100;
    double step_init = 0.05;  // first trial displacement, as a fraction of the largest diameter
    double armijo_c = 1e-4;
    double step_shrink = 0.5;
    double grad_tol = 1e-7;
    double min_step = 1e-12;

    void validate() const;
};

/// Gradient of T_lambda in (amplitudes, vertices).
struct SlideGradient {
    Eigen::VectorXd h;                      // d/da_i
    std::vector<std::vector<Point2>> theta;  // d/dx_{i,j}
};

SlideGradient sliding_gradient(const AtomicFunction& u, const GaussianOperator& op, const Measurements& y,
                               double lambda, const QuadratureSpec& quad);

struct SlideResult {
    AtomicFunction u;
    double objective_before = 0.0;
    double objective_after = 0.0;
    int iterations = 0;
};

/// Joint Armijo descent on amplitudes and vertices; never increases T_lambda.
SlideResult sliding_step(const AtomicFunction& u, const GaussianOperator& op, const Measurements& y,
                         double lambda, const SlideConfig& cfg, const QuadratureSpec& quad);

struct FWConfig {
    double lambda = 0.0;
    double stop_tol = 1e-3;
    int max_atoms = 20;
    int max_iters = 30;
    double lasso_tol = 1e-6;  // relative to lambda P(E_i)
    double prune_tol = 0.0;   // 0 selects 1e-10 ||y|| / max P(E_i)
    int mesh_n = 64;
    int n_vertices = 32;
    bool refine = true;
    bool slide = true;
    SlideConfig slide_cfg;
    std::ostream* progress = nullptr;  // one line per stage when set

    void validate() const;
};

struct CheegerCandidate {
    explicit CheegerCandidate(SimplePolygon p) : polygon(std::move(p)) {}
    SimplePolygon polygon;
    int sign = 1;
    double mesh_ratio = 0.0;     // J of the extracted contour
    double ratio = 0.0;          // J after refinement
    double half_width = 0.0;     // mesh domain [-R, R]^2
    double mesh_objective = 0.0;  // relaxed problem value
    bool refined = false;
    std::string warning;
};

/// Mesh relaxation, contour extraction, then polygon refinement for
/// eta = sum_j coeffs_j phi_j.
CheegerCandidate cheeger_oracle(const GaussianOperator& op, const Eigen::VectorXd& coeffs, int mesh_n,
                                int n_vertices, const PrimalDualConfig& grid_cfg, const RefineConfig& refine_cfg,
                                const QuadratureSpec& quad, bool do_refine = true);

struct FWRecord {
    int k = 0;
    double objective = 0.0;
    double tv = 0.0;
    double residual_norm = 0.0;
    double cheeger_ratio = 0.0;
    double mesh_ratio = 0.0;
    int n_atoms = 0;
    double slide_improvement = 0.0;
};

struct FWTrace {
    std::vector<FWRecord> records;
    std::string stopped_by;
    int iterations = 0;
    double final_ratio = 0.0;
    double initial_objective = 0.0;
    double half_width = 0.0;  // largest mesh domain used
    std::vector<std::string> warnings;
};

struct FWResult {
    AtomicFunction u;
    FWTrace trace;
};

FWResult frank_wolfe(const GaussianOperator& op, const Measurements& y, const FWConfig& cfg,
                     const PrimalDualConfig& grid_cfg, const RefineConfig& refine_cfg, const QuadratureSpec& quad);

/// Smallest distance between boundaries of distinct atoms.
double min_boundary_gap(const AtomicFunction& u);

void write_trace_csv(std::ostream& os, const FWTrace& trace);

}  // namespace polytv
