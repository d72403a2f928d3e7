#pragma once

#include <Eigen/Core>

#include <vector>

#include "polytv/atomic_function.hpp"
#include "polytv/geometry.hpp"
#include "polytv/quadrature.hpp"

namespace polytv {

/// Observations y = Phi u + w, one value per sensor.
using Measurements = Eigen::VectorXd;

/// Sampled Gaussian convolution: phi_j(x) = exp(-|x - c_j|^2 / (2 sigma^2)).
///
/// Operators built with `grid()` remember their tensor structure and evaluate
/// all m kernels with 2 sqrt(m) exponentials per point.
class GaussianOperator {
public:
    GaussianOperator(std::vector<Point2> centers, double sigma);

    /// per_side x per_side centers uniformly spread over [-half_extent, half_extent]^2,
    /// x index fastest. per_side == 1 puts the single center at the origin.
    static GaussianOperator grid(double half_extent, int per_side, double sigma);

    std::size_t size() const { return centers_.size(); }
    double sigma() const { return sigma_; }
    const std::vector<Point2>& centers() const { return centers_; }
    bool is_grid() const { return !grid_x_.empty(); }

    /// All kernel values at x; `out` is resized to m.
    void evaluate(const Point2& x, Eigen::VectorXd& out) const;
    double kernel(std::size_t j, const Point2& x) const;

private:
    std::vector<Point2> centers_;
    double sigma_;
    std::vector<double> grid_x_, grid_y_;
};

/// Quadrature kernel integrating every sensing function at once.
struct GaussianKernel {
    using value_type = Eigen::VectorXd;
    const GaussianOperator* op;
    Eigen::VectorXd zero() const { return Eigen::VectorXd::Zero(static_cast<Eigen::Index>(op->size())); }
    void evaluate(const Point2& p, Eigen::VectorXd& out) const { op->evaluate(p, out); }
};

/// eta(x) = sum_j coeff_j phi_j(x).
class DualField {
public:
    DualField(GaussianOperator op, Eigen::VectorXd coefficients);

    double operator()(const Point2& x) const;
    const GaussianOperator& op() const { return op_; }
    const Eigen::VectorXd& coefficients() const { return coeffs_; }

    ScalarField as_field() const;

private:
    GaussianOperator op_;
    Eigen::VectorXd coeffs_;
};

/// (int_E phi_j)_j for one polygon.
Eigen::VectorXd sensor_integrals(const GaussianOperator& op, const SimplePolygon& poly,
                                 const QuadratureSpec& quad);

Measurements forward(const GaussianOperator& op, const AtomicFunction& u, const QuadratureSpec& quad);

DualField dual_field(const GaussianOperator& op, const Eigen::VectorXd& residual_coeffs);

/// Hat-weighted edge integrals of every phi_j, per vertex.
struct MeasurementWeights {
    std::vector<Eigen::VectorXd> minus;
    std::vector<Eigen::VectorXd> plus;
};

MeasurementWeights edge_measurement_weights(const GaussianOperator& op, const SimplePolygon& poly,
                                            const QuadratureSpec& quad);

/// lambda = c * sqrt(2 log(m) tau^2).
double calibrated_lambda(std::size_t m, double tau, double c);

/// Half-width R such that [-R, R]^2 holds `fraction` of the L2 mass of the dual field.
/// Closed form through products of error functions.
double dual_mass_half_width(const GaussianOperator& op, const Eigen::VectorXd& coeffs,
                            double fraction = 0.9999);

}  // namespace polytv
