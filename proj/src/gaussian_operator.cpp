#include "polytv/gaussian_operator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "polytv/errors.hpp"

namespace polytv {

GaussianOperator::GaussianOperator(std::vector<Point2> centers, double sigma)
    : centers_(std::move(centers)), sigma_(sigma) {
    if (centers_.empty()) throw InvalidArgument("GaussianOperator: needs at least one center");
    if (!(sigma_ > 0.0) || !std::isfinite(sigma_))
        throw InvalidArgument("GaussianOperator: sigma must be positive");
    for (const auto& c : centers_)
        if (!std::isfinite(c.x) || !std::isfinite(c.y))
            throw InvalidArgument("GaussianOperator: centers must be finite");
}

GaussianOperator GaussianOperator::grid(double half_extent, int per_side, double sigma) {
    if (per_side < 1) throw InvalidArgument("GaussianOperator::grid: per_side must be >= 1");
    std::vector<double> ticks(per_side);
    for (int i = 0; i < per_side; ++i)
        ticks[i] = per_side == 1 ? 0.0 : -half_extent + 2.0 * half_extent * i / (per_side - 1);
    std::vector<Point2> centers;
    centers.reserve(static_cast<std::size_t>(per_side) * per_side);
    for (int b = 0; b < per_side; ++b)
        for (int a = 0; a < per_side; ++a) centers.push_back({ticks[a], ticks[b]});
    GaussianOperator op(std::move(centers), sigma);
    op.grid_x_ = ticks;
    op.grid_y_ = ticks;
    return op;
}

void GaussianOperator::evaluate(const Point2& x, Eigen::VectorXd& out) const {
    const double inv = 1.0 / (2.0 * sigma_ * sigma_);
    out.resize(static_cast<Eigen::Index>(centers_.size()));
    if (!grid_x_.empty()) {
        const std::size_t nx = grid_x_.size(), ny = grid_y_.size();
        double ex[512], ey[512];
        if (nx <= 512 && ny <= 512) {
            for (std::size_t a = 0; a < nx; ++a) {
                const double d = x.x - grid_x_[a];
                ex[a] = std::exp(-d * d * inv);
            }
            for (std::size_t b = 0; b < ny; ++b) {
                const double d = x.y - grid_y_[b];
                ey[b] = std::exp(-d * d * inv);
            }
            Eigen::Index j = 0;
            for (std::size_t b = 0; b < ny; ++b)
                for (std::size_t a = 0; a < nx; ++a) out[j++] = ex[a] * ey[b];
            return;
        }
    }
    for (std::size_t j = 0; j < centers_.size(); ++j) {
        const Point2 d = x - centers_[j];
        out[static_cast<Eigen::Index>(j)] = std::exp(-dot(d, d) * inv);
    }
}

double GaussianOperator::kernel(std::size_t j, const Point2& x) const {
    const Point2 d = x - centers_.at(j);
    return std::exp(-dot(d, d) / (2.0 * sigma_ * sigma_));
}

DualField::DualField(GaussianOperator op, Eigen::VectorXd coefficients)
    : op_(std::move(op)), coeffs_(std::move(coefficients)) {
    if (static_cast<std::size_t>(coeffs_.size()) != op_.size())
        throw InvalidArgument("DualField: coefficient length does not match the operator");
}

double DualField::operator()(const Point2& x) const {
    thread_local Eigen::VectorXd buf;
    op_.evaluate(x, buf);
    return coeffs_.dot(buf);
}

ScalarField DualField::as_field() const {
    return [self = *this](const Point2& x) { return self(x); };
}

Eigen::VectorXd sensor_integrals(const GaussianOperator& op, const SimplePolygon& poly,
                                 const QuadratureSpec& quad) {
    return quad::integrate_polygon(poly.span(), GaussianKernel{&op}, quad);
}

Measurements forward(const GaussianOperator& op, const AtomicFunction& u, const QuadratureSpec& quad) {
    Measurements out = Measurements::Zero(static_cast<Eigen::Index>(op.size()));
    for (const auto& atom : u.atoms) out += atom.amplitude * sensor_integrals(op, atom.support, quad);
    return out;
}

DualField dual_field(const GaussianOperator& op, const Eigen::VectorXd& residual_coeffs) {
    return DualField(op, residual_coeffs);
}

MeasurementWeights edge_measurement_weights(const GaussianOperator& op, const SimplePolygon& poly,
                                            const QuadratureSpec& quad) {
    MeasurementWeights w;
    quad::integrate_edge_hats(poly.span(), GaussianKernel{&op}, quad, w.minus, w.plus);
    return w;
}

double calibrated_lambda(std::size_t m, double tau, double c) {
    return c * std::sqrt(2.0 * std::log(static_cast<double>(m)) * tau * tau);
}

namespace {

// int_{-R}^{R} exp(-((x-a)^2 + (x-b)^2) / (2 s^2)) dx, or the full line when R is infinite.
double pair_integral(double a, double b, double s, double R) {
    const double mu = 0.5 * (a + b);
    const double pre = std::exp(-(a - b) * (a - b) / (4.0 * s * s)) * s * std::sqrt(std::numbers::pi);
    if (std::isinf(R)) return pre;
    return 0.5 * pre * (std::erf((R - mu) / s) - std::erf((-R - mu) / s));
}

double l2_mass(const GaussianOperator& op, const Eigen::VectorXd& c, double R) {
    const auto& ctr = op.centers();
    const std::size_t m = ctr.size();
    double total = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
        if (c[j] == 0.0) continue;
        for (std::size_t k = j; k < m; ++k) {
            if (c[k] == 0.0) continue;
            const double v = pair_integral(ctr[j].x, ctr[k].x, op.sigma(), R) *
                             pair_integral(ctr[j].y, ctr[k].y, op.sigma(), R);
            total += (j == k ? 1.0 : 2.0) * c[j] * c[k] * v;
        }
    }
    return total;
}

}  // namespace

double dual_mass_half_width(const GaussianOperator& op, const Eigen::VectorXd& coeffs, double fraction) {
    if (static_cast<std::size_t>(coeffs.size()) != op.size())
        throw InvalidArgument("dual_mass_half_width: coefficient length mismatch");
    double reach = 0.0;
    for (const auto& c : op.centers()) reach = std::max({reach, std::abs(c.x), std::abs(c.y)});
    const double upper_default = reach + 3.0 * op.sigma();
    const double total = l2_mass(op, coeffs, std::numeric_limits<double>::infinity());
    if (!(total > 0.0)) return upper_default;
    double lo = 0.0, hi = reach + 10.0 * op.sigma();
    for (int it = 0; it < 60; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (l2_mass(op, coeffs, mid) >= fraction * total)
            hi = mid;
        else
            lo = mid;
    }
    return hi;
}

}  // namespace polytv
