#include "polytv/grid_solver.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numbers>
#include <optional>
#include <ostream>
#include <unordered_map>

#include "polytv/errors.hpp"
#include "polytv/quadrature.hpp"

namespace polytv {

GridFunction::GridFunction(int n, double half_width)
    : n_(n), half_width_(half_width), values_(static_cast<std::size_t>(n) * n, 0.0) {
    if (n < 2) throw InvalidArgument("GridFunction: N must be >= 2");
    if (!(half_width > 0.0)) throw InvalidArgument("GridFunction: half width must be positive");
}

Point2 GridFunction::cell_center(int i, int j) const {
    const double h = cell();
    return {-half_width_ + (i + 0.5) * h, -half_width_ + (j + 0.5) * h};
}

double GridFunction::max_abs() const {
    double m = 0.0;
    for (double v : values_) m = std::max(m, std::abs(v));
    return m;
}

double GridFunction::inner(const GridFunction& other) const {
    double s = 0.0;
    for (std::size_t k = 0; k < values_.size(); ++k) s += values_[k] * other.values_[k];
    return cell() * cell() * s;
}

double GradientField::norm_21() const {
    double s = 0.0;
    for (std::size_t k = 0; k < gx.size(); ++k) s += std::hypot(gx[k], gy[k]);
    return s;
}

double GradientField::norm_11() const {
    double s = 0.0;
    for (std::size_t k = 0; k < gx.size(); ++k) s += std::abs(gx[k]) + std::abs(gy[k]);
    return s;
}

void PrimalDualConfig::validate(double operator_norm) const {
    if (max_iters < 1) throw InvalidArgument("PrimalDualConfig: max_iters must be >= 1");
    if (!(gap_tol > 0.0)) throw InvalidArgument("PrimalDualConfig: gap_tol must be > 0");
    if (window < 1) throw InvalidArgument("PrimalDualConfig: window must be >= 1");
    if (tau < 0.0 || sigma_step < 0.0) throw InvalidArgument("PrimalDualConfig: negative step");
    if (tau > 0.0 && sigma_step > 0.0 && tau * sigma_step * operator_norm * operator_norm >= 1.0)
        throw InvalidArgument("PrimalDualConfig: tau * sigma * ||D||^2 must be < 1");
}

GridFunction discretize_field(const ScalarField& eta, double R, int N, const QuadratureSpec& quad) {
    quad.validate();
    GridFunction out(N, R);
    const double h = out.cell();
    const quad::Rule1D rule = quad::gauss_legendre(std::max(quad.edge_rule_order, 5));
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j) {
            const double x0 = -R + i * h, y0 = -R + j * h;
            double acc = 0.0;
            for (std::size_t a = 0; a < rule.nodes.size(); ++a)
                for (std::size_t b = 0; b < rule.nodes.size(); ++b)
                    acc += rule.weights[a] * rule.weights[b] *
                           eta({x0 + h * rule.nodes[a], y0 + h * rule.nodes[b]});
            out(i, j) = acc;
        }
    return out;
}

GradientField discrete_gradient(const GridFunction& u) {
    const int N = u.n();
    GradientField g(N);
    // node (i, j) in [0, N]^2 uses padded cells (i-1, j-1) in 0-based cell indexing
    for (int i = 0; i <= N; ++i)
        for (int j = 0; j <= N; ++j) {
            const double c = u.padded(i - 1, j - 1);
            g.gx[g.index(i, j)] = u.padded(i, j - 1) - c;
            g.gy[g.index(i, j)] = u.padded(i - 1, j) - c;
        }
    return g;
}

GridFunction discrete_divergence(const GradientField& phi, double half_width) {
    const int N = phi.n;
    GridFunction out(N, half_width);
    // cell (p, q) 0-based sits at node index (p+1, q+1)
    for (int p = 0; p < N; ++p)
        for (int q = 0; q < N; ++q) {
            const int i = p + 1, j = q + 1;
            out(p, q) = phi.gx[phi.index(i, j)] - phi.gx[phi.index(i - 1, j)] +
                        phi.gy[phi.index(i, j)] - phi.gy[phi.index(i, j - 1)];
        }
    return out;
}

double discrete_tv(const GridFunction& u) { return u.cell() * discrete_gradient(u).norm_21(); }

double exact_block_tv(const GridFunction& u) { return u.cell() * discrete_gradient(u).norm_11(); }

GradientField project_l21_ball(const GradientField& phi, double radius) {
    const std::size_t K = phi.gx.size();
    std::vector<double> norms(K);
    double total = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
        norms[k] = std::hypot(phi.gx[k], phi.gy[k]);
        total += norms[k];
    }
    if (total <= radius) return phi;

    // threshold of the l1-ball projection of the norm vector (sort-based)
    std::vector<double> sorted = norms;
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    double cumulative = 0.0, theta = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
        cumulative += sorted[k];
        const double candidate = (cumulative - radius) / static_cast<double>(k + 1);
        if (k + 1 == K || sorted[k + 1] <= candidate) {
            theta = candidate;
            break;
        }
    }
    GradientField out = phi;
    for (std::size_t k = 0; k < K; ++k) {
        const double scale = norms[k] > theta ? (norms[k] - theta) / norms[k] : 0.0;
        out.gx[k] *= scale;
        out.gy[k] *= scale;
    }
    return out;
}

double gradient_operator_norm(int N, double h, int iterations) {
    GridFunction x(N, 1.0);
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j) x(i, j) = ((i + j) % 2 ? -1.0 : 1.0) + 0.01 * std::sin(i + 2.0 * j);
    double estimate = 0.0;
    for (int it = 0; it < iterations; ++it) {
        double nx = 0.0;
        for (double v : x.values()) nx += v * v;
        nx = std::sqrt(nx);
        for (double& v : x.values()) v /= nx;
        GridFunction y = discrete_divergence(discrete_gradient(x), 1.0);
        double ny = 0.0;
        for (double& v : y.values()) {
            v = -v;
            ny += v * v;
        }
        estimate = std::sqrt(std::sqrt(ny));
        x = std::move(y);
    }
    return h * estimate;
}

namespace {

struct Steps {
    double tau, sigma;
};

Steps choose_steps(const PrimalDualConfig& cfg, int N, double h) {
    const double L = gradient_operator_norm(N, h);
    cfg.validate(L);
    Steps s{cfg.tau > 0.0 ? cfg.tau : 0.99 / L, cfg.sigma_step > 0.0 ? cfg.sigma_step : 0.99 / L};
    if (s.tau * s.sigma * L * L >= 1.0)
        throw InvalidArgument("primal-dual steps violate tau * sigma * ||D||^2 < 1");
    return s;
}

bool window_converged(double current, double previous, double tol) {
    return std::abs(current - previous) <= tol * std::max(std::abs(current), 1e-300);
}

}  // namespace

RelaxedCheegerResult solve_relaxed_cheeger(const GridFunction& eta_bar, const PrimalDualConfig& cfg) {
    const int N = eta_bar.n();
    const double R = eta_bar.half_width();
    const double h = eta_bar.cell();
    const Steps st = choose_steps(cfg, N, h);

    GridFunction u(N, R), u_bar(N, R), u_avg(N, R);
    GradientField phi(N);
    auto objective = [&](const GridFunction& v) { return v.inner(eta_bar); };

    RelaxedCheegerResult res{GridFunction(N, R), false, 0, 0.0, {}};
    // objective of the averaged iterate scaled back into the constraint set
    auto feasible_objective = [&](const GridFunction& v) {
        return objective(v) / std::max(1.0, discrete_tv(v));
    };
    double last_window = objective(u);
    int it = 0;
    for (it = 1; it <= cfg.max_iters; ++it) {
        // dual: prox of sigma ||.||_{2,inf} via Moreau with the (2,1)-ball projection
        const GradientField du = discrete_gradient(u_bar);
        GradientField arg = phi;
        for (std::size_t k = 0; k < arg.gx.size(); ++k) {
            arg.gx[k] = (phi.gx[k] + st.sigma * h * du.gx[k]) / st.sigma;
            arg.gy[k] = (phi.gy[k] + st.sigma * h * du.gy[k]) / st.sigma;
        }
        const GradientField proj = project_l21_ball(arg);
        for (std::size_t k = 0; k < phi.gx.size(); ++k) {
            phi.gx[k] = st.sigma * (arg.gx[k] - proj.gx[k]);
            phi.gy[k] = st.sigma * (arg.gy[k] - proj.gy[k]);
        }
        // primal: D^* phi = -h div phi
        const GridFunction div = discrete_divergence(phi, R);
        auto& uv = u.values();
        auto& ub = u_bar.values();
        const auto& dv = div.values();
        const auto& ev = eta_bar.values();
        for (std::size_t k = 0; k < uv.size(); ++k) {
            const double old = uv[k];
            const double nu = old + st.tau * h * dv[k] - st.tau * h * h * ev[k];
            uv[k] = nu;
            ub[k] = 2.0 * nu - old;
        }
        auto& av = u_avg.values();
        for (std::size_t k = 0; k < av.size(); ++k) av[k] += (uv[k] - av[k]) / it;

        if (it % cfg.window == 0) {
            res.averaged_objectives.push_back(feasible_objective(u_avg));
            const double current = objective(u);
            if (window_converged(current, last_window, cfg.gap_tol)) {
                res.converged = true;
                break;
            }
            last_window = current;
        }
    }
    res.iterations = std::min(it, cfg.max_iters);
    const double J = discrete_tv(u);
    if (J > 1.0 + 1e-8)
        for (double& v : u.values()) v /= J;
    res.objective = objective(u);
    res.u = std::move(u);
    return res;
}

std::vector<std::vector<Point2>> level_contours(const GridFunction& u, double level) {
    const int N = u.n();
    const int M = N + 2;  // padded node lattice
    const double R = u.half_width(), h = u.cell();
    auto value = [&](int a, int b) { return u.padded(a - 1, b - 1); };
    auto position = [&](int a, int b) { return Point2{-R + (a - 0.5) * h, -R + (b - 0.5) * h}; };
    auto h_id = [&](int a, int b) { return (static_cast<long>(a) * M + b) * 2; };
    auto v_id = [&](int a, int b) { return (static_cast<long>(a) * M + b) * 2 + 1; };

    std::unordered_map<long, Point2> points;
    std::unordered_map<long, std::vector<long>> links;
    auto crossing = [&](long id, int a0, int b0, int a1, int b1) {
        if (points.count(id)) return;
        const double v0 = value(a0, b0), v1 = value(a1, b1);
        double s = (level - v0) / (v1 - v0);
        s = std::clamp(s, 1e-6, 1.0 - 1e-6);
        const Point2 p0 = position(a0, b0), p1 = position(a1, b1);
        points[id] = p0 + s * (p1 - p0);
    };
    auto link = [&](long e, long f) {
        links[e].push_back(f);
        links[f].push_back(e);
    };

    for (int a = 0; a + 1 < M; ++a)
        for (int b = 0; b + 1 < M; ++b) {
            const double c0 = value(a, b), c1 = value(a + 1, b), c2 = value(a + 1, b + 1),
                         c3 = value(a, b + 1);
            const int code = (c0 > level) | ((c1 > level) << 1) | ((c2 > level) << 2) | ((c3 > level) << 3);
            if (code == 0 || code == 15) continue;
            const long e0 = h_id(a, b), e1 = v_id(a + 1, b), e2 = h_id(a, b + 1), e3 = v_id(a, b);
            auto need = [&](long e) {
                if (e == e0) crossing(e, a, b, a + 1, b);
                else if (e == e1) crossing(e, a + 1, b, a + 1, b + 1);
                else if (e == e2) crossing(e, a, b + 1, a + 1, b + 1);
                else crossing(e, a, b, a, b + 1);
            };
            auto seg = [&](long e, long f) {
                need(e);
                need(f);
                link(e, f);
            };
            const bool center_in = 0.25 * (c0 + c1 + c2 + c3) > level;
            switch (code) {
                case 1: case 14: seg(e3, e0); break;
                case 2: case 13: seg(e0, e1); break;
                case 3: case 12: seg(e3, e1); break;
                case 4: case 11: seg(e1, e2); break;
                case 6: case 9: seg(e0, e2); break;
                case 7: case 8: seg(e2, e3); break;
                case 5:
                    if (center_in) { seg(e0, e1); seg(e2, e3); }
                    else { seg(e3, e0); seg(e1, e2); }
                    break;
                case 10:
                    if (center_in) { seg(e3, e0); seg(e1, e2); }
                    else { seg(e0, e1); seg(e2, e3); }
                    break;
                default: break;
            }
        }

    // walk loops in a deterministic order
    std::vector<long> ids;
    ids.reserve(links.size());
    for (const auto& kv : links) ids.push_back(kv.first);
    std::sort(ids.begin(), ids.end());
    std::unordered_map<long, bool> used;
    std::vector<std::vector<Point2>> loops;
    for (long start : ids) {
        if (used[start]) continue;
        std::vector<Point2> loop;
        long prev = -1, cur = start;
        while (true) {
            used[cur] = true;
            const Point2& p = points.at(cur);
            if (loop.empty() || distance(loop.back(), p) > 1e-12 * h) loop.push_back(p);
            const auto& nb = links.at(cur);
            long next = -1;
            for (long cand : nb)
                if (cand != prev && !used[cand]) {
                    next = cand;
                    break;
                }
            if (next < 0) break;
            prev = cur;
            cur = next;
        }
        if (loop.size() >= 2 && distance(loop.front(), loop.back()) <= 1e-12 * h) loop.pop_back();
        if (loop.size() >= 3) loops.push_back(std::move(loop));
    }
    return loops;
}

ExtractedPolygon extract_polygon(const GridFunction& u, const ScalarField& eta, int n_target,
                                 const QuadratureSpec& quad) {
    const double peak = u.max_abs();
    if (!(peak > 0.0) || !std::isfinite(peak)) throw NoContourFound("extract_polygon: u is zero");

    std::optional<ExtractedPolygon> best;
    for (int sign : {1, -1}) {
        GridFunction signed_u = u;
        if (sign < 0)
            for (double& v : signed_u.values()) v = -v;
        for (double q : {0.25, 0.5, 0.75}) {
            const double level = q * peak;
            for (auto& loop : level_contours(signed_u, level)) {
                if (!is_simple(loop)) continue;
                try {
                    const SimplePolygon poly = resample_polygon(SimplePolygon(std::move(loop)), n_target);
                    const double integral = weighted_area(poly, eta, quad);
                    const double ratio = std::abs(integral) / perimeter(poly);
                    if (!best || ratio > best->ratio)
                        best = ExtractedPolygon{poly, integral >= 0.0 ? 1 : -1, ratio, sign * level};
                } catch (const ResampleBrokeSimplicity&) {
                } catch (const NotSimple&) {
                }
            }
        }
    }
    if (!best) throw NoContourFound("extract_polygon: no closed simple contour");
    return *best;
}

Eigen::MatrixXd sampled_operator_matrix(const GaussianOperator& op, double R, int N) {
    const GridFunction shape(N, R);
    const double h = shape.cell();
    Eigen::MatrixXd A(static_cast<Eigen::Index>(op.size()), static_cast<Eigen::Index>(N) * N);
    Eigen::VectorXd col;
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j) {
            op.evaluate(shape.cell_center(i, j), col);
            A.col(static_cast<Eigen::Index>(i) * N + j) = h * h * col;
        }
    return A;
}

Eigen::MatrixXd cell_integral_matrix(const GaussianOperator& op, double R, int N) {
    const double h = 2.0 * R / N;
    const double s = op.sigma();
    const double c = s * std::sqrt(std::numbers::pi / 2.0);
    auto strip = [&](double center, int k) {
        const double lo = -R + k * h, hi = lo + h;
        return c * (std::erf((hi - center) / (s * std::sqrt(2.0))) -
                    std::erf((lo - center) / (s * std::sqrt(2.0))));
    };
    const auto& ctr = op.centers();
    Eigen::MatrixXd A(static_cast<Eigen::Index>(ctr.size()), static_cast<Eigen::Index>(N) * N);
    std::vector<double> fx(N), fy(N);
    for (std::size_t m = 0; m < ctr.size(); ++m) {
        for (int k = 0; k < N; ++k) {
            fx[k] = strip(ctr[m].x, k);
            fy[k] = strip(ctr[m].y, k);
        }
        for (int i = 0; i < N; ++i)
            for (int j = 0; j < N; ++j)
                A(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(i) * N + j) = fx[i] * fy[j];
    }
    return A;
}

namespace {

Eigen::Map<const Eigen::VectorXd> as_vector(const GridFunction& u) {
    return {u.values().data(), static_cast<Eigen::Index>(u.values().size())};
}

}  // namespace

double fixed_grid_discrete_objective(const GaussianOperator& op, const Measurements& y, double lambda,
                                     const GridFunction& u) {
    const Eigen::MatrixXd A = sampled_operator_matrix(op, u.half_width(), u.n());
    const Eigen::VectorXd r = A * as_vector(u) - y;
    return 0.5 * r.squaredNorm() + lambda * discrete_tv(u);
}

double fixed_grid_continuous_objective(const GaussianOperator& op, const Measurements& y,
                                       double lambda, const GridFunction& u) {
    const Eigen::MatrixXd A = cell_integral_matrix(op, u.half_width(), u.n());
    const Eigen::VectorXd r = A * as_vector(u) - y;
    return 0.5 * r.squaredNorm() + lambda * exact_block_tv(u);
}

FixedGridResult solve_fixed_grid_tv(const GaussianOperator& op, const Measurements& y, double lambda,
                                    double R, int N, const PrimalDualConfig& cfg) {
    if (static_cast<std::size_t>(y.size()) != op.size())
        throw InvalidArgument("solve_fixed_grid_tv: measurement length mismatch");
    if (!(lambda > 0.0)) throw InvalidArgument("solve_fixed_grid_tv: lambda must be positive");
    const double h = 2.0 * R / N;
    const Steps st = choose_steps(cfg, N, h);
    const Eigen::MatrixXd A = sampled_operator_matrix(op, R, N);
    const Eigen::Index m = A.rows();

    // prox of tau/2 ||A u - y||^2 through the m x m system (I + tau A A^T)
    const Eigen::MatrixXd small = Eigen::MatrixXd::Identity(m, m) + st.tau * A * A.transpose();
    const Eigen::LLT<Eigen::MatrixXd> llt(small);
    const Eigen::VectorXd Aty = A.transpose() * y;

    GridFunction u(N, R), u_bar(N, R), u_avg(N, R);
    GradientField phi(N);
    FixedGridResult res{GridFunction(N, R), false, 0, 0.0, {}};
    auto objective = [&](const GridFunction& v) {
        const Eigen::VectorXd r = A * as_vector(v) - y;
        return 0.5 * r.squaredNorm() + lambda * discrete_tv(v);
    };
    double last_window = objective(u);
    Eigen::VectorXd w(static_cast<Eigen::Index>(N) * N);
    int it = 0;
    for (it = 1; it <= cfg.max_iters; ++it) {
        const GradientField du = discrete_gradient(u_bar);
        for (std::size_t k = 0; k < phi.gx.size(); ++k) {
            double gx = phi.gx[k] + st.sigma * h * du.gx[k];
            double gy = phi.gy[k] + st.sigma * h * du.gy[k];
            const double nrm = std::hypot(gx, gy);
            if (nrm > lambda) {
                gx *= lambda / nrm;
                gy *= lambda / nrm;
            }
            phi.gx[k] = gx;
            phi.gy[k] = gy;
        }
        const GridFunction div = discrete_divergence(phi, R);
        const auto& dv = div.values();
        const auto& uv0 = u.values();
        for (Eigen::Index k = 0; k < w.size(); ++k)
            w[k] = uv0[static_cast<std::size_t>(k)] + st.tau * h * dv[static_cast<std::size_t>(k)] +
                   st.tau * Aty[k];
        const Eigen::VectorXd z = llt.solve(A * w);
        const Eigen::VectorXd unew = w - st.tau * (A.transpose() * z);

        auto& uv = u.values();
        auto& ub = u_bar.values();
        auto& av = u_avg.values();
        for (std::size_t k = 0; k < uv.size(); ++k) {
            const double nu = unew[static_cast<Eigen::Index>(k)];
            ub[k] = 2.0 * nu - uv[k];
            uv[k] = nu;
            av[k] += (nu - av[k]) / it;
        }
        if (it % cfg.window == 0) {
            res.averaged_objectives.push_back(objective(u_avg));
            const double current = objective(u);
            if (window_converged(current, last_window, cfg.gap_tol)) {
                res.converged = true;
                break;
            }
            last_window = current;
        }
    }
    res.iterations = std::min(it, cfg.max_iters);
    res.objective = objective(u);
    res.u = std::move(u);
    return res;
}

void write_grid_csv(std::ostream& os, const GridFunction& u) {
    os << "i,j,value\n" << std::setprecision(17);
    for (int i = 0; i < u.n(); ++i)
        for (int j = 0; j < u.n(); ++j) os << i << ',' << j << ',' << u(i, j) << '\n';
}

void write_grid_pgm(std::ostream& os, const GridFunction& u) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (double v : u.values()) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    const int N = u.n();
    os << "P5\n" << N << ' ' << N << "\n255\n";
    for (int j = N - 1; j >= 0; --j)
        for (int i = 0; i < N; ++i) {
            const double t = hi > lo ? (u(i, j) - lo) / (hi - lo) : 0.0;
            os.put(static_cast<char>(static_cast<unsigned char>(std::lround(255.0 * t))));
        }
}

}  // namespace polytv
