#include "polytv/sparse_solver.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>

#include "polytv/errors.hpp"

namespace polytv {

namespace {

double sgn(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

std::vector<SimplePolygon> supports_of(const AtomicFunction& u) {
    std::vector<SimplePolygon> s;
    s.reserve(u.size());
    for (const auto& a : u.atoms) s.push_back(a.support);
    return s;
}

Eigen::VectorXd amplitudes_of(const AtomicFunction& u) {
    Eigen::VectorXd a(static_cast<Eigen::Index>(u.size()));
    for (std::size_t i = 0; i < u.size(); ++i) a[static_cast<Eigen::Index>(i)] = u.atoms[i].amplitude;
    return a;
}

}  // namespace

double objective(const AtomicFunction& u, const GaussianOperator& op, const Measurements& y, double lambda,
                 const QuadratureSpec& quad) {
    const Measurements r = forward(op, u, quad) - y;
    return 0.5 * r.squaredNorm() + lambda * u.total_variation();
}

Eigen::MatrixXd support_matrix(const std::vector<SimplePolygon>& supports, const GaussianOperator& op,
                               const QuadratureSpec& quad) {
    Eigen::MatrixXd M(static_cast<Eigen::Index>(op.size()), static_cast<Eigen::Index>(supports.size()));
    for (std::size_t i = 0; i < supports.size(); ++i)
        M.col(static_cast<Eigen::Index>(i)) = sensor_integrals(op, supports[i], quad);
    return M;
}

namespace {

double lasso_value(const Eigen::MatrixXd& M, const Eigen::VectorXd& y, const Eigen::VectorXd& w,
                   const Eigen::VectorXd& a) {
    return 0.5 * (M * a - y).squaredNorm() + w.dot(a.cwiseAbs());
}

double kkt_violation(const Eigen::MatrixXd& M, const Eigen::VectorXd& y, const Eigen::VectorXd& w,
                     const Eigen::VectorXd& a) {
    const Eigen::VectorXd g = M.transpose() * (M * a - y);
    double worst = 0.0;
    for (Eigen::Index i = 0; i < a.size(); ++i) {
        const double v = a[i] != 0.0 ? std::abs(g[i] + w[i] * sgn(a[i])) : std::max(0.0, std::abs(g[i]) - w[i]);
        worst = std::max(worst, v);
    }
    return worst;
}

Eigen::VectorXd soft_threshold(const Eigen::VectorXd& v, const Eigen::VectorXd& t) {
    Eigen::VectorXd out(v.size());
    for (Eigen::Index i = 0; i < v.size(); ++i) out[i] = sgn(v[i]) * std::max(0.0, std::abs(v[i]) - t[i]);
    return out;
}

// Stationarity system on the support of `a` with its sign pattern.
Eigen::VectorXd support_solve(const Eigen::MatrixXd& M, const Eigen::VectorXd& y, const Eigen::VectorXd& w,
                              const Eigen::VectorXd& sign) {
    std::vector<Eigen::Index> S;
    for (Eigen::Index i = 0; i < sign.size(); ++i)
        if (sign[i] != 0.0) S.push_back(i);
    Eigen::VectorXd out = Eigen::VectorXd::Zero(sign.size());
    if (S.empty()) return out;
    const auto k = static_cast<Eigen::Index>(S.size());
    Eigen::MatrixXd MS(M.rows(), k);
    Eigen::VectorXd rhs(k);
    for (Eigen::Index c = 0; c < k; ++c) MS.col(c) = M.col(S[static_cast<std::size_t>(c)]);
    const Eigen::VectorXd Mty = MS.transpose() * y;
    for (Eigen::Index c = 0; c < k; ++c) rhs[c] = Mty[c] - w[S[static_cast<std::size_t>(c)]] * sign[S[static_cast<std::size_t>(c)]];
    const Eigen::VectorXd aS = (MS.transpose() * MS).completeOrthogonalDecomposition().solve(rhs);
    for (Eigen::Index c = 0; c < k; ++c) out[S[static_cast<std::size_t>(c)]] = aS[c];
    return out;
}

// Add/drop active-set iterations seeded with the sign pattern of `a`.
std::optional<Eigen::VectorXd> active_set_solve(const Eigen::MatrixXd& M, const Eigen::VectorXd& y,
                                                const Eigen::VectorXd& w, const Eigen::VectorXd& a, double tol) {
    const Eigen::Index n = a.size();
    Eigen::VectorXd sign(n);
    for (Eigen::Index i = 0; i < n; ++i) sign[i] = sgn(a[i]);
    for (Eigen::Index round = 0; round < 2 * n + 2; ++round) {
        Eigen::VectorXd x = support_solve(M, y, w, sign);
        bool dropped = false;
        for (Eigen::Index i = 0; i < n; ++i)
            if (sign[i] != 0.0 && sgn(x[i]) != sign[i]) {
                sign[i] = 0.0;
                dropped = true;
            }
        if (dropped) continue;
        const Eigen::VectorXd g = M.transpose() * (M * x - y);
        Eigen::Index worst = -1;
        double excess = tol;
        for (Eigen::Index i = 0; i < n; ++i)
            if (sign[i] == 0.0 && std::abs(g[i]) - w[i] > excess) {
                excess = std::abs(g[i]) - w[i];
                worst = i;
            }
        if (worst < 0) return x;
        sign[worst] = -sgn(g[worst]);
    }
    return std::nullopt;
}

}  // namespace

LassoResult solve_weighted_lasso(const Eigen::MatrixXd& M, const Eigen::VectorXd& y, const Eigen::VectorXd& w,
                                 double tol, const Eigen::VectorXd* warm_start, int max_iters) {
    const Eigen::Index n = M.cols();
    if (M.rows() != y.size() || w.size() != n) throw InvalidArgument("solve_weighted_lasso: size mismatch");
    if ((w.array() < 0.0).any()) throw InvalidArgument("solve_weighted_lasso: negative weight");
    LassoResult res;
    res.a = Eigen::VectorXd::Zero(n);
    if (n == 0) {
        res.converged = true;
        return res;
    }
    if (warm_start && warm_start->size() == n) res.a = *warm_start;

    Eigen::VectorXd a = res.a, z = a;
    double t = 1.0;
    double L = std::max(M.squaredNorm() / static_cast<double>(n), 1e-300);
    double best = lasso_value(M, y, w, a);
    Eigen::VectorXd best_a = a;
    double F_prev = best;

    for (int it = 1; it <= max_iters; ++it) {
        const Eigen::VectorXd rz = M * z - y;
        const Eigen::VectorXd gz = M.transpose() * rz;
        const double fz = 0.5 * rz.squaredNorm();
        Eigen::VectorXd next;
        for (;;) {
            next = soft_threshold(z - gz / L, w / L);
            const Eigen::VectorXd d = next - z;
            const double fn = 0.5 * (M * next - y).squaredNorm();
            if (fn <= fz + gz.dot(d) + 0.5 * L * d.squaredNorm() + 1e-15 * std::abs(fz)) break;
            L *= 2.0;
        }
        const double F = lasso_value(M, y, w, next);
        if (F > F_prev) {
            // restart momentum
            t = 1.0;
            z = a;
            F_prev = lasso_value(M, y, w, a);
            continue;
        }
        const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
        z = next + ((t - 1.0) / t_next) * (next - a);
        a = next;
        t = t_next;
        F_prev = F;
        if (F < best) {
            best = F;
            best_a = a;
        }
        res.iterations = it;

        if (it % 10 == 0 || it == 1) {
            if (auto polished = active_set_solve(M, y, w, a, tol)) {
                const double v = kkt_violation(M, y, w, *polished);
                if (v <= tol) {
                    res.a = *polished;
                    res.kkt = v;
                    res.converged = true;
                    return res;
                }
            }
            const double v = kkt_violation(M, y, w, a);
            if (v <= tol) {
                res.a = a;
                res.kkt = v;
                res.converged = true;
                return res;
            }
        }
    }
    res.a = best_a;
    res.kkt = kkt_violation(M, y, w, best_a);
    res.converged = res.kkt <= tol;
    return res;
}

LassoResult solve_amplitudes(const std::vector<SimplePolygon>& supports, const GaussianOperator& op,
                             const Measurements& y, double lambda, const QuadratureSpec& quad, double tol,
                             const Eigen::VectorXd* warm_start) {
    if (!(lambda >= 0.0)) throw InvalidArgument("solve_amplitudes: lambda must be nonnegative");
    const Eigen::MatrixXd M = support_matrix(supports, op, quad);
    Eigen::VectorXd w(static_cast<Eigen::Index>(supports.size()));
    for (std::size_t i = 0; i < supports.size(); ++i)
        w[static_cast<Eigen::Index>(i)] = lambda * perimeter(supports[i]);
    return solve_weighted_lasso(M, y, w, tol, warm_start);
}

void SlideConfig::validate() const {
    if (max_iters < 0) throw InvalidArgument("SlideConfig: max_iters must be >= 0");
    if (!(step_init > 0.0) || !(grad_tol > 0.0) || !(min_step > 0.0))
        throw InvalidArgument("SlideConfig: step_init, grad_tol and min_step must be positive");
    if (!(armijo_c > 0.0 && armijo_c < 1.0)) throw InvalidArgument("SlideConfig: armijo_c must lie in (0,1)");
    if (!(step_shrink > 0.0 && step_shrink < 1.0))
        throw InvalidArgument("SlideConfig: step_shrink must lie in (0,1)");
}

SlideGradient sliding_gradient(const AtomicFunction& u, const GaussianOperator& op, const Measurements& y,
                               double lambda, const QuadratureSpec& quad) {
    const Measurements r = forward(op, u, quad) - y;
    SlideGradient g;
    g.h.resize(static_cast<Eigen::Index>(u.size()));
    g.theta.resize(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) {
        const auto& atom = u.atoms[i];
        const auto v = atom.support.span();
        const std::size_t n = v.size();
        const double a = atom.amplitude;
        g.h[static_cast<Eigen::Index>(i)] =
            sensor_integrals(op, atom.support, quad).dot(r) + lambda * perimeter(atom.support) * sgn(a);
        const MeasurementWeights W = edge_measurement_weights(op, atom.support, quad);
        const auto dP = perimeter_gradient(v);
        auto& th = g.theta[i];
        th.resize(n);
        for (std::size_t j = 0; j < n; ++j) {
            const Point2 t_prev = (v[j] - v[(j + n - 1) % n]) / distance(v[j], v[(j + n - 1) % n]);
            const Point2 t_next = (v[(j + 1) % n] - v[j]) / distance(v[(j + 1) % n], v[j]);
            const Point2 nu_prev{t_prev.y, -t_prev.x}, nu_next{t_next.y, -t_next.x};
            th[j] = a * (W.minus[j].dot(r) * nu_prev + W.plus[j].dot(r) * nu_next) +
                    lambda * std::abs(a) * dP[j];
        }
    }
    return g;
}

SlideResult sliding_step(const AtomicFunction& u, const GaussianOperator& op, const Measurements& y,
                         double lambda, const SlideConfig& cfg, const QuadratureSpec& quad) {
    cfg.validate();
    for (const auto& a : u.atoms)
        if (a.amplitude == 0.0) throw InvalidArgument("sliding_step: amplitudes must be nonzero (prune first)");
    SlideResult res{u};
    double T = objective(u, op, y, lambda, quad);
    res.objective_before = T;
    res.objective_after = T;
    if (u.empty()) return res;

    AtomicFunction cur = u;
    // amplitude preconditioner, fixed for the whole call: a unit change in a
    // counts like a displacement of diam / max|a|
    double diam = 0.0, amax = 0.0;
    for (const auto& a : cur.atoms) {
        diam = std::max(diam, diameter(a.support));
        amax = std::max(amax, std::abs(a.amplitude));
    }
    const double ca = (amax / diam) * (amax / diam);

    SlideGradient g_prev;
    AtomicFunction prev;
    for (int it = 0; it < cfg.max_iters; ++it) {
        const SlideGradient g = sliding_gradient(cur, op, y, lambda, quad);
        double sq = ca * g.h.squaredNorm(), disp = std::sqrt(ca) * g.h.cwiseAbs().maxCoeff();
        for (const auto& th : g.theta)
            for (const auto& t : th) {
                sq += dot(t, t);
                disp = std::max(disp, norm(t));
            }
        if (!(T > 0.0) || std::sqrt(sq) * diam / T < cfg.grad_tol || disp == 0.0) break;

        // Barzilai-Borwein first trial in the preconditioned metric
        double alpha = cfg.step_init * diam / disp;
        if (it > 0) {
            double ss = 0.0, sd = 0.0, dd = 0.0;
            for (std::size_t i = 0; i < cur.size(); ++i) {
                const double sa = (cur.atoms[i].amplitude - prev.atoms[i].amplitude) / std::sqrt(ca);
                const double da = std::sqrt(ca) * (g.h[static_cast<Eigen::Index>(i)] -
                                                   g_prev.h[static_cast<Eigen::Index>(i)]);
                ss += sa * sa;
                sd += sa * da;
                dd += da * da;
                for (std::size_t j = 0; j < g.theta[i].size(); ++j) {
                    const Point2 sx = cur.atoms[i].support[j] - prev.atoms[i].support[j];
                    const Point2 dx = g.theta[i][j] - g_prev.theta[i][j];
                    ss += dot(sx, sx);
                    sd += dot(sx, dx);
                    dd += dot(dx, dx);
                }
            }
            if (sd > 0.0) alpha = it % 2 ? ss / sd : sd / dd;
        }
        alpha = std::min(alpha, 0.25 * diam / disp);
        bool accepted = false;
        while (alpha * disp >= cfg.min_step * diam) {
            AtomicFunction trial;
            bool ok = true;
            for (std::size_t i = 0; i < cur.size() && ok; ++i) {
                const auto& atom = cur.atoms[i];
                const double a_new = atom.amplitude - alpha * ca * g.h[static_cast<Eigen::Index>(i)];
                if (sgn(a_new) != sgn(atom.amplitude)) {
                    ok = false;
                    break;
                }
                std::vector<Point2> x(atom.support.vertices());
                for (std::size_t j = 0; j < x.size(); ++j) x[j] -= alpha * g.theta[i][j];
                if (!is_simple(x) || signed_area(x) <= 0.0) {
                    ok = false;
                    break;
                }
                trial.atoms.push_back({a_new, SimplePolygon(std::move(x))});
            }
            if (ok) {
                const double Tt = objective(trial, op, y, lambda, quad);
                if (Tt <= T - cfg.armijo_c * alpha * sq) {
                    prev = std::move(cur);
                    g_prev = g;
                    cur = std::move(trial);
                    T = Tt;
                    accepted = true;
                    break;
                }
            }
            alpha *= cfg.step_shrink;
        }
        if (!accepted) break;
        ++res.iterations;
    }
    res.u = std::move(cur);
    res.objective_after = T;
    return res;
}

void FWConfig::validate() const {
    if (!(lambda > 0.0)) throw InvalidArgument("FWConfig: lambda must be positive");
    if (!(stop_tol > 0.0)) throw InvalidArgument("FWConfig: stop_tol must be positive");
    if (max_atoms < 1 || max_iters < 0) throw InvalidArgument("FWConfig: max_atoms >= 1, max_iters >= 0");
    if (!(lasso_tol > 0.0)) throw InvalidArgument("FWConfig: lasso_tol must be positive");
    if (prune_tol < 0.0) throw InvalidArgument("FWConfig: prune_tol must be nonnegative");
    if (mesh_n < 2 || n_vertices < 3) throw InvalidArgument("FWConfig: mesh_n >= 2, n_vertices >= 3");
    slide_cfg.validate();
}

CheegerCandidate cheeger_oracle(const GaussianOperator& op, const Eigen::VectorXd& coeffs, int mesh_n,
                                int n_vertices, const PrimalDualConfig& grid_cfg, const RefineConfig& refine_cfg,
                                const QuadratureSpec& quad, bool do_refine) {
    const DualField eta(op, coeffs);
    const ScalarField field = eta.as_field();
    const double R = dual_mass_half_width(op, coeffs);
    const GridFunction bar = discretize_field(field, R, mesh_n, quad);
    const RelaxedCheegerResult relaxed = solve_relaxed_cheeger(bar, grid_cfg);
    const ExtractedPolygon ext = extract_polygon(relaxed.u, field, n_vertices, quad);

    CheegerCandidate c{ext.polygon};
    c.mesh_ratio = ext.ratio;
    c.ratio = ext.ratio;
    c.half_width = R;
    c.mesh_objective = relaxed.objective;
    if (!relaxed.converged) c.warning = "relaxed Cheeger iteration hit max_iters";
    if (do_refine) {
        try {
            RefineResult r = refine(ext.polygon, field, refine_cfg, quad);
            c.polygon = std::move(r.polygon);
            c.ratio = r.objective;
            c.refined = true;
        } catch (const Error& e) {
            c.warning += std::string(c.warning.empty() ? "" : "; ") + "refinement skipped: " + e.what();
        }
    }
    c.sign = weighted_area(c.polygon, field, quad) >= 0.0 ? 1 : -1;
    return c;
}

double min_boundary_gap(const AtomicFunction& u) {
    double gap = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < u.size(); ++i)
        for (std::size_t k = i + 1; k < u.size(); ++k) {
            const auto& a = u.atoms[i].support;
            const auto& b = u.atoms[k].support;
            for (std::size_t p = 0; p < a.size(); ++p)
                for (std::size_t q = 0; q < b.size(); ++q)
                    gap = std::min(gap, segment_distance(a[p], a[(p + 1) % a.size()], b[q], b[(q + 1) % b.size()]));
        }
    return gap;
}

namespace {

// Drop atoms with |a| < tol; returns true when the atom at `watch` was removed.
bool prune(AtomicFunction& u, double tol, std::size_t watch) {
    bool removed_watch = false;
    AtomicFunction kept;
    for (std::size_t i = 0; i < u.size(); ++i) {
        if (std::abs(u.atoms[i].amplitude) < tol) {
            if (i == watch) removed_watch = true;
            continue;
        }
        kept.atoms.push_back(u.atoms[i]);
    }
    u = std::move(kept);
    return removed_watch;
}

double prune_threshold(const FWConfig& cfg, const Measurements& y, const std::vector<SimplePolygon>& s) {
    if (cfg.prune_tol > 0.0) return cfg.prune_tol;
    double pmax = 0.0;
    for (const auto& p : s) pmax = std::max(pmax, perimeter(p));
    return pmax > 0.0 ? 1e-10 * y.norm() / pmax : 0.0;
}

LassoResult fw_lasso(const std::vector<SimplePolygon>& supports, const GaussianOperator& op, const Measurements& y,
                     const FWConfig& cfg, const QuadratureSpec& quad, const Eigen::VectorXd& warm) {
    double pmin = std::numeric_limits<double>::infinity();
    for (const auto& p : supports) pmin = std::min(pmin, perimeter(p));
    return solve_amplitudes(supports, op, y, cfg.lambda, quad, cfg.lambda * cfg.lasso_tol * pmin, &warm);
}

}  // namespace

FWResult frank_wolfe(const GaussianOperator& op, const Measurements& y, const FWConfig& cfg,
                     const PrimalDualConfig& grid_cfg, const RefineConfig& refine_cfg, const QuadratureSpec& quad) {
    cfg.validate();
    if (static_cast<std::size_t>(y.size()) != op.size())
        throw InvalidArgument("frank_wolfe: measurement length mismatch");
    FWResult out;
    auto& tr = out.trace;
    AtomicFunction& u = out.u;
    tr.initial_objective = 0.5 * y.squaredNorm();

    for (int k = 0;; ++k) {
        const Measurements r = forward(op, u, quad) - y;
        const Eigen::VectorXd coeffs = -r / cfg.lambda;
        if (coeffs.cwiseAbs().maxCoeff() == 0.0) {
            tr.stopped_by = "certificate";
            tr.final_ratio = 0.0;
            break;
        }
        if (k >= cfg.max_iters) {
            tr.stopped_by = "max_iters";
            break;
        }
        CheegerCandidate cand{SimplePolygon({{0, 0}, {1, 0}, {0, 1}})};
        try {
            cand = cheeger_oracle(op, coeffs, cfg.mesh_n, cfg.n_vertices, grid_cfg, refine_cfg, quad, cfg.refine);
        } catch (const NoContourFound& e) {
            tr.stopped_by = "no_contour";
            tr.warnings.push_back(std::string("iteration ") + std::to_string(k) + ": " + e.what());
            break;
        }
        if (cfg.progress)
            *cfg.progress << "k=" << k << " oracle: mesh J=" << cand.mesh_ratio << " refined J=" << cand.ratio
                          << std::endl;
        if (!cand.warning.empty())
            tr.warnings.push_back("iteration " + std::to_string(k) + ": " + cand.warning);
        tr.half_width = std::max(tr.half_width, cand.half_width);
        tr.final_ratio = cand.ratio;
        if (cand.ratio <= 1.0 + cfg.stop_tol) {
            tr.stopped_by = "certificate";
            break;
        }
        if (static_cast<int>(u.size()) >= cfg.max_atoms) {
            tr.stopped_by = "max_atoms";
            break;
        }

        // insert with zero amplitude, then re-fit every amplitude
        u.atoms.push_back({0.0, cand.polygon});
        const std::size_t inserted = u.size() - 1;
        auto supports = supports_of(u);
        LassoResult las = fw_lasso(supports, op, y, cfg, quad, amplitudes_of(u));
        if (!las.converged) tr.warnings.push_back("iteration " + std::to_string(k) + ": LASSO not converged");
        for (std::size_t i = 0; i < u.size(); ++i) u.atoms[i].amplitude = las.a[static_cast<Eigen::Index>(i)];
        if (prune(u, prune_threshold(cfg, y, supports), inserted)) {
            tr.stopped_by = "pruned_insertion";
            break;
        }

        if (cfg.progress) *cfg.progress << "k=" << k << " lasso: " << las.iterations << " iterations" << std::endl;
        FWRecord rec;
        rec.k = k;
        rec.cheeger_ratio = cand.ratio;
        rec.mesh_ratio = cand.mesh_ratio;
        if (cfg.slide && !u.empty()) {
            const SlideResult s = sliding_step(u, op, y, cfg.lambda, cfg.slide_cfg, quad);
            rec.slide_improvement = s.objective_before - s.objective_after;
            if (cfg.progress)
                *cfg.progress << "k=" << k << " slide: " << s.iterations << " iterations, T " << s.objective_before
                              << " -> " << s.objective_after << std::endl;
            u = s.u;
            supports = supports_of(u);
            LassoResult las2 = fw_lasso(supports, op, y, cfg, quad, amplitudes_of(u));
            for (std::size_t i = 0; i < u.size(); ++i) u.atoms[i].amplitude = las2.a[static_cast<Eigen::Index>(i)];
            prune(u, prune_threshold(cfg, y, supports), u.size());
        }

        const Measurements rr = forward(op, u, quad) - y;
        rec.tv = u.total_variation();
        rec.residual_norm = rr.norm();
        rec.objective = 0.5 * rr.squaredNorm() + cfg.lambda * rec.tv;
        rec.n_atoms = static_cast<int>(u.size());
        tr.records.push_back(rec);
        tr.iterations = static_cast<int>(tr.records.size());

        if (u.size() > 1) {
            double diam = 0.0;
            for (const auto& a : u.atoms) diam = std::max(diam, diameter(a.support));
            if (min_boundary_gap(u) <= 1e-6 * diam)
                tr.warnings.push_back("iteration " + std::to_string(k) +
                                      ": atom boundaries within 1e-6 diam, TV additivity may fail");
        }
    }
    return out;
}

void write_trace_csv(std::ostream& os, const FWTrace& trace) {
    os << "k,objective,tv,residual_norm,cheeger_ratio,n_atoms\n" << std::setprecision(17);
    for (const auto& r : trace.records)
        os << r.k << ',' << r.objective << ',' << r.tv << ',' << r.residual_norm << ',' << r.cheeger_ratio << ','
           << r.n_atoms << '\n';
}

}  // namespace polytv
