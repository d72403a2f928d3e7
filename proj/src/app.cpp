#include "polytv/app.hpp"

#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <numbers>
#include <ostream>
#include <sstream>

#include "polytv/errors.hpp"
#include "polytv/radial_oracle.hpp"

namespace polytv::app {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

ShapeSpec parse_shape(const std::string& key, const std::string& text) {
    std::istringstream in(text);
    ShapeSpec s;
    in >> s.kind;
    std::map<std::string, double> kv;
    std::string token;
    while (in >> token) {
        const auto eq = token.find('=');
        if (eq == std::string::npos) throw ConfigError(key + ": expected name=value, got '" + token + "'");
        Config one = Config::parse("v = " + token.substr(eq + 1), key);
        kv[token.substr(0, eq)] = one.get_double("v");
    }
    auto take = [&](const std::string& name, std::optional<double> fallback = std::nullopt) {
        const auto it = kv.find(name);
        if (it != kv.end()) {
            const double v = it->second;
            kv.erase(it);
            return v;
        }
        if (!fallback) throw ConfigError(key + ": shape '" + s.kind + "' needs '" + name + "'");
        return *fallback;
    };
    s.amplitude = take("amplitude", 1.0);
    if (s.kind == "disk") {
        s.cx = take("cx", 0.0);
        s.cy = take("cy", 0.0);
        s.radius = take("r");
    } else if (s.kind == "rectangle") {
        s.x0 = take("x0");
        s.y0 = take("y0");
        s.x1 = take("x1");
        s.y1 = take("y1");
        if (!(s.x1 > s.x0 && s.y1 > s.y0)) throw ConfigError(key + ": rectangle needs x1 > x0 and y1 > y0");
    } else if (s.kind == "ngon") {
        s.cx = take("cx", 0.0);
        s.cy = take("cy", 0.0);
        s.radius = take("r");
        s.sides = static_cast<int>(take("n"));
        s.phase = take("phase", 0.0);
        if (s.sides < 3) throw ConfigError(key + ": ngon needs n >= 3");
    } else if (s.kind == "annulus") {
        s.cx = take("cx", 0.0);
        s.cy = take("cy", 0.0);
        s.inner_radius = take("r_in");
        s.radius = take("r_out");
        if (!(s.radius > s.inner_radius && s.inner_radius > 0.0))
            throw ConfigError(key + ": annulus needs 0 < r_in < r_out");
    } else {
        throw ConfigError(key + ": unknown shape '" + s.kind + "' (disk, rectangle, ngon, annulus)");
    }
    if (s.kind != "rectangle" && !(s.radius > 0.0)) throw ConfigError(key + ": radius must be positive");
    if (!kv.empty()) throw ConfigError(key + ": unknown parameter '" + kv.begin()->first + "'");
    return s;
}

void read_refine(const Config& c, const std::string& p, RefineConfig& r) {
    r.max_iters = static_cast<int>(c.get_int(p + "max_iters", r.max_iters));
    r.step_init = c.get_double(p + "step_init", r.step_init);
    r.armijo_c = c.get_double(p + "armijo_c", r.armijo_c);
    r.step_shrink = c.get_double(p + "step_shrink", r.step_shrink);
    r.grad_tol = c.get_double(p + "grad_tol", r.grad_tol);
    r.min_step = c.get_double(p + "min_step", r.min_step);
}

void read_slide(const Config& c, const std::string& p, SlideConfig& r) {
    r.max_iters = static_cast<int>(c.get_int(p + "max_iters", r.max_iters));
    r.step_init = c.get_double(p + "step_init", r.step_init);
    r.armijo_c = c.get_double(p + "armijo_c", r.armijo_c);
    r.step_shrink = c.get_double(p + "step_shrink", r.step_shrink);
    r.grad_tol = c.get_double(p + "grad_tol", r.grad_tol);
    r.min_step = c.get_double(p + "min_step", r.min_step);
}

void read_primal_dual(const Config& c, const std::string& p, PrimalDualConfig& r) {
    r.max_iters = static_cast<int>(c.get_int(p + "max_iters", r.max_iters));
    r.tau = c.get_double(p + "tau", r.tau);
    r.sigma_step = c.get_double(p + "sigma_step", r.sigma_step);
    r.gap_tol = c.get_double(p + "gap_tol", r.gap_tol);
    r.window = static_cast<int>(c.get_int(p + "window", r.window));
}

}  // namespace

RunConfig RunConfig::from(const Config& c) {
    RunConfig rc;
    rc.half_extent = c.get_double("operator.half_extent", rc.half_extent);
    rc.per_side = static_cast<int>(c.get_int("operator.per_side", rc.per_side));
    rc.sigma = c.get_double("operator.sigma", rc.sigma);

    rc.tau = c.get_double("noise.tau", 0.0);
    if (c.has("noise.snr_db")) rc.snr_db = c.get_double("noise.snr_db");
    if (c.has("noise.seed")) {
        const long s = c.get_int("noise.seed");
        if (s < 0) throw ConfigError("noise.seed must be nonnegative");
        rc.seed = static_cast<std::uint64_t>(s);
    }

    if (c.has("solver.lambda")) rc.lambda = c.get_double("solver.lambda");
    rc.lambda_c = c.get_double("solver.lambda_c", rc.lambda_c);
    rc.fw.stop_tol = c.get_double("solver.stop_tol", rc.fw.stop_tol);
    rc.fw.max_atoms = static_cast<int>(c.get_int("solver.max_atoms", rc.fw.max_atoms));
    rc.fw.max_iters = static_cast<int>(c.get_int("solver.max_iters", rc.fw.max_iters));
    rc.fw.lasso_tol = c.get_double("solver.lasso_tol", rc.fw.lasso_tol);
    rc.fw.prune_tol = c.get_double("solver.prune_tol", rc.fw.prune_tol);
    rc.fw.mesh_n = static_cast<int>(c.get_int("solver.mesh_n", rc.fw.mesh_n));
    rc.fw.n_vertices = static_cast<int>(c.get_int("solver.n_vertices", rc.fw.n_vertices));
    rc.fw.refine = c.get_bool("solver.refine", rc.fw.refine);
    rc.fw.slide = c.get_bool("solver.slide", rc.fw.slide);
    read_slide(c, "slide.", rc.fw.slide_cfg);
    read_primal_dual(c, "grid.", rc.grid);
    read_primal_dual(c, "baseline.", rc.baseline);
    rc.baseline_n = static_cast<int>(c.get_int("baseline.n", rc.baseline_n));
    read_refine(c, "refine.", rc.refine);

    rc.quad.triangle_rule_order = static_cast<int>(c.get_int("quadrature.triangle_rule_order", rc.quad.triangle_rule_order));
    rc.quad.edge_rule_order = static_cast<int>(c.get_int("quadrature.edge_rule_order", rc.quad.edge_rule_order));
    rc.quad.refine_tol = c.get_double("quadrature.refine_tol", rc.quad.refine_tol);
    rc.quad.max_subdivision_depth =
        static_cast<int>(c.get_int("quadrature.max_subdivision_depth", rc.quad.max_subdivision_depth));

    rc.disk_vertices = static_cast<int>(c.get_int("phantom.disk_vertices", rc.disk_vertices));
    for (const auto& key : c.keys_with_prefix("phantom.")) {
        if (key == "phantom.disk_vertices") continue;
        rc.phantom.push_back(parse_shape(key, c.get_string(key)));
    }
    rc.out_dir = c.get_string("output.dir", rc.out_dir);
    rc.raster_n = static_cast<int>(c.get_int("output.raster_n", rc.raster_n));
    return rc;
}

void RunConfig::validate() const {
    if (!(half_extent > 0.0)) throw ConfigError("operator.half_extent must be positive");
    if (per_side < 1) throw ConfigError("operator.per_side must be >= 1");
    if (!(sigma > 0.0)) throw ConfigError("operator.sigma must be positive");
    if (tau < 0.0) throw ConfigError("noise.tau must be nonnegative");
    if (snr_db && tau > 0.0) throw ConfigError("give either noise.tau or noise.snr_db, not both");
    if ((tau > 0.0 || snr_db) && !seed) throw ConfigError("noise.seed is required when noise is enabled");
    if (lambda && !(*lambda > 0.0)) throw ConfigError("solver.lambda must be positive");
    if (!(lambda_c > 0.0)) throw ConfigError("solver.lambda_c must be positive");
    if (disk_vertices < 3 || raster_n < 2 || baseline_n < 2)
        throw ConfigError("phantom.disk_vertices >= 3, output.raster_n >= 2, baseline.n >= 2");
    try {
        quad.validate();
        refine.validate();
        fw.slide_cfg.validate();
    } catch (const InvalidArgument& e) {
        throw ConfigError(e.what());
    }
}

GaussianOperator build_operator(const RunConfig& rc) {
    return GaussianOperator::grid(rc.half_extent, rc.per_side, rc.sigma);
}

AtomicFunction build_phantom(const RunConfig& rc) {
    AtomicFunction u;
    for (const auto& s : rc.phantom) {
        if (s.kind == "disk") {
            u.atoms.push_back({s.amplitude, regular_polygon({s.cx, s.cy}, s.radius, rc.disk_vertices)});
        } else if (s.kind == "rectangle") {
            u.atoms.push_back({s.amplitude, SimplePolygon({{s.x0, s.y0}, {s.x1, s.y0}, {s.x1, s.y1}, {s.x0, s.y1}})});
        } else if (s.kind == "ngon") {
            u.atoms.push_back({s.amplitude, regular_polygon({s.cx, s.cy}, s.radius, s.sides, s.phase)});
        } else if (s.kind == "annulus") {
            u.atoms.push_back({s.amplitude, regular_polygon({s.cx, s.cy}, s.radius, rc.disk_vertices)});
            u.atoms.push_back({-s.amplitude, regular_polygon({s.cx, s.cy}, s.inner_radius, rc.disk_vertices)});
        }
    }
    return u;
}

NormalStream::NormalStream(std::uint64_t seed) : engine_(seed) {}

double NormalStream::uniform() {
    // 53 random bits mapped into the open interval (0, 1)
    return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
}

double NormalStream::next() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    const double r = std::sqrt(-2.0 * std::log(uniform()));
    const double t = 2.0 * std::numbers::pi * uniform();
    spare_ = r * std::sin(t);
    has_spare_ = true;
    return r * std::cos(t);
}

Observation observe(const RunConfig& rc, const GaussianOperator& op, const AtomicFunction& u0) {
    Observation obs;
    obs.clean = forward(op, u0, rc.quad);
    obs.y = obs.clean;
    const double m = static_cast<double>(op.size());
    obs.tau = rc.snr_db ? obs.clean.norm() / (std::sqrt(m) * std::pow(10.0, *rc.snr_db / 20.0)) : rc.tau;
    if (obs.tau > 0.0) {
        NormalStream noise(*rc.seed);
        for (Eigen::Index j = 0; j < obs.y.size(); ++j) obs.y[j] += obs.tau * noise.next();
    }
    if (rc.lambda) {
        obs.lambda = *rc.lambda;
    } else {
        if (!(obs.tau > 0.0)) throw ConfigError("solver.lambda is required when there is no noise");
        obs.lambda = calibrated_lambda(op.size(), obs.tau, rc.lambda_c);
    }
    return obs;
}

GridFunction rasterize(const AtomicFunction& u, double R, int n) {
    GridFunction g(n, R);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) g(i, j) = u.value_at(g.cell_center(i, j));
    return g;
}

void write_measurements_csv(std::ostream& os, const Measurements& y) {
    os << "j,value\n" << std::setprecision(17);
    for (Eigen::Index j = 0; j < y.size(); ++j) os << j << ',' << y[j] << '\n';
}

std::string summary_json(const FWResult& res, double lambda, double final_objective) {
    json atoms = json::array();
    for (const auto& a : res.u.atoms)
        atoms.push_back(json{{"amplitude", a.amplitude},
                         {"n_vertices", a.support.size()},
                         {"perimeter", perimeter(a.support)},
                         {"area", signed_area(a.support.span())}});
    json j = {{"lambda", lambda},
              {"iterations", res.trace.iterations},
              {"stopped_by", res.trace.stopped_by},
              {"final_objective", final_objective},
              {"final_cheeger_ratio", res.trace.final_ratio},
              {"initial_objective", res.trace.initial_objective},
              {"n_atoms", res.u.size()},
              {"atoms", atoms},
              {"warnings", res.trace.warnings}};
    return j.dump(2) + "\n";
}

namespace {

struct Context {
    RunConfig rc;
    fs::path out;
};

Context prepare(const CommandOptions& opt) {
    if (opt.config_path.empty()) throw ConfigError("--config is required");
    Context ctx{RunConfig::from(Config::load(opt.config_path)), {}};
    if (opt.seed) ctx.rc.seed = opt.seed;
    ctx.rc.quiet = opt.quiet;
    ctx.rc.validate();
    ctx.out = opt.out_dir.empty() ? fs::path(ctx.rc.out_dir) : fs::path(opt.out_dir);
    fs::create_directories(ctx.out);
    return ctx;
}

std::ofstream open_out(const fs::path& p) {
    std::ofstream f(p, std::ios::binary);
    if (!f) throw Error("cannot write '" + p.string() + "'");
    return f;
}

int guarded(std::ostream& err, const std::function<int()>& body) {
    try {
        return body();
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return config_error;
    } catch (const NoContourFound& e) {
        err << "degenerate: " << e.what() << '\n';
        return degenerate;
    } catch (const DegenerateAngle& e) {
        err << "degenerate: " << e.what() << '\n';
        return degenerate;
    } catch (const StalledAtNonSimple& e) {
        err << "degenerate: " << e.what() << '\n';
        return degenerate;
    } catch (const AssumptionViolated& e) {
        err << "assumption violated: " << e.what() << '\n';
        return assumption_violated;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return failure;
    }
}

}  // namespace

int cmd_solve(const CommandOptions& opt, std::ostream& log, std::ostream& err) {
    return guarded(err, [&] {
        Context ctx = prepare(opt);
        const RunConfig& rc = ctx.rc;
        const GaussianOperator op = build_operator(rc);
        const AtomicFunction u0 = build_phantom(rc);
        const Observation obs = observe(rc, op, u0);
        FWConfig fw = rc.fw;
        fw.lambda = obs.lambda;
        if (!rc.quiet) fw.progress = &log;
        const FWResult res = frank_wolfe(op, obs.y, fw, rc.grid, rc.refine, rc.quad);
        const double T = objective(res.u, op, obs.y, obs.lambda, rc.quad);

        open_out(ctx.out / "summary.json") << summary_json(res, obs.lambda, T);
        {
            auto f = open_out(ctx.out / "atoms.csv");
            write_polygon_csv(f, [&] {
                std::vector<SimplePolygon> s;
                for (const auto& a : res.u.atoms) s.push_back(a.support);
                return s;
            }());
        }
        {
            auto f = open_out(ctx.out / "trace.csv");
            write_trace_csv(f, res.trace);
        }
        {
            auto f = open_out(ctx.out / "measurements.csv");
            write_measurements_csv(f, obs.y);
        }
        {
            auto f = open_out(ctx.out / "reconstruction.pgm");
            write_grid_pgm(f, rasterize(res.u, rc.half_extent, rc.raster_n));
        }
        if (!rc.quiet) {
            log << std::setprecision(10) << "lambda=" << obs.lambda << " tau=" << obs.tau << " atoms=" << res.u.size()
                << " iterations=" << res.trace.iterations << " stopped_by=" << res.trace.stopped_by
                << " objective=" << T << '\n';
            for (const auto& w : res.trace.warnings) err << "warning: " << w << '\n';
        }
        return ok;
    });
}

int cmd_baseline(const CommandOptions& opt, std::ostream& log, std::ostream& err) {
    return guarded(err, [&] {
        Context ctx = prepare(opt);
        const RunConfig& rc = ctx.rc;
        const GaussianOperator op = build_operator(rc);
        const AtomicFunction u0 = build_phantom(rc);
        const Observation obs = observe(rc, op, u0);
        const FixedGridResult res =
            solve_fixed_grid_tv(op, obs.y, obs.lambda, rc.half_extent, rc.baseline_n, rc.baseline);
        const double discrete = fixed_grid_discrete_objective(op, obs.y, obs.lambda, res.u);
        const double continuous = fixed_grid_continuous_objective(op, obs.y, obs.lambda, res.u);
        json j = {{"lambda", obs.lambda},
                  {"n", rc.baseline_n},
                  {"half_width", rc.half_extent},
                  {"iterations", res.iterations},
                  {"converged", res.converged},
                  {"discrete_objective", discrete},
                  {"continuous_objective", continuous}};
        open_out(ctx.out / "baseline.json") << j.dump(2) << "\n";
        {
            auto f = open_out(ctx.out / "baseline.csv");
            write_grid_csv(f, res.u);
        }
        {
            auto f = open_out(ctx.out / "baseline.pgm");
            write_grid_pgm(f, res.u);
        }
        {
            auto f = open_out(ctx.out / "measurements.csv");
            write_measurements_csv(f, obs.y);
        }
        if (!rc.quiet)
            log << std::setprecision(10) << "lambda=" << obs.lambda << " iterations=" << res.iterations
                << " converged=" << res.converged << " discrete_objective=" << discrete
                << " continuous_objective=" << continuous << '\n';
        return ok;
    });
}

int cmd_cheeger(const CommandOptions& opt, std::ostream& log, std::ostream& err) {
    return guarded(err, [&] {
        Context ctx = prepare(opt);
        const RunConfig& rc = ctx.rc;
        const Config c = Config::load(opt.config_path);
        const std::string preset = c.get_string("field.preset", "gaussian");
        std::optional<GaussianOperator> op;
        Eigen::VectorXd coeffs;
        if (preset == "gaussian") {
            op.emplace(std::vector<Point2>{{c.get_double("field.cx", 0.0), c.get_double("field.cy", 0.0)}},
                       c.get_double("field.sigma", 1.0));
            coeffs = Eigen::VectorXd::Constant(1, c.get_double("field.amplitude", 1.0));
        } else if (preset == "operator") {
            op.emplace(build_operator(rc));
            const auto v = c.get_doubles("field.coefficients");
            if (v.size() != op->size())
                throw ConfigError("field.coefficients needs " + std::to_string(op->size()) + " values");
            coeffs = Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
        } else {
            throw ConfigError("field.preset must be 'gaussian' or 'operator'");
        }
        const CheegerCandidate cand =
            cheeger_oracle(*op, coeffs, rc.fw.mesh_n, rc.fw.n_vertices, rc.grid, rc.refine, rc.quad, rc.fw.refine);
        const DualField eta(*op, coeffs);
        const double residual = optimality_residual(cand.polygon, eta.as_field(), rc.quad);
        const Point2 center = vertex_centroid(cand.polygon.span());
        double mean = 0.0, sq = 0.0;
        for (const auto& v : cand.polygon.vertices()) mean += distance(v, center);
        mean /= static_cast<double>(cand.polygon.size());
        for (const auto& v : cand.polygon.vertices()) sq += std::pow(distance(v, center) - mean, 2);
        const double cv = std::sqrt(sq / static_cast<double>(cand.polygon.size())) / mean;

        json j = {{"mesh_ratio", cand.mesh_ratio},
                  {"refined_ratio", cand.ratio},
                  {"refined", cand.refined},
                  {"sign", cand.sign},
                  {"optimality_residual", residual},
                  {"vertex_radius_mean", mean},
                  {"vertex_radius_cv", cv},
                  {"centroid", {center.x, center.y}},
                  {"half_width", cand.half_width},
                  {"mesh_objective", cand.mesh_objective}};
        if (!cand.warning.empty()) j["warning"] = cand.warning;
        open_out(ctx.out / "cheeger.json") << j.dump(2) << "\n";
        {
            auto f = open_out(ctx.out / "polygon.csv");
            write_polygon_csv(f, {cand.polygon});
        }
        if (!rc.quiet) {
            log << std::setprecision(10) << "mesh J=" << cand.mesh_ratio << " refined J=" << cand.ratio
                << " residual=" << residual << " radius cv=" << cv << '\n';
            if (!cand.warning.empty()) err << "warning: " << cand.warning << '\n';
        }
        return ok;
    });
}

int cmd_radial(const CommandOptions& opt, std::ostream& log, std::ostream& err) {
    return guarded(err, [&] {
        Context ctx = prepare(opt);
        const RunConfig& rc = ctx.rc;
        const Config c = Config::load(opt.config_path);
        const std::string kind = c.get_string("radial.profile", "gaussian");
        const double s = c.get_double("radial.sigma", 1.0);
        if (!(s > 0.0)) throw ConfigError("radial.sigma must be positive");
        radial::RadialProfile profile;
        if (kind == "gaussian") {
            profile = radial::RadialProfile::gaussian(s);
        } else if (kind == "constant") {
            profile = {[](double) { return 1.0; }, std::nullopt, "constant"};
        } else if (kind == "increasing") {
            profile = {[s](double r) { return 1.0 + r / s; }, s, "increasing"};
        } else if (kind == "cauchy") {
            // r g(r) unimodal for this heavy-tailed profile
            profile = {[s](double r) { return 1.0 / std::pow(1.0 + (r / s) * (r / s), 1.5); }, s, "cauchy"};
        } else {
            throw ConfigError("radial.profile must be gaussian, constant, increasing or cauchy");
        }
        radial::check_assumption(profile);
        const auto rows = radial::polygon_table(profile, c.get_ints("radial.ns", {3, 4, 8, 16, 32, 64, 128}));
        {
            auto f = open_out(ctx.out / "radial_table.csv");
            radial::write_table_csv(f, rows);
        }
        const double Rs = radial::R_star(profile);
        json j = {{"profile", profile.name}, {"R_star", Rs}, {"G_R_star", radial::G(profile, Rs)}};

        if (c.get_bool("radial.full_pipeline", false)) {
            if (kind != "gaussian") throw ConfigError("radial.full_pipeline needs the gaussian profile");
            const GaussianOperator op({{0.0, 0.0}}, s);
            const double yv = c.get_double("radial.y", 10.0);
            const double lambda = c.get_double("radial.lambda", 1.0);
            Measurements y = Measurements::Constant(1, yv);
            FWConfig fw = rc.fw;
            fw.lambda = lambda;
            const FWResult res = frank_wolfe(op, y, fw, rc.grid, rc.refine, rc.quad);
            j["n_atoms"] = res.u.size();
            j["stopped_by"] = res.trace.stopped_by;
            if (res.u.size() == 1) {
                const Atom& a = res.u.atoms.front();
                double mean = 0.0;
                for (const auto& v : a.support.vertices()) mean += norm(v);
                mean /= static_cast<double>(a.support.size());
                const double integral = sensor_integrals(op, a.support, rc.quad)[0];
                const double closed = radial::amplitude_closed_form(yv, lambda, integral, perimeter(a.support));
                j["mean_vertex_radius"] = mean;
                j["radius_rel_err"] = std::abs(mean - Rs) / Rs;
                j["amplitude"] = a.amplitude;
                j["amplitude_closed_form"] = closed;
                j["amplitude_rel_err"] = closed != 0.0 ? std::abs(a.amplitude - closed) / std::abs(closed) : 0.0;
            }
            auto f = open_out(ctx.out / "radial_atoms.csv");
            std::vector<SimplePolygon> polys;
            for (const auto& a : res.u.atoms) polys.push_back(a.support);
            write_polygon_csv(f, polys);
        }
        open_out(ctx.out / "radial.json") << j.dump(2) << "\n";
        if (!rc.quiet) {
            log << std::setprecision(10) << "R_star=" << Rs << '\n';
            for (const auto& r : rows)
                log << "n=" << r.n << " R_star_n=" << r.R_star_n << " abs_err=" << r.abs_err_vs_R_star << '\n';
            if (j.contains("amplitude_rel_err"))
                log << "amplitude_rel_err=" << j["amplitude_rel_err"].get<double>()
                    << " radius_rel_err=" << j["radius_rel_err"].get<double>() << '\n';
        }
        return ok;
    });
}

}  // namespace polytv::app
