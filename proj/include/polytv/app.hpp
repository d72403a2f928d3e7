#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "polytv/config.hpp"
#include "polytv/sparse_solver.hpp"

namespace polytv::app {

enum ExitCode : int { ok = 0, failure = 1, config_error = 2, degenerate = 3, assumption_violated = 4 };

/// One phantom primitive with its amplitude; an annulus expands to two atoms.
struct ShapeSpec {
    std::string kind;  // disk | rectangle | ngon | annulus
    double amplitude = 1.0;
    double cx = 0.0, cy = 0.0;
    double radius = 0.0, inner_radius = 0.0;
    double x0 = 0.0, y0 = 0.0, x1 = 0.0, y1 = 0.0;
    int sides = 0;
    double phase = 0.0;
};

struct RunConfig {
    // operator
    double half_extent = 1.0;
    int per_side = 16;
    double sigma = 0.1;
    // noise: tau directly, or from a target SNR in dB
    double tau = 0.0;
    std::optional<double> snr_db;
    std::optional<std::uint64_t> seed;
    // regularization
    std::optional<double> lambda;
    double lambda_c = 1.0;
    std::vector<ShapeSpec> phantom;
    int disk_vertices = 256;
    int raster_n = 256;
    int baseline_n = 64;

    FWConfig fw;
    PrimalDualConfig grid;
    PrimalDualConfig baseline;
    RefineConfig refine;
    QuadratureSpec quad;
    std::string out_dir = ".";
    bool quiet = false;

    static RunConfig from(const Config& c);
    void validate() const;
};

AtomicFunction build_phantom(const RunConfig& rc);
GaussianOperator build_operator(const RunConfig& rc);

/// Standard normal draws from mt19937_64 through the Box-Muller transform.
class NormalStream {
public:
    explicit NormalStream(std::uint64_t seed);
    double next();

private:
    std::mt19937_64 engine_;
    double uniform();
    bool has_spare_ = false;
    double spare_ = 0.0;
};

struct Observation {
    Measurements clean;
    Measurements y;
    double tau = 0.0;
    double lambda = 0.0;
};

/// y = Phi u0 + w with w ~ N(0, tau^2 I) drawn from the seeded stream.
Observation observe(const RunConfig& rc, const GaussianOperator& op, const AtomicFunction& u0);

struct CommandOptions {
    std::string config_path;
    std::string out_dir;  // empty: config value or "."
    std::optional<std::uint64_t> seed;
    bool quiet = false;
};

int cmd_solve(const CommandOptions& opt, std::ostream& log, std::ostream& err);
int cmd_cheeger(const CommandOptions& opt, std::ostream& log, std::ostream& err);
int cmd_baseline(const CommandOptions& opt, std::ostream& log, std::ostream& err);
int cmd_radial(const CommandOptions& opt, std::ostream& log, std::ostream& err);

/// Rasterize an atomic function on an n x n grid of [-R, R]^2 (cell-center samples).
GridFunction rasterize(const AtomicFunction& u, double R, int n);

void write_measurements_csv(std::ostream& os, const Measurements& y);
std::string summary_json(const FWResult& res, double lambda, double final_objective);

}  // namespace polytv::app
