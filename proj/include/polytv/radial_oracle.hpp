#pragma once

#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace polytv::radial {

/// Radial profile g(r) of a single sensing function.
struct RadialProfile {
    std::function<double(double)> g;
    std::optional<double> sigma;  // set for the Gaussian preset
    std::string name = "custom";

    static RadialProfile gaussian(double sigma);
    /// Natural length scale used for brackets and the assumption grid.
    double scale() const { return sigma.value_or(1.0); }
};

/// int_0^R r g(r) dr.
double radial_mass(const RadialProfile& p, double R);

/// G(R) = (1/R) int_0^R r g(r) dr.
double G(const RadialProfile& p, double R);

/// Throws AssumptionViolated unless g is positive and nonincreasing and
/// r g(r) increases then decreases on a log grid of 10^4 points.
void check_assumption(const RadialProfile& p);

/// Maximizer of G: the root of R^2 g(R) = int_0^R r g, by bisection to 1e-10.
double R_star(const RadialProfile& p);

/// G_n(R) = (pi/n)/sin(pi/n) (1/R) int_0^1 int_0^{R alpha_n(s)} r g dr ds,
/// alpha_n(s) = cos(pi/n)/cos(pi s/n), R the circumradius.
double G_n(const RadialProfile& p, int n, double R);

/// Maximizer of G_n (golden section, then bisection on the stationarity condition).
double R_star_n(const RadialProfile& p, int n);

/// Golden-section maximizer of a unimodal function on [a, b].
double golden_section_max(const std::function<double(double)>& f, double a, double b, double tol);

/// a* = sign(y)/int_phi * (|y| - lambda P / int_phi)^+.
double amplitude_closed_form(double y, double lambda, double integral_phi, double perimeter);

struct TableRow {
    int n;
    double R_star_n;
    double G_n_at_R_star_n;
    double abs_err_vs_R_star;
};

std::vector<TableRow> polygon_table(const RadialProfile& p, const std::vector<int>& ns);
void write_table_csv(std::ostream& os, const std::vector<TableRow>& rows);

}  // namespace polytv::radial
