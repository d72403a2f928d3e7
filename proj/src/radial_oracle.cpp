#include "polytv/radial_oracle.hpp"

#include <cmath>
#include <iomanip>
#include <numbers>
#include <ostream>

#include "polytv/errors.hpp"
#include "polytv/quadrature.hpp"

namespace polytv::radial {

RadialProfile RadialProfile::gaussian(double sigma) {
    if (!(sigma > 0.0)) throw InvalidArgument("RadialProfile::gaussian: sigma must be positive");
    const double inv = 1.0 / (2.0 * sigma * sigma);
    return {[inv](double r) { return std::exp(-r * r * inv); }, sigma, "gaussian"};
}

double radial_mass(const RadialProfile& p, double R) {
    if (R <= 0.0) return 0.0;
    return quad::integrate_1d([&](double r) { return r * p.g(r); }, 0.0, R, 1e-14);
}

double G(const RadialProfile& p, double R) {
    if (!(R > 0.0)) throw InvalidArgument("G: R must be positive");
    return radial_mass(p, R) / R;
}

void check_assumption(const RadialProfile& p) {
    constexpr int points = 10000;
    const double lo = 1e-3 * p.scale(), hi = 30.0 * p.scale();
    const double ratio = std::log(hi / lo) / (points - 1);
    double prev_g = 0.0, prev_f = 0.0;
    int changes = 0, sign = 0;
    for (int k = 0; k < points; ++k) {
        const double r = lo * std::exp(ratio * k);
        const double g = p.g(r);
        if (!std::isfinite(g) || !(g > 0.0))
            throw AssumptionViolated("radial profile must be positive and finite (fails at r=" +
                                     std::to_string(r) + ")");
        if (k > 0 && g > prev_g)
            throw AssumptionViolated("radial profile must be nonincreasing (fails at r=" +
                                     std::to_string(r) + ")");
        const double f = r * g;
        if (k > 0 && f != prev_f) {
            const int s = f > prev_f ? 1 : -1;
            if (sign == 0 && s < 0)
                throw AssumptionViolated("r g(r) must increase near the origin");
            if (sign != 0 && s != sign) ++changes;
            sign = s;
        }
        prev_g = g;
        prev_f = f;
    }
    if (changes != 1)
        throw AssumptionViolated("r g(r) must be unimodal on (0, inf); found " + std::to_string(changes) +
                                 " slope sign changes");
}

double R_star(const RadialProfile& p) {
    check_assumption(p);
    auto h = [&](double R) { return R * R * p.g(R) - radial_mass(p, R); };
    double lo = 1e-3 * p.scale(), hi = p.scale();
    if (!(h(lo) > 0.0)) throw AssumptionViolated("R_star: stationarity function not positive near 0");
    int guard = 0;
    while (h(hi) > 0.0) {
        lo = hi;
        hi *= 2.0;
        if (++guard > 60) throw AssumptionViolated("R_star: no sign change found");
    }
    while (hi - lo > 1e-13 * hi) {
        const double mid = 0.5 * (lo + hi);
        (h(mid) > 0.0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

namespace {

double alpha(int n, double s) {
    return std::cos(std::numbers::pi / n) / std::cos(std::numbers::pi * s / n);
}

double prefactor(int n) {
    const double t = std::numbers::pi / n;
    return t / std::sin(t);
}

}  // namespace

double G_n(const RadialProfile& p, int n, double R) {
    if (n < 3) throw InvalidArgument("G_n: n must be >= 3");
    if (!(R > 0.0)) throw InvalidArgument("G_n: R must be positive");
    const double inner =
        quad::integrate_1d([&](double s) { return radial_mass(p, R * alpha(n, s)); }, 0.0, 1.0, 1e-14);
    return prefactor(n) * inner / R;
}

double golden_section_max(const std::function<double(double)>& f, double a, double b, double tol) {
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = b - inv_phi * (b - a), d = a + inv_phi * (b - a);
    double fc = f(c), fd = f(d);
    while (b - a > tol) {
        if (fc > fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    return 0.5 * (a + b);
}

double R_star_n(const RadialProfile& p, int n) {
    if (n < 3) throw InvalidArgument("R_star_n: n must be >= 3");
    const double R0 = R_star(p);
    // golden section localizes; double precision limits it to about sqrt(eps) in R
    const double guess = golden_section_max([&](double R) { return G_n(p, n, R); }, 0.5 * R0, 4.0 * R0,
                                            1e-6 * R0);
    // stationarity: R^2 int alpha^2 g(R alpha) ds = int I(R alpha) ds
    auto s = [&](double R) {
        const double lhs = quad::integrate_1d(
            [&](double t) {
                const double a = alpha(n, t);
                return a * a * p.g(R * a);
            },
            0.0, 1.0, 1e-14);
        const double rhs = quad::integrate_1d([&](double t) { return radial_mass(p, R * alpha(n, t)); },
                                              0.0, 1.0, 1e-14);
        return R * R * lhs - rhs;
    };
    double lo = guess * (1.0 - 1e-4), hi = guess * (1.0 + 1e-4);
    for (int widen = 0; !(s(lo) > 0.0 && s(hi) < 0.0); ++widen) {
        if (widen > 40) throw AssumptionViolated("R_star_n: stationarity bracket not found");
        lo *= 0.9;
        hi *= 1.1;
    }
    while (hi - lo > 1e-13 * hi) {
        const double mid = 0.5 * (lo + hi);
        (s(mid) > 0.0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

double amplitude_closed_form(double y, double lambda, double integral_phi, double perimeter) {
    if (!(integral_phi > 0.0) || !(perimeter > 0.0))
        throw InvalidArgument("amplitude_closed_form: integral and perimeter must be positive");
    const double excess = std::abs(y) - lambda * perimeter / integral_phi;
    if (excess <= 0.0) return 0.0;
    return (y > 0.0 ? 1.0 : -1.0) * excess / integral_phi;
}

std::vector<TableRow> polygon_table(const RadialProfile& p, const std::vector<int>& ns) {
    const double R0 = R_star(p);
    std::vector<TableRow> rows;
    for (int n : ns) {
        const double Rn = R_star_n(p, n);
        rows.push_back({n, Rn, G_n(p, n, Rn), std::abs(Rn - R0)});
    }
    return rows;
}

void write_table_csv(std::ostream& os, const std::vector<TableRow>& rows) {
    os << "n,R_star_n,G_n(R_star_n),abs_err_vs_R_star\n" << std::setprecision(17);
    for (const auto& r : rows)
        os << r.n << ',' << r.R_star_n << ',' << r.G_n_at_R_star_n << ',' << r.abs_err_vs_R_star << '\n';
}

}  // namespace polytv::radial
