#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "polytv/geometry.hpp"

namespace testing {

using polytv::Point2;

// Star-shaped about `center`, hence simple.
inline std::vector<Point2> random_star(std::mt19937_64& rng, int n, Point2 center = {0.0, 0.0},
                                       double r_lo = 0.5, double r_hi = 1.5) {
    std::uniform_real_distribution<double> ang(0.0, 2.0 * std::numbers::pi);
    std::uniform_real_distribution<double> rad(r_lo, r_hi);
    std::vector<double> t(n);
    for (auto& a : t) a = ang(rng);
    std::sort(t.begin(), t.end());
    for (int i = 1; i < n; ++i)
        if (t[i] - t[i - 1] < 1e-3) t[i] = t[i - 1] + 1e-3;
    std::vector<Point2> v;
    for (double a : t) {
        const double r = rad(rng);
        v.push_back({center.x + r * std::cos(a), center.y + r * std::sin(a)});
    }
    return v;
}

inline std::vector<Point2> unit_square() { return {{0, 0}, {1, 0}, {1, 1}, {0, 1}}; }

inline double gaussian(const Point2& p, double s = 1.0) { return std::exp(-(p.x * p.x + p.y * p.y) / (2 * s * s)); }

// Independent crossing-number parity test, counts how often a ray to +x crosses the edges.
inline bool inside_even_odd(const std::vector<Point2>& v, const Point2& p) {
    bool in = false;
    const std::size_t n = v.size();
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        if ((v[i].y > p.y) != (v[j].y > p.y)) {
            const double x = v[j].x + (p.y - v[j].y) * (v[i].x - v[j].x) / (v[i].y - v[j].y);
            if (p.x < x) in = !in;
        }
    }
    return in;
}

}  // namespace testing
