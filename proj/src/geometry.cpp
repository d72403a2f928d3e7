#include "polytv/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <map>
#include <numbers>
#include <ostream>
#include <sstream>

#include "polytv/errors.hpp"
#include "polytv/quadrature.hpp"

namespace polytv {

std::ostream& operator<<(std::ostream& os, const Point2& p) {
    return os << '(' << p.x << ", " << p.y << ')';
}

void QuadratureSpec::validate() const {
    if (triangle_rule_order < 1 || edge_rule_order < 1)
        throw InvalidArgument("QuadratureSpec: rule orders must be >= 1");
    if (!(refine_tol > 0.0)) throw InvalidArgument("QuadratureSpec: refine_tol must be > 0");
    if (max_subdivision_depth < 1)
        throw InvalidArgument("QuadratureSpec: max_subdivision_depth must be >= 1");
}

SimplePolygon::SimplePolygon(std::vector<Point2> vertices) : vertices_(std::move(vertices)) {
    if (vertices_.size() < 3) throw InvalidArgument("polygon needs at least 3 vertices");
    if (!is_simple(vertices_)) throw NotSimple("vertex list does not define a simple polygon");
    if (signed_area(vertices_) < 0.0) std::reverse(vertices_.begin() + 1, vertices_.end());
}

const Point2& SimplePolygon::at_cyclic(long i) const {
    const long n = static_cast<long>(vertices_.size());
    return vertices_[static_cast<std::size_t>(((i % n) + n) % n)];
}

SimplePolygon regular_polygon(Point2 center, double radius, int n, double phase) {
    if (n < 3) throw InvalidArgument("regular_polygon: n must be >= 3");
    std::vector<Point2> v;
    v.reserve(n);
    for (int k = 0; k < n; ++k) {
        const double t = phase + 2.0 * std::numbers::pi * k / n;
        v.push_back({center.x + radius * std::cos(t), center.y + radius * std::sin(t)});
    }
    return SimplePolygon(std::move(v));
}

namespace {

double point_segment_distance(const Point2& p, const Point2& a, const Point2& b) {
    const Point2 ab = b - a;
    const double len2 = dot(ab, ab);
    double t = len2 > 0.0 ? dot(p - a, ab) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    return distance(p, a + t * ab);
}

int orient_sign(const Point2& a, const Point2& b, const Point2& c) {
    const double v = cross(b - a, c - a);
    return (v > 0.0) - (v < 0.0);
}

}  // namespace

int winding_number(std::span<const Point2> vertices, const Point2& p) {
    const std::size_t n = vertices.size();
    const double tol = 1e-12 * std::max(1.0, diameter(vertices));
    int wn = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const Point2& a = vertices[i];
        const Point2& b = vertices[(i + 1) % n];
        if (point_segment_distance(p, a, b) <= tol)
            throw PointOnBoundary("winding_number: point lies on the polyline");
        if (a.y <= p.y) {
            if (b.y > p.y && cross(b - a, p - a) > 0.0) ++wn;
        } else if (b.y <= p.y && cross(b - a, p - a) < 0.0) {
            --wn;
        }
    }
    return wn;
}

double perimeter(std::span<const Point2> vertices) {
    const std::size_t n = vertices.size();
    double p = 0.0;
    for (std::size_t i = 0; i < n; ++i) p += distance(vertices[i], vertices[(i + 1) % n]);
    return p;
}

double signed_area(std::span<const Point2> vertices) {
    const std::size_t n = vertices.size();
    if (n < 3) return 0.0;
    // shoelace relative to the first vertex for better conditioning
    const Point2 o = vertices[0];
    double s = 0.0;
    for (std::size_t i = 1; i + 1 < n; ++i) s += cross(vertices[i] - o, vertices[i + 1] - o);
    return 0.5 * s;
}

Point2 vertex_centroid(std::span<const Point2> vertices) {
    Point2 c;
    for (const auto& v : vertices) c += v;
    return vertices.empty() ? c : c / static_cast<double>(vertices.size());
}

double diameter(std::span<const Point2> vertices) {
    double d = 0.0;
    for (std::size_t i = 0; i < vertices.size(); ++i)
        for (std::size_t j = i + 1; j < vertices.size(); ++j)
            d = std::max(d, distance(vertices[i], vertices[j]));
    return d;
}

double weighted_area(std::span<const Point2> vertices, const ScalarField& eta,
                     const QuadratureSpec& quad) {
    const quad::ScalarKernel kernel{&eta};
    return quad::integrate_polygon(vertices, kernel, quad);
}

std::vector<HatWeights> edge_hat_integrals(std::span<const Point2> vertices, const ScalarField& f,
                                           const QuadratureSpec& quad) {
    const quad::ScalarKernel kernel{&f};
    std::vector<double> minus, plus;
    quad::integrate_edge_hats(vertices, kernel, quad, minus, plus);
    std::vector<HatWeights> out(vertices.size());
    for (std::size_t j = 0; j < out.size(); ++j) out[j] = {minus[j], plus[j]};
    return out;
}

double segment_distance(const Point2& a, const Point2& b, const Point2& c, const Point2& d) {
    const int o1 = orient_sign(a, b, c), o2 = orient_sign(a, b, d);
    const int o3 = orient_sign(c, d, a), o4 = orient_sign(c, d, b);
    if (o1 * o2 < 0 && o3 * o4 < 0) return 0.0;
    return std::min({point_segment_distance(a, c, d), point_segment_distance(b, c, d),
                     point_segment_distance(c, a, b), point_segment_distance(d, a, b)});
}

bool is_simple(std::span<const Point2> vertices) {
    const std::size_t n = vertices.size();
    if (n < 3) return false;
    for (const auto& v : vertices)
        if (!std::isfinite(v.x) || !std::isfinite(v.y)) return false;
    const double eps = 1e-12 * diameter(vertices);
    if (!(eps > 0.0)) return false;
    auto at = [&](std::size_t i) -> const Point2& { return vertices[i % n]; };

    for (std::size_t i = 0; i < n; ++i)
        if (distance(at(i), at(i + 1)) <= eps) return false;

    // adjacent edges [a,b], [b,c] must not fold back onto each other
    for (std::size_t i = 0; i < n; ++i) {
        const Point2 &a = at(i), &b = at(i + 1), &c = at(i + 2);
        if (point_segment_distance(c, a, b) <= eps || point_segment_distance(a, b, c) <= eps)
            return false;
    }

    for (std::size_t i = 0; i < n; ++i) {
        const Point2 &a = at(i), &b = at(i + 1);
        for (std::size_t j = i + 2; j < n; ++j) {
            if (i == 0 && j == n - 1) continue;  // adjacent through the closing edge
            if (segment_distance(a, b, at(j), at(j + 1)) <= eps) return false;
        }
    }
    return true;
}

namespace {

std::vector<Point2> sample_uniform(std::span<const Point2> v, int n_target, double offset) {
    const std::size_t n = v.size();
    std::vector<double> cum(n + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i) cum[i + 1] = cum[i] + distance(v[i], v[(i + 1) % n]);
    const double total = cum[n];
    std::vector<Point2> out;
    out.reserve(n_target);
    std::size_t edge = 0;
    for (int k = 0; k < n_target; ++k) {
        const double s = offset + total * k / n_target;
        while (edge + 1 < n && cum[edge + 1] <= s) ++edge;
        const double len = cum[edge + 1] - cum[edge];
        const double t = len > 0.0 ? std::clamp((s - cum[edge]) / len, 0.0, 1.0) : 0.0;
        const Point2& a = v[edge];
        const Point2& b = v[(edge + 1) % n];
        out.push_back(t == 0.0 ? a : a + t * (b - a));
    }
    return out;
}

}  // namespace

SimplePolygon resample_polygon(const SimplePolygon& poly, int n_target) {
    if (n_target < 3) throw InvalidArgument("resample_polygon: n_target must be >= 3");
    auto first = sample_uniform(poly.span(), n_target, 0.0);
    if (is_simple(first)) return SimplePolygon(std::move(first));
    const double half = 0.5 * perimeter(poly) / n_target;
    auto second = sample_uniform(poly.span(), n_target, half);
    if (is_simple(second)) return SimplePolygon(std::move(second));
    throw ResampleBrokeSimplicity("resample_polygon: uniform resampling is not simple");
}

double hausdorff_distance(std::span<const Point2> a, std::span<const Point2> b, int samples_per_edge) {
    auto one_sided = [samples_per_edge](std::span<const Point2> from, std::span<const Point2> to) {
        double worst = 0.0;
        const std::size_t n = from.size(), m = to.size();
        for (std::size_t i = 0; i < n; ++i) {
            const Point2& p = from[i];
            const Point2& q = from[(i + 1) % n];
            for (int s = 0; s < samples_per_edge; ++s) {
                const Point2 x = p + (static_cast<double>(s) / samples_per_edge) * (q - p);
                double best = std::numeric_limits<double>::infinity();
                for (std::size_t j = 0; j < m; ++j)
                    best = std::min(best, point_segment_distance(x, to[j], to[(j + 1) % m]));
                worst = std::max(worst, best);
            }
        }
        return worst;
    };
    return std::max(one_sided(a, b), one_sided(b, a));
}

void write_polygon_csv(std::ostream& os, const std::vector<SimplePolygon>& polygons) {
    os << "atom_index,vertex_index,x,y\n";
    os << std::setprecision(17);
    for (std::size_t a = 0; a < polygons.size(); ++a)
        for (std::size_t v = 0; v < polygons[a].size(); ++v)
            os << a << ',' << v << ',' << polygons[a][v].x << ',' << polygons[a][v].y << '\n';
}

std::vector<SimplePolygon> read_polygon_csv(std::istream& is) {
    std::map<long, std::map<long, Point2>> rows;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty() || line.starts_with("atom_index")) continue;
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream ls(line);
        long atom = 0, vertex = 0;
        Point2 p;
        if (!(ls >> atom >> vertex >> p.x >> p.y))
            throw InvalidArgument("read_polygon_csv: malformed row '" + line + "'");
        rows[atom][vertex] = p;
    }
    std::vector<SimplePolygon> out;
    for (auto& [atom, verts] : rows) {
        std::vector<Point2> v;
        for (auto& [idx, p] : verts) v.push_back(p);
        out.emplace_back(std::move(v));
    }
    return out;
}

}  // namespace polytv
