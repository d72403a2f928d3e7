#pragma once

#include <cmath>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace polytv {

struct Point2 {
    double x = 0.0;
    double y = 0.0;

    constexpr Point2& operator+=(const Point2& o) { x += o.x; y += o.y; return *this; }
    constexpr Point2& operator-=(const Point2& o) { x -= o.x; y -= o.y; return *this; }
    constexpr Point2& operator*=(double s) { x *= s; y *= s; return *this; }
    friend constexpr Point2 operator+(Point2 a, const Point2& b) { return a += b; }
    friend constexpr Point2 operator-(Point2 a, const Point2& b) { return a -= b; }
    friend constexpr Point2 operator-(const Point2& a) { return {-a.x, -a.y}; }
    friend constexpr Point2 operator*(double s, Point2 a) { return a *= s; }
    friend constexpr Point2 operator*(Point2 a, double s) { return a *= s; }
    friend constexpr Point2 operator/(Point2 a, double s) { return {a.x / s, a.y / s}; }
    friend constexpr bool operator==(const Point2&, const Point2&) = default;
};

constexpr double dot(const Point2& a, const Point2& b) { return a.x * b.x + a.y * b.y; }
constexpr double cross(const Point2& a, const Point2& b) { return a.x * b.y - a.y * b.x; }
inline double norm(const Point2& a) { return std::hypot(a.x, a.y); }
inline double distance(const Point2& a, const Point2& b) { return norm(a - b); }
/// Counterclockwise rotation by `angle` radians about the origin.
inline Point2 rotate(const Point2& p, double angle) {
    const double c = std::cos(angle), s = std::sin(angle);
    return {c * p.x - s * p.y, s * p.x + c * p.y};
}

std::ostream& operator<<(std::ostream& os, const Point2& p);

/// A real-valued weight on the plane. Must be deterministic.
using ScalarField = std::function<double(const Point2&)>;

struct QuadratureSpec {
    int triangle_rule_order = 7;     // points per triangle: 1, 3, 7, or k*k (collapsed product)
    int edge_rule_order = 5;         // Gauss-Legendre points per segment
    double refine_tol = 1e-8;        // relative tolerance of the dyadic refinement test
    int max_subdivision_depth = 14;

    void validate() const;
};

enum class Orientation { positive, negative };

/// Vertex list of a simple closed polygonal curve, stored counterclockwise.
///
/// Construction checks the simplicity invariant and reverses clockwise input,
/// so every instance has positive orientation.
class SimplePolygon {
public:
    explicit SimplePolygon(std::vector<Point2> vertices);

    const std::vector<Point2>& vertices() const { return vertices_; }
    std::span<const Point2> span() const { return vertices_; }
    std::size_t size() const { return vertices_.size(); }
    const Point2& operator[](std::size_t i) const { return vertices_[i]; }
    Orientation orientation() const { return Orientation::positive; }

    /// Vertex with cyclic indexing, accepts any signed offset.
    const Point2& at_cyclic(long i) const;

private:
    std::vector<Point2> vertices_;
};

/// Regular n-gon with circumradius `radius`, first vertex at angle `phase`.
SimplePolygon regular_polygon(Point2 center, double radius, int n, double phase = 0.0);

/// Index of the closed polyline around p. Throws PointOnBoundary when p lies on an edge.
int winding_number(std::span<const Point2> vertices, const Point2& p);

double perimeter(std::span<const Point2> vertices);
inline double perimeter(const SimplePolygon& poly) { return perimeter(poly.span()); }

/// Shoelace signed area; positive for counterclockwise vertex order.
double signed_area(std::span<const Point2> vertices);

Point2 vertex_centroid(std::span<const Point2> vertices);
double diameter(std::span<const Point2> vertices);
inline double diameter(const SimplePolygon& poly) { return diameter(poly.span()); }

/// Signed integral of eta over the region enclosed by the polyline, weighted by
/// its winding number. Fan triangulation from the vertex centroid, adaptive
/// Gauss rules on every triangle.
double weighted_area(std::span<const Point2> vertices, const ScalarField& eta,
                     const QuadratureSpec& quad);
inline double weighted_area(const SimplePolygon& poly, const ScalarField& eta,
                            const QuadratureSpec& quad) {
    return weighted_area(poly.span(), eta, quad);
}

/// Line integrals of f against the two linear hat functions of each vertex.
/// `plus` lives on the outgoing edge [x_j, x_{j+1}], `minus` on the incoming edge.
struct HatWeights {
    double minus = 0.0;
    double plus = 0.0;
};

std::vector<HatWeights> edge_hat_integrals(std::span<const Point2> vertices, const ScalarField& f,
                                           const QuadratureSpec& quad);
inline std::vector<HatWeights> edge_hat_integrals(const SimplePolygon& poly, const ScalarField& f,
                                                  const QuadratureSpec& quad) {
    return edge_hat_integrals(poly.span(), f, quad);
}

/// Distance between two closed segments.
double segment_distance(const Point2& a, const Point2& b, const Point2& c, const Point2& d);

/// True iff the closed polyline has no zero-length edge, adjacent edges share only
/// their common vertex and non-adjacent edges stay apart by more than 1e-12 * diameter.
bool is_simple(std::span<const Point2> vertices);

/// Resample to n_target vertices at uniform arclength, starting from vertex 0.
SimplePolygon resample_polygon(const SimplePolygon& poly, int n_target);

/// Symmetric Hausdorff distance between the two closed polylines, sampled on a
/// dense set of boundary points.
double hausdorff_distance(std::span<const Point2> a, std::span<const Point2> b,
                          int samples_per_edge = 64);

// Polygon CSV: `atom_index,vertex_index,x,y`, one row per vertex.
void write_polygon_csv(std::ostream& os, const std::vector<SimplePolygon>& polygons);
std::vector<SimplePolygon> read_polygon_csv(std::istream& is);

}  // namespace polytv
