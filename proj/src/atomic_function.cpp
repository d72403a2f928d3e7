#include "polytv/atomic_function.hpp"

#include <cmath>

#include "polytv/errors.hpp"

namespace polytv {

double AtomicFunction::total_variation() const {
    double tv = 0.0;
    for (const auto& a : atoms) tv += std::abs(a.amplitude) * perimeter(a.support);
    return tv;
}

double AtomicFunction::value_at(const Point2& p) const {
    double v = 0.0;
    for (const auto& a : atoms) {
        try {
            if (winding_number(a.support.span(), p) != 0) v += a.amplitude;
        } catch (const PointOnBoundary&) {
            v += 0.5 * a.amplitude;
        }
    }
    return v;
}

}  // namespace polytv
