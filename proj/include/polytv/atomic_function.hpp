#pragma once

#include <vector>

#include "polytv/geometry.hpp"

namespace polytv {

/// One term a * 1_E of an atomic function.
struct Atom {
    double amplitude = 0.0;
    SimplePolygon support;
};

/// u = sum_i a_i 1_{E_i}. Total variation is taken as sum_i |a_i| P(E_i).
struct AtomicFunction {
    std::vector<Atom> atoms;

    bool empty() const { return atoms.empty(); }
    std::size_t size() const { return atoms.size(); }
    double total_variation() const;
    /// Pointwise value, sum of amplitudes of the atoms whose support contains p.
    double value_at(const Point2& p) const;
};

}  // namespace polytv
