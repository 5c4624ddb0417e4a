#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "haarlab/group.hpp"

namespace haarlab {

// Sorted, disjoint half-open intervals [lo, hi) of a radial coordinate.
struct IntervalSet {
    std::vector<std::pair<double, double>> iv;

    static IntervalSet single(double lo, double hi);
    IntervalSet unite(const IntervalSet& o) const;
    IntervalSet intersect(const IntervalSet& o) const;
    bool contains(double t) const;
    bool empty() const { return iv.empty(); }
};

// Axis-aligned box on a torus: angles lo[i] + [0, len[i]) mod 1.
struct TorusBox {
    std::vector<double> lo;
    std::vector<double> len;
};

// Result of a region oracle at a point g. When `inside`, B(g, margin) lies in
// the region; otherwise B(g, margin) misses it. margin = 0 means unknown.
struct RegionBound {
    bool inside = false;
    double margin = 0.0;
};

class SetRegion {
public:
    virtual ~SetRegion() = default;

    virtual const GroupPtr& group() const = 0;
    virtual bool contains(const GroupElement& g) const = 0;
    virtual RegionBound bound(const GroupElement& g) const { return {contains(g), 0.0}; }
    // Whether bound() carries real margins (depth and exclusion oracles).
    virtual bool certified() const { return false; }
    virtual std::string describe() const = 0;

    // Exact radial profile for a symmetry-adapted net keyed by `key`.
    virtual std::optional<IntervalSet> zonal_profile(const std::string& key) const;
    // Exact description as a finite union of boxes when the group is a torus.
    virtual std::optional<std::vector<TorusBox>> torus_boxes() const;
};

using RegionPtr = std::shared_ptr<const SetRegion>;

RegionPtr full_region(const GroupPtr& G);
RegionPtr empty_region(const GroupPtr& G);
// Open ball {g : d(g, center) < r} in the normalized metric.
RegionPtr ball_region(const GroupPtr& G, const GroupElement& center, double r);
// Torus box; throws for non-torus groups.
RegionPtr box_region(const GroupPtr& G, TorusBox box);
RegionPtr union_region(RegionPtr a, RegionPtr b);
RegionPtr inter_region(RegionPtr a, RegionPtr b);
// a * R for side left, R * a for side right.
enum class Side { Left, Right };
RegionPtr translate_region(RegionPtr r, const GroupElement& a, Side side = Side::Left);
// Arbitrary predicate without margins (uncertified).
RegionPtr predicate_region(const GroupPtr& G, std::string description,
                           std::function<bool(const GroupElement&)> pred);

}  // namespace haarlab
