#include "haarlab/region.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace haarlab {

IntervalSet IntervalSet::single(double lo, double hi) {
    IntervalSet s;
    if (hi > lo) s.iv.push_back({lo, hi});
    return s;
}

IntervalSet IntervalSet::unite(const IntervalSet& o) const {
    std::vector<std::pair<double, double>> all = iv;
    all.insert(all.end(), o.iv.begin(), o.iv.end());
    std::sort(all.begin(), all.end());
    IntervalSet r;
    for (const auto& p : all) {
        if (!r.iv.empty() && p.first <= r.iv.back().second)
            r.iv.back().second = std::max(r.iv.back().second, p.second);
        else
            r.iv.push_back(p);
    }
    return r;
}

IntervalSet IntervalSet::intersect(const IntervalSet& o) const {
    IntervalSet r;
    std::size_t i = 0, j = 0;
    while (i < iv.size() && j < o.iv.size()) {
        const double lo = std::max(iv[i].first, o.iv[j].first);
        const double hi = std::min(iv[i].second, o.iv[j].second);
        if (hi > lo) r.iv.push_back({lo, hi});
        if (iv[i].second < o.iv[j].second) ++i;
        else ++j;
    }
    return r;
}

bool IntervalSet::contains(double t) const {
    for (const auto& p : iv)
        if (t >= p.first && t < p.second) return true;
    return false;
}

std::optional<IntervalSet> SetRegion::zonal_profile(const std::string&) const { return std::nullopt; }
std::optional<std::vector<TorusBox>> SetRegion::torus_boxes() const { return std::nullopt; }

namespace {

constexpr double kHuge = 1e9;

bool is_identity(const Group& G, const GroupElement& g) {
    return (g.p - G.raw_identity()).cwiseAbs().maxCoeff() < 1e-14;
}

bool is_class_key(const Group& G, const std::string& key) {
    return (key == "so3_class" && G.family() == Family::SO3) ||
           (key == "su2_class" && G.family() == Family::SU2);
}

double wrap01(double t) {
    double r = t - std::floor(t);
    return r >= 1.0 ? 0.0 : r;
}

class FullRegion final : public SetRegion {
public:
    FullRegion(GroupPtr G, bool full) : G_(std::move(G)), full_(full) {}
    const GroupPtr& group() const override { return G_; }
    bool contains(const GroupElement&) const override { return full_; }
    RegionBound bound(const GroupElement&) const override { return {full_, kHuge}; }
    bool certified() const override { return true; }
    std::string describe() const override { return full_ ? "full" : "empty"; }
    std::optional<IntervalSet> zonal_profile(const std::string&) const override {
        return full_ ? IntervalSet::single(0.0, kHuge) : IntervalSet{};
    }
    std::optional<std::vector<TorusBox>> torus_boxes() const override {
        if (G_->family() != Family::Torus) return std::nullopt;
        if (!full_) return std::vector<TorusBox>{};
        TorusBox b{std::vector<double>(G_->dim(), 0.0), std::vector<double>(G_->dim(), 1.0)};
        return std::vector<TorusBox>{b};
    }

private:
    GroupPtr G_;
    bool full_;
};

class BallRegion final : public SetRegion {
public:
    BallRegion(GroupPtr G, GroupElement c, double r) : G_(std::move(G)), c_(std::move(c)), r_(r) {}
    const GroupPtr& group() const override { return G_; }
    bool contains(const GroupElement& g) const override { return G_->distance(g, c_) < r_; }
    RegionBound bound(const GroupElement& g) const override {
        const double d = G_->distance(g, c_);
        return d < r_ ? RegionBound{true, r_ - d} : RegionBound{false, d - r_};
    }
    bool certified() const override { return true; }
    std::string describe() const override {
        std::ostringstream s;
        s << "ball(" << G_->to_json(c_).dump() << "," << r_ << ")";
        return s.str();
    }
    std::optional<IntervalSet> zonal_profile(const std::string& key) const override {
        if (is_class_key(*G_, key) && is_identity(*G_, c_)) return IntervalSet::single(0.0, r_);
        return std::nullopt;
    }
    std::optional<std::vector<TorusBox>> torus_boxes() const override {
        if (G_->family() != Family::Torus || G_->dim() != 1) return std::nullopt;
        const double rr = r_ * G_->diameter_raw();
        if (rr >= 0.5) return std::vector<TorusBox>{{{0.0}, {1.0}}};
        return std::vector<TorusBox>{{{wrap01(c_.p[0] - rr)}, {2.0 * rr}}};
    }

private:
    GroupPtr G_;
    GroupElement c_;
    double r_;
};

class BoxRegion final : public SetRegion {
public:
    BoxRegion(GroupPtr G, TorusBox b) : G_(std::move(G)), b_(std::move(b)) {
        for (auto& l : b_.lo) l = wrap01(l);
        for (auto& l : b_.len) l = std::clamp(l, 0.0, 1.0);
    }
    const GroupPtr& group() const override { return G_; }
    bool contains(const GroupElement& g) const override {
        for (int i = 0; i < G_->dim(); ++i)
            if (!(b_.len[i] >= 1.0 || wrap01(g.p[i] - b_.lo[i]) < b_.len[i])) return false;
        return true;
    }
    RegionBound bound(const GroupElement& g) const override {
        double depth = kHuge, out2 = 0.0;
        bool inside = true;
        for (int i = 0; i < G_->dim(); ++i) {
            if (b_.len[i] >= 1.0) continue;
            const double t = wrap01(g.p[i] - b_.lo[i]);
            if (t < b_.len[i]) {
                depth = std::min(depth, std::min(t, b_.len[i] - t));
            } else {
                inside = false;
                const double o = std::min(t - b_.len[i], 1.0 - t);
                out2 += o * o;
            }
        }
        const double s = G_->metric_scale();
        return inside ? RegionBound{true, depth * s} : RegionBound{false, std::sqrt(out2) * s};
    }
    bool certified() const override { return true; }
    std::string describe() const override {
        std::ostringstream s;
        s << "box(";
        for (std::size_t i = 0; i < b_.lo.size(); ++i) s << (i ? "," : "") << b_.lo[i];
        s << ":";
        for (std::size_t i = 0; i < b_.len.size(); ++i) s << (i ? "," : "") << b_.len[i];
        s << ")";
        return s.str();
    }
    std::optional<std::vector<TorusBox>> torus_boxes() const override {
        return std::vector<TorusBox>{b_};
    }

private:
    GroupPtr G_;
    TorusBox b_;
};

// Intersection of two wrapped arcs as a list of arcs.
std::vector<std::pair<double, double>> arc_intersect(double lo1, double len1, double lo2, double len2) {
    if (len1 >= 1.0) return {{lo2, len2}};
    if (len2 >= 1.0) return {{lo1, len1}};
    std::vector<std::pair<double, double>> out;
    // unwrap arc 2 relative to lo1 and test the two lifts that can overlap
    const double s = wrap01(lo2 - lo1);
    for (double shift : {s, s - 1.0}) {
        const double a = std::max(0.0, shift);
        const double b = std::min(len1, shift + len2);
        if (b > a) out.push_back({wrap01(lo1 + a), b - a});
    }
    return out;
}

class BinaryRegion final : public SetRegion {
public:
    BinaryRegion(RegionPtr a, RegionPtr b, bool is_union)
        : a_(std::move(a)), b_(std::move(b)), union_(is_union) {
        if (a_->group()->name() != b_->group()->name())
            throw GroupMismatch("set operation on regions of different groups");
    }
    const GroupPtr& group() const override { return a_->group(); }
    bool contains(const GroupElement& g) const override {
        return union_ ? (a_->contains(g) || b_->contains(g)) : (a_->contains(g) && b_->contains(g));
    }
    RegionBound bound(const GroupElement& g) const override {
        const RegionBound x = a_->bound(g), y = b_->bound(g);
        if (union_) {
            if (x.inside && y.inside) return {true, std::max(x.margin, y.margin)};
            if (x.inside) return x;
            if (y.inside) return y;
            return {false, std::min(x.margin, y.margin)};
        }
        if (x.inside && y.inside) return {true, std::min(x.margin, y.margin)};
        if (!x.inside && !y.inside) return {false, std::max(x.margin, y.margin)};
        return x.inside ? y : x;
    }
    bool certified() const override { return a_->certified() && b_->certified(); }
    std::string describe() const override {
        return std::string(union_ ? "union(" : "inter(") + a_->describe() + "," + b_->describe() + ")";
    }
    std::optional<IntervalSet> zonal_profile(const std::string& key) const override {
        auto x = a_->zonal_profile(key);
        auto y = b_->zonal_profile(key);
        if (!x || !y) return std::nullopt;
        return union_ ? x->unite(*y) : x->intersect(*y);
    }
    std::optional<std::vector<TorusBox>> torus_boxes() const override {
        auto x = a_->torus_boxes();
        auto y = b_->torus_boxes();
        if (!x || !y) return std::nullopt;
        if (union_) {
            x->insert(x->end(), y->begin(), y->end());
            return x;
        }
        std::vector<TorusBox> out;
        for (const auto& p : *x) {
            for (const auto& q : *y) {
                // per-axis arc intersections, then their cartesian product
                std::vector<TorusBox> partial{TorusBox{}};
                for (std::size_t i = 0; i < p.lo.size(); ++i) {
                    const auto arcs = arc_intersect(p.lo[i], p.len[i], q.lo[i], q.len[i]);
                    std::vector<TorusBox> next;
                    for (const auto& pb : partial)
                        for (const auto& arc : arcs) {
                            TorusBox nb = pb;
                            nb.lo.push_back(arc.first);
                            nb.len.push_back(arc.second);
                            next.push_back(std::move(nb));
                        }
                    partial = std::move(next);
                }
                out.insert(out.end(), partial.begin(), partial.end());
            }
        }
        return out;
    }

private:
    RegionPtr a_, b_;
    bool union_;
};

class TranslatedRegion final : public SetRegion {
public:
    TranslatedRegion(RegionPtr r, GroupElement a, Side side)
        : r_(std::move(r)), a_(std::move(a)), ainv_(r_->group()->inverse(a_)), side_(side) {}
    const GroupPtr& group() const override { return r_->group(); }
    GroupElement pull(const GroupElement& g) const {
        const auto& G = *r_->group();
        return side_ == Side::Left ? G.multiply(ainv_, g) : G.multiply(g, ainv_);
    }
    bool contains(const GroupElement& g) const override { return r_->contains(pull(g)); }
    RegionBound bound(const GroupElement& g) const override { return r_->bound(pull(g)); }
    bool certified() const override { return r_->certified(); }
    std::string describe() const override {
        return "translate(" + r_->describe() + "," + r_->group()->to_json(a_).dump() +
               (side_ == Side::Left ? ",left)" : ",right)");
    }
    std::optional<IntervalSet> zonal_profile(const std::string& key) const override {
        if (is_identity(*r_->group(), a_)) return r_->zonal_profile(key);
        return std::nullopt;
    }
    std::optional<std::vector<TorusBox>> torus_boxes() const override {
        auto boxes = r_->torus_boxes();
        if (!boxes) return std::nullopt;
        for (auto& b : *boxes)
            for (std::size_t i = 0; i < b.lo.size(); ++i) b.lo[i] = wrap01(b.lo[i] + a_.p[i]);
        return boxes;
    }

private:
    RegionPtr r_;
    GroupElement a_, ainv_;
    Side side_;
};

class PredicateRegion final : public SetRegion {
public:
    PredicateRegion(GroupPtr G, std::string d, std::function<bool(const GroupElement&)> p)
        : G_(std::move(G)), d_(std::move(d)), p_(std::move(p)) {}
    const GroupPtr& group() const override { return G_; }
    bool contains(const GroupElement& g) const override { return p_(g); }
    std::string describe() const override { return d_; }

private:
    GroupPtr G_;
    std::string d_;
    std::function<bool(const GroupElement&)> p_;
};

}  // namespace

RegionPtr full_region(const GroupPtr& G) { return std::make_shared<FullRegion>(G, true); }
RegionPtr empty_region(const GroupPtr& G) { return std::make_shared<FullRegion>(G, false); }

RegionPtr ball_region(const GroupPtr& G, const GroupElement& center, double r) {
    G->check(center);
    if (!(r >= 0.0)) throw std::invalid_argument("ball radius must be nonnegative");
    return std::make_shared<BallRegion>(G, center, r);
}

RegionPtr box_region(const GroupPtr& G, TorusBox box) {
    if (G->family() != Family::Torus) throw std::invalid_argument("box regions need a torus");
    if (static_cast<int>(box.lo.size()) != G->dim() || static_cast<int>(box.len.size()) != G->dim())
        throw std::invalid_argument("box dimension does not match torus dimension");
    return std::make_shared<BoxRegion>(G, std::move(box));
}

RegionPtr union_region(RegionPtr a, RegionPtr b) {
    return std::make_shared<BinaryRegion>(std::move(a), std::move(b), true);
}
RegionPtr inter_region(RegionPtr a, RegionPtr b) {
    return std::make_shared<BinaryRegion>(std::move(a), std::move(b), false);
}
RegionPtr translate_region(RegionPtr r, const GroupElement& a, Side side) {
    r->group()->check(a);
    return std::make_shared<TranslatedRegion>(std::move(r), a, side);
}
RegionPtr predicate_region(const GroupPtr& G, std::string description,
                           std::function<bool(const GroupElement&)> pred) {
    return std::make_shared<PredicateRegion>(G, std::move(description), std::move(pred));
}

}  // namespace haarlab
