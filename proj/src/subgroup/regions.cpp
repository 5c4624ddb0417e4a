#include <sstream>

#include "haarlab/subgroup.hpp"

namespace haarlab {
namespace {

class TubeRegion final : public SetRegion {
public:
    TubeRegion(SubgroupPtr H, double delta) : H_(std::move(H)), delta_(delta) {}
    const GroupPtr& group() const override { return H_->ambient(); }
    bool contains(const GroupElement& g) const override { return H_->distance(g) < delta_; }
    RegionBound bound(const GroupElement& g) const override {
        const double d = H_->distance(g);
        const double tol = H_->distance_tolerance();
        if (d < delta_) return {true, std::max(0.0, delta_ - d - tol)};
        return {false, std::max(0.0, d - delta_ - tol)};
    }
    bool certified() const override { return true; }
    std::string describe() const override {
        std::ostringstream s;
        s << "tube(" << H_->name() << "," << delta_ << ")";
        return s.str();
    }
    std::optional<IntervalSet> zonal_profile(const std::string& key) const override {
        if (!H_->zonal_key().empty() && H_->zonal_key() == key) return IntervalSet::single(0.0, delta_);
        return std::nullopt;
    }
    std::optional<std::vector<TorusBox>> torus_boxes() const override { return H_->tube_boxes(delta_); }

private:
    SubgroupPtr H_;
    double delta_;
};

class RectangleRegion final : public SetRegion {
public:
    RectangleRegion(SubgroupPtr H, GroupElement h, double delta, double rho)
        : H_(std::move(H)), h_(std::move(h)), delta_(delta), rho_(rho) {}
    const GroupPtr& group() const override { return H_->ambient(); }
    bool contains(const GroupElement& g) const override {
        const Projection p = H_->project(g);
        return p.distance < delta_ && group()->distance(p.k, h_) < rho_;
    }
    RegionBound bound(const GroupElement& g) const override {
        const Projection p = H_->project(g);
        const double a = p.distance;
        const double tol = H_->distance_tolerance();
        const double b = group()->distance(p.k, h_);
        const double L = kRectangleLipschitz;
        if (a < delta_ && b < rho_)
            return {true, std::max(0.0, std::min(delta_ - a, (rho_ - b) / L) - tol)};
        double m = a - delta_;
        // the projection is only Lipschitz-controlled close to H
        if (a <= 0.15) m = std::max(m, (b - rho_) / L);
        return {false, std::max(0.0, m - tol)};
    }
    bool certified() const override { return true; }
    std::string describe() const override {
        std::ostringstream s;
        s << "rect(" << H_->name() << "," << group()->to_json(h_).dump() << "," << delta_ << ","
          << rho_ << ")";
        return s.str();
    }

private:
    SubgroupPtr H_;
    GroupElement h_;
    double delta_, rho_;
};

}  // namespace

RegionPtr tube(const SubgroupPtr& H, double delta) {
    if (!(delta > 0.0 && delta < 0.5)) throw std::invalid_argument("tube width must lie in (0, 0.5)");
    return std::make_shared<TubeRegion>(H, delta);
}

RegionPtr rectangle_wide(const SubgroupPtr& H, const GroupElement& h, double delta, double rho) {
    if (!(delta > 0.0 && delta <= 0.1))
        throw ChartError("rectangle: delta must lie in (0, 0.1] for the exponential chart");
    if (!(rho > 0.0)) throw ChartError("rectangle: rho must be positive");
    if (H->distance(h) > 1e-8 + H->distance_tolerance()) throw std::invalid_argument("rectangle: base point is not in H");
    return std::make_shared<RectangleRegion>(H, h, delta, rho);
}

RegionPtr rectangle(const SubgroupPtr& H, const GroupElement& h, double delta, double rho) {
    if (rho > 0.1) throw ChartError("rectangle: rho must lie in (0, 0.1] for the exponential chart");
    return rectangle_wide(H, h, delta, rho);
}

}  // namespace haarlab
