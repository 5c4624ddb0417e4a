#include "haarlab/group.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <sstream>

namespace haarlab {

AlgebraVector zero_vector(int dim) { return {AlgVec::Zero(dim)}; }

AlgebraVector basis_vector(int dim, int i) {
    AlgebraVector v = zero_vector(dim);
    v.x[i] = 1.0;
    return v;
}

const std::vector<GroupPtr>& Group::factors() const {
    static const std::vector<GroupPtr> none;
    return none;
}

double Group::injectivity_radius() const {
    bool torus = family_ == Family::Torus;
    for (const auto& f : factors()) torus = torus || f->family() == Family::Torus;
    return torus ? std::min(1.0, 0.5 * metric_scale()) : 1.0;
}

void Group::check(const GroupElement& g) const {
    if (g.p.size() != param_size_)
        throw GroupMismatch("element with " + std::to_string(g.p.size()) +
                            " parameters used with group " + name_);
}

void Group::check(const AlgebraVector& X) const {
    if (X.size() != dim_)
        throw GroupMismatch("algebra vector of size " + std::to_string(X.size()) +
                            " used with group " + name_);
}

GroupElement Group::identity() const { return {raw_identity()}; }

GroupElement Group::multiply(const GroupElement& g, const GroupElement& h) const {
    check(g);
    check(h);
    return {raw_multiply(g.p, h.p)};
}

GroupElement Group::inverse(const GroupElement& g) const {
    check(g);
    return {raw_inverse(g.p)};
}

GroupElement Group::commutator(const GroupElement& g, const GroupElement& h) const {
    return multiply(multiply(g, h), multiply(inverse(g), inverse(h)));
}

GroupElement Group::exp_map(const AlgebraVector& X) const {
    check(X);
    return {raw_exp(X.x * diameter_raw_)};
}

bool Group::near_cut_locus(const ParamVec& a) const {
    return raw_norm(a) * metric_scale() > 0.999;
}

AlgebraVector Group::log_map(const GroupElement& g) const {
    check(g);
    if (near_cut_locus(g.p)) {
        const double d = raw_norm(g.p) * metric_scale();
        std::ostringstream msg;
        msg << "log_map: element at normalized distance " << d
            << " from e is at or near the cut locus of " << name_;
        throw CutLocusError(msg.str(), d);
    }
    return {raw_log(g.p) * metric_scale()};
}

double Group::norm_from_identity(const GroupElement& g) const {
    check(g);
    return std::min(1.0, raw_norm(g.p) * metric_scale());
}

double Group::distance(const GroupElement& g, const GroupElement& h) const {
    check(g);
    check(h);
    return std::min(1.0, raw_norm(raw_multiply(raw_inverse(g.p), h.p)) * metric_scale());
}

AlgebraVector Group::bracket(const AlgebraVector& X, const AlgebraVector& Y) const {
    check(X);
    check(Y);
    // bilinear: normalized bracket = raw bracket of the same coordinates times D
    return {raw_bracket(X.x, Y.x) * diameter_raw_};
}

AdMatrix Group::ad_matrix(const AlgebraVector& X) const {
    check(X);
    AdMatrix ad(dim_, dim_);
    for (int i = 0; i < dim_; ++i) ad.col(i) = bracket(X, basis_vector(dim_, i)).x;
    return ad;
}

AlgebraVector Group::adjoint(const GroupElement& g, const AlgebraVector& X) const {
    check(g);
    check(X);
    return {raw_adjoint(g.p, X.x)};
}

AlgebraVector Group::bch_truncated(const AlgebraVector& X, const AlgebraVector& Y,
                                   int order) const {
    if (order < 1 || order > 4) throw std::invalid_argument("bch order must be in 1..4");
    AlgebraVector z = X + Y;
    if (order == 1 || abelian()) return z;
    const AlgebraVector xy = bracket(X, Y);
    z = z + 0.5 * xy;
    if (order == 2) return z;
    const AlgebraVector x_xy = bracket(X, xy);
    z = z + (1.0 / 12.0) * (x_xy - bracket(Y, xy));
    if (order == 3) return z;
    return z - (1.0 / 24.0) * bracket(Y, x_xy);
}

double Group::haar_density(const AlgebraVector& X) const {
    check(X);
    if (abelian()) return 1.0;
    AdMatrix ad(dim_, dim_);
    const AlgVec xr = X.x * diameter_raw_;
    for (int i = 0; i < dim_; ++i) {
        AlgVec e = AlgVec::Zero(dim_);
        e[i] = 1.0;
        ad.col(i) = raw_bracket(xr, e);
    }
    // ad is skew, so -ad^2 is symmetric PSD with eigenvalues lambda^2
    const Eigen::MatrixXd m = -(ad * ad);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
    double h = 1.0;
    for (int i = 0; i < dim_; ++i) {
        const double lam = std::sqrt(std::max(0.0, es.eigenvalues()[i]));
        const double t = lam / 2.0;
        h *= (t < 1e-8) ? 1.0 - t * t / 6.0 : std::sin(t) / t;
    }
    return std::abs(h);
}

GroupElement Group::haar_draw(Rng& rng) const { return {raw_sample(rng)}; }

std::vector<GroupElement> Group::haar_sample(std::uint64_t seed, std::size_t n) const {
    Rng rng(seed);
    std::vector<GroupElement> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back(haar_draw(rng));
    return out;
}

ParamVec Group::raw_from_cube(const double*) const {
    throw std::logic_error("group " + name_ + " has no unit-cube parameterization");
}

GroupElement Group::from_unit_cube(const double* u) const { return {raw_from_cube(u)}; }

nlohmann::json Group::to_json(const GroupElement& g) const {
    check(g);
    nlohmann::json arr = nlohmann::json::array();
    for (int i = 0; i < g.p.size(); ++i) arr.push_back(g.p[i]);
    return arr;
}

GroupElement Group::element_from_json(const nlohmann::json& j) const {
    return element_from_params(j.get<std::vector<double>>());
}

GroupElement Group::element_from_params(const std::vector<double>& v) const {
    const int n = static_cast<int>(v.size());
    if (n == param_size_) {
        ParamVec p(n);
        for (int i = 0; i < n; ++i) p[i] = v[i];
        // multiplying by e renormalizes in every family
        return {raw_multiply(raw_identity(), p)};
    }
    if (n == dim_) {
        AlgebraVector X = zero_vector(dim_);
        for (int i = 0; i < n; ++i) X.x[i] = v[i];
        return exp_map(X);
    }
    throw GroupMismatch("expected " + std::to_string(param_size_) + " parameters (" +
                        param_layout() + ") or " + std::to_string(dim_) +
                        " log coordinates for group " + name_);
}

Eigen::Vector4d quat_mul(const Eigen::Vector4d& a, const Eigen::Vector4d& b) {
    return {a[0] * b[0] - a[1] * b[1] - a[2] * b[2] - a[3] * b[3],
            a[0] * b[1] + a[1] * b[0] + a[2] * b[3] - a[3] * b[2],
            a[0] * b[2] - a[1] * b[3] + a[2] * b[0] + a[3] * b[1],
            a[0] * b[3] + a[1] * b[2] - a[2] * b[1] + a[3] * b[0]};
}

Eigen::Vector4d quat_axis_angle(const Eigen::Vector3d& axis, double angle) {
    const Eigen::Vector3d n = axis.normalized();
    const double s = std::sin(angle / 2.0);
    return {std::cos(angle / 2.0), s * n[0], s * n[1], s * n[2]};
}

Eigen::Matrix3d quat_to_rotation(const Eigen::Vector4d& q) {
    return Eigen::Quaterniond(q[0], q[1], q[2], q[3]).toRotationMatrix();
}

GroupPtr parse_group(const std::string& spec) {
    std::vector<std::string> parts;
    std::stringstream ss(spec);
    std::string tok;
    while (std::getline(ss, tok, 'x')) parts.push_back(tok);
    if (parts.empty()) throw std::invalid_argument("empty group spec");
    std::vector<GroupPtr> gs;
    for (const auto& p : parts) {
        if (p == "su2") gs.push_back(make_su2());
        else if (p == "so3") gs.push_back(make_so3());
        else if (p == "so4") gs.push_back(make_son(4));
        else if (p == "so5") gs.push_back(make_son(5));
        else if (p.size() == 2 && p[0] == 't' && p[1] >= '1' && p[1] <= '4')
            gs.push_back(make_torus(p[1] - '0'));
        else
            throw std::invalid_argument("unknown group '" + p +
                                        "' (expected su2, so3, so4, so5, t1..t4, joined by x)");
    }
    if (gs.size() == 1) return gs.front();
    return make_product(std::move(gs));
}

FactorLayout factor_layout(const Group& product) {
    FactorLayout lay;
    int po = 0, ao = 0;
    for (const auto& f : product.factors()) {
        lay.param_offset.push_back(po);
        lay.alg_offset.push_back(ao);
        po += f->param_size();
        ao += f->dim();
    }
    return lay;
}

}  // namespace haarlab
