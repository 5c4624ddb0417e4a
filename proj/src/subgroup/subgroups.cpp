#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <sstream>

#include <Eigen/QR>

#include "haarlab/subgroup.hpp"

namespace haarlab {

double Subgroup::ball_measure(double rho) const {
    const Group& G = *ambient();
    Rng rng(0x5eed1234u);
    const int n = 200000;
    int hits = 0;
    for (int i = 0; i < n; ++i)
        if (G.norm_from_identity(sample(rng)) < rho) ++hits;
    return double(hits) / n;
}

double Subgroup::diameter() const { return 1.0; }

AlgebraVector Subgroup::project_h(const AlgebraVector& X) const {
    AlgebraVector r = zero_vector(X.size());
    for (const auto& b : basis_) r = r + b.x.dot(X.x) * b;
    return r;
}

AlgebraVector Subgroup::project_perp(const AlgebraVector& X) const {
    AlgebraVector r = zero_vector(X.size());
    for (const auto& b : perp_) r = r + b.x.dot(X.x) * b;
    return r;
}

namespace {

constexpr double kPi = std::numbers::pi;

// Rotations about z inside SO3, or the circle {cos t + k sin t} inside SU2.
class QuatAxisSubgroup final : public Subgroup {
public:
    explicit QuatAxisSubgroup(GroupPtr G)
        : Subgroup(G, G->family() == Family::SO3 ? "so2_z" : "u1") {
        set_bases({basis_vector(3, 2)}, {basis_vector(3, 0), basis_vector(3, 1)});
    }

    Projection project(const GroupElement& g) const override {
        const Group& G = *ambient();
        const Eigen::Vector4d q = g.p.head<4>();
        const Eigen::Vector3d v = quat_to_rotation(q).col(2);
        const double s = std::hypot(v[0], v[1]);
        const double beta = std::atan2(s, v[2]);
        Projection pr;
        pr.u = zero_vector(3);
        if (s > 0.0) {
            // rotation taking e_z to v has axis e_z x v
            const Eigen::Vector3d axis(-v[1] / s, v[0] / s, 0.0);
            pr.u.x = axis * (beta * std::sqrt(2.0) * G.metric_scale());
        }
        pr.distance = beta * std::sqrt(2.0) * G.metric_scale();
        pr.k = G.multiply(G.exp_map(-pr.u), g);
        return pr;
    }
    GroupElement sample(Rng& rng) const override {
        std::uniform_real_distribution<double> u01(0.0, 1.0);
        const double period = ambient()->family() == Family::SO3 ? 2 * kPi : 4 * kPi;
        const double phi = u01(rng) * period;
        const double s = std::sin(phi / 2);
        return ambient()->element_from_params({std::cos(phi / 2), 0.0, 0.0, s});
    }
    double ball_measure(double rho) const override { return std::clamp(rho, 0.0, 1.0); }
    double diameter() const override { return 1.0; }
    std::string zonal_key() const override {
        if (conjugator()) return {};
        return ambient()->family() == Family::SO3 ? "so3_tube" : "su2_tube";
    }
};

// Coordinate subtorus keeping the axes in `keep`.
class SubtorusSubgroup final : public Subgroup {
public:
    SubtorusSubgroup(GroupPtr G, std::string name, std::vector<int> keep)
        : Subgroup(G, std::move(name)), keep_(std::move(keep)) {
        const int d = G->dim();
        std::vector<AlgebraVector> b, p;
        for (int i = 0; i < d; ++i) {
            if (std::find(keep_.begin(), keep_.end(), i) != keep_.end()) b.push_back(basis_vector(d, i));
            else {
                p.push_back(basis_vector(d, i));
                perp_axes_.push_back(i);
            }
        }
        set_bases(std::move(b), std::move(p));
    }

    Projection project(const GroupElement& g) const override {
        const Group& G = *ambient();
        Projection pr;
        pr.u = zero_vector(G.dim());
        pr.k = g;
        for (int i : perp_axes_) {
            pr.u.x[i] = (g.p[i] - std::round(g.p[i])) * G.metric_scale();
            pr.k.p[i] = 0.0;
        }
        pr.distance = pr.u.norm();
        return pr;
    }
    GroupElement sample(Rng& rng) const override {
        std::uniform_real_distribution<double> u01(0.0, 1.0);
        GroupElement g = ambient()->identity();
        for (int i : keep_) g.p[i] = u01(rng);
        return ambient()->element_from_params(std::vector<double>(g.p.data(), g.p.data() + g.p.size()));
    }
    double ball_measure(double rho) const override {
        const double R = rho * ambient()->diameter_raw();
        const int k = static_cast<int>(keep_.size());
        if (R > 0.5) return Subgroup::ball_measure(rho);
        if (k == 1) return 2 * R;
        if (k == 2) return kPi * R * R;
        if (k == 3) return 4.0 / 3.0 * kPi * R * R * R;
        return kPi * kPi / 2.0 * R * R * R * R;
    }
    double diameter() const override {
        return std::sqrt(double(keep_.size()) / ambient()->dim());
    }
    std::optional<std::vector<TorusBox>> tube_boxes(double delta) const override {
        if (perp_axes_.size() != 1 || conjugator()) return std::nullopt;
        const int d = ambient()->dim();
        const double w = std::min(0.5, delta * ambient()->diameter_raw());
        TorusBox b{std::vector<double>(d, 0.0), std::vector<double>(d, 1.0)};
        const int ax = perp_axes_[0];
        b.lo[ax] = 1.0 - w;
        b.len[ax] = 2 * w;
        return std::vector<TorusBox>{b};
    }

private:
    std::vector<int> keep_;
    std::vector<int> perp_axes_;
};

// Lexicographic index of the pair (i, j), i < j, matching the SO(n) basis.
int pair_index(int n, int i, int j) {
    int k = 0;
    for (int a = 0; a < i; ++a) k += n - 1 - a;
    return k + (j - i - 1);
}

using Mat = Eigen::MatrixXd;

Mat to_mat(const GroupElement& g, int n) { return Eigen::Map<const Mat>(g.p.data(), n, n); }

GroupElement from_mat(const Group& G, const Mat& m) {
    std::vector<double> v(m.data(), m.data() + m.size());
    return G.element_from_params(v);
}

Mat haar_orthogonal(int n, Rng& rng) {
    std::normal_distribution<double> n01;
    Mat z(n, n);
    for (int i = 0; i < n * n; ++i) z.data()[i] = n01(rng);
    Eigen::HouseholderQR<Mat> qr(z);
    Mat q = qr.householderQ();
    const Mat r = qr.matrixQR().triangularView<Eigen::Upper>();
    for (int i = 0; i < n; ++i)
        if (r(i, i) < 0) q.col(i) = -q.col(i);
    if (q.determinant() < 0) q.col(0) = -q.col(0);
    return q;
}

// Stabilizer SO(n-1) of the last basis vector in SO(n).
class StabilizerSubgroup final : public Subgroup {
public:
    explicit StabilizerSubgroup(GroupPtr G, int n)
        : Subgroup(G, "so" + std::to_string(n - 1)), n_(n) {
        std::vector<AlgebraVector> b, p;
        const int d = G->dim();
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j)
                (j == n - 1 ? p : b).push_back(basis_vector(d, pair_index(n, i, j)));
        set_bases(std::move(b), std::move(p));
    }

    Projection project(const GroupElement& g) const override {
        const Group& G = *ambient();
        const Mat m = to_mat(g, n_);
        const Eigen::VectorXd v = m.col(n_ - 1);
        const Eigen::VectorXd w = v.head(n_ - 1);
        const double s = w.norm();
        const double beta = std::atan2(s, v[n_ - 1]);
        const double rawscale = std::sqrt(2.0 * (n_ - 2));
        Projection pr;
        pr.u = zero_vector(G.dim());
        if (s > 0.0)
            for (int i = 0; i < n_ - 1; ++i)
                pr.u.x[pair_index(n_, i, n_ - 1)] = beta * (w[i] / s) * rawscale * G.metric_scale();
        pr.distance = beta * rawscale * G.metric_scale();
        pr.k = G.multiply(G.exp_map(-pr.u), g);
        return pr;
    }
    GroupElement sample(Rng& rng) const override {
        Mat m = Mat::Identity(n_, n_);
        if (n_ - 1 == 2) {
            std::uniform_real_distribution<double> u01(0.0, 2 * kPi);
            const double t = u01(rng);
            m(0, 0) = std::cos(t);
            m(1, 0) = std::sin(t);
            m(0, 1) = -std::sin(t);
            m(1, 1) = std::cos(t);
        } else {
            m.topLeftCorner(n_ - 1, n_ - 1) = haar_orthogonal(n_ - 1, rng);
        }
        return from_mat(*ambient(), m);
    }
    double diameter() const override {
        const double raw = kPi * std::sqrt((n_ - 2) * 2.0 * ((n_ - 1) / 2));
        return raw * ambient()->metric_scale();
    }

private:
    int n_;
};

// Fallback for subgroups without a closed-form distance: pattern search over
// exponential coordinates of H from the best of a fixed set of seeds.
class MinimizingSubgroup : public Subgroup {
public:
    using Subgroup::Subgroup;

    double distance_tolerance() const override { return 1e-6; }

    Projection project(const GroupElement& g) const override {
        const Group& G = *ambient();
        init_seeds();
        std::vector<std::pair<double, std::size_t>> scored;
        for (std::size_t i = 0; i < seeds_.size(); ++i) scored.push_back({G.distance(g, seeds_[i]), i});
        std::sort(scored.begin(), scored.end());
        GroupElement best_k = seeds_[scored[0].second];
        double best = scored[0].first;
        const std::size_t starts = std::min<std::size_t>(3, scored.size());
        for (std::size_t s = 0; s < starts; ++s) {
            GroupElement k = seeds_[scored[s].second];
            double f = scored[s].first;
            double step = 0.05;
            while (step > 1e-9) {
                bool moved = false;
                for (const auto& b : algebra_basis()) {
                    for (double sign : {1.0, -1.0}) {
                        const GroupElement cand = G.multiply(k, G.exp_map(b * (sign * step)));
                        const double fc = G.distance(g, cand);
                        if (fc < f) {
                            f = fc;
                            k = cand;
                            moved = true;
                        }
                    }
                }
                if (!moved) step *= 0.5;
            }
            if (f < best) {
                best = f;
                best_k = k;
            }
        }
        Projection pr;
        pr.distance = best;
        pr.k = best_k;
        const GroupElement t = G.multiply(g, G.inverse(best_k));
        pr.u = G.norm_from_identity(t) < 0.999 ? G.log_map(t) : zero_vector(G.dim());
        return pr;
    }

private:
    void init_seeds() const {
        if (!seeds_.empty()) return;
        Rng rng(0xabcdef01u);
        seeds_.push_back(ambient()->identity());
        for (int i = 0; i < 96; ++i) seeds_.push_back(sample(rng));
    }
    mutable std::vector<GroupElement> seeds_;
};

// U(2) inside SO(4): matrices commuting with the complex structure J that
// pairs coordinates (0,1) and (2,3).
class U2Subgroup final : public MinimizingSubgroup {
public:
    explicit U2Subgroup(GroupPtr G) : MinimizingSubgroup(G, "u2") {
        Mat J = Mat::Zero(4, 4);
        J(1, 0) = 1;
        J(0, 1) = -1;
        J(3, 2) = 1;
        J(2, 3) = -1;
        // linear map on skew coordinates X -> XJ - JX, kernel = u(2)
        const int d = G->dim();
        const double bs = std::sqrt(2.0 * 2);
        Mat A(16, d);
        for (int k = 0; k < d; ++k) {
            Mat X = Mat::Zero(4, 4);
            int idx = 0;
            for (int i = 0; i < 4; ++i)
                for (int j = i + 1; j < 4; ++j, ++idx)
                    if (idx == k) {
                        X(i, j) = 1.0 / bs;
                        X(j, i) = -1.0 / bs;
                    }
            const Mat C = X * J - J * X;
            A.col(k) = Eigen::Map<const Eigen::VectorXd>(C.data(), 16);
        }
        Eigen::JacobiSVD<Mat> svd(A, Eigen::ComputeFullV);
        std::vector<AlgebraVector> b, p;
        for (int k = 0; k < d; ++k) {
            AlgebraVector v{svd.matrixV().col(k)};
            (svd.singularValues()[k] < 1e-10 ? b : p).push_back(v);
        }
        set_bases(std::move(b), std::move(p));
    }

    GroupElement sample(Rng& rng) const override {
        std::normal_distribution<double> n01;
        Eigen::Matrix2cd z;
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) z(i, j) = {n01(rng), n01(rng)};
        Eigen::HouseholderQR<Eigen::Matrix2cd> qr(z);
        Eigen::Matrix2cd q = qr.householderQ();
        const Eigen::Matrix2cd r = qr.matrixQR();
        for (int i = 0; i < 2; ++i) {
            const std::complex<double> ph = r(i, i) / std::abs(r(i, i));
            q.col(i) *= ph;
        }
        Mat m(4, 4);
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) {
                const double a = q(i, j).real(), b = q(i, j).imag();
                m(2 * i, 2 * j) = a;
                m(2 * i, 2 * j + 1) = -b;
                m(2 * i + 1, 2 * j) = b;
                m(2 * i + 1, 2 * j + 1) = a;
            }
        return from_mat(*ambient(), m);
    }
};

// H_i x (other factors) inside a product.
class FactorSubgroup final : public Subgroup {
public:
    FactorSubgroup(GroupPtr G, std::size_t idx, SubgroupPtr inner)
        : Subgroup(G, std::to_string(idx) + ":" + inner->name()), idx_(idx), inner_(std::move(inner)) {
        const FactorLayout lay = factor_layout(*G);
        aoff_ = lay.alg_offset[idx_];
        poff_ = lay.param_offset[idx_];
        const auto& Gi = *G->factors()[idx_];
        ratio_ = Gi.diameter_raw() / G->diameter_raw();
        std::vector<AlgebraVector> b, p;
        for (int k = 0; k < G->dim(); ++k)
            if (k < aoff_ || k >= aoff_ + Gi.dim()) b.push_back(basis_vector(G->dim(), k));
        for (const auto& v : inner_->algebra_basis()) b.push_back(embed(v, 1.0));
        for (const auto& v : inner_->perp_basis()) p.push_back(embed(v, 1.0));
        set_bases(std::move(b), std::move(p));
    }

    Projection project(const GroupElement& g) const override {
        const auto& Gi = *ambient()->factors()[idx_];
        const GroupElement gi{g.p.segment(poff_, Gi.param_size())};
        const Projection pi = inner_->project(gi);
        Projection pr;
        pr.distance = pi.distance * ratio_;
        pr.u = embed(pi.u, ratio_);
        pr.k = g;
        pr.k.p.segment(poff_, Gi.param_size()) = pi.k.p;
        return pr;
    }
    double distance_tolerance() const override { return inner_->distance_tolerance() * ratio_; }
    GroupElement sample(Rng& rng) const override {
        GroupElement g = ambient()->haar_draw(rng);
        const auto& Gi = *ambient()->factors()[idx_];
        g.p.segment(poff_, Gi.param_size()) = inner_->sample(rng).p;
        return g;
    }
    double diameter() const override {
        double s = 0.0;
        for (std::size_t k = 0; k < ambient()->factors().size(); ++k) {
            const auto& f = *ambient()->factors()[k];
            const double d = k == idx_ ? inner_->diameter() * f.diameter_raw() : f.diameter_raw();
            s += d * d;
        }
        return std::sqrt(s) / ambient()->diameter_raw();
    }

private:
    // Normalized factor coordinates become ratio_ times smaller in the
    // product; directions (basis vectors) are copied with factor 1.
    AlgebraVector embed(const AlgebraVector& v, double factor) const {
        AlgebraVector r = zero_vector(ambient()->dim());
        r.x.segment(aoff_, v.size()) = v.x * factor;
        return r;
    }

    std::size_t idx_;
    SubgroupPtr inner_;
    int aoff_ = 0, poff_ = 0;
    double ratio_ = 1.0;
};

class ConjugatedSubgroup final : public Subgroup {
public:
    ConjugatedSubgroup(SubgroupPtr base, GroupElement g)
        : Subgroup(base->ambient(), base->name()), base_(std::move(base)), g_(std::move(g)),
          ginv_(base_->ambient()->inverse(g_)) {
        const Group& G = *ambient();
        std::vector<AlgebraVector> b, p;
        for (const auto& v : base_->algebra_basis()) b.push_back(G.adjoint(g_, v));
        for (const auto& v : base_->perp_basis()) p.push_back(G.adjoint(g_, v));
        set_bases(std::move(b), std::move(p));
        set_conjugator(g_);
    }

    Projection project(const GroupElement& x) const override {
        const Group& G = *ambient();
        const Projection pb = base_->project(G.multiply(G.multiply(ginv_, x), g_));
        Projection pr;
        pr.distance = pb.distance;
        pr.u = G.adjoint(g_, pb.u);
        pr.k = G.multiply(G.multiply(g_, pb.k), ginv_);
        return pr;
    }
    double distance_tolerance() const override { return base_->distance_tolerance(); }
    GroupElement sample(Rng& rng) const override {
        const Group& G = *ambient();
        return G.multiply(G.multiply(g_, base_->sample(rng)), ginv_);
    }
    double ball_measure(double rho) const override { return base_->ball_measure(rho); }
    double diameter() const override { return base_->diameter(); }

private:
    SubgroupPtr base_;
    GroupElement g_, ginv_;
};

std::vector<int> parse_axes(const std::string& s, int d) {
    static const std::string names = "xyzw";
    std::vector<int> out;
    for (char c : s) {
        const auto pos = names.find(c);
        if (pos == std::string::npos || static_cast<int>(pos) >= d)
            throw std::invalid_argument("bad subtorus axis '" + std::string(1, c) + "'");
        if (std::find(out.begin(), out.end(), int(pos)) != out.end())
            throw std::invalid_argument("repeated subtorus axis");
        out.push_back(static_cast<int>(pos));
    }
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace

SubgroupPtr Subgroup::conjugate(const GroupElement& g) const {
    ambient()->check(g);
    return std::make_shared<ConjugatedSubgroup>(shared_from_this(), g);
}

SubgroupPtr builtin_subgroup(const GroupPtr& G, const std::string& name) {
    const auto unknown = [&]() {
        std::string avail;
        for (const auto& n : builtin_subgroup_names(*G)) avail += (avail.empty() ? "" : ", ") + n;
        return std::invalid_argument("unknown subgroup '" + name + "' of " + G->name() +
                                     " (available: " + avail + ")");
    };
    switch (G->family()) {
        case Family::SO3:
            if (name == "so2_z") return std::make_shared<QuatAxisSubgroup>(G);
            break;
        case Family::SU2:
            if (name == "u1") return std::make_shared<QuatAxisSubgroup>(G);
            break;
        case Family::Torus: {
            // t<k>_<axes>
            const auto us = name.find('_');
            if (name.size() >= 3 && name[0] == 't' && us != std::string::npos) {
                const int k = std::atoi(name.substr(1, us - 1).c_str());
                const auto axes = parse_axes(name.substr(us + 1), G->dim());
                if (k >= 0 && k < G->dim() && static_cast<int>(axes.size()) == k)
                    return std::make_shared<SubtorusSubgroup>(G, name, axes);
            }
            break;
        }
        case Family::SOn: {
            const int n = static_cast<int>(std::lround((1 + std::sqrt(1 + 8.0 * G->dim())) / 2));
            if (name == "so" + std::to_string(n - 1)) return std::make_shared<StabilizerSubgroup>(G, n);
            if (n == 4 && name == "u2") return std::make_shared<U2Subgroup>(G);
            break;
        }
        case Family::Product: {
            const auto colon = name.find(':');
            if (colon == std::string::npos) break;
            const std::size_t idx = std::stoul(name.substr(0, colon));
            if (idx >= G->factors().size()) break;
            auto inner = builtin_subgroup(G->factors()[idx], name.substr(colon + 1));
            return std::make_shared<FactorSubgroup>(G, idx, std::move(inner));
        }
    }
    throw unknown();
}

std::vector<std::string> builtin_subgroup_names(const Group& G) {
    switch (G.family()) {
        case Family::SO3:
            return {"so2_z"};
        case Family::SU2:
            return {"u1"};
        case Family::Torus: {
            static const std::string axes = "xyzw";
            std::vector<std::string> out;
            const int d = G.dim();
            // codimension-one subtori first, then the rest
            for (int k = d - 1; k >= 1; --k)
                for (int mask = 0; mask < (1 << d); ++mask) {
                    if (__builtin_popcount(mask) != k) continue;
                    std::string s = "t" + std::to_string(k) + "_";
                    for (int i = 0; i < d; ++i)
                        if (mask & (1 << i)) s += axes[i];
                    out.push_back(s);
                }
            if (d == 1) out.push_back("t0_");
            return out;
        }
        case Family::SOn: {
            const int n = static_cast<int>(std::lround((1 + std::sqrt(1 + 8.0 * G.dim())) / 2));
            std::vector<std::string> out{"so" + std::to_string(n - 1)};
            if (n == 4) out.push_back("u2");
            return out;
        }
        case Family::Product: {
            std::vector<std::string> out;
            for (std::size_t k = 0; k < G.factors().size(); ++k)
                for (const auto& n : builtin_subgroup_names(*G.factors()[k]))
                    out.push_back(std::to_string(k) + ":" + n);
            return out;
        }
    }
    return {};
}

std::vector<std::string> maximal_subgroup_names(const Group& G) {
    std::vector<std::string> out;
    const int k = critical_exponent(G);
    for (const auto& n : builtin_subgroup_names(G)) {
        int codim = 0;
        if (G.family() == Family::Torus) {
            codim = G.dim() - std::atoi(n.substr(1).c_str());
        } else if (G.family() == Family::SOn) {
            const int m = static_cast<int>(std::lround((1 + std::sqrt(1 + 8.0 * G.dim())) / 2));
            codim = n == "u2" ? 2 : m - 1;
        } else if (G.family() == Family::Product) {
            const std::size_t idx = std::stoul(n.substr(0, n.find(':')));
            const auto& f = G.factors()[idx];
            const std::string rest = n.substr(n.find(':') + 1);
            const auto sub = maximal_subgroup_names(*f);
            codim = std::find(sub.begin(), sub.end(), rest) != sub.end() ? critical_exponent(*f) : k + 1;
        } else {
            codim = 2;
        }
        if (codim == k) out.push_back(n);
    }
    return out;
}

}  // namespace haarlab
