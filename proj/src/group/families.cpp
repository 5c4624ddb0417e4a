#include <Eigen/SVD>
#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <numbers>

#include "haarlab/group.hpp"

namespace haarlab {
namespace {

constexpr double kPi = std::numbers::pi;
const double kSqrt2 = std::sqrt(2.0);

// ---- SU(2) and SO(3) on unit quaternions (w, x, y, z) ----
//
// Raw algebra coordinates x relate to the rotation vector by x = sqrt(2) * omega,
// which makes -Killing orthonormal: |x|^2 = 2 theta^2.
class QuaternionGroup final : public Group {
public:
    explicit QuaternionGroup(bool projective)
        : Group(projective ? Family::SO3 : Family::SU2, projective ? "so3" : "su2", 3, 4,
                projective ? kSqrt2 * kPi : 2.0 * kSqrt2 * kPi),
          projective_(projective) {}

    int lowdisc_dim() const override { return 3; }
    int embed_size() const override { return 4; }
    int embed_copies() const override { return projective_ ? 2 : 1; }
    void embed(const GroupElement& g, int copy, double* out) const override {
        const double s = copy == 0 ? 1.0 : -1.0;
        for (int i = 0; i < 4; ++i) out[i] = s * g.p[i];
    }
    double chord_lipschitz() const override { return 1.0 / (2.0 * kSqrt2); }
    double distance_from_chord(double c) const override {
        const double a = 2.0 * std::asin(std::min(1.0, 0.5 * c));  // angle on S^3
        return std::min(1.0, projective_ ? 2.0 * a / kPi : a / kPi);
    }
    std::string param_layout() const override { return "w,x,y,z"; }

    ParamVec raw_identity() const override {
        ParamVec p(4);
        p << 1, 0, 0, 0;
        return p;
    }
    ParamVec raw_multiply(const ParamVec& a, const ParamVec& b) const override {
        return canon(quat_mul(a.head<4>(), b.head<4>()));
    }
    ParamVec raw_inverse(const ParamVec& a) const override {
        return canon(Eigen::Vector4d(a[0], -a[1], -a[2], -a[3]));
    }
    ParamVec raw_exp(const AlgVec& x) const override {
        const Eigen::Vector3d omega = x.head<3>() / kSqrt2;
        const double th = omega.norm();
        // sin(th/2)/th, series near zero
        const double k = th < 1e-6 ? 0.5 - th * th / 48.0 : std::sin(th / 2.0) / th;
        return canon(Eigen::Vector4d(std::cos(th / 2.0), k * omega[0], k * omega[1], k * omega[2]));
    }
    AlgVec raw_log(const ParamVec& a) const override {
        Eigen::Vector4d q = a.head<4>();
        if (projective_ && q[0] < 0) q = -q;
        const Eigen::Vector3d v = q.tail<3>();
        const double s = v.norm();
        const double alpha = std::atan2(s, q[0]);
        const double f = s < 1e-300 ? 2.0 / q[0] : 2.0 * alpha / s;
        AlgVec out = kSqrt2 * f * v;
        return out;
    }
    double raw_norm(const ParamVec& a) const override {
        const double s = a.tail<3>().norm();
        const double w = projective_ ? std::abs(a[0]) : a[0];
        return 2.0 * kSqrt2 * std::atan2(s, w);
    }
    AlgVec raw_bracket(const AlgVec& x, const AlgVec& y) const override {
        const Eigen::Vector3d c = Eigen::Vector3d(x.head<3>()).cross(Eigen::Vector3d(y.head<3>()));
        AlgVec out = c / kSqrt2;
        return out;
    }
    AlgVec raw_adjoint(const ParamVec& a, const AlgVec& x) const override {
        AlgVec out = quat_to_rotation(a.head<4>()) * Eigen::Vector3d(x.head<3>());
        return out;
    }
    ParamVec raw_sample(Rng& rng) const override {
        std::normal_distribution<double> n01;
        Eigen::Vector4d q;
        do {
            for (int i = 0; i < 4; ++i) q[i] = n01(rng);
        } while (q.norm() < 1e-12);
        return canon(q);
    }
    ParamVec raw_from_cube(const double* u) const override {
        // Shoemake's uniform map from the unit cube onto S^3
        const double r1 = std::sqrt(1.0 - u[0]), r2 = std::sqrt(u[0]);
        const double t1 = 2.0 * kPi * u[1], t2 = 2.0 * kPi * u[2];
        return canon(Eigen::Vector4d(r2 * std::cos(t2), r1 * std::sin(t1), r1 * std::cos(t1),
                                     r2 * std::sin(t2)));
    }

private:
    ParamVec canon(Eigen::Vector4d q) const {
        q /= q.norm();
        if (projective_) {
            for (int i = 0; i < 4; ++i) {
                if (q[i] > 0) break;
                if (q[i] < 0) {
                    q = -q;
                    break;
                }
            }
        }
        return q;
    }

    bool projective_;
};

// ---- Torus T^d with angle vectors in [0,1) ----
//
// Raw coordinates are the angles themselves (circumference 1 per factor).
class TorusGroup final : public Group {
public:
    explicit TorusGroup(int d)
        : Group(Family::Torus, "t" + std::to_string(d), d, d, std::sqrt(double(d)) / 2.0) {}

    bool abelian() const override { return true; }
    int lowdisc_dim() const override { return dim(); }
    int embed_size() const override { return 2 * dim(); }
    void embed(const GroupElement& g, int, double* out) const override {
        for (int i = 0; i < dim(); ++i) {
            out[2 * i] = std::cos(2 * kPi * g.p[i]);
            out[2 * i + 1] = std::sin(2 * kPi * g.p[i]);
        }
    }
    double chord_lipschitz() const override { return 2.0 * kPi; }
    std::string param_layout() const override {
        std::string s;
        for (int i = 0; i < dim(); ++i) s += (i ? ",theta" : "theta") + std::to_string(i);
        return s;
    }

    static double wrap01(double t) {
        double r = t - std::floor(t);
        return r >= 1.0 ? 0.0 : r;
    }
    static double centered(double t) { return t - std::round(t); }

    ParamVec raw_identity() const override { return ParamVec::Zero(dim()); }
    ParamVec raw_multiply(const ParamVec& a, const ParamVec& b) const override {
        ParamVec r(dim());
        for (int i = 0; i < dim(); ++i) r[i] = wrap01(a[i] + b[i]);
        return r;
    }
    ParamVec raw_inverse(const ParamVec& a) const override {
        ParamVec r(dim());
        for (int i = 0; i < dim(); ++i) r[i] = wrap01(-a[i]);
        return r;
    }
    ParamVec raw_exp(const AlgVec& x) const override {
        ParamVec r(dim());
        for (int i = 0; i < dim(); ++i) r[i] = wrap01(x[i]);
        return r;
    }
    AlgVec raw_log(const ParamVec& a) const override {
        AlgVec r(dim());
        for (int i = 0; i < dim(); ++i) r[i] = centered(a[i]);
        return r;
    }
    double raw_norm(const ParamVec& a) const override { return raw_log(a).norm(); }
    bool near_cut_locus(const ParamVec& a) const override {
        for (int i = 0; i < dim(); ++i)
            if (std::abs(centered(a[i])) > 0.999 * 0.5) return true;
        return false;
    }
    AlgVec raw_bracket(const AlgVec&, const AlgVec&) const override { return AlgVec::Zero(dim()); }
    AlgVec raw_adjoint(const ParamVec&, const AlgVec& x) const override { return x; }
    ParamVec raw_sample(Rng& rng) const override {
        std::uniform_real_distribution<double> u01(0.0, 1.0);
        ParamVec r(dim());
        for (int i = 0; i < dim(); ++i) r[i] = wrap01(u01(rng));
        return r;
    }
    ParamVec raw_from_cube(const double* u) const override {
        ParamVec r(dim());
        for (int i = 0; i < dim(); ++i) r[i] = wrap01(u[i]);
        return r;
    }
};

// ---- SO(n), n = 3..5, column-major matrices ----
//
// Basis E_ij / sqrt(2(n-2)) for i < j; the -Killing norm is (n-2)|X|_F^2.
class SOnGroup final : public Group {
public:
    explicit SOnGroup(int n)
        : Group(Family::SOn, "so" + std::to_string(n), n * (n - 1) / 2, n * n,
                kPi * std::sqrt((n - 2) * 2.0 * (n / 2))),
          n_(n), basis_scale_(std::sqrt(2.0 * (n - 2))) {
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) pairs_.push_back({i, j});
    }

    int embed_size() const override { return n_ * n_; }
    void embed(const GroupElement& g, int, double* out) const override {
        for (int i = 0; i < n_ * n_; ++i) out[i] = g.p[i];
    }
    double chord_lipschitz() const override { return 1.0 / std::sqrt(double(n_ - 2)); }
    std::string param_layout() const override { return "column-major " + std::to_string(n_) + "x" + std::to_string(n_); }

    using Mat = Eigen::MatrixXd;

    Mat to_mat(const ParamVec& a) const { return Eigen::Map<const Mat>(a.data(), n_, n_); }
    ParamVec from_mat(const Mat& m) const {
        ParamVec p(n_ * n_);
        Eigen::Map<Mat>(p.data(), n_, n_) = m;
        return p;
    }
    Mat skew(const AlgVec& x) const {
        Mat m = Mat::Zero(n_, n_);
        for (std::size_t k = 0; k < pairs_.size(); ++k) {
            const auto [i, j] = pairs_[k];
            m(i, j) = x[k] / basis_scale_;
            m(j, i) = -m(i, j);
        }
        return m;
    }
    AlgVec coords(const Mat& m) const {
        AlgVec x(dim());
        for (std::size_t k = 0; k < pairs_.size(); ++k) {
            const auto [i, j] = pairs_[k];
            x[k] = 0.5 * (m(i, j) - m(j, i)) * basis_scale_;
        }
        return x;
    }
    Mat orthonormalize(const Mat& m) const {
        const double defect = (m.transpose() * m - Mat::Identity(n_, n_)).cwiseAbs().maxCoeff();
        if (defect <= 1e-13) return m;
        Eigen::JacobiSVD<Mat> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
        return svd.matrixU() * svd.matrixV().transpose();
    }

    ParamVec raw_identity() const override { return from_mat(Mat::Identity(n_, n_)); }
    ParamVec raw_multiply(const ParamVec& a, const ParamVec& b) const override {
        return from_mat(orthonormalize(to_mat(a) * to_mat(b)));
    }
    ParamVec raw_inverse(const ParamVec& a) const override {
        return from_mat(to_mat(a).transpose());
    }
    ParamVec raw_exp(const AlgVec& x) const override {
        return from_mat(orthonormalize(skew(x).exp()));
    }
    AlgVec raw_log(const ParamVec& a) const override {
        const Mat l = to_mat(a).log();
        return coords(l);
    }
    double raw_norm(const ParamVec& a) const override {
        Eigen::EigenSolver<Mat> es(to_mat(a), false);
        double s = 0.0;
        for (int i = 0; i < n_; ++i) {
            const double t = std::arg(es.eigenvalues()[i]);
            s += t * t;
        }
        return std::sqrt((n_ - 2) * s);
    }
    AlgVec raw_bracket(const AlgVec& x, const AlgVec& y) const override {
        const Mat X = skew(x), Y = skew(y);
        return coords(X * Y - Y * X);
    }
    AlgVec raw_adjoint(const ParamVec& a, const AlgVec& x) const override {
        const Mat g = to_mat(a);
        return coords(g * skew(x) * g.transpose());
    }
    ParamVec raw_sample(Rng& rng) const override {
        std::normal_distribution<double> n01;
        Mat z(n_, n_);
        for (int i = 0; i < n_ * n_; ++i) z.data()[i] = n01(rng);
        Eigen::HouseholderQR<Mat> qr(z);
        Mat q = qr.householderQ();
        const Mat r = qr.matrixQR().triangularView<Eigen::Upper>();
        for (int i = 0; i < n_; ++i)
            if (r(i, i) < 0) q.col(i) = -q.col(i);
        if (q.determinant() < 0) q.col(0) = -q.col(0);
        return from_mat(orthonormalize(q));
    }

private:
    int n_;
    double basis_scale_;
    std::vector<std::pair<int, int>> pairs_;
};

// ---- Direct products with the orthogonal-sum metric ----
class ProductGroup final : public Group {
public:
    ProductGroup(std::vector<GroupPtr> fs, int dim, int params, double diam, std::string name)
        : Group(Family::Product, std::move(name), dim, params, diam), fs_(std::move(fs)) {
        lay_.param_offset.clear();
        int po = 0, ao = 0;
        for (const auto& f : fs_) {
            lay_.param_offset.push_back(po);
            lay_.alg_offset.push_back(ao);
            po += f->param_size();
            ao += f->dim();
        }
    }

    const std::vector<GroupPtr>& factors() const override { return fs_; }
    bool abelian() const override {
        for (const auto& f : fs_)
            if (!f->abelian()) return false;
        return true;
    }
    int lowdisc_dim() const override {
        int s = 0;
        for (const auto& f : fs_) {
            if (f->lowdisc_dim() == 0) return 0;
            s += f->lowdisc_dim();
        }
        return s;
    }
    int embed_size() const override {
        int s = 0;
        for (const auto& f : fs_) s += f->embed_size();
        return s;
    }
    int embed_copies() const override {
        int c = 1;
        for (const auto& f : fs_) c *= f->embed_copies();
        return c;
    }
    void embed(const GroupElement& g, int copy, double* out) const override {
        for (std::size_t k = 0; k < fs_.size(); ++k) {
            const int c = fs_[k]->embed_copies();
            fs_[k]->embed(part(g.p, k), copy % c, out);
            copy /= c;
            out += fs_[k]->embed_size();
        }
    }
    double chord_lipschitz() const override {
        double l = 0.0;
        for (const auto& f : fs_) l = std::max(l, f->chord_lipschitz());
        return l;
    }
    std::string param_layout() const override {
        std::string s;
        for (std::size_t k = 0; k < fs_.size(); ++k)
            s += (k ? " | " : "") + fs_[k]->param_layout();
        return s;
    }

    ParamVec raw_identity() const override {
        ParamVec r(param_size());
        for (std::size_t k = 0; k < fs_.size(); ++k) put(r, k, fs_[k]->raw_identity());
        return r;
    }
    ParamVec raw_multiply(const ParamVec& a, const ParamVec& b) const override {
        ParamVec r(param_size());
        for (std::size_t k = 0; k < fs_.size(); ++k)
            put(r, k, fs_[k]->raw_multiply(part(a, k).p, part(b, k).p));
        return r;
    }
    ParamVec raw_inverse(const ParamVec& a) const override {
        ParamVec r(param_size());
        for (std::size_t k = 0; k < fs_.size(); ++k) put(r, k, fs_[k]->raw_inverse(part(a, k).p));
        return r;
    }
    ParamVec raw_exp(const AlgVec& x) const override {
        ParamVec r(param_size());
        for (std::size_t k = 0; k < fs_.size(); ++k) put(r, k, fs_[k]->raw_exp(apart(x, k)));
        return r;
    }
    AlgVec raw_log(const ParamVec& a) const override {
        AlgVec r(dim());
        for (std::size_t k = 0; k < fs_.size(); ++k)
            r.segment(lay_.alg_offset[k], fs_[k]->dim()) = fs_[k]->raw_log(part(a, k).p);
        return r;
    }
    double raw_norm(const ParamVec& a) const override {
        double s = 0.0;
        for (std::size_t k = 0; k < fs_.size(); ++k) {
            const double t = fs_[k]->raw_norm(part(a, k).p);
            s += t * t;
        }
        return std::sqrt(s);
    }
    bool near_cut_locus(const ParamVec& a) const override {
        for (std::size_t k = 0; k < fs_.size(); ++k)
            if (fs_[k]->near_cut_locus(part(a, k).p)) return true;
        return false;
    }
    AlgVec raw_bracket(const AlgVec& x, const AlgVec& y) const override {
        AlgVec r(dim());
        for (std::size_t k = 0; k < fs_.size(); ++k)
            r.segment(lay_.alg_offset[k], fs_[k]->dim()) = fs_[k]->raw_bracket(apart(x, k), apart(y, k));
        return r;
    }
    AlgVec raw_adjoint(const ParamVec& a, const AlgVec& x) const override {
        AlgVec r(dim());
        for (std::size_t k = 0; k < fs_.size(); ++k)
            r.segment(lay_.alg_offset[k], fs_[k]->dim()) =
                fs_[k]->raw_adjoint(part(a, k).p, apart(x, k));
        return r;
    }
    ParamVec raw_sample(Rng& rng) const override {
        ParamVec r(param_size());
        for (std::size_t k = 0; k < fs_.size(); ++k) put(r, k, fs_[k]->raw_sample(rng));
        return r;
    }
    ParamVec raw_from_cube(const double* u) const override {
        ParamVec r(param_size());
        for (std::size_t k = 0; k < fs_.size(); ++k) {
            put(r, k, fs_[k]->raw_from_cube(u));
            u += fs_[k]->lowdisc_dim();
        }
        return r;
    }

private:
    GroupElement part(const ParamVec& a, std::size_t k) const {
        return {a.segment(lay_.param_offset[k], fs_[k]->param_size())};
    }
    AlgVec apart(const AlgVec& x, std::size_t k) const {
        return x.segment(lay_.alg_offset[k], fs_[k]->dim());
    }
    void put(ParamVec& r, std::size_t k, const ParamVec& v) const {
        r.segment(lay_.param_offset[k], fs_[k]->param_size()) = v;
    }

    std::vector<GroupPtr> fs_;
    FactorLayout lay_;
};

}  // namespace

GroupPtr make_su2() { return std::make_shared<QuaternionGroup>(false); }
GroupPtr make_so3() { return std::make_shared<QuaternionGroup>(true); }

GroupPtr make_torus(int d) {
    if (d < 1 || d > 4) throw std::invalid_argument("torus dimension must be in 1..4");
    return std::make_shared<TorusGroup>(d);
}

GroupPtr make_son(int n) {
    if (n < 3 || n > 5) throw std::invalid_argument("SO(n) supported for n = 3..5");
    return std::make_shared<SOnGroup>(n);
}

GroupPtr make_product(std::vector<GroupPtr> factors) {
    if (factors.size() < 2) throw std::invalid_argument("product needs at least two factors");
    int dim = 0, params = 0;
    double d2 = 0.0;
    std::string name;
    for (const auto& f : factors) {
        if (f->family() == Family::Product) throw std::invalid_argument("nested products are not supported");
        dim += f->dim();
        params += f->param_size();
        d2 += f->diameter_raw() * f->diameter_raw();
        name += (name.empty() ? "" : "x") + f->name();
    }
    if (dim > kMaxDim || params > kMaxParams) throw std::invalid_argument("product too large");
    return std::make_shared<ProductGroup>(std::move(factors), dim, params, std::sqrt(d2), name);
}

}  // namespace haarlab
