#pragma once

#include <cstdint>
#include <memory>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

namespace haarlab {

// Fixed-capacity storage keeps element arithmetic off the heap.
inline constexpr int kMaxParams = 64;
inline constexpr int kMaxDim = 32;

using ParamVec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxParams, 1>;
using AlgVec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxDim, 1>;
using AdMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxDim, kMaxDim>;

using Rng = std::mt19937_64;

struct GroupElement {
    ParamVec p;
};

// Coordinates in an orthonormal basis of the Lie algebra for the normalized
// (diameter 1) bi-invariant metric.
struct AlgebraVector {
    AlgVec x;

    int size() const { return static_cast<int>(x.size()); }
    double norm() const { return x.norm(); }
    double operator[](int i) const { return x[i]; }

    AlgebraVector operator+(const AlgebraVector& o) const { return {x + o.x}; }
    AlgebraVector operator-(const AlgebraVector& o) const { return {x - o.x}; }
    AlgebraVector operator-() const { return {-x}; }
    AlgebraVector operator*(double s) const { return {x * s}; }
    friend AlgebraVector operator*(double s, const AlgebraVector& v) { return {v.x * s}; }
};

AlgebraVector zero_vector(int dim);
AlgebraVector basis_vector(int dim, int i);

class GroupMismatch : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class CutLocusError : public std::domain_error {
public:
    CutLocusError(const std::string& what, double dist)
        : std::domain_error(what), distance(dist) {}
    double distance;  // normalized d(e, g) of the refused input
};

enum class Family { SU2, SO3, Torus, SOn, Product };

// Immutable description of a carrier group. Internal (protected) primitives
// work in raw coordinates orthonormal for the unnormalized metric; the public
// API converts with metric_scale().
class Group {
public:
    virtual ~Group() = default;

    Family family() const { return family_; }
    const std::string& name() const { return name_; }
    int dim() const { return dim_; }
    int param_size() const { return param_size_; }
    double diameter_raw() const { return diameter_raw_; }
    double metric_scale() const { return 1.0 / diameter_raw_; }
    virtual bool abelian() const { return false; }

    // Direct factors for products, empty otherwise.
    virtual const std::vector<std::shared_ptr<const Group>>& factors() const;

    GroupElement identity() const;
    GroupElement multiply(const GroupElement& g, const GroupElement& h) const;
    GroupElement inverse(const GroupElement& g) const;
    GroupElement commutator(const GroupElement& g, const GroupElement& h) const;

    GroupElement exp_map(const AlgebraVector& X) const;
    AlgebraVector log_map(const GroupElement& g) const;  // throws CutLocusError

    double distance(const GroupElement& g, const GroupElement& h) const;
    double norm_from_identity(const GroupElement& g) const;

    AlgebraVector bracket(const AlgebraVector& X, const AlgebraVector& Y) const;
    AdMatrix ad_matrix(const AlgebraVector& X) const;
    AlgebraVector adjoint(const GroupElement& g, const AlgebraVector& X) const;
    AlgebraVector bch_truncated(const AlgebraVector& X, const AlgebraVector& Y, int order) const;
    double haar_density(const AlgebraVector& X) const;
    // Normalized radius below which exp is injective on balls of the algebra;
    // torus factors wrap at raw length 1/2 per axis.
    double injectivity_radius() const;

    GroupElement haar_draw(Rng& rng) const;
    std::vector<GroupElement> haar_sample(std::uint64_t seed, std::size_t n) const;
    // Haar point from a unit-cube point when a measure-preserving cube map
    // exists (lowdisc_dim() > 0); used to feed quasi-random streams.
    virtual int lowdisc_dim() const { return 0; }
    GroupElement from_unit_cube(const double* u) const;

    // Euclidean embedding for spatial indexing. The chord length between
    // embedded points is at most chord_lipschitz() times the raw distance.
    // Groups with a sign ambiguity (SO3) expose several embeddings per element.
    virtual int embed_size() const = 0;
    virtual int embed_copies() const { return 1; }
    virtual void embed(const GroupElement& g, int copy, double* out) const = 0;
    virtual double chord_lipschitz() const = 0;
    // Normalized distance as a function of the chord to the nearest copy, when
    // that relation is exact and monotone; negative otherwise.
    virtual double distance_from_chord(double) const { return -1.0; }

    void check(const GroupElement& g) const;
    void check(const AlgebraVector& X) const;

    nlohmann::json to_json(const GroupElement& g) const;
    GroupElement element_from_json(const nlohmann::json& j) const;
    // Field order of the JSON array, e.g. "w,x,y,z".
    virtual std::string param_layout() const = 0;
    // Builds an element from user-facing parameters (CLI/grammar). Quaternion
    // groups also accept a 3-vector interpreted as normalized log coordinates.
    GroupElement element_from_params(const std::vector<double>& v) const;

    // Raw-coordinate primitives.
    virtual ParamVec raw_identity() const = 0;
    virtual ParamVec raw_multiply(const ParamVec& a, const ParamVec& b) const = 0;
    virtual ParamVec raw_inverse(const ParamVec& a) const = 0;
    virtual ParamVec raw_exp(const AlgVec& x) const = 0;
    virtual AlgVec raw_log(const ParamVec& a) const = 0;  // no cut-locus check
    virtual double raw_norm(const ParamVec& a) const = 0;  // raw d(e, a)
    virtual AlgVec raw_bracket(const AlgVec& x, const AlgVec& y) const = 0;
    virtual AlgVec raw_adjoint(const ParamVec& a, const AlgVec& x) const = 0;
    virtual ParamVec raw_sample(Rng& rng) const = 0;
    virtual ParamVec raw_from_cube(const double* u) const;
    // Normalized distance past which log_map refuses.
    virtual bool near_cut_locus(const ParamVec& a) const;

protected:
    Group(Family f, std::string name, int dim, int param_size, double diameter_raw)
        : family_(f), name_(std::move(name)), dim_(dim), param_size_(param_size),
          diameter_raw_(diameter_raw) {}

private:
    Family family_;
    std::string name_;
    int dim_;
    int param_size_;
    double diameter_raw_;
};

using GroupPtr = std::shared_ptr<const Group>;

GroupPtr make_su2();
GroupPtr make_so3();
GroupPtr make_torus(int d);
GroupPtr make_son(int n);
GroupPtr make_product(std::vector<GroupPtr> factors);

// "su2", "so3", "so4", "so5", "t1".."t4", products joined by 'x' ("so3xt1").
GroupPtr parse_group(const std::string& spec);

// Offsets of factor blocks inside product parameter/algebra vectors.
struct FactorLayout {
    std::vector<int> param_offset;
    std::vector<int> alg_offset;
};
FactorLayout factor_layout(const Group& product);

// Quaternion helpers shared by SU2/SO3 code and subgroups.
Eigen::Vector4d quat_mul(const Eigen::Vector4d& a, const Eigen::Vector4d& b);
Eigen::Vector4d quat_axis_angle(const Eigen::Vector3d& axis, double angle);
Eigen::Matrix3d quat_to_rotation(const Eigen::Vector4d& q);

}  // namespace haarlab
