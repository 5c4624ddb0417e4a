#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "haarlab/group.hpp"
#include "haarlab/region.hpp"

namespace haarlab {

// One row of the table of maximal-dimension subalgebras of compact simple
// Lie algebras. family is "a", "b", "c", "d" or one of "e6", "e7", "e8", "f4",
// "g2" (rank 0 for exceptional rows is replaced by the actual rank).
struct MaximalDimensionEntry {
    std::string family;
    int rank = 0;
    int dim_g = 0;
    int codim = 0;
    std::string h_description;
};

// Rows for ranks 1..max_rank of the classical families (within each family's
// range of validity) followed by the exceptional rows, ordered by (family, rank).
std::vector<MaximalDimensionEntry> maximal_dimension_table(int max_rank = 8);
nlohmann::json catalog_json(int max_rank = 8);

// Closed-form columns. a_3 is not covered by the a_r row; it is answered
// through a_3 = d_3. Throws for ranks outside a family's range.
int closed_form_dim(const std::string& family, int rank);
int closed_form_codim(const std::string& family, int rank);

// d_G - d_H for a computational carrier. Products take the minimum over
// factors; the torus T^d gives 1.
int critical_exponent(const Group& G);
// Simple Lie algebra label of a carrier ("a1" for SU2/SO3, "b2" for SO5, ...);
// empty for tori and products.
std::string lie_algebra_label(const Group& G);

class ChartError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

// g = exp(u) k with u in h-perp (normalized coordinates), k in H and
// |u| = d(g, H) up to tolerance.
struct Projection {
    double distance = 0.0;
    AlgebraVector u;
    GroupElement k;
};

class Subgroup;
using SubgroupPtr = std::shared_ptr<const Subgroup>;

// Embedded closed subgroup H of a carrier group.
class Subgroup : public std::enable_shared_from_this<Subgroup> {
public:
    virtual ~Subgroup() = default;

    const GroupPtr& ambient() const { return G_; }
    const std::string& name() const { return name_; }
    int dim_h() const { return static_cast<int>(basis_.size()); }
    const std::vector<AlgebraVector>& algebra_basis() const { return basis_; }
    const std::vector<AlgebraVector>& perp_basis() const { return perp_; }

    virtual Projection project(const GroupElement& g) const = 0;
    double distance(const GroupElement& g) const { return project(g).distance; }
    bool contains(const GroupElement& g, double tol = 1e-9) const { return distance(g) <= tol; }
    // Absolute error bound of distance(); zero for closed forms.
    virtual double distance_tolerance() const { return 0.0; }

    virtual GroupElement sample(Rng& rng) const = 0;
    // mu_H of the G-metric ball of radius rho around e in H.
    virtual double ball_measure(double rho) const;
    // max over H of d(e, h) in the normalized metric of G.
    virtual double diameter() const;

    AlgebraVector project_h(const AlgebraVector& X) const;
    AlgebraVector project_perp(const AlgebraVector& X) const;

    // Which closed-form radial coordinate, if any, makes H_delta a sublevel
    // set. Only unconjugated SO3/so2_z and SU2/u1 qualify.
    virtual std::string zonal_key() const { return {}; }
    // Exact box form of H_delta on tori (codimension-one subtori only).
    virtual std::optional<std::vector<TorusBox>> tube_boxes(double) const { return std::nullopt; }

    SubgroupPtr conjugate(const GroupElement& g) const;
    const GroupElement* conjugator() const { return conj_ ? &*conj_ : nullptr; }

protected:
    Subgroup(GroupPtr G, std::string name) : G_(std::move(G)), name_(std::move(name)) {}
    void set_bases(std::vector<AlgebraVector> basis, std::vector<AlgebraVector> perp) {
        basis_ = std::move(basis);
        perp_ = std::move(perp);
    }
    void set_conjugator(GroupElement g) { conj_ = std::move(g); }

private:
    GroupPtr G_;
    std::string name_;
    std::vector<AlgebraVector> basis_;
    std::vector<AlgebraVector> perp_;
    std::optional<GroupElement> conj_;
};

// Names: SO3 "so2_z"; SU2 "u1"; T^d "t<k>_<axes>" such as "t1_x" or "t2_xz";
// SO(n) "so<n-1>"; SO4 also "u2"; products "<factor>:<name>", e.g. "0:so2_z".
SubgroupPtr builtin_subgroup(const GroupPtr& G, const std::string& name);
std::vector<std::string> builtin_subgroup_names(const Group& G);
// Built-ins whose codimension equals critical_exponent(G).
std::vector<std::string> maximal_subgroup_names(const Group& G);

// Tube H_delta = {g : d(g, H) < delta}.
RegionPtr tube(const SubgroupPtr& H, double delta);

// Rectangle R(h, delta, rho) = exp(B_perp(0, delta)) * B_H(h, rho), with
// membership through the decomposition g = exp(u) k of Subgroup::project.
// Throws ChartError unless 0 < delta, rho <= 0.1.
RegionPtr rectangle(const SubgroupPtr& H, const GroupElement& h, double delta, double rho);
// Same without the bound on rho (slices may use rho >= diam H).
RegionPtr rectangle_wide(const SubgroupPtr& H, const GroupElement& h, double delta, double rho);

// Lipschitz constant of g -> k(g) near H used for rectangle margins; valid
// while d(g, H) <= 0.15 (checked numerically in the tests).
inline constexpr double kRectangleLipschitz = 1.25;

}  // namespace haarlab
