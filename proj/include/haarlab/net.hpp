#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "haarlab/group.hpp"

namespace haarlab {

namespace detail {
class KdTree;
}

enum class NetKind { Scattered, Lattice, Zonal };
std::string to_string(NetKind k);

// Partition of a group into cells with Haar weights. cell_radius() bounds the
// distance from any point of a cell to the cell's center (for zonal nets it is
// the width of a cell in the radial coordinate).
class Net {
public:
    virtual ~Net() = default;

    NetKind kind() const { return kind_; }
    const GroupPtr& group() const { return group_; }
    std::size_t size() const { return weights_.size(); }
    double cell_radius() const { return cell_radius_; }
    const std::vector<double>& weights() const { return weights_; }
    std::uint64_t hash() const { return hash_; }

    virtual GroupElement center(std::size_t i) const = 0;
    // Index of the cell containing g.
    virtual std::size_t locate(const GroupElement& g) const = 0;
    virtual nlohmann::json describe() const;

protected:
    Net(NetKind k, GroupPtr G) : kind_(k), group_(std::move(G)) {}
    void finalize(std::vector<double> weights, double cell_radius, std::uint64_t hash) {
        weights_ = std::move(weights);
        cell_radius_ = cell_radius;
        hash_ = hash;
    }

private:
    NetKind kind_;
    GroupPtr group_;
    std::vector<double> weights_;
    double cell_radius_ = 0.0;
    std::uint64_t hash_ = 0;
};

using NetPtr = std::shared_ptr<const Net>;

struct Neighbor {
    std::uint32_t index = 0;
    double distance = 0.0;
};

// Voronoi cells of a quasi-uniform point set. Centers are an s-separated greedy
// subsample (chord metric of the embedding) of a shifted Halton stream, or of
// a seeded pseudo-random Haar stream for groups without a cube map.
class ScatteredNet final : public Net {
public:
    ~ScatteredNet() override;

    GroupElement center(std::size_t i) const override;
    std::size_t locate(const GroupElement& g) const override { return nearest(g).index; }
    nlohmann::json describe() const override;

    Neighbor nearest(const GroupElement& g) const;
    // Appends every center within normalized distance r of g.
    void within(const GroupElement& g, double r, std::vector<Neighbor>& out) const;

    // Largest nearest-center distance seen on the validation stream.
    double validation_max() const { return validation_max_; }
    std::uint64_t seed() const { return seed_; }
    double separation() const { return separation_; }

private:
    friend std::shared_ptr<const ScatteredNet> build_scattered_net(const GroupPtr&, std::size_t,
                                                                   std::uint64_t);
    ScatteredNet(GroupPtr G, std::uint64_t seed);

    int psize_ = 0;
    std::vector<double> params_;
    std::unique_ptr<detail::KdTree> tree_;
    std::uint64_t seed_ = 0;
    double separation_ = 0.0;
    double validation_max_ = 0.0;
};

// Regular grid on a torus: n cells per axis, cell centers at (i + 1/2) / n.
class LatticeNet final : public Net {
public:
    LatticeNet(GroupPtr G, int per_dim);

    GroupElement center(std::size_t i) const override;
    std::size_t locate(const GroupElement& g) const override;
    nlohmann::json describe() const override;

    int per_dim() const { return n_; }
    int dim() const { return d_; }
    std::vector<int> multi_index(std::size_t i) const;
    // Cell with multi-index m, each entry reduced mod n.
    std::size_t index(const std::vector<int>& m) const;

private:
    int n_, d_;
};

// Cells are shells [i, i+1) * period / N of a radial coordinate t that is
// invariant under the symmetry named by the key:
//   so3_tube, su2_tube  - distance to the z-axis circle subgroup (H-bi-invariant);
//   so3_class, su2_class - distance to the identity (conjugation-invariant).
// Products of two shells are again unions of shells, computed exactly.
class ZonalNet final : public Net {
public:
    ZonalNet(GroupPtr G, std::string key, std::size_t cells);

    GroupElement center(std::size_t i) const override;
    std::size_t locate(const GroupElement& g) const override;
    nlohmann::json describe() const override;

    const std::string& key() const { return key_; }
    double period() const { return period_; }
    double coordinate(const GroupElement& g) const;
    // Haar measure of {t < x}.
    double cdf(double x) const;
    double cell_lo(std::size_t i) const { return period_ * double(i) / double(size()); }
    double cell_hi(std::size_t i) const { return period_ * double(i + 1) / double(size()); }

private:
    std::string key_;
    double period_;
};

// Lattice nets for tori (about target cells), scattered nets otherwise.
NetPtr build_net(const GroupPtr& G, std::size_t target_cells, std::uint64_t seed);
std::shared_ptr<const ScatteredNet> build_scattered_net(const GroupPtr& G, std::size_t target_cells,
                                                        std::uint64_t seed);
std::shared_ptr<const LatticeNet> build_lattice_net(const GroupPtr& G, int per_dim);
std::shared_ptr<const ZonalNet> build_zonal_net(const GroupPtr& G, const std::string& key,
                                                std::size_t cells);
// Zonal keys available on G (empty for groups without one).
std::vector<std::string> zonal_keys(const Group& G);

// Shifted Halton point number `index` in [0,1)^dim.
void halton_point(std::uint64_t index, int dim, const std::vector<double>& shift, double* out);

}  // namespace haarlab
