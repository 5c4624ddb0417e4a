#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "haarlab/cellset.hpp"
#include "haarlab/inequality.hpp"
#include "haarlab/transport.hpp"

namespace haarlab {

// Membership bits used for shape statistics: the nominal (center-test) set
// when present, the outer cells otherwise.
const CellBits& shape_bits(const CellSet& A);

// Cells of A^-1. Exact on lattice nets, the identity on zonal nets (every
// zonal key is inversion invariant), center-mapped and uncertified on
// scattered nets.
CellSet inverse_cells(const CellSet& A);

struct TubeFit {
    std::string subgroup;
    GroupElement conjugator;
    double delta_prime = 0.0;
    // mu(H_d' symdiff A) / mu(H_d') on cell centers.
    double symdiff_ratio = 0.0;
    bool tube_like = false;  // symdiff_ratio <= the threshold passed in
    struct Trial {
        std::string subgroup;
        GroupElement conjugator;
        double delta_prime = 0.0;
        double score = 0.0;
    };
    std::vector<Trial> search_trace;
    std::uint64_t seed = 0;
    nlohmann::json to_json(const Group& G, bool with_trace = false) const;
};

struct TubeFitOptions {
    std::size_t candidates = 200;  // Haar-random conjugators per subgroup
    std::size_t refine_from = 4;   // best candidates handed to the pattern search
    double step0 = 0.05;           // initial pattern step (normalized algebra length)
    double step_min = 1e-3;
    double tube_like_threshold = 0.5;
    std::vector<std::string> subgroups;  // default: maximal_subgroup_names(G)
};

// Best g H_d' g^-1 over catalog subgroups, conjugators (random then pattern
// search) and every d' in (0, 0.5) (exact scan over sorted cell distances).
// Throws std::invalid_argument when G has no catalog subgroup or A is empty.
TubeFit fit_tube(const CellSet& A, std::uint64_t seed, const TubeFitOptions& opt = {});

struct SliceProfile {
    std::vector<GroupElement> h;
    std::vector<MeasureEstimate> slices;
    double evenness = 0.0;  // min lower / max upper
    double delta = 0.0, rho = 0.0;
    nlohmann::json to_json(const Group& G) const;
};
// Throws ContainmentError unless A sits in H_delta (outer cells).
SliceProfile slice_profile(const CellSet& A, const SubgroupPtr& H, double delta, double rho, std::size_t n_h,
                           std::uint64_t seed);

struct RayOptions {
    double rho = 0.15;      // chart radius; the set must stay inside B(e, rho)
    double rho_min = 0.0;   // required interval length, default rho / 2
    double eps = 0.1;       // allowed hole fraction of the hull
    std::size_t directions = 500;
    double step = 0.0;      // sampling step along rays, default rho / 400
};
struct RayRecord {
    AlgebraVector direction;
    double start = 0.0, end = 0.0;  // hull I(a) of the ray's trace
    double density = 0.0;           // lambda(I(a) cap A) / lambda(I(a))
    bool passed = false;
};
struct RayProfile {
    std::vector<RayRecord> rays;
    double pass_fraction = 0.0;
    double mean_density = 0.0;
    double min_start = 0.0;  // smallest hull start over rays
    nlohmann::json to_json() const;
    std::string csv() const;
};
// Directions go through Haar-random points of A. Throws on an empty set and
// ContainmentError when A leaves B(e, rho).
RayProfile ray_profile(const CellSet& A, std::uint64_t seed, const RayOptions& opt = {});
// Same for a cloud in the algebra: a ray point belongs to A when some cloud
// point is within `resolution` of it.
RayProfile ray_profile(const PointCloud& A, double resolution, std::uint64_t seed, const RayOptions& opt = {});

struct CoveringResult {
    std::vector<GroupElement> translates;
    bool covered = false;  // A's cells inside the union of outer cells of f B B^-1
    double bound = 0.0;    // upper(mu(AB)) / lower(mu(B))
    bool within_bound = false;
    nlohmann::json to_json(const Group& G) const;
};
// Greedy B-separated family F in A (cells in index order). Throws
// std::domain_error when the bracket of mu(B) touches 0.
CoveringResult covering_number(const CellSet& A, const CellSet& B, int threads = 1);

struct ScaleSpectrum {
    std::vector<double> radii;               // strictly decreasing
    std::vector<std::size_t> covering_numbers;  // translates with r_f >= radii[i]
    std::vector<bool> inclusion_holds;       // B_{r_i} cap L^m inside L^2 B_{r_{i+1}}
    double K = 0.0;
    int m = 0;
    std::size_t translates = 0;
    bool budget_exceeded = false;            // more than K^m translates
    nlohmann::json to_json() const;
};
// Lambda is symmetrized (with inverse_cells) and e added. Radii closer than
// `resolution` (default two cell radii) are merged.
ScaleSpectrum scale_spectrum(const CellSet& Lambda, int m, double K, std::optional<double> resolution = std::nullopt,
                             int threads = 1);

struct CommutatorShrink {
    std::vector<double> r_grid;
    std::vector<double> max_ratio;  // max of d(e,[g,h]) / d(e,g) at each r
    double r0 = 0.0;                // largest r whose grid prefix stays below 1/2
    bool abelian = false;
    nlohmann::json to_json() const;
};
CommutatorShrink commutator_shrink(const GroupPtr& G, std::size_t n_samples, std::vector<double> r_grid,
                                   std::uint64_t seed);

}  // namespace haarlab
