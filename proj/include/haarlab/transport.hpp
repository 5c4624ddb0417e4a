#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "haarlab/group.hpp"

namespace haarlab {

// Weighted points in R^d (in practice the Lie algebra in normalized
// coordinates). All points lie within `radius` of the origin.
struct PointCloud {
    int dim = 0;
    std::vector<Eigen::VectorXd> points;
    std::vector<double> weights;
    double radius = 0.0;

    std::size_t size() const { return points.size(); }
    // Throws std::invalid_argument on bad weights, dimensions or radius.
    void validate() const;
};

// Uniform weights unless given; radius defaults to the largest norm.
PointCloud make_cloud(std::vector<Eigen::VectorXd> points, std::optional<std::vector<double>> weights = std::nullopt,
                      std::optional<double> radius = std::nullopt);

// Coupling with dual potentials u (source) and v (target); for the exact
// solver u_i + v_j <= c_ij with equality on the support.
struct TransportPlan {
    struct Entry {
        std::uint32_t i = 0, j = 0;
        double mass = 0.0;
    };
    PointCloud source, target;
    std::vector<Entry> coupling;
    double cost = 0.0;
    std::string method;  // "exact" or "entropic"
    std::vector<double> u, v;
    double dual_value = 0.0;
    double max_dual_violation = 0.0;  // max(u_i + v_j - c_ij, 0)
    double slackness_residual = 0.0;  // max |c_ij - u_i - v_j| on the support
    double marginal_error = 0.0;

    // Barycentric image of source point i.
    Eigen::VectorXd image(std::size_t i) const;
    nlohmann::json summary() const;
};

struct OtOptions {
    std::size_t exact_limit = 2000;  // larger problems use entropic mode
    double final_epsilon = 1e-4;     // entropic: final regularization, relative to the mean cost
    int max_iterations = 5000;       // entropic: Sinkhorn sweeps per epsilon stage
};

double squared_distance(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

// Squared-distance optimal transport. Exact: Hungarian algorithm for equal
// uniform clouds, successive shortest paths otherwise. Entropic: log-domain
// Sinkhorn with epsilon halving down to final_epsilon * mean cost.
TransportPlan solve_ot(const PointCloud& source, const PointCloud& target, const OtOptions& opt = {});

struct MonotonicityResult {
    bool passed = true;
    double worst_violation = 0.0;  // largest sum c(x_k, y_k) - sum c(x_k, y_{k+1})
    std::size_t cycles = 0;
};
// All 2-cycles of the support when it has at most 2000 entries (sampled
// otherwise), plus n_cycles sampled cycles of length 3.
MonotonicityResult check_cyclical_monotonicity(const TransportPlan& plan, int cycle_len, std::size_t n_cycles,
                                               std::uint64_t seed, double tol = 1e-8);

// Local Jacobian proxy (r_k(T x) / r_k(x))^d * n_B / n_A from k-th neighbor
// radii in each cloud. Throws on duplicated points.
struct MongeAmpereReport {
    double median = 0.0, q25 = 0.0, q75 = 0.0;
    std::size_t k = 0, n = 0;
    nlohmann::json to_json() const;
};
MongeAmpereReport monge_ampere_ratio_check(const TransportPlan& plan, int k_nn);

// F(x) = log(exp(x) exp(T x)) on an exact plan between clouds in the algebra
// of G (radius <= 0.15). Checks |F(x) - F(y)| >= (1 - c)|x - y| on sampled
// pairs (c fitted), and compares the Haar mass of F(A), estimated from k-NN
// Jacobians, with (vol_A^(1/d) + vol_B^(1/d))^d.
struct GroupBmOptions {
    double volume_A = 0.0;  // Lebesgue volumes of the sampled sets
    double volume_B = 0.0;
    int k_nn = 20;
    std::size_t pairs = 20000;
    std::uint64_t seed = 1;
    double c_prime_max = 10.0;
};
struct GroupBmReport {
    bool degenerate = false;  // singleton or zero-volume input: nothing checked
    double rho = 0.0;
    double c_fit = 0.0;       // max over pairs of 1 - |F(x)-F(y)| / |x-y|
    double image_mass = 0.0;  // Haar-weighted estimate of the mass of F(A)
    double bm_rhs = 0.0;
    double c_prime_fit = 0.0; // (1 - image_mass / bm_rhs) / rho^2, floored at 0
    bool passed = true;
    nlohmann::json to_json() const;
};
GroupBmReport group_bm_map(const TransportPlan& plan, const GroupPtr& G, const GroupBmOptions& opt = {});

// det(I + M + S + E) >= (1 - c rho^2)(1 + det(M)^(1/d))^d for random SPD M
// (eigenvalues in [0.1, 10]), skew S with |S|_F <= rho and E with entries in
// [-rho^2, rho^2]; perturbations off gives the plain determinant inequality.
struct AmgmReport {
    int d = 0;
    std::size_t trials = 0;
    double rho = 0.0;
    bool perturbed = true;
    double c = 0.0;
    std::size_t violations = 0;
    double c_fit = 0.0;  // smallest c with no violation
    nlohmann::json to_json() const;
};
AmgmReport jacobian_amgm_check(int d, std::size_t n_trials, double rho, std::uint64_t seed, double c = 5.0,
                               bool perturbed = true);

// CSV: "# dim=<d>,radius=<r>" then a header row x0,...,x{d-1}[,weight].
std::string cloud_to_csv(const PointCloud& c);
PointCloud cloud_from_csv(const std::string& text);
// Sparse triplets "i,j,mass".
std::string plan_to_csv(const TransportPlan& p);

}  // namespace haarlab
