#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "haarlab/cellset.hpp"

namespace haarlab {

enum class Verdict { Verified, Violated, Inconclusive };
std::string to_string(Verdict v);
Verdict verdict_from_string(const std::string& s);

struct Bracket {
    double lower = 0.0;
    double upper = 0.0;

    double width() const { return upper - lower; }
    double mid() const { return 0.5 * (lower + upper); }
    bool contains(double v, double tol = 0.0) const { return lower - tol <= v && v <= upper + tol; }
    nlohmann::json to_json() const;
};

Bracket to_bracket(const MeasureEstimate& m);

// Claim lhs >= rhs: verified when lower(lhs) >= upper(rhs), violated when
// upper(lhs) < lower(rhs) - 1e-12.
Verdict verdict_ge(const Bracket& lhs, const Bracket& rhs);
// Violated if any part is, verified if all are.
Verdict combine(const std::vector<Verdict>& parts);

// A set is not inside the region a check requires (judged on outer cells).
class ContainmentError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

struct InequalityReport {
    std::string name;
    nlohmann::json inputs = nlohmann::json::object();
    Bracket lhs, rhs;
    Verdict verdict = Verdict::Inconclusive;
    std::map<std::string, double> fitted_constants;
    nlohmann::json details = nlohmann::json::object();
    std::uint64_t net_hash = 0;
    std::uint64_t seed = 0;
    double runtime_ms = 0.0;

    // runtime_ms is left out unless asked for, so reports are reproducible.
    nlohmann::json to_json(bool with_runtime = false) const;
    static InequalityReport from_json(const nlohmann::json& j);
};

// One row per report; fitted constants become columns (union over reports).
std::string reports_csv(const std::vector<InequalityReport>& reports);

struct DoublingData {
    MeasureEstimate set, product;
    Bracket ratio;
};
// Throws std::domain_error when the measure bracket of A touches 0.
DoublingData doubling_data(const CellSet& A, int threads = 1);
Bracket doubling_ratio(const CellSet& A, int threads = 1);

// mu(A^2) >= (2^k - C mu(A)^(2/k)) mu(A) with k = critical_exponent(G).
// Without C the check uses the smallest C the brackets certify
// ("C_empirical").
InequalityReport check_minimal_doubling(const CellSet& A, std::optional<double> C = std::nullopt,
                                        int threads = 1);

// mu(AB)^(1/k) >= (1 - alpha)(mu(A)^(1/k) + mu(B)^(1/k)); k defaults to the
// critical exponent, alpha to the certified "alpha_empirical".
InequalityReport check_brunn_minkowski(const CellSet& A, const CellSet& B, std::optional<int> k = std::nullopt,
                                       std::optional<double> alpha = std::nullopt, int threads = 1);

// Same with k = dim G for A, B inside B(e, rho), rho <= 0.2.
InequalityReport check_local_bm(const CellSet& A, const CellSet& B, double rho,
                                std::optional<double> eps = std::nullopt, int threads = 1);

// mu(AB) >= min(mu(A) + mu(B), 1).
InequalityReport kemperman_check(const CellSet& A, const CellSet& B, int threads = 1);

// y = C x^p by least squares in log-log coordinates.
struct PowerFit {
    double C = 0.0;
    double p = 0.0;
    double p_stderr = 0.0;
    std::size_t points = 0;
    nlohmann::json to_json() const;
};
PowerFit fit_power_law(const std::vector<double>& xs, const std::vector<double>& ys);

// check_local_bm on A = B = B(e, rho) for each rho; points whose epsilon
// bracket is wider than max_relative_width times its midpoint are left out
// of the fit eps ~ C rho^p.
struct LocalBmSweep {
    std::vector<double> rhos;
    std::vector<InequalityReport> reports;
    std::vector<bool> used;
    PowerFit fit;
    nlohmann::json to_json() const;
};
LocalBmSweep local_bm_sweep(const NetPtr& net, const std::vector<double>& rhos, double max_relative_width = 0.5,
                            int threads = 1);

// mu(B_2rho)/mu(B_rho) by radial Gauss-Legendre quadrature of the Haar
// density in exponential coordinates, averaged over `directions` random unit
// directions; ratio = 2^d (1 - S rho^2) is then fitted by least squares.
struct BallDoublingPoint {
    double rho = 0.0;
    double ratio = 0.0;
    double stderr_ = 0.0;  // over direction batches
    Bracket ratio_band;    // ratio +- 3 stderr
};
struct BallDoublingCurve {
    std::string group;
    int dim = 0;
    double two_pow_d = 0.0;
    std::vector<BallDoublingPoint> points;
    double S = 0.0;
    double S_stderr = 0.0;
    Bracket S_ci95;
    bool fit_ok = true;
    nlohmann::json to_json() const;
};
BallDoublingCurve ball_doubling_curve(const GroupPtr& G, const std::vector<double>& rhos, std::uint64_t seed,
                                      int directions = 64);

// Haar-sampled quadrature over H of mu(X_{h,rho}) against mu(X) mu_H(B_H(e,rho)).
// Passes when |LHS - RHS| <= 3 (stderr + bracket widths).
InequalityReport double_counting_check(const CellSet& X, const SubgroupPtr& H, double delta, double rho,
                                       std::size_t n_h, std::uint64_t seed);

// For A, B, AB inside H_delta: mu(AB) >= (2^k - eps) min(mu(A), mu(B)) and
// the k-th-root inequality, plus the slicing bound at c = (mu(B)/mu(A))^(1/k)
// compared with c = 1.
InequalityReport near_subgroup_expansion_check(const CellSet& A, const CellSet& B, const SubgroupPtr& H,
                                               double delta, std::optional<double> eps = std::nullopt,
                                               std::optional<double> alpha = std::nullopt, int threads = 1);

// Largest excess of an outer cell over the tube H_delta or the ball
// B(e, rho); nonpositive means contained.
double tube_excess(const CellSet& A, const Subgroup& H, double delta);
double ball_excess(const CellSet& A, double rho);

}  // namespace haarlab
