#include "haarlab/transport.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "haarlab/subgroup.hpp"

namespace haarlab {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string num(double v) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

bool uniform_square(const PointCloud& a, const PointCloud& b) {
    if (a.size() != b.size()) return false;
    const double w = 1.0 / double(a.size());
    auto flat = [&](const std::vector<double>& ws) {
        return std::all_of(ws.begin(), ws.end(), [&](double x) { return std::abs(x - w) <= 1e-12 * w; });
    };
    return flat(a.weights) && flat(b.weights);
}

Eigen::MatrixXd cost_matrix(const PointCloud& a, const PointCloud& b) {
    Eigen::MatrixXd C(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j) C(i, j) = squared_distance(a.points[i], b.points[j]);
    return C;
}

// Shortest augmenting path Hungarian method on a square cost matrix.
// Returns the column of each row and potentials with u_i + v_j <= c_ij.
void hungarian(const Eigen::MatrixXd& C, std::vector<int>& col_of, std::vector<double>& u, std::vector<double>& v) {
    const int n = static_cast<int>(C.rows());
    std::vector<double> uu(n + 1, 0.0), vv(n + 1, 0.0), minv(n + 1);
    std::vector<int> p(n + 1, 0), way(n + 1, 0);
    std::vector<char> used(n + 1);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::fill(minv.begin(), minv.end(), kInf);
        std::fill(used.begin(), used.end(), 0);
        do {
            used[j0] = 1;
            const int i0 = p[j0];
            double delta = kInf;
            int j1 = 0;
            for (int j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = C(i0 - 1, j - 1) - uu[i0] - vv[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[j]) {
                    uu[p[j]] += delta;
                    vv[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const int j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0);
    }
    col_of.assign(n, -1);
    for (int j = 1; j <= n; ++j) col_of[p[j] - 1] = j - 1;
    u.assign(uu.begin() + 1, uu.end());
    v.assign(vv.begin() + 1, vv.end());
}

// Successive shortest paths on the uncapacitated bipartite transportation
// problem with real supplies. Dense Dijkstra with reduced costs.
void min_cost_flow(const Eigen::MatrixXd& C, const std::vector<double>& a, const std::vector<double>& b,
                   Eigen::MatrixXd& X, std::vector<double>& u, std::vector<double>& v) {
    const int n = static_cast<int>(a.size()), m = static_cast<int>(b.size());
    X = Eigen::MatrixXd::Zero(n, m);
    std::vector<double> pr(n, 0.0), pc(m);
    for (int j = 0; j < m; ++j) pc[j] = C.col(j).minCoeff();
    std::vector<double> s = a, d = b;
    const double tol = 1e-15;
    std::vector<double> dr(n), dc(m);
    std::vector<int> par_r(n), par_c(m);  // parent of a row is a column and vice versa
    std::vector<char> done_r(n), done_c(m);
    for (int iter = 0; iter < 20 * (n + m) + 100; ++iter) {
        double left = 0;
        for (double x : s) left += x;
        if (left <= 1e-14) break;
        std::fill(dr.begin(), dr.end(), kInf);
        std::fill(dc.begin(), dc.end(), kInf);
        std::fill(done_r.begin(), done_r.end(), 0);
        std::fill(done_c.begin(), done_c.end(), 0);
        for (int i = 0; i < n; ++i)
            if (s[i] > tol) {
                dr[i] = 0;
                par_r[i] = -1;
            }
        int target = -1;
        double D = kInf;
        while (true) {
            // pick the closest unfinished node
            double best = kInf;
            int bi = -1;
            bool is_row = true;
            for (int i = 0; i < n; ++i)
                if (!done_r[i] && dr[i] < best) {
                    best = dr[i];
                    bi = i;
                    is_row = true;
                }
            for (int j = 0; j < m; ++j)
                if (!done_c[j] && dc[j] < best) {
                    best = dc[j];
                    bi = j;
                    is_row = false;
                }
            if (bi < 0) break;
            if (is_row) {
                done_r[bi] = 1;
                for (int j = 0; j < m; ++j) {
                    if (done_c[j]) continue;
                    const double nd = best + std::max(0.0, C(bi, j) + pr[bi] - pc[j]);
                    if (nd < dc[j]) {
                        dc[j] = nd;
                        par_c[j] = bi;
                    }
                }
            } else {
                done_c[bi] = 1;
                if (d[bi] > tol) {
                    target = bi;
                    D = best;
                    break;
                }
                for (int i = 0; i < n; ++i) {
                    if (done_r[i] || X(i, bi) <= 0) continue;
                    const double nd = best + std::max(0.0, -(C(i, bi) + pr[i] - pc[bi]));
                    if (nd < dr[i]) {
                        dr[i] = nd;
                        par_r[i] = bi;
                    }
                }
            }
        }
        if (target < 0) throw std::logic_error("transport: no augmenting path");
        for (int i = 0; i < n; ++i) pr[i] += std::min(dr[i], D);
        for (int j = 0; j < m; ++j) pc[j] += std::min(dc[j], D);
        // bottleneck along the path
        double amount = d[target];
        int j = target;
        while (true) {
            const int i = par_c[j];
            if (par_r[i] < 0) {
                amount = std::min(amount, s[i]);
                break;
            }
            amount = std::min(amount, X(i, par_r[i]));
            j = par_r[i];
        }
        j = target;
        d[target] -= amount;
        while (true) {
            const int i = par_c[j];
            X(i, j) += amount;
            if (par_r[i] < 0) {
                s[i] -= amount;
                break;
            }
            X(i, par_r[i]) -= amount;
            if (X(i, par_r[i]) < tol) X(i, par_r[i]) = 0;
            j = par_r[i];
        }
    }
    u.resize(n);
    v.resize(m);
    for (int i = 0; i < n; ++i) u[i] = -pr[i];
    for (int jj = 0; jj < m; ++jj) v[jj] = pc[jj];
}

double logsumexp(const Eigen::VectorXd& x) {
    const double mx = x.maxCoeff();
    if (!std::isfinite(mx)) return mx;
    return mx + std::log((x.array() - mx).exp().sum());
}

void sinkhorn(const Eigen::MatrixXd& C, const std::vector<double>& a, const std::vector<double>& b,
              const OtOptions& opt, Eigen::VectorXd& f, Eigen::VectorXd& g) {
    const int n = static_cast<int>(C.rows()), m = static_cast<int>(C.cols());
    Eigen::VectorXd la(n), lb(m);
    for (int i = 0; i < n; ++i) la[i] = std::log(a[i]);
    for (int j = 0; j < m; ++j) lb[j] = std::log(b[j]);
    f = Eigen::VectorXd::Zero(n);
    g = Eigen::VectorXd::Zero(m);
    const double mean = C.mean();
    const double eps_final = std::max(opt.final_epsilon * mean, 1e-300);
    double eps = std::max(C.maxCoeff(), eps_final);
    Eigen::VectorXd row(m), col(n);
    while (true) {
        for (int it = 0; it < opt.max_iterations; ++it) {
            for (int i = 0; i < n; ++i) {
                for (int j = 0; j < m; ++j) row[j] = (g[j] - C(i, j)) / eps + lb[j];
                f[i] = -eps * logsumexp(row);
            }
            double err = 0;
            for (int j = 0; j < m; ++j) {
                for (int i = 0; i < n; ++i) col[i] = (f[i] - C(i, j)) / eps + la[i];
                const double gj = -eps * logsumexp(col);
                // column marginal before the update
                err += std::abs(std::exp((g[j] - gj) / eps) - 1.0) * b[j];
                g[j] = gj;
            }
            if (err < 1e-9) break;
        }
        if (eps <= eps_final) break;
        eps = std::max(eps / 2, eps_final);
    }
    // row update last so row marginals are exact; store eps-scaled potentials
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < m; ++j) row[j] = (g[j] - C(i, j)) / eps + lb[j];
        f[i] = -eps * logsumexp(row);
    }
    f /= eps;
    g /= eps;
    f.conservativeResize(n + 1);
    f[n] = eps;  // regularization carried along for the coupling
}

void certify(TransportPlan& plan, const Eigen::MatrixXd& C) {
    const std::size_t n = plan.source.size(), m = plan.target.size();
    plan.cost = 0;
    for (const auto& e : plan.coupling) plan.cost += e.mass * C(e.i, e.j);
    plan.dual_value = 0;
    for (std::size_t i = 0; i < n; ++i) plan.dual_value += plan.source.weights[i] * plan.u[i];
    for (std::size_t j = 0; j < m; ++j) plan.dual_value += plan.target.weights[j] * plan.v[j];
    plan.max_dual_violation = 0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j)
            plan.max_dual_violation = std::max(plan.max_dual_violation, plan.u[i] + plan.v[j] - C(i, j));
    plan.slackness_residual = 0;
    for (const auto& e : plan.coupling)
        plan.slackness_residual = std::max(plan.slackness_residual, std::abs(C(e.i, e.j) - plan.u[e.i] - plan.v[e.j]));
    std::vector<double> rs(n, 0.0), cs(m, 0.0);
    for (const auto& e : plan.coupling) {
        rs[e.i] += e.mass;
        cs[e.j] += e.mass;
    }
    plan.marginal_error = 0;
    for (std::size_t i = 0; i < n; ++i)
        plan.marginal_error = std::max(plan.marginal_error, std::abs(rs[i] - plan.source.weights[i]));
    for (std::size_t j = 0; j < m; ++j)
        plan.marginal_error = std::max(plan.marginal_error, std::abs(cs[j] - plan.target.weights[j]));
}

// Distance to the k-th nearest other point, brute force.
std::vector<double> knn_radius(const std::vector<Eigen::VectorXd>& pts, int k) {
    const std::size_t n = pts.size();
    if (n <= static_cast<std::size_t>(k)) throw std::invalid_argument("k-NN: cloud smaller than k + 1");
    std::vector<double> out(n), d(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) d[j] = squared_distance(pts[i], pts[j]);
        d[i] = kInf;
        std::nth_element(d.begin(), d.begin() + (k - 1), d.end());
        out[i] = std::sqrt(d[k - 1]);
        if (!(out[i] > 0)) throw std::invalid_argument("k-NN: duplicated points");
    }
    return out;
}

double quantile(std::vector<double> v, double q) {
    std::sort(v.begin(), v.end());
    const double pos = q * double(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - double(lo)) * (v[hi] - v[lo]);
}

}  // namespace

void PointCloud::validate() const {
    if (points.empty()) throw std::invalid_argument("point cloud is empty");
    if (weights.size() != points.size()) throw std::invalid_argument("point cloud: one weight per point needed");
    double s = 0;
    for (double w : weights) {
        if (!(w >= 0)) throw std::invalid_argument("point cloud: negative weight");
        s += w;
    }
    if (std::abs(s - 1.0) > 1e-9) throw std::invalid_argument("point cloud: weights sum to " + num(s) + ", not 1");
    for (const auto& p : points) {
        if (p.size() != dim) throw std::invalid_argument("point cloud: dimension mismatch");
        if (p.norm() > radius * (1 + 1e-12) + 1e-15)
            throw std::invalid_argument("point cloud: point outside the recorded radius " + num(radius));
    }
}

PointCloud make_cloud(std::vector<Eigen::VectorXd> points, std::optional<std::vector<double>> weights,
                      std::optional<double> radius) {
    PointCloud c;
    if (points.empty()) throw std::invalid_argument("point cloud is empty");
    c.dim = static_cast<int>(points.front().size());
    c.weights = weights ? *weights : std::vector<double>(points.size(), 1.0 / double(points.size()));
    double r = 0;
    for (const auto& p : points) r = std::max(r, p.norm());
    c.radius = radius.value_or(r);
    c.points = std::move(points);
    c.validate();
    return c;
}

double squared_distance(const Eigen::VectorXd& a, const Eigen::VectorXd& b) { return (a - b).squaredNorm(); }

Eigen::VectorXd TransportPlan::image(std::size_t i) const {
    Eigen::VectorXd y = Eigen::VectorXd::Zero(target.dim);
    double w = 0;
    for (const auto& e : coupling)
        if (e.i == i) {
            y += e.mass * target.points[e.j];
            w += e.mass;
        }
    return w > 0 ? Eigen::VectorXd(y / w) : y;
}

nlohmann::json TransportPlan::summary() const {
    return {{"method", method},
            {"source_points", source.size()},
            {"target_points", target.size()},
            {"support", coupling.size()},
            {"cost", cost},
            {"dual_value", dual_value},
            {"duality_gap", cost - dual_value},
            {"max_dual_violation", max_dual_violation},
            {"slackness_residual", slackness_residual},
            {"marginal_error", marginal_error}};
}

TransportPlan solve_ot(const PointCloud& source, const PointCloud& target, const OtOptions& opt) {
    source.validate();
    target.validate();
    if (source.dim != target.dim) throw std::invalid_argument("transport: clouds of different dimension");
    TransportPlan plan;
    plan.source = source;
    plan.target = target;
    const Eigen::MatrixXd C = cost_matrix(source, target);
    const std::size_t n = source.size(), m = target.size();
    if (std::max(n, m) <= opt.exact_limit) {
        plan.method = "exact";
        if (uniform_square(source, target)) {
            std::vector<int> col;
            hungarian(C, col, plan.u, plan.v);
            const double w = 1.0 / double(n);
            for (std::size_t i = 0; i < n; ++i)
                plan.coupling.push_back({std::uint32_t(i), std::uint32_t(col[i]), w});
        } else {
            Eigen::MatrixXd X;
            min_cost_flow(C, source.weights, target.weights, X, plan.u, plan.v);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < m; ++j)
                    if (X(i, j) > 0) plan.coupling.push_back({std::uint32_t(i), std::uint32_t(j), X(i, j)});
        }
    } else {
        plan.method = "entropic";
        Eigen::VectorXd f, g;
        sinkhorn(C, source.weights, target.weights, opt, f, g);
        const double eps = f[n];
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < m; ++j) {
                const double mass =
                    std::exp(f[i] + g[j] - C(i, j) / eps + std::log(source.weights[i]) + std::log(target.weights[j]));
                if (mass > 1e-12 * source.weights[i])
                    plan.coupling.push_back({std::uint32_t(i), std::uint32_t(j), mass});
            }
        plan.u.resize(n);
        plan.v.resize(m);
        for (std::size_t i = 0; i < n; ++i) plan.u[i] = eps * f[i];
        for (std::size_t j = 0; j < m; ++j) plan.v[j] = eps * g[j];
    }
    certify(plan, C);
    return plan;
}

MonotonicityResult check_cyclical_monotonicity(const TransportPlan& plan, int cycle_len, std::size_t n_cycles,
                                               std::uint64_t seed, double tol) {
    if (cycle_len < 2 || cycle_len > 3) throw std::invalid_argument("cyclical monotonicity: cycle length 2 or 3");
    if (plan.u.empty()) throw std::invalid_argument("cyclical monotonicity: plan has no dual certificate");
    MonotonicityResult r;
    const auto& sp = plan.coupling;
    const std::size_t s = sp.size();
    if (s < 2) return r;
    auto x = [&](std::size_t k) -> const Eigen::VectorXd& { return plan.source.points[sp[k].i]; };
    auto y = [&](std::size_t k) -> const Eigen::VectorXd& { return plan.target.points[sp[k].j]; };
    auto record = [&](double v) {
        ++r.cycles;
        r.worst_violation = std::max(r.worst_violation, v);
    };
    Rng rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, s - 1);
    if (s <= 2000) {
        for (std::size_t a = 0; a < s; ++a)
            for (std::size_t b = a + 1; b < s; ++b)
                record(squared_distance(x(a), y(a)) + squared_distance(x(b), y(b)) - squared_distance(x(a), y(b)) -
                       squared_distance(x(b), y(a)));
    } else {
        for (std::size_t t = 0; t < n_cycles; ++t) {
            const std::size_t a = pick(rng), b = pick(rng);
            record(squared_distance(x(a), y(a)) + squared_distance(x(b), y(b)) - squared_distance(x(a), y(b)) -
                   squared_distance(x(b), y(a)));
        }
    }
    if (cycle_len == 3 && s >= 3)
        for (std::size_t t = 0; t < n_cycles; ++t) {
            const std::size_t a = pick(rng), b = pick(rng), c = pick(rng);
            record(squared_distance(x(a), y(a)) + squared_distance(x(b), y(b)) + squared_distance(x(c), y(c)) -
                   squared_distance(x(a), y(b)) - squared_distance(x(b), y(c)) - squared_distance(x(c), y(a)));
        }
    r.passed = r.worst_violation <= tol;
    return r;
}

nlohmann::json MongeAmpereReport::to_json() const {
    return {{"median", median}, {"q25", q25}, {"q75", q75}, {"k", k}, {"n", n}};
}

MongeAmpereReport monge_ampere_ratio_check(const TransportPlan& plan, int k_nn) {
    if (k_nn < 1) throw std::invalid_argument("Monge-Ampere: k must be positive");
    const auto ra = knn_radius(plan.source.points, k_nn);
    const auto rb = knn_radius(plan.target.points, k_nn);
    const double d = plan.source.dim;
    const double scale = double(plan.target.size()) / double(plan.source.size());
    // radius at the image: mass-weighted over the plan's targets of each source point
    std::vector<double> img_r(plan.source.size(), 0.0), img_w(plan.source.size(), 0.0);
    for (const auto& e : plan.coupling) {
        img_r[e.i] += e.mass * std::pow(rb[e.j], d);
        img_w[e.i] += e.mass;
    }
    std::vector<double> ratios;
    for (std::size_t i = 0; i < plan.source.size(); ++i)
        if (img_w[i] > 0) ratios.push_back(img_r[i] / img_w[i] / std::pow(ra[i], d) * scale);
    MongeAmpereReport r;
    r.k = static_cast<std::size_t>(k_nn);
    r.n = ratios.size();
    r.median = quantile(ratios, 0.5);
    r.q25 = quantile(ratios, 0.25);
    r.q75 = quantile(ratios, 0.75);
    return r;
}

nlohmann::json GroupBmReport::to_json() const {
    return {{"degenerate", degenerate}, {"rho", rho},       {"c_fit", c_fit},           {"image_mass", image_mass},
            {"bm_rhs", bm_rhs},         {"c_prime_fit", c_prime_fit}, {"passed", passed}};
}

GroupBmReport group_bm_map(const TransportPlan& plan, const GroupPtr& G, const GroupBmOptions& opt) {
    const int d = G->dim();
    if (plan.source.dim != d || plan.target.dim != d)
        throw std::invalid_argument("group BM map: clouds must live in the Lie algebra of " + G->name());
    GroupBmReport r;
    r.rho = std::max(plan.source.radius, plan.target.radius);
    if (r.rho > 0.15) throw ChartError("group BM map: clouds must lie within radius 0.15 of 0");
    const std::size_t n = plan.source.size();
    if (n < 2 || plan.target.size() < 2 || opt.volume_A <= 0 || opt.volume_B <= 0) {
        r.degenerate = true;
        return r;
    }
    // F on each source point with its barycentric image
    std::vector<Eigen::VectorXd> xs(n), fs(n);
    for (std::size_t i = 0; i < n; ++i) {
        xs[i] = plan.source.points[i];
        const AlgebraVector x{xs[i]}, t{plan.image(i)};
        fs[i] = G->log_map(G->multiply(G->exp_map(x), G->exp_map(t))).x;
    }
    Rng rng(opt.seed);
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    double worst = 0;
    for (std::size_t t = 0; t < opt.pairs; ++t) {
        const std::size_t a = pick(rng), b = pick(rng);
        const double dx = (xs[a] - xs[b]).norm();
        if (dx <= 0) continue;
        worst = std::max(worst, 1.0 - (fs[a] - fs[b]).norm() / dx);
    }
    r.c_fit = worst;

    // Haar mass of F(A): each source point carries vol_A / n, stretched by
    // the k-NN Jacobian of F and weighted by the Haar density at F(x).
    const int k = std::min<int>(opt.k_nn, static_cast<int>(n) - 1);
    const auto ra = knn_radius(xs, k), rf = knn_radius(fs, k);
    double mass = 0;
    std::vector<double> jac(n);
    for (std::size_t i = 0; i < n; ++i) jac[i] = std::pow(rf[i] / ra[i], d);
    // the median Jacobian tames boundary noise of the k-NN estimate
    for (std::size_t i = 0; i < n; ++i) mass += plan.source.weights[i] * G->haar_density(AlgebraVector{fs[i]});
    r.image_mass = opt.volume_A * quantile(jac, 0.5) * mass;
    r.bm_rhs = std::pow(std::pow(opt.volume_A, 1.0 / d) + std::pow(opt.volume_B, 1.0 / d), d);
    r.c_prime_fit = std::max(0.0, 1.0 - r.image_mass / r.bm_rhs) / (r.rho * r.rho);
    r.passed = r.c_prime_fit <= opt.c_prime_max;
    return r;
}

nlohmann::json AmgmReport::to_json() const {
    return {{"d", d},   {"trials", trials},         {"rho", rho},   {"perturbed", perturbed},
            {"c", c},   {"violations", violations}, {"c_fit", c_fit}};
}

AmgmReport jacobian_amgm_check(int d, std::size_t n_trials, double rho, std::uint64_t seed, double c,
                               bool perturbed) {
    if (d < 1 || d > 6) throw std::invalid_argument("AM-GM check: 1 <= d <= 6");
    AmgmReport r;
    r.d = d;
    r.trials = n_trials;
    r.rho = rho;
    r.perturbed = perturbed;
    r.c = c;
    Rng rng(seed);
    std::normal_distribution<double> n01;
    std::uniform_real_distribution<double> u01(0.0, 1.0), loglam(std::log(0.1), std::log(10.0));
    const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(d, d);
    double c_fit = 0;
    for (std::size_t t = 0; t < n_trials; ++t) {
        Eigen::MatrixXd Q(d, d);
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) Q(i, j) = n01(rng);
        Q = Eigen::HouseholderQR<Eigen::MatrixXd>(Q).householderQ();
        Eigen::VectorXd lam(d);
        for (int i = 0; i < d; ++i) lam[i] = std::exp(loglam(rng));
        const Eigen::MatrixXd M = Q * lam.asDiagonal() * Q.transpose();
        Eigen::MatrixXd J = I + M;
        if (perturbed) {
            Eigen::MatrixXd S(d, d), E(d, d);
            for (int i = 0; i < d; ++i)
                for (int j = 0; j < d; ++j) {
                    S(i, j) = n01(rng);
                    E(i, j) = (2 * u01(rng) - 1) * rho * rho;
                }
            S = 0.5 * (S - S.transpose());
            const double nS = S.norm();
            if (nS > 0) S *= rho * u01(rng) / nS;
            J += S + E;
        }
        const double lhs = J.determinant();
        const double rhs = std::pow(1.0 + std::pow(lam.prod(), 1.0 / d), d);
        const double gap = 1.0 - lhs / rhs;  // relative shortfall
        if (perturbed) {
            if (rho > 0) c_fit = std::max(c_fit, gap / (rho * rho));
            if (lhs < (1 - c * rho * rho) * rhs) ++r.violations;
        } else {
            c_fit = std::max(c_fit, gap);
            if (lhs < rhs * (1 - 1e-12)) ++r.violations;
        }
    }
    r.c_fit = std::max(0.0, c_fit);
    return r;
}

std::string cloud_to_csv(const PointCloud& c) {
    std::ostringstream os;
    os << "# dim=" << c.dim << ",radius=" << num(c.radius) << "\n";
    for (int k = 0; k < c.dim; ++k) os << (k ? "," : "") << "x" << k;
    os << ",weight\n";
    for (std::size_t i = 0; i < c.size(); ++i) {
        for (int k = 0; k < c.dim; ++k) os << (k ? "," : "") << num(c.points[i][k]);
        os << "," << num(c.weights[i]) << "\n";
    }
    return os.str();
}

PointCloud cloud_from_csv(const std::string& text) {
    std::istringstream is(text);
    std::string line;
    int dim = -1;
    std::optional<double> radius;
    std::vector<std::string> header;
    std::vector<Eigen::VectorXd> pts;
    std::vector<double> ws;
    bool has_weight = false;
    auto split = [](const std::string& s) {
        std::vector<std::string> out;
        std::string cur;
        std::istringstream ss(s);
        while (std::getline(ss, cur, ',')) out.push_back(cur);
        return out;
    };
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line[0] == '#') {
            for (const auto& kv : split(line.substr(1))) {
                const auto eq = kv.find('=');
                if (eq == std::string::npos) continue;
                std::string key = kv.substr(0, eq);
                key.erase(0, key.find_first_not_of(' '));
                if (key == "dim") dim = std::stoi(kv.substr(eq + 1));
                if (key == "radius") radius = std::stod(kv.substr(eq + 1));
            }
            continue;
        }
        const auto cells = split(line);
        if (header.empty()) {
            header = cells;
            has_weight = !header.empty() && header.back() == "weight";
            const int cols = static_cast<int>(header.size()) - (has_weight ? 1 : 0);
            if (dim < 0) dim = cols;
            if (cols != dim) throw std::invalid_argument("point cloud CSV: header does not match dim");
            continue;
        }
        if (static_cast<int>(cells.size()) != dim + (has_weight ? 1 : 0))
            throw std::invalid_argument("point cloud CSV: wrong column count on line " + std::to_string(lineno));
        Eigen::VectorXd p(dim);
        for (int k = 0; k < dim; ++k) p[k] = std::stod(cells[k]);
        pts.push_back(p);
        if (has_weight) ws.push_back(std::stod(cells[dim]));
    }
    if (pts.empty()) throw std::invalid_argument("point cloud CSV: no points");
    std::optional<std::vector<double>> w;
    if (has_weight) w = ws;
    return make_cloud(std::move(pts), w, radius);
}

std::string plan_to_csv(const TransportPlan& p) {
    std::ostringstream os;
    os << "i,j,mass\n";
    for (const auto& e : p.coupling) os << e.i << "," << e.j << "," << num(e.mass) << "\n";
    return os.str();
}

}  // namespace haarlab
