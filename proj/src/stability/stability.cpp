#include "haarlab/stability.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

namespace haarlab {
namespace {

std::string num(double v) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

struct ScanResult {
    double delta_prime = 0.0;
    double ratio = 2.0;
};

// Best d' for the distances dist[i] of the cell centers to the candidate
// subgroup: sweep the cells in distance order keeping the tube mass and the
// part of it inside A.
ScanResult scan_delta(const std::vector<double>& dist, const std::vector<double>& w, const CellBits& a,
                      double total_a, std::vector<std::uint32_t>& order) {
    std::iota(order.begin(), order.end(), 0u);
    std::sort(order.begin(), order.end(), [&](auto x, auto y) { return dist[x] < dist[y]; });
    ScanResult best;
    double inside = 0, inside_a = 0;
    for (std::size_t k = 0; k < order.size(); ++k) {
        const auto i = order[k];
        if (dist[i] >= 0.5) break;
        inside += w[i];
        if (a[i]) inside_a += w[i];
        const double next = k + 1 < order.size() ? dist[order[k + 1]] : 0.5;
        if (next == dist[i]) continue;  // ties enter together
        const double dp = std::min(0.5 * (dist[i] + next), 0.5 * (dist[i] + 0.5));
        if (!(dp > 0 && dp < 0.5)) continue;
        const double ratio = std::max(0.0, ((inside - inside_a) + (total_a - inside_a)) / inside);
        if (ratio < best.ratio) best = {dp, ratio};
    }
    return best;
}

AlgebraVector sample_in_ball(int d, double r, Rng& rng) {
    std::normal_distribution<double> n01;
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    AlgebraVector v = zero_vector(d);
    for (int k = 0; k < d; ++k) v.x[k] = n01(rng);
    return v * (r * std::pow(u01(rng), 1.0 / d) / v.norm());
}

// Index of a cell drawn with probability proportional to its weight among
// the set bits.
std::size_t weighted_pick(const std::vector<std::size_t>& cells, const std::vector<double>& cum, Rng& rng) {
    std::uniform_real_distribution<double> u(0.0, cum.back());
    const auto it = std::upper_bound(cum.begin(), cum.end(), u(rng));
    return cells[std::min<std::size_t>(it - cum.begin(), cells.size() - 1)];
}

RayRecord trace_ray(const AlgebraVector& a, const RayOptions& opt, const std::function<bool(double)>& member) {
    RayRecord rec;
    rec.direction = a;
    const std::size_t steps = static_cast<std::size_t>(std::floor(opt.rho / opt.step));
    std::vector<char> in(steps + 1);
    long first = -1, last = -1;
    for (std::size_t s = 0; s <= steps; ++s) {
        in[s] = member(double(s) * opt.step);
        if (in[s]) {
            if (first < 0) first = long(s);
            last = long(s);
        }
    }
    if (first < 0) return rec;
    std::size_t hits = 0;
    for (long s = first; s <= last; ++s) hits += in[s] ? 1 : 0;
    rec.start = double(first) * opt.step;
    rec.end = double(last + 1) * opt.step;
    rec.density = double(hits) / double(last - first + 1);
    rec.passed = rec.end - rec.start >= opt.rho_min && rec.density >= 1 - opt.eps;
    return rec;
}

RayProfile summarize(std::vector<RayRecord> rays) {
    RayProfile p;
    p.rays = std::move(rays);
    std::size_t pass = 0;
    double dens = 0;
    p.min_start = p.rays.empty() ? 0.0 : p.rays.front().start;
    for (const auto& r : p.rays) {
        pass += r.passed ? 1 : 0;
        dens += r.density;
        p.min_start = std::min(p.min_start, r.start);
    }
    p.pass_fraction = p.rays.empty() ? 0.0 : double(pass) / double(p.rays.size());
    p.mean_density = p.rays.empty() ? 0.0 : dens / double(p.rays.size());
    return p;
}

RayOptions normalized(RayOptions opt) {
    if (!(opt.rho > 0)) throw std::invalid_argument("ray profile: rho must be positive");
    if (opt.rho_min <= 0) opt.rho_min = 0.5 * opt.rho;
    if (opt.step <= 0) opt.step = opt.rho / 400;
    return opt;
}

}  // namespace

const CellBits& shape_bits(const CellSet& A) { return A.nominal ? *A.nominal : A.outer; }

CellSet inverse_cells(const CellSet& A) {
    const auto& net = A.net;
    if (net->kind() == NetKind::Zonal) {
        CellSet r = A;
        r.description = "inv(" + A.description + ")";
        return r;
    }
    const auto& G = net->group();
    const std::size_t n = net->size();
    CellSet r;
    r.net = net;
    r.inner = CellBits(n);
    r.outer = CellBits(n);
    const CellBits* nominal = A.nominal ? &*A.nominal : nullptr;
    if (nominal) r.nominal = CellBits(n);
    r.depth.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t j = net->locate(G->inverse(net->center(i)));
        if (A.inner[j]) r.inner.set(i);
        if (A.outer[j]) r.outer.set(i);
        if (nominal && (*nominal)[j]) r.nominal->set(i);
        if (j < A.depth.size()) r.depth[i] = A.depth[j];
    }
    r.certified = A.certified && net->kind() == NetKind::Lattice;
    r.description = "inv(" + A.description + ")";
    return r;
}

nlohmann::json TubeFit::to_json(const Group& G, bool with_trace) const {
    nlohmann::json j{{"subgroup", subgroup},
                     {"conjugator", G.to_json(conjugator)},
                     {"delta_prime", delta_prime},
                     {"symdiff_ratio", symdiff_ratio},
                     {"tube_like", tube_like},
                     {"evaluations", search_trace.size()},
                     {"seed", seed}};
    if (with_trace) {
        auto& t = j["search_trace"] = nlohmann::json::array();
        for (const auto& s : search_trace)
            t.push_back({{"subgroup", s.subgroup},
                         {"conjugator", G.to_json(s.conjugator)},
                         {"delta_prime", s.delta_prime},
                         {"score", s.score}});
    }
    return j;
}

TubeFit fit_tube(const CellSet& A, std::uint64_t seed, const TubeFitOptions& opt) {
    const auto& net = A.net;
    const auto& G = net->group();
    const auto names = opt.subgroups.empty() ? maximal_subgroup_names(*G) : opt.subgroups;
    if (names.empty()) throw std::invalid_argument("fit_tube: no catalog subgroup for " + G->name());
    const CellBits& a = shape_bits(A);
    if (a.none()) throw std::invalid_argument("fit_tube: empty set");
    const std::size_t n = net->size();
    const auto& w = net->weights();
    double total_a = 0;
    for (std::size_t i = 0; i < n; ++i)
        if (a[i]) total_a += w[i];
    std::vector<GroupElement> centers(n);
    for (std::size_t i = 0; i < n; ++i) centers[i] = net->center(i);

    TubeFit fit;
    fit.seed = seed;
    fit.symdiff_ratio = 3.0;
    Rng rng(seed);
    std::vector<double> dist(n);
    std::vector<std::uint32_t> order(n);
    for (const auto& name : names) {
        const auto H = builtin_subgroup(G, name);
        auto evaluate = [&](const GroupElement& g) {
            const auto Hg = H->conjugate(g);
            for (std::size_t i = 0; i < n; ++i) dist[i] = Hg->distance(centers[i]);
            const auto s = scan_delta(dist, w, a, total_a, order);
            fit.search_trace.push_back({name, g, s.delta_prime, s.ratio});
            return s;
        };
        // conjugation is trivial on abelian groups
        const std::size_t coarse = G->abelian() ? 1 : std::max<std::size_t>(opt.candidates, 1);
        std::vector<std::pair<double, GroupElement>> pool;
        for (std::size_t c = 0; c < coarse; ++c) {
            const GroupElement g = c == 0 ? G->identity() : G->haar_draw(rng);
            pool.push_back({evaluate(g).ratio, g});
        }
        std::stable_sort(pool.begin(), pool.end(), [](const auto& x, const auto& y) { return x.first < y.first; });
        if (!G->abelian()) pool.resize(std::min(pool.size(), opt.refine_from));
        else pool.resize(1);
        for (auto& [score, g] : pool) {
            if (!G->abelian()) {
                // coordinate pattern search on left perturbations exp(s e_k) g
                for (double step = opt.step0; step >= opt.step_min; step *= 0.5) {
                    bool improved = true;
                    while (improved) {
                        improved = false;
                        for (int k = 0; k < G->dim(); ++k)
                            for (double sgn : {1.0, -1.0}) {
                                const auto g2 = G->multiply(G->exp_map(basis_vector(G->dim(), k) * (sgn * step)), g);
                                const double s2 = evaluate(g2).ratio;
                                if (s2 < score - 1e-15) {
                                    score = s2;
                                    g = g2;
                                    improved = true;
                                }
                            }
                    }
                }
            }
            if (score < fit.symdiff_ratio) {
                const auto s = evaluate(g);
                fit.subgroup = name;
                fit.conjugator = g;
                fit.delta_prime = s.delta_prime;
                fit.symdiff_ratio = s.ratio;
            }
        }
    }
    fit.symdiff_ratio = std::min(fit.symdiff_ratio, 2.0);
    fit.tube_like = fit.symdiff_ratio <= opt.tube_like_threshold;
    return fit;
}

nlohmann::json SliceProfile::to_json(const Group& G) const {
    nlohmann::json s = nlohmann::json::array();
    for (std::size_t i = 0; i < h.size(); ++i)
        s.push_back({{"h", G.to_json(h[i])}, {"lower", slices[i].lower}, {"upper", slices[i].upper}});
    return {{"delta", delta}, {"rho", rho}, {"evenness", evenness}, {"slices", s}};
}

SliceProfile slice_profile(const CellSet& A, const SubgroupPtr& H, double delta, double rho, std::size_t n_h,
                           std::uint64_t seed) {
    if (n_h == 0) throw std::invalid_argument("slice profile: n_h must be positive");
    if (tube_excess(A, *H, delta) > 0)
        throw ContainmentError("slice profile: set not inside the tube " + H->name() + "_" + num(delta));
    SliceProfile p;
    p.delta = delta;
    p.rho = rho;
    Rng rng(seed);
    double min_lo = 1e300, max_hi = 0;
    for (std::size_t i = 0; i < n_h; ++i) {
        p.h.push_back(H->sample(rng));
        p.slices.push_back(measure(slice(A, H, p.h.back(), delta, rho)));
        min_lo = std::min(min_lo, p.slices.back().lower);
        max_hi = std::max(max_hi, p.slices.back().upper);
    }
    p.evenness = max_hi > 0 ? min_lo / max_hi : 0.0;
    return p;
}

nlohmann::json RayProfile::to_json() const {
    return {{"rays", rays.size()},
            {"pass_fraction", pass_fraction},
            {"mean_density", mean_density},
            {"min_start", min_start}};
}

std::string RayProfile::csv() const {
    std::ostringstream os;
    os << "ray,start,end,density,passed";
    const int d = rays.empty() ? 0 : rays.front().direction.size();
    for (int k = 0; k < d; ++k) os << ",a" << k;
    os << "\n";
    for (std::size_t i = 0; i < rays.size(); ++i) {
        const auto& r = rays[i];
        os << i << "," << num(r.start) << "," << num(r.end) << "," << num(r.density) << "," << (r.passed ? 1 : 0);
        for (int k = 0; k < d; ++k) os << "," << num(r.direction[k]);
        os << "\n";
    }
    return os.str();
}

RayProfile ray_profile(const CellSet& A, std::uint64_t seed, const RayOptions& opt_in) {
    const auto opt = normalized(opt_in);
    const auto& net = A.net;
    const auto& G = net->group();
    const CellBits& a = shape_bits(A);
    if (a.none()) throw std::invalid_argument("ray profile: empty set");
    if (ball_excess(A, opt.rho) > 0)
        throw ContainmentError("ray profile: set not inside B(e, " + num(opt.rho) + ")");
    std::vector<std::size_t> cells;
    std::vector<double> cum;
    double acc = 0;
    for (auto i = a.find_first(); i != CellBits::npos; i = a.find_next(i)) {
        cells.push_back(i);
        acc += net->weights()[i];
        cum.push_back(acc);
    }
    Rng rng(seed);
    std::vector<RayRecord> rays;
    std::size_t attempts = 0;
    while (rays.size() < opt.directions && attempts++ < 20 * opt.directions) {
        const auto X = G->log_map(net->center(weighted_pick(cells, cum, rng)));
        if (X.norm() <= 0) continue;
        const AlgebraVector dir = X * (1.0 / X.norm());
        rays.push_back(trace_ray(dir, opt, [&](double t) { return a[net->locate(G->exp_map(dir * t))]; }));
    }
    return summarize(std::move(rays));
}

RayProfile ray_profile(const PointCloud& A, double resolution, std::uint64_t seed, const RayOptions& opt_in) {
    const auto opt = normalized(opt_in);
    if (A.size() == 0) throw std::invalid_argument("ray profile: empty cloud");
    if (!(resolution > 0)) throw std::invalid_argument("ray profile: resolution must be positive");
    for (const auto& p : A.points)
        if (p.norm() > opt.rho) throw ContainmentError("ray profile: cloud not inside B(0, " + num(opt.rho) + ")");
    Rng rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, A.size() - 1);
    std::vector<RayRecord> rays;
    std::vector<double> along, perp2;
    std::size_t attempts = 0;
    while (rays.size() < opt.directions && attempts++ < 20 * opt.directions) {
        const auto& x = A.points[pick(rng)];
        if (x.norm() <= 0) continue;
        const Eigen::VectorXd dir = x / x.norm();
        along.clear();
        perp2.clear();
        for (const auto& p : A.points) {
            const double t = p.dot(dir);
            const double q = (p - t * dir).squaredNorm();
            if (q <= resolution * resolution) {
                along.push_back(t);
                perp2.push_back(q);
            }
        }
        rays.push_back(trace_ray(AlgebraVector{dir}, opt, [&](double t) {
            for (std::size_t k = 0; k < along.size(); ++k)
                if ((t - along[k]) * (t - along[k]) + perp2[k] <= resolution * resolution) return true;
            return false;
        }));
    }
    return summarize(std::move(rays));
}

nlohmann::json CoveringResult::to_json(const Group& G) const {
    nlohmann::json f = nlohmann::json::array();
    for (const auto& g : translates) f.push_back(G.to_json(g));
    return {{"count", translates.size()},
            {"covered", covered},
            {"bound", bound},
            {"within_bound", within_bound},
            {"translates", f}};
}

CoveringResult covering_number(const CellSet& A, const CellSet& B, int threads) {
    if (A.net != B.net) throw NetMismatch("covering number: sets live on different nets");
    const auto mb = measure(B);
    if (!(mb.lower > 0)) throw std::domain_error("covering number: measure of B may be 0");
    const auto& net = A.net;
    const CellSet D = minkowski_product(B, inverse_cells(B), threads);
    const CellBits& a = shape_bits(A);
    CellBits covered(net->size());
    CoveringResult r;
    for (auto i = a.find_first(); i != CellBits::npos; i = a.find_next(i)) {
        if (covered[i]) continue;
        const auto f = net->center(i);
        r.translates.push_back(f);
        covered |= translate(D, f, Side::Left).outer;
    }
    r.covered = a.is_subset_of(covered);
    r.bound = measure(minkowski_product(A, B, threads)).upper / mb.lower;
    r.within_bound = double(r.translates.size()) <= r.bound + 1e-9;
    return r;
}

nlohmann::json ScaleSpectrum::to_json() const {
    nlohmann::json holds = nlohmann::json::array();
    for (bool b : inclusion_holds) holds.push_back(b);
    return {{"radii", radii},   {"covering_numbers", covering_numbers}, {"inclusion_holds", holds},
            {"K", K},           {"m", m},
            {"translates", translates}, {"budget_exceeded", budget_exceeded}};
}

ScaleSpectrum scale_spectrum(const CellSet& Lambda, int m, double K, std::optional<double> resolution, int threads) {
    if (m < 1) throw std::invalid_argument("scale spectrum: m must be at least 1");
    const auto& net = Lambda.net;
    const auto& G = net->group();
    // symmetrize and make sure e is in
    CellSet L = cell_union(Lambda, inverse_cells(Lambda));
    const std::size_t e = net->locate(G->identity());
    L.inner.set(e);
    L.outer.set(e);
    if (L.nominal) L.nominal->set(e);
    CellSet Lm = L;
    for (int k = 1; k < m; ++k) Lm = minkowski_product(Lm, L, threads);

    ScaleSpectrum s;
    s.K = K;
    s.m = m;
    const double res = resolution.value_or(2 * net->cell_radius());
    const auto cover = covering_number(Lm, L, threads);
    s.translates = cover.translates.size();
    s.budget_exceeded = double(s.translates) > std::pow(K, m);

    const CellBits& lb = shape_bits(L);
    std::vector<GroupElement> lcells;
    for (auto i = lb.find_first(); i != CellBits::npos; i = lb.find_next(i)) lcells.push_back(net->center(i));
    std::vector<double> rf;
    for (const auto& f : cover.translates) {
        double best = 1e300;
        for (const auto& l : lcells) best = std::min(best, G->norm_from_identity(G->multiply(l, f)));
        rf.push_back(best);
    }
    std::sort(rf.begin(), rf.end(), std::greater<>());
    std::size_t count = 0;
    for (double r : rf) {
        if (s.radii.empty() || s.radii.back() - r > res) {
            s.radii.push_back(r);
            s.covering_numbers.push_back(count);
        }
        s.covering_numbers.back() = ++count;
    }

    const CellSet L2 = minkowski_product(L, L, threads);
    const CellBits& lm = shape_bits(Lm);
    for (std::size_t i = 0; i < s.radii.size(); ++i) {
        const double next = i + 1 < s.radii.size() ? s.radii[i + 1] : 0.0;
        const CellBits target =
            next > 0 ? minkowski_product(L2, discretize(*ball_region(G, G->identity(), next), net), threads).outer
                     : L2.outer;
        bool ok = true;
        for (auto c = lm.find_first(); c != CellBits::npos && ok; c = lm.find_next(c))
            if (G->norm_from_identity(net->center(c)) < s.radii[i] && !target[c]) ok = false;
        s.inclusion_holds.push_back(ok);
    }
    return s;
}

nlohmann::json CommutatorShrink::to_json() const {
    return {{"r_grid", r_grid}, {"max_ratio", max_ratio}, {"r0", r0}, {"abelian", abelian}};
}

CommutatorShrink commutator_shrink(const GroupPtr& G, std::size_t n_samples, std::vector<double> r_grid,
                                   std::uint64_t seed) {
    if (r_grid.empty()) throw std::invalid_argument("commutator shrink: empty grid");
    std::sort(r_grid.begin(), r_grid.end());
    CommutatorShrink c;
    c.r_grid = r_grid;
    c.abelian = G->abelian();
    Rng rng(seed);
    bool prefix = true;
    for (double r : r_grid) {
        if (!(r > 0) || r > G->injectivity_radius())
            throw std::invalid_argument("commutator shrink: grid radius " + num(r) + " out of range");
        double worst = 0;
        for (std::size_t k = 0; k < n_samples; ++k) {
            const auto g = G->exp_map(sample_in_ball(G->dim(), r, rng));
            const auto h = G->exp_map(sample_in_ball(G->dim(), r, rng));
            const double dg = G->norm_from_identity(g);
            if (dg <= 0) continue;
            worst = std::max(worst, G->norm_from_identity(G->commutator(g, h)) / dg);
        }
        c.max_ratio.push_back(worst);
        if (prefix && worst < 0.5) c.r0 = r;
        else prefix = false;
    }
    return c;
}

}  // namespace haarlab
