#include "haarlab/cellset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <limits>
#include <thread>

namespace haarlab {
namespace {

constexpr double kMaxDepth = 2.0;

template <class F>
void for_each_bit(const CellBits& b, F&& f) {
    for (auto i = b.find_first(); i != CellBits::npos; i = b.find_next(i)) f(i);
}

std::vector<std::size_t> bit_list(const CellBits& b) {
    std::vector<std::size_t> out;
    out.reserve(b.count());
    for_each_bit(b, [&](std::size_t i) { out.push_back(i); });
    return out;
}

void require_same_net(const CellSet& A, const CellSet& B) {
    if (!A.net || !B.net || A.net->hash() != B.net->hash() || A.net->size() != B.net->size())
        throw NetMismatch("cell sets live on different nets");
}

void check_group(const Group& G, const Net& net) {
    if (G.name() != net.group()->name())
        throw GroupMismatch("region on " + G.name() + " but net on " + net.group()->name());
}

CellSet blank(const NetPtr& net, std::string description) {
    CellSet s;
    s.net = net;
    s.inner = CellBits(net->size());
    s.outer = CellBits(net->size());
    if (net->kind() == NetKind::Scattered) s.depth.assign(net->size(), 0.0);
    s.description = std::move(description);
    return s;
}

std::vector<std::vector<int>> lattice_offsets(int d, const std::vector<bool>& active) {
    std::vector<std::vector<int>> out{std::vector<int>(d, 0)};
    for (int k = 0; k < d; ++k) {
        if (!active[k]) continue;
        const std::size_t m = out.size();
        for (std::size_t i = 0; i < m; ++i) {
            auto v = out[i];
            v[k] = 1;
            out.push_back(v);
        }
    }
    return out;
}

// ------------------------------------------------------------ discretize

CellSet discretize_margin(const SetRegion& region, const NetPtr& net, const CellBits* mask) {
    CellSet s = blank(net, region.describe());
    s.nominal = CellBits(net->size());
    s.certified = region.certified();
    const double r = net->cell_radius();
    const bool scattered = net->kind() == NetKind::Scattered;
    auto visit = [&](std::size_t i) {
        const RegionBound b = region.bound(net->center(i));
        (*s.nominal)[i] = b.inside;
        if (!s.certified) {
            s.inner[i] = s.outer[i] = b.inside;
            if (scattered && b.inside) s.depth[i] = r;
            return;
        }
        if (b.inside) {
            s.outer[i] = true;
            if (b.margin > r) s.inner[i] = true;
            if (scattered) s.depth[i] = std::min(b.margin, kMaxDepth);
        } else if (!(b.margin > r)) {
            s.outer[i] = true;
        }
    };
    if (mask) for_each_bit(*mask, visit);
    else
        for (std::size_t i = 0; i < net->size(); ++i) visit(i);
    return s;
}

// Per-axis classification of lattice cells against the arc [lo, lo + len).
void axis_masks(int n, double lo, double len, std::vector<char>& in, std::vector<char>& ov) {
    in.assign(n, 0);
    ov.assign(n, 0);
    if (len >= 1.0) {
        in.assign(n, 1);
        ov.assign(n, 1);
        return;
    }
    lo -= std::floor(lo);
    const double hi = lo + len;
    for (int m = 0; m < n; ++m) {
        const double a = double(m) / n, b = double(m + 1) / n;
        for (double shift : {0.0, 1.0}) {
            if (a + shift >= lo && b + shift <= hi) in[m] = 1;
            if (b + shift > lo && a + shift < hi) ov[m] = 1;
        }
    }
}

CellSet discretize_boxes(const SetRegion& region, const std::shared_ptr<const LatticeNet>& net,
                         const std::vector<TorusBox>& boxes, const CellBits* mask) {
    CellSet s = blank(net, region.describe());
    s.nominal = CellBits(net->size());
    const int n = net->per_dim(), d = net->dim();
    for (const auto& box : boxes) {
        std::vector<std::vector<char>> in(d), ov(d);
        for (int k = 0; k < d; ++k) axis_masks(n, box.lo[k], box.len[k], in[k], ov[k]);
        for (std::size_t i = 0; i < net->size(); ++i) {
            std::size_t rest = i;
            bool all_in = true, all_ov = true;
            for (int k = 0; k < d; ++k) {
                const auto m = rest % n;
                rest /= n;
                all_in = all_in && in[k][m];
                all_ov = all_ov && ov[k][m];
            }
            if (all_in) s.inner[i] = true;
            if (all_ov) s.outer[i] = true;
        }
    }
    for (std::size_t i = 0; i < net->size(); ++i)
        if (s.outer[i]) (*s.nominal)[i] = region.contains(net->center(i));
    if (mask) {
        s.inner &= *mask;
        s.outer &= *mask;
        *s.nominal &= *mask;
    }
    return s;
}

CellSet discretize_zonal(const SetRegion& region, const std::shared_ptr<const ZonalNet>& net,
                         const CellBits* mask) {
    const auto profile = region.zonal_profile(net->key());
    if (!profile)
        throw std::invalid_argument("region " + region.describe() + " has no exact profile for zonal key " +
                                    net->key());
    CellSet s = blank(net, region.describe());
    s.nominal = CellBits(net->size());
    const double w = net->period() / double(net->size());
    const auto N = static_cast<long long>(net->size());
    for (const auto& [a, b] : profile->iv) {
        const long long i0 = std::max(0LL, static_cast<long long>(std::floor(a / w)) - 1);
        const long long i1 = std::min(N - 1, static_cast<long long>(std::ceil(b / w)) + 1);
        for (long long i = i0; i <= i1; ++i) {
            const double lo = net->cell_lo(i), hi = net->cell_hi(i);
            if (lo >= a && hi <= b) s.inner[i] = true;
            if (hi > a && lo < b) s.outer[i] = true;
            const double mid = 0.5 * (lo + hi);
            if (mid >= a && mid < b) (*s.nominal)[i] = true;
        }
    }
    if (mask) {
        s.inner &= *mask;
        s.outer &= *mask;
        *s.nominal &= *mask;
    }
    return s;
}

CellSet discretize_impl(const SetRegion& region, const NetPtr& net, const CellBits* mask) {
    check_group(*region.group(), *net);
    switch (net->kind()) {
        case NetKind::Zonal:
            return discretize_zonal(region, std::static_pointer_cast<const ZonalNet>(net), mask);
        case NetKind::Lattice:
            if (auto boxes = region.torus_boxes())
                return discretize_boxes(region, std::static_pointer_cast<const LatticeNet>(net), *boxes, mask);
            return discretize_margin(region, net, mask);
        case NetKind::Scattered:
            break;
    }
    return discretize_margin(region, net, mask);
}

// ------------------------------------------------------------ products

// Marks cells for union-of-balls inner sets: ball B(s, D[s]) lies in the set.
void inner_from_balls(const ScatteredNet& net, const std::vector<double>& D, CellSet& out) {
    const double r = net.cell_radius();
    std::vector<std::size_t> order;
    for (std::size_t s = 0; s < D.size(); ++s)
        if (D[s] > r) order.push_back(s);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return D[a] != D[b] ? D[a] > D[b] : a < b;
    });
    std::vector<double>& dep = out.depth;
    std::vector<Neighbor> nb;
    for (std::size_t s : order) {
        const double Ds = std::min(D[s], 1.0 + 2 * r);
        if (Ds >= 1.0 + r) {
            // a ball of radius past the diameter is everything
            for (std::size_t k = 0; k < dep.size(); ++k)
                dep[k] = std::max(dep[k], std::min(kMaxDepth, Ds - net.group()->distance(net.center(k), net.center(s))));
            break;
        }
        // a ball nearly inside one already processed adds little depth
        if (dep[s] >= Ds - 0.25 * r) continue;
        nb.clear();
        net.within(net.center(s), Ds - r, nb);
        for (const auto& x : nb) dep[x.index] = std::max(dep[x.index], Ds - x.distance);
    }
    for (std::size_t k = 0; k < dep.size(); ++k)
        if (dep[k] > r) out.inner[k] = true;
}

void mark_outer(const ScatteredNet& net, const std::vector<double>& E, double dilation, CellSet& out) {
    std::vector<Neighbor> nb;
    for (std::size_t s = 0; s < E.size(); ++s) {
        if (E[s] < 0) continue;
        nb.clear();
        net.within(net.center(s), dilation + E[s], nb);
        for (const auto& x : nb) out.outer[x.index] = true;
    }
}

CellSet product_scattered(const CellSet& A, const CellSet& B, int threads) {
    const auto& net = static_cast<const ScatteredNet&>(*A.net);
    const Group& G = *net.group();
    const double r = net.cell_radius();
    const std::size_t N = net.size();
    CellSet out = blank(A.net, "(" + A.description + ")*(" + B.description + ")");
    out.certified = A.certified && B.certified;

    const auto ao = bit_list(A.outer), bo = bit_list(B.outer);
    std::vector<GroupElement> bc;
    bc.reserve(bo.size());
    for (auto b : bo) bc.push_back(net.center(b));
    const bool nominal = A.nominal && B.nominal;

    struct Acc {
        std::vector<double> E, D;
        CellBits nom;
    };
    auto work = [&](std::size_t lo, std::size_t hi, Acc& acc) {
        acc.E.assign(N, -1.0);
        acc.D.assign(N, -std::numeric_limits<double>::infinity());
        acc.nom = CellBits(N);
        for (std::size_t ia = lo; ia < hi; ++ia) {
            const std::size_t a = ao[ia];
            const GroupElement ca = net.center(a);
            const bool ina = A.inner[a];
            const bool noma = nominal && (*A.nominal)[a];
            for (std::size_t ib = 0; ib < bo.size(); ++ib) {
                const std::size_t b = bo[ib];
                const Neighbor s = net.nearest(G.multiply(ca, bc[ib]));
                acc.E[s.index] = std::max(acc.E[s.index], s.distance);
                if (ina && B.inner[b])
                    acc.D[s.index] = std::max(acc.D[s.index], A.depth[a] + B.depth[b] - s.distance);
                if (noma && (*B.nominal)[b]) acc.nom[s.index] = true;
            }
        }
    };
    const int T = std::max(1, std::min<int>(threads, static_cast<int>(ao.size())));
    std::vector<Acc> acc(T);
    if (T == 1) {
        work(0, ao.size(), acc[0]);
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < T; ++t)
            pool.emplace_back(work, ao.size() * t / T, ao.size() * (t + 1) / T, std::ref(acc[t]));
        for (auto& th : pool) th.join();
        for (int t = 1; t < T; ++t)
            for (std::size_t i = 0; i < N; ++i) {
                acc[0].E[i] = std::max(acc[0].E[i], acc[t].E[i]);
                acc[0].D[i] = std::max(acc[0].D[i], acc[t].D[i]);
            }
        for (int t = 1; t < T; ++t) acc[0].nom |= acc[t].nom;
    }
    mark_outer(net, acc[0].E, 3 * r, out);
    inner_from_balls(net, acc[0].D, out);
    out.outer |= out.inner;
    if (nominal) out.nominal = std::move(acc[0].nom);
    return out;
}

CellSet product_lattice(const CellSet& A, const CellSet& B) {
    const auto& net = static_cast<const LatticeNet&>(*A.net);
    const int n = net.per_dim(), d = net.dim();
    const std::size_t N = net.size();
    CellSet out = blank(A.net, "(" + A.description + ")*(" + B.description + ")");
    out.certified = A.certified && B.certified;
    auto add = [&](std::size_t a, std::size_t b) {
        std::size_t r = 0, mul = 1;
        for (int k = 0; k < d; ++k) {
            r += ((a % n + b % n) % n) * mul;
            a /= n;
            b /= n;
            mul *= n;
        }
        return r;
    };
    CellBits so(N), si(N), sn(N);
    const bool nominal = A.nominal && B.nominal;
    const auto bo = bit_list(B.outer);
    for_each_bit(A.outer, [&](std::size_t a) {
        const bool ina = A.inner[a], noma = nominal && (*A.nominal)[a];
        for (auto b : bo) {
            const std::size_t s = add(a, b);
            so[s] = true;
            if (ina && B.inner[b]) si[s] = true;
            if (noma && (*B.nominal)[b]) sn[s] = true;
        }
    });
    // [a, a+1) + [b, b+1) = [a+b, a+b+2) on each axis
    const auto offs = lattice_offsets(d, std::vector<bool>(d, true));
    auto dilate = [&](const CellBits& src, CellBits& dst) {
        for_each_bit(src, [&](std::size_t s) {
            auto m = net.multi_index(s);
            for (const auto& o : offs) {
                auto v = m;
                for (int k = 0; k < d; ++k) v[k] += o[k];
                dst[net.index(v)] = true;
            }
        });
    };
    dilate(so, out.outer);
    dilate(si, out.inner);
    if (nominal) {
        out.nominal = CellBits(N);
        dilate(sn, *out.nominal);
    }
    return out;
}

// Exact shell arithmetic: the radial range of products of two shells.
std::pair<double, double> zonal_pair(const ZonalNet& net, double a1, double b1, double a2, double b2) {
    const double gap = std::max({0.0, a1 - b2, a2 - b1});
    const double P = net.period();
    const double slo = a1 + a2, shi = b1 + b2;
    double top;
    if (net.key() == "so3_class") {
        // lifts to SU(2) add angles; the SO(3) angle folds the whole range
        top = std::min(shi, P);
    } else {
        // triangle inequality on a sphere: the largest distance is the folded sum
        top = shi <= P ? shi : (slo >= P ? 2 * P - slo : P);
    }
    return {gap, top};
}

std::vector<std::pair<double, double>> merge_intervals(std::vector<std::pair<double, double>> v) {
    std::sort(v.begin(), v.end());
    std::vector<std::pair<double, double>> out;
    for (const auto& x : v) {
        if (!out.empty() && x.first <= out.back().second) out.back().second = std::max(out.back().second, x.second);
        else out.push_back(x);
    }
    return out;
}

CellSet product_zonal(const CellSet& A, const CellSet& B) {
    const auto& net = static_cast<const ZonalNet&>(*A.net);
    const auto N = static_cast<long long>(net.size());
    const double w = net.period() / double(N);
    CellSet out = blank(A.net, "(" + A.description + ")*(" + B.description + ")");
    out.certified = A.certified && B.certified;
    auto product_intervals = [&](const CellBits& x, const CellBits& y) {
        std::vector<std::pair<double, double>> iv;
        const auto ry = bit_runs(y);
        for (const auto& [i0, i1] : bit_runs(x))
            for (const auto& [j0, j1] : ry)
                iv.push_back(zonal_pair(net, net.cell_lo(i0), net.cell_hi(i1), net.cell_lo(j0), net.cell_hi(j1)));
        return merge_intervals(std::move(iv));
    };
    auto cells = [&](const std::vector<std::pair<double, double>>& iv, auto&& f) {
        for (const auto& [a, b] : iv) {
            const long long i0 = std::max(0LL, static_cast<long long>(std::floor(a / w)) - 1);
            const long long i1 = std::min(N - 1, static_cast<long long>(std::ceil(b / w)) + 1);
            for (long long i = i0; i <= i1; ++i) f(i, a, b);
        }
    };
    cells(product_intervals(A.outer, B.outer), [&](long long i, double a, double b) {
        if (net.cell_hi(i) >= a && net.cell_lo(i) <= b) out.outer[i] = true;
    });
    cells(product_intervals(A.inner, B.inner), [&](long long i, double a, double b) {
        if (net.cell_lo(i) >= a && net.cell_hi(i) <= b) out.inner[i] = true;
    });
    if (A.nominal && B.nominal) {
        out.nominal = CellBits(net.size());
        cells(product_intervals(*A.nominal, *B.nominal), [&](long long i, double a, double b) {
            const double mid = 0.5 * (net.cell_lo(i) + net.cell_hi(i));
            if (mid >= a && mid <= b) (*out.nominal)[i] = true;
        });
    }
    out.outer |= out.inner;
    return out;
}

CellSet translate_scattered(const CellSet& A, const GroupElement& g, Side side) {
    const auto& net = static_cast<const ScatteredNet&>(*A.net);
    const Group& G = *net.group();
    const std::size_t N = net.size();
    CellSet out = blank(A.net, "translate(" + A.description + ")");
    out.certified = A.certified;
    std::vector<double> E(N, -1.0), D(N, -1.0);
    if (A.nominal) out.nominal = CellBits(N);
    for_each_bit(A.outer, [&](std::size_t a) {
        const GroupElement c = net.center(a);
        const Neighbor s = net.nearest(side == Side::Left ? G.multiply(g, c) : G.multiply(c, g));
        E[s.index] = std::max(E[s.index], s.distance);
        if (A.inner[a]) D[s.index] = std::max(D[s.index], A.depth[a] - s.distance);
        if (A.nominal && (*A.nominal)[a]) (*out.nominal)[s.index] = true;
    });
    // a Voronoi cell meeting B(p, r) has its center within 2r of p
    mark_outer(net, E, 2 * net.cell_radius(), out);
    inner_from_balls(net, D, out);
    out.outer |= out.inner;
    return out;
}

CellSet translate_lattice(const CellSet& A, const GroupElement& g) {
    const auto& net = static_cast<const LatticeNet&>(*A.net);
    const int n = net.per_dim(), d = net.dim();
    const std::size_t N = net.size();
    CellSet out = blank(A.net, "translate(" + A.description + ")");
    out.certified = A.certified;
    std::vector<int> base(d);
    std::vector<bool> frac(d);
    for (int k = 0; k < d; ++k) {
        const double t = (g.p[k] - std::floor(g.p[k])) * n;
        base[k] = static_cast<int>(std::floor(t));
        frac[k] = t - base[k] > 0.0;
    }
    const auto offs = lattice_offsets(d, frac);
    for_each_bit(A.outer, [&](std::size_t a) {
        auto m = net.multi_index(a);
        for (const auto& o : offs) {
            auto v = m;
            for (int k = 0; k < d; ++k) v[k] += base[k] + o[k];
            out.outer[net.index(v)] = true;
        }
    });
    // inner when every cell meeting the preimage is inner
    for (std::size_t i = 0; i < N; ++i) {
        if (!out.outer[i]) continue;
        auto m = net.multi_index(i);
        bool all = true;
        for (const auto& o : offs) {
            auto v = m;
            for (int k = 0; k < d; ++k) v[k] -= base[k] + o[k];
            if (!A.inner[net.index(v)]) {
                all = false;
                break;
            }
        }
        out.inner[i] = all;
    }
    if (A.nominal) {
        out.nominal = CellBits(N);
        const Group& G = *net.group();
        for_each_bit(*A.nominal, [&](std::size_t a) { (*out.nominal)[net.locate(G.multiply(g, net.center(a)))] = true; });
    }
    return out;
}

// ------------------------------------------------------------ serialization

void put_u16(std::vector<std::uint8_t>& o, std::uint16_t v) {
    for (int i = 0; i < 2; ++i) o.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
void put_u32(std::vector<std::uint8_t>& o, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) o.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
void put_u64(std::vector<std::uint8_t>& o, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) o.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

class Reader {
public:
    explicit Reader(const std::vector<std::uint8_t>& b) : b_(b) {}
    std::uint64_t get(int bytes) {
        if (pos_ + bytes > b_.size()) throw std::runtime_error("cell set file is truncated");
        std::uint64_t v = 0;
        for (int i = 0; i < bytes; ++i) v |= std::uint64_t(b_[pos_ + i]) << (8 * i);
        pos_ += bytes;
        return v;
    }
    bool done() const { return pos_ == b_.size(); }

private:
    const std::vector<std::uint8_t>& b_;
    std::size_t pos_ = 0;
};

constexpr std::uint16_t kFormatVersion = 1;

void put_bits(std::vector<std::uint8_t>& o, const CellBits& b) {
    const auto runs = bit_runs(b);
    put_u32(o, static_cast<std::uint32_t>(runs.size()));
    for (const auto& [a, z] : runs) {
        put_u32(o, static_cast<std::uint32_t>(a));
        put_u32(o, static_cast<std::uint32_t>(z - a + 1));
    }
}

CellBits get_bits(Reader& r, std::size_t N) {
    CellBits b(N);
    const auto nruns = r.get(4);
    for (std::uint64_t k = 0; k < nruns; ++k) {
        const auto start = r.get(4), len = r.get(4);
        if (start + len > N) throw std::runtime_error("cell set file has a run past the net size");
        for (std::uint64_t i = start; i < start + len; ++i) b[i] = true;
    }
    return b;
}

}  // namespace

std::string to_string(MeasureMethod m) { return m == MeasureMethod::CellBracket ? "cell-bracket" : "monte-carlo"; }

nlohmann::json MeasureEstimate::to_json() const {
    nlohmann::json j;
    j["lower"] = lower;
    j["upper"] = upper;
    j["method"] = to_string(method);
    j["certified"] = certified;
    if (mc_stderr) j["mc_stderr"] = *mc_stderr;
    if (nominal) j["nominal"] = *nominal;
    return j;
}

std::vector<std::pair<std::size_t, std::size_t>> bit_runs(const CellBits& b) {
    std::vector<std::pair<std::size_t, std::size_t>> runs;
    for (auto i = b.find_first(); i != CellBits::npos;) {
        std::size_t j = i;
        while (j + 1 < b.size() && b[j + 1]) ++j;
        runs.emplace_back(i, j);
        i = j + 1 < b.size() ? b.find_next(j) : CellBits::npos;
    }
    return runs;
}

CellSet empty_cells(const NetPtr& net) {
    CellSet s = blank(net, "empty");
    s.nominal = CellBits(net->size());
    return s;
}

CellSet full_cells(const NetPtr& net) {
    CellSet s = blank(net, "full");
    s.inner.set();
    s.outer.set();
    s.nominal = s.outer;
    if (!s.depth.empty()) s.depth.assign(net->size(), kMaxDepth);
    return s;
}

CellSet cells_from_bits(const NetPtr& net, const CellBits& bits, std::string description) {
    if (bits.size() != net->size()) throw NetMismatch("bitset size differs from the net");
    CellSet s = blank(net, std::move(description));
    s.inner = s.outer = bits;
    s.nominal = bits;
    s.certified = false;
    for_each_bit(bits, [&](std::size_t i) {
        if (!s.depth.empty()) s.depth[i] = net->cell_radius();
    });
    return s;
}

CellSet discretize(const SetRegion& region, const NetPtr& net) { return discretize_impl(region, net, nullptr); }

CellSet discretize_within(const SetRegion& region, const NetPtr& net, const CellBits& mask) {
    if (mask.size() != net->size()) throw NetMismatch("mask size differs from the net");
    return discretize_impl(region, net, &mask);
}

namespace {

// Weight of a cell set with a bound on its floating-point error: lattice
// weights are count / N, zonal weights are CDF differences over runs, and
// scattered weights are summed with the usual k u sum bound.
std::pair<double, double> weight_with_error(const Net& net, const CellBits& bits) {
    constexpr double u = 0x1p-53;
    switch (net.kind()) {
        case NetKind::Lattice: {
            const double v = double(bits.count()) / double(net.size());
            return {v, 2 * u * v};
        }
        case NetKind::Zonal: {
            const auto& z = static_cast<const ZonalNet&>(net);
            double v = 0;
            const auto runs = bit_runs(bits);
            for (auto [a, b] : runs) v += z.cdf(z.cell_hi(b)) - z.cdf(z.cell_lo(a));
            return {v, double(runs.size()) * (4 * u + u * v) + 1e-15 * v};
        }
        case NetKind::Scattered:
            break;
    }
    const auto& w = net.weights();
    double v = 0;
    std::size_t k = 0;
    for_each_bit(bits, [&](std::size_t i) {
        v += w[i];
        ++k;
    });
    return {v, double(k + 1) * u * v};
}

}  // namespace

MeasureEstimate measure(const CellSet& A) {
    const auto [lo, lo_err] = weight_with_error(*A.net, A.inner);
    const auto [hi, hi_err] = weight_with_error(*A.net, A.outer);
    MeasureEstimate m;
    m.lower = std::clamp(lo - lo_err, 0.0, 1.0);
    m.upper = std::clamp(std::max(hi + hi_err, lo), 0.0, 1.0);
    if (A.nominal) m.nominal = std::clamp(weight_with_error(*A.net, *A.nominal).first, 0.0, 1.0);
    m.certified = A.certified;
    return m;
}

CellSet minkowski_product(const CellSet& A, const CellSet& B, int threads) {
    require_same_net(A, B);
    switch (A.net->kind()) {
        case NetKind::Scattered:
            return product_scattered(A, B, threads);
        case NetKind::Lattice:
            return product_lattice(A, B);
        case NetKind::Zonal:
            return product_zonal(A, B);
    }
    throw std::logic_error("unknown net kind");
}

CellSet translate(const CellSet& A, const GroupElement& g, Side side) {
    A.net->group()->check(g);
    if (A.net->group()->norm_from_identity(g) == 0.0) return A;
    switch (A.net->kind()) {
        case NetKind::Scattered:
            return translate_scattered(A, g, side);
        case NetKind::Lattice:
            return translate_lattice(A, g);
        case NetKind::Zonal:
            break;
    }
    throw std::invalid_argument("translate is not supported on zonal nets (translates are not zonal)");
}

CellSet slice(const CellSet& A, const SubgroupPtr& H, const GroupElement& h, double delta, double rho) {
    check_group(*H->ambient(), *A.net);
    const auto R = rectangle_wide(H, h, delta, rho);
    CellSet S = discretize_within(*R, A.net, A.outer);
    CellSet out = cell_intersection(A, S);
    out.description = "slice(" + A.description + "," + R->describe() + ")";
    return out;
}

CellSet cell_union(const CellSet& A, const CellSet& B) {
    require_same_net(A, B);
    CellSet s = A;
    s.inner |= B.inner;
    s.outer |= B.outer;
    if (A.nominal && B.nominal) *s.nominal |= *B.nominal;
    else s.nominal.reset();
    for (std::size_t i = 0; i < s.depth.size(); ++i) s.depth[i] = std::max(A.depth[i], B.depth[i]);
    s.certified = A.certified && B.certified;
    s.description = "union(" + A.description + "," + B.description + ")";
    return s;
}

CellSet cell_intersection(const CellSet& A, const CellSet& B) {
    require_same_net(A, B);
    CellSet s = A;
    s.inner &= B.inner;
    s.outer &= B.outer;
    if (A.nominal && B.nominal) *s.nominal &= *B.nominal;
    else s.nominal.reset();
    for (std::size_t i = 0; i < s.depth.size(); ++i) s.depth[i] = s.inner[i] ? std::min(A.depth[i], B.depth[i]) : 0.0;
    s.certified = A.certified && B.certified;
    s.description = "inter(" + A.description + "," + B.description + ")";
    return s;
}

MeasureEstimate wilson_interval(std::size_t hits, std::size_t n) {
    if (n == 0) throw std::invalid_argument("wilson_interval: no samples");
    const double z = 1.959963984540054;
    const double p = double(hits) / double(n);
    const double nn = double(n);
    const double den = 1 + z * z / nn;
    const double center = (p + z * z / (2 * nn)) / den;
    const double half = z * std::sqrt(p * (1 - p) / nn + z * z / (4 * nn * nn)) / den;
    MeasureEstimate m;
    m.method = MeasureMethod::MonteCarlo;
    m.lower = std::max(0.0, center - half);
    m.upper = std::min(1.0, center + half);
    m.mc_stderr = std::sqrt(p * (1 - p) / nn);
    m.nominal = p;
    m.certified = false;
    return m;
}

MeasureEstimate mc_measure(const SetRegion& region, std::size_t n, std::uint64_t seed) {
    if (n < 1000) throw std::invalid_argument("mc_measure: need at least 1000 samples");
    const Group& G = *region.group();
    Rng rng(seed);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < n; ++i) hits += region.contains(G.haar_draw(rng));
    return wilson_interval(hits, n);
}

std::vector<std::uint8_t> encode_cellset(const CellSet& A) {
    std::vector<std::uint8_t> o{'H', 'C', 'S', 'T'};
    put_u16(o, kFormatVersion);
    put_u64(o, A.net->hash());
    put_u32(o, static_cast<std::uint32_t>(A.net->size()));
    o.push_back(static_cast<std::uint8_t>((A.certified ? 1 : 0) | (A.nominal ? 2 : 0)));
    put_bits(o, A.inner);
    put_bits(o, A.outer);
    if (A.nominal) put_bits(o, *A.nominal);
    return o;
}

CellSet decode_cellset(const std::vector<std::uint8_t>& bytes, const NetPtr& net) {
    if (bytes.size() < 19 || !std::equal(bytes.begin(), bytes.begin() + 4, "HCST"))
        throw std::runtime_error("not a cell set file (bad magic)");
    Reader r(bytes);
    r.get(4);
    const auto version = r.get(2);
    if (version != kFormatVersion) throw std::runtime_error("unsupported cell set version " + std::to_string(version));
    const auto hash = r.get(8);
    const auto N = r.get(4);
    if (hash != net->hash() || N != net->size()) throw NetMismatch("cell set file was written for another net");
    const auto flags = r.get(1);
    CellSet s = blank(net, "file");
    s.certified = flags & 1;
    s.inner = get_bits(r, N);
    s.outer = get_bits(r, N);
    if (flags & 2) s.nominal = get_bits(r, N);
    if (!r.done()) throw std::runtime_error("trailing bytes in cell set file");
    // inner cells of stored sets were written with depth above one cell radius
    for_each_bit(s.inner, [&](std::size_t i) {
        if (!s.depth.empty()) s.depth[i] = net->cell_radius();
    });
    return s;
}

void save_cellset(const CellSet& A, const std::string& path) {
    const auto bytes = encode_cellset(A);
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + path);
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

CellSet load_cellset(const std::string& path, const NetPtr& net) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot read " + path);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    CellSet s = decode_cellset(bytes, net);
    s.description = "file:" + path;
    return s;
}

}  // namespace haarlab
