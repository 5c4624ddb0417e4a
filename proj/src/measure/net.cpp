#include "haarlab/net.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <numbers>
#include <stdexcept>

#include "kdtree.hpp"

namespace haarlab {
namespace {

constexpr double kPi = std::numbers::pi;
constexpr int kMaxEmbed = 128;

class Fnv1a {
public:
    void add(const void* data, std::size_t n) {
        const auto* p = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < n; ++i) {
            h_ ^= p[i];
            h_ *= 0x100000001b3ull;
        }
    }
    void add(const std::string& s) { add(s.data(), s.size()); }
    template <class T>
    void add_value(T v) {
        add(&v, sizeof v);
    }
    std::uint64_t value() const { return h_; }

private:
    std::uint64_t h_ = 0xcbf29ce484222325ull;
};

std::string hex64(std::uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

constexpr std::array<int, 24> kPrimes = {2,  3,  5,  7,  11, 13, 17, 19, 23, 29, 31, 37,
                                         41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89};

double radical_inverse(std::uint64_t i, int base) {
    const double inv = 1.0 / base;
    double f = inv, r = 0.0;
    while (i > 0) {
        r += f * double(i % base);
        i /= base;
        f *= inv;
    }
    return r;
}

// Haar stream: shifted Halton through the cube map when one exists, else PRNG.
class HaarStream {
public:
    HaarStream(const Group& G, std::uint64_t seed, std::uint64_t offset)
        : G_(G), rng_(seed), index_(offset) {
        const int k = G.lowdisc_dim();
        if (k > static_cast<int>(kPrimes.size())) throw std::invalid_argument("low-discrepancy dimension too large");
        std::uniform_real_distribution<double> u01(0.0, 1.0);
        for (int i = 0; i < k; ++i) shift_.push_back(u01(rng_));
    }
    GroupElement next() {
        if (shift_.empty()) return G_.haar_draw(rng_);
        std::array<double, kPrimes.size()> u{};
        halton_point(++index_, static_cast<int>(shift_.size()), shift_, u.data());
        return G_.from_unit_cube(u.data());
    }

private:
    const Group& G_;
    Rng rng_;
    std::uint64_t index_;
    std::vector<double> shift_;
};

int lround_pos(double x) { return std::max(1, static_cast<int>(std::lround(x))); }

}  // namespace

void halton_point(std::uint64_t index, int dim, const std::vector<double>& shift, double* out) {
    for (int k = 0; k < dim; ++k) {
        double v = radical_inverse(index, kPrimes[k]) + shift[k];
        out[k] = v - std::floor(v);
    }
}

std::string to_string(NetKind k) {
    switch (k) {
        case NetKind::Scattered:
            return "scattered";
        case NetKind::Lattice:
            return "lattice";
        case NetKind::Zonal:
            return "zonal";
    }
    return "?";
}

nlohmann::json Net::describe() const {
    nlohmann::json j;
    j["kind"] = to_string(kind_);
    j["group"] = group_->name();
    j["cells"] = size();
    j["cell_radius"] = cell_radius_;
    j["hash"] = hex64(hash_);
    return j;
}

// ---------------------------------------------------------------- scattered

ScatteredNet::ScatteredNet(GroupPtr G, std::uint64_t seed)
    : Net(NetKind::Scattered, std::move(G)), seed_(seed) {
    const Group& g = *group();
    if (g.embed_size() > kMaxEmbed) throw std::invalid_argument("embedding too large for a scattered net");
    psize_ = g.param_size();
    tree_ = std::make_unique<detail::KdTree>(g.embed_size());
}

ScatteredNet::~ScatteredNet() = default;

GroupElement ScatteredNet::center(std::size_t i) const {
    GroupElement e;
    e.p = Eigen::Map<const Eigen::VectorXd>(params_.data() + i * psize_, psize_);
    return e;
}

Neighbor ScatteredNet::nearest(const GroupElement& g) const {
    const Group& G = *group();
    std::array<double, kMaxEmbed> q;
    G.embed(g, 0, q.data());
    const auto [id, c2] = tree_->nearest(q.data());
    const double dc = G.distance_from_chord(std::sqrt(c2));
    if (dc >= 0.0) return {id, dc};
    Neighbor best{id, G.distance(g, center(id))};
    const double chord = G.chord_lipschitz() * best.distance * G.diameter_raw() * (1 + 1e-12) + 1e-15;
    tree_->within(q.data(), chord * chord, [&](std::uint32_t j, double) {
        if (j == best.index) return;
        const double d = G.distance(g, center(j));
        if (d < best.distance || (d == best.distance && j < best.index)) best = {j, d};
    });
    return best;
}

void ScatteredNet::within(const GroupElement& g, double r, std::vector<Neighbor>& out) const {
    const Group& G = *group();
    std::array<double, kMaxEmbed> q;
    G.embed(g, 0, q.data());
    const double chord = G.chord_lipschitz() * std::min(r, 1.0) * G.diameter_raw() * (1 + 1e-12) + 1e-15;
    const std::size_t start = out.size();
    const bool monotone = G.distance_from_chord(0.0) >= 0.0;
    tree_->within(q.data(), chord * chord, [&](std::uint32_t j, double c2) {
        const double d = monotone ? G.distance_from_chord(std::sqrt(c2)) : G.distance(g, center(j));
        out.push_back({j, d});
    });
    if (G.embed_copies() > 1) {
        // several copies of one center: keep the smallest distance
        std::sort(out.begin() + start, out.end(), [](const Neighbor& a, const Neighbor& b) {
            return a.index != b.index ? a.index < b.index : a.distance < b.distance;
        });
        out.erase(std::unique(out.begin() + start, out.end(),
                              [](const Neighbor& a, const Neighbor& b) { return a.index == b.index; }),
                  out.end());
    }
    out.erase(std::remove_if(out.begin() + start, out.end(), [r](const Neighbor& n) { return n.distance > r; }),
              out.end());
}

nlohmann::json ScatteredNet::describe() const {
    auto j = Net::describe();
    j["seed"] = seed_;
    j["separation"] = separation_;
    j["validation_max"] = validation_max_;
    return j;
}

std::shared_ptr<const ScatteredNet> build_scattered_net(const GroupPtr& G, std::size_t target,
                                                        std::uint64_t seed) {
    if (target < 2) throw std::invalid_argument("build_net: need at least 2 cells");
    const int d = G->dim();
    const int esize = G->embed_size();
    const int copies = G->embed_copies();
    const std::size_t stream = std::max<std::size_t>(6 * target, 20000);

    std::vector<double> params;
    std::unique_ptr<detail::KdTree> tree;
    std::size_t count = 0;
    double tau = 2.0 * std::pow(1.0 / double(target), 1.0 / d);
    double used = tau;
    std::array<double, kMaxEmbed> q;
    for (int iter = 0; iter < 10; ++iter) {
        tree = std::make_unique<detail::KdTree>(esize);
        params.clear();
        count = 0;
        HaarStream hs(*G, seed, 0);
        const double t2 = tau * tau;
        for (std::size_t i = 0; i < stream && count < 3 * target; ++i) {
            const GroupElement g = hs.next();
            G->embed(g, 0, q.data());
            if (tree->nearest_within(q.data(), t2) < t2) continue;
            for (int c = 0; c < copies; ++c) {
                G->embed(g, c, q.data());
                tree->insert(q.data(), static_cast<std::uint32_t>(count));
            }
            params.insert(params.end(), g.p.data(), g.p.data() + g.p.size());
            ++count;
        }
        used = tau;
        const double ratio = double(count) / double(target);
        if (std::abs(ratio - 1.0) <= 0.05) break;
        tau *= std::pow(ratio, 1.0 / d);
    }

    std::shared_ptr<ScatteredNet> net(new ScatteredNet(G, seed));
    net->params_ = std::move(params);
    net->tree_ = std::move(tree);
    net->separation_ = used;

    // Covering radius and Voronoi weights from an independent stream.
    const std::size_t nval = 10 * count;
    std::vector<double> mass(count, 0.0);
    HaarStream val(*G, seed ^ 0x9e3779b97f4a7c15ull, stream + 1);
    double worst = 0.0;
    for (std::size_t i = 0; i < nval; ++i) {
        const Neighbor nb = net->nearest(val.next());
        worst = std::max(worst, nb.distance);
        mass[nb.index] += 1.0;
    }
    for (auto& m : mass) m /= double(nval);
    net->validation_max_ = worst;

    Fnv1a h;
    h.add("scattered");
    h.add(G->name());
    h.add_value(seed);
    h.add_value(static_cast<std::uint64_t>(count));
    h.add(net->params_.data(), net->params_.size() * sizeof(double));
    net->finalize(std::move(mass), 1.2 * worst, h.value());
    return net;
}

// ---------------------------------------------------------------- lattice

LatticeNet::LatticeNet(GroupPtr G, int per_dim) : Net(NetKind::Lattice, std::move(G)), n_(per_dim) {
    if (group()->family() != Family::Torus) throw std::invalid_argument("lattice nets need a torus");
    d_ = group()->dim();
    const double total = std::pow(double(n_), d_);
    if (n_ < 1 || total > 5e7) throw std::invalid_argument("lattice size out of range");
    const auto N = static_cast<std::size_t>(std::llround(total));
    Fnv1a h;
    h.add("lattice");
    h.add(group()->name());
    h.add_value(n_);
    finalize(std::vector<double>(N, 1.0 / double(N)), 1.0 / n_, h.value());
}

std::vector<int> LatticeNet::multi_index(std::size_t i) const {
    std::vector<int> m(d_);
    for (int k = 0; k < d_; ++k) {
        m[k] = static_cast<int>(i % n_);
        i /= n_;
    }
    return m;
}

std::size_t LatticeNet::index(const std::vector<int>& m) const {
    std::size_t i = 0;
    for (int k = d_ - 1; k >= 0; --k) i = i * n_ + static_cast<std::size_t>(((m[k] % n_) + n_) % n_);
    return i;
}

GroupElement LatticeNet::center(std::size_t i) const {
    const auto m = multi_index(i);
    std::vector<double> v(d_);
    for (int k = 0; k < d_; ++k) v[k] = (m[k] + 0.5) / n_;
    return group()->element_from_params(v);
}

std::size_t LatticeNet::locate(const GroupElement& g) const {
    std::vector<int> m(d_);
    for (int k = 0; k < d_; ++k) {
        const double t = g.p[k] - std::floor(g.p[k]);
        m[k] = std::min(n_ - 1, static_cast<int>(std::floor(t * n_)));
    }
    return index(m);
}

nlohmann::json LatticeNet::describe() const {
    auto j = Net::describe();
    j["per_dim"] = n_;
    return j;
}

std::shared_ptr<const LatticeNet> build_lattice_net(const GroupPtr& G, int per_dim) {
    return std::make_shared<LatticeNet>(G, per_dim);
}

// ---------------------------------------------------------------- zonal

std::vector<std::string> zonal_keys(const Group& G) {
    if (G.family() == Family::SO3) return {"so3_tube", "so3_class"};
    if (G.family() == Family::SU2) return {"su2_tube", "su2_class"};
    return {};
}

ZonalNet::ZonalNet(GroupPtr G, std::string key, std::size_t cells)
    : Net(NetKind::Zonal, std::move(G)), key_(std::move(key)) {
    const auto keys = zonal_keys(*group());
    if (std::find(keys.begin(), keys.end(), key_) == keys.end())
        throw std::invalid_argument("zonal key '" + key_ + "' is not available on " + group()->name());
    if (cells < 1) throw std::invalid_argument("zonal net needs at least one cell");
    period_ = key_ == "su2_tube" ? 0.5 : 1.0;
    std::vector<double> w(cells);
    for (std::size_t i = 0; i < cells; ++i)
        w[i] = cdf(period_ * double(i + 1) / double(cells)) - cdf(period_ * double(i) / double(cells));
    Fnv1a h;
    h.add("zonal");
    h.add(group()->name());
    h.add(key_);
    h.add_value(static_cast<std::uint64_t>(cells));
    finalize(std::move(w), period_ / double(cells), h.value());
}

double ZonalNet::coordinate(const GroupElement& g) const {
    if (key_ == "so3_class" || key_ == "su2_class") return group()->norm_from_identity(g);
    const Eigen::Vector3d v = quat_to_rotation(g.p.head<4>()).col(2);
    const double beta = std::atan2(std::hypot(v[0], v[1]), v[2]);
    return key_ == "so3_tube" ? beta / kPi : beta / (2 * kPi);
}

double ZonalNet::cdf(double x) const {
    const double t = std::clamp(x, 0.0, period_);
    if (key_ == "so3_tube") return 0.5 * (1 - std::cos(kPi * t));
    if (key_ == "su2_tube") return 0.5 * (1 - std::cos(2 * kPi * t));
    if (key_ == "so3_class") return (kPi * t - std::sin(kPi * t)) / kPi;
    return (2 * kPi * t - std::sin(2 * kPi * t)) / (2 * kPi);
}

GroupElement ZonalNet::center(std::size_t i) const {
    const double t = 0.5 * (cell_lo(i) + cell_hi(i));
    // tube keys: tilt about x; class keys: rotation about z
    double angle;  // rotation angle of the SO(3) image
    Eigen::Vector3d axis(1, 0, 0);
    if (key_ == "so3_tube") angle = kPi * t;
    else if (key_ == "su2_tube") angle = 2 * kPi * t;
    else {
        axis = Eigen::Vector3d(0, 0, 1);
        angle = key_ == "so3_class" ? kPi * t : 2 * kPi * t;
    }
    const Eigen::Vector4d q = quat_axis_angle(axis, angle);
    return group()->element_from_params({q[0], q[1], q[2], q[3]});
}

std::size_t ZonalNet::locate(const GroupElement& g) const {
    const double t = coordinate(g) / period_;
    return std::min(size() - 1, static_cast<std::size_t>(std::max(0.0, std::floor(t * double(size())))));
}

nlohmann::json ZonalNet::describe() const {
    auto j = Net::describe();
    j["key"] = key_;
    j["period"] = period_;
    return j;
}

std::shared_ptr<const ZonalNet> build_zonal_net(const GroupPtr& G, const std::string& key, std::size_t cells) {
    return std::make_shared<ZonalNet>(G, key, cells);
}

NetPtr build_net(const GroupPtr& G, std::size_t target, std::uint64_t seed) {
    if (G->family() == Family::Torus)
        return build_lattice_net(G, lround_pos(std::pow(double(target), 1.0 / G->dim())));
    return build_scattered_net(G, target, seed);
}

}  // namespace haarlab
