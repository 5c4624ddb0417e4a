#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "haarlab/stability.hpp"
#include "helpers.hpp"

using namespace haarlab;

namespace {

constexpr double kPi = std::numbers::pi;

std::shared_ptr<const ScatteredNet> so3_net() {
    static auto net = build_scattered_net(make_so3(), 20000, 11);
    return net;
}
std::shared_ptr<const LatticeNet> t1_net() {
    static auto net = build_lattice_net(make_torus(1), 1000);
    return net;
}
std::shared_ptr<const LatticeNet> t2_net() {
    static auto net = build_lattice_net(make_torus(2), 400);
    return net;
}

RegionPtr arc(double lo, double len) { return box_region(make_torus(1), TorusBox{{lo}, {len}}); }

// Removes a fraction of the set's cells and adds as many cells from the
// complement, uniformly at random.
CellSet with_noise(const CellSet& A, double fraction, Rng& rng) {
    CellBits bits = shape_bits(A);
    std::vector<std::size_t> in, out;
    for (std::size_t i = 0; i < bits.size(); ++i) (bits[i] ? in : out).push_back(i);
    std::shuffle(in.begin(), in.end(), rng);
    std::shuffle(out.begin(), out.end(), rng);
    const auto k = static_cast<std::size_t>(std::round(fraction * double(in.size())));
    for (std::size_t t = 0; t < k; ++t) {
        bits.reset(in[t]);
        bits.set(out[t]);
    }
    return cells_from_bits(A.net, bits, "noisy");
}

double so3_tube(double t) { return 0.5 * (1 - std::cos(kPi * t)); }

// Angle between the rotation axes of two conjugates of so2_z, through the
// image of the z axis.
double axis_angle(const GroupPtr& G, const GroupElement& g1, const GroupElement& g2) {
    const auto z = basis_vector(3, 2);
    const auto a = G->adjoint(g1, z), b = G->adjoint(g2, z);
    return std::acos(std::min(1.0, std::abs(a.x.dot(b.x)) / (a.norm() * b.norm())));
}

}  // namespace

TEST_SUITE("stability_probe") {

TEST_CASE("fit_tube: planted tube at the identity") {
    const auto net = so3_net();
    const auto G = net->group();
    const auto A = discretize(*tube(builtin_subgroup(G, "so2_z"), 0.05), net);
    const auto fit = fit_tube(A, 1);
    CHECK(fit.subgroup == "so2_z");
    const double maxw = *std::max_element(net->weights().begin(), net->weights().end());
    CHECK(fit.symdiff_ratio <= 2 * maxw / so3_tube(0.05));
    CHECK(fit.delta_prime == doctest::Approx(0.05).epsilon(0.2));
    CHECK(fit.tube_like);
    CHECK(fit.symdiff_ratio >= 0);
    CHECK(fit.symdiff_ratio <= 2);
    CHECK(fit_tube(A, 1).to_json(*G) == fit.to_json(*G));  // deterministic
}

TEST_CASE("fit_tube: conjugated tube is recovered") {
    const auto net = so3_net();
    const auto G = net->group();
    Rng rng(2);
    const auto g = G->haar_draw(rng);
    const auto A = discretize(*tube(builtin_subgroup(G, "so2_z")->conjugate(g), 0.05), net);
    const auto fit = fit_tube(A, 3);
    MESSAGE("symdiff " << fit.symdiff_ratio << " axis error " << axis_angle(G, g, fit.conjugator));
    CHECK(fit.symdiff_ratio <= 0.1);
    CHECK(axis_angle(G, g, fit.conjugator) <= 0.05);
}

TEST_CASE("fit_tube: planted recovery with 5% cell noise") {
    const auto net = so3_net();
    const auto G = net->group();
    int ok = 0;
    for (std::uint64_t seed = 100; seed < 104; ++seed) {
        Rng rng(seed);
        const auto g = G->haar_draw(rng);
        const auto A = with_noise(discretize(*tube(builtin_subgroup(G, "so2_z")->conjugate(g), 0.05), net), 0.05, rng);
        const auto fit = fit_tube(A, seed);
        ok += fit.symdiff_ratio <= 0.15 ? 1 : 0;
    }
    CHECK(ok >= 3);
}

TEST_CASE("fit_tube: a ball is not tube-like") {
    const auto net = so3_net();
    const auto G = net->group();
    const auto A = discretize(*ball_region(G, G->identity(), 0.2), net);
    const auto fit = fit_tube(A, 4);
    CHECK(fit.symdiff_ratio > 0.5);
    CHECK_FALSE(fit.tube_like);
}

TEST_CASE("fit_tube: tori and errors") {
    const auto net = t2_net();
    const auto G = net->group();
    const auto A = discretize(*tube(builtin_subgroup(G, "t1_y"), 0.08), net);
    const auto fit = fit_tube(A, 5);
    CHECK(fit.subgroup == "t1_y");
    CHECK(fit.symdiff_ratio <= 1e-12);
    CHECK(fit.delta_prime == doctest::Approx(0.08).epsilon(0.05));
    CHECK_THROWS_AS(fit_tube(empty_cells(net), 1), std::invalid_argument);
    TubeFitOptions opt;
    opt.subgroups = {"t1_x"};
    CHECK(fit_tube(A, 5, opt).symdiff_ratio > 0.5);
}

TEST_CASE("slice profile: tube, half tube, deleted cells") {
    const auto net = t2_net();
    const auto G = net->group();
    const auto H = builtin_subgroup(G, "t1_x");
    const double delta = 0.08, rho = 0.2;
    const auto T = discretize(*tube(H, delta), net);
    const auto full = slice_profile(T, H, delta, rho, 40, 1);
    MESSAGE("tube evenness " << full.evenness);
    CHECK(full.evenness >= 0.9);

    const auto half = cell_intersection(T, discretize(*box_region(G, TorusBox{{0.0, 0.0}, {0.5, 1.0}}), net));
    const auto hp = slice_profile(half, H, delta, rho, 40, 1);
    CHECK(hp.evenness <= 0.05);
    CHECK(full.evenness >= 5 * hp.evenness);

    Rng rng(2);
    CellBits bits = shape_bits(T);
    std::bernoulli_distribution drop(0.1);
    for (auto i = bits.find_first(); i != CellBits::npos; i = bits.find_next(i))
        if (drop(rng)) bits.reset(i);
    const auto deleted = slice_profile(cells_from_bits(net, bits), H, delta, rho, 40, 1);
    MESSAGE("10% deleted evenness " << deleted.evenness);
    CHECK(deleted.evenness >= 0.7);
    CHECK(deleted.evenness < full.evenness);

    CHECK_THROWS_AS(slice_profile(discretize(*tube(H, 0.2), net), H, delta, rho, 5, 1), ContainmentError);
    CHECK(full.to_json(*G)["slices"].size() == 40);
}

TEST_CASE("slice profile on SO3 is Ad-symmetric") {
    const auto net = so3_net();
    const auto H = builtin_subgroup(net->group(), "so2_z");
    const auto p = slice_profile(discretize(*tube(H, 0.05), net), H, 0.05, 0.1, 8, 3);
    for (const auto& s : p.slices) CHECK(s.lower <= 0.1 * so3_tube(0.05) + 1e-12);
    for (const auto& s : p.slices) CHECK(s.upper >= 0.1 * so3_tube(0.05) - 1e-12);
}

TEST_CASE("ray profile: balls pass") {
    const auto net = build_zonal_net(make_so3(), "so3_class", 20000);
    const auto A = discretize(*ball_region(net->group(), net->group()->identity(), 0.1), net);
    RayOptions opt;
    opt.rho = 0.12;
    opt.rho_min = 0.09;
    opt.directions = 100;
    const auto p = ray_profile(A, 1, opt);
    CHECK(p.pass_fraction == 1.0);
    CHECK(p.mean_density == 1.0);
    CHECK(p.min_start == 0.0);
    CHECK(p.rays.size() == 100);
    opt.rho = 0.05;
    CHECK_THROWS_AS(ray_profile(A, 1, opt), ContainmentError);
    CHECK_THROWS_AS(ray_profile(empty_cells(net), 1, opt), std::invalid_argument);
}

TEST_CASE("ray profile on clouds: slab and shell") {
    Rng rng(4);
    std::vector<Eigen::VectorXd> ball;
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 4000; ++i)
        ball.push_back(testutil::random_direction(3, rng).x * (0.1 * std::cbrt(u(rng))));
    RayOptions opt;
    opt.rho = 0.15;
    opt.rho_min = 0.075;
    opt.directions = 300;
    const double res = 0.02;
    const auto full = ray_profile(make_cloud(ball), res, 5, opt);
    CHECK(full.pass_fraction == 1.0);

    const Eigen::Vector3d normal(0, 0, 1);
    std::vector<double> fractions;
    for (double w : {0.02, 0.035, 0.05}) {
        std::vector<Eigen::VectorXd> cut;
        for (const auto& p : ball)
            if (std::abs(p.dot(normal)) >= w) cut.push_back(p);
        const auto prof = ray_profile(make_cloud(cut), res, 5, opt);
        fractions.push_back(prof.pass_fraction);
        // failing rays lie close to the plane orthogonal to the normal
        double fail_cos = 0, pass_cos = 0;
        int nf = 0, np = 0;
        for (const auto& r : prof.rays) {
            const double c = std::abs(r.direction.x.dot(normal));
            if (r.passed) {
                pass_cos += c;
                ++np;
            } else {
                fail_cos += c;
                ++nf;
            }
        }
        REQUIRE(nf > 0);
        if (np > 0) CHECK(fail_cos / nf < pass_cos / np);
    }
    MESSAGE("slab pass fractions " << fractions[0] << " " << fractions[1] << " " << fractions[2]);
    CHECK(fractions[0] < 1.0);
    CHECK(fractions[0] >= fractions[1]);
    CHECK(fractions[1] >= fractions[2]);

    std::vector<Eigen::VectorXd> shell;
    for (const auto& p : ball)
        if (p.norm() >= 0.06) shell.push_back(p);
    const auto sp = ray_profile(make_cloud(shell), res, 6, opt);
    CHECK(sp.min_start > 0.03);
    opt.rho_min = 0.01;
    CHECK(ray_profile(make_cloud(shell), res, 6, opt).pass_fraction == 1.0);  // intervals, just not from 0
    CHECK(sp.csv().rfind("ray,start,end,density,passed,a0,a1,a2\n", 0) == 0);
}

TEST_CASE("covering number on the circle") {
    const auto net = t1_net();
    SUBCASE("arc 0.4 by arc 0.1") {
        const auto A = discretize(*arc(0.0, 0.4), net), B = discretize(*arc(0.0, 0.1), net);
        const auto c = covering_number(A, B);
        CHECK(c.translates.size() <= 5);
        CHECK(c.translates.size() >= 2);
        CHECK(c.covered);
        CHECK(c.within_bound);
        CHECK(c.bound <= 5.1);
    }
    SUBCASE("A inside B") {
        const auto c = covering_number(discretize(*arc(0.0, 0.05), net), discretize(*arc(-0.1, 0.2), net));
        CHECK(c.translates.size() == 1);
        CHECK(c.covered);
    }
    SUBCASE("two far pieces") {
        const auto A = discretize(*union_region(arc(0.0, 0.02), arc(0.5, 0.02)), net);
        const auto c = covering_number(A, discretize(*arc(-0.05, 0.1), net));
        CHECK(c.translates.size() == 2);
        CHECK(c.within_bound);
    }
    CHECK_THROWS_AS(covering_number(discretize(*arc(0, 0.1), net), empty_cells(net)), std::domain_error);
}

TEST_CASE("scale spectrum: invariants on balls, tubes and ball pairs") {
    const auto net = build_scattered_net(make_so3(), 3000, 12);
    const auto G = net->group();
    auto check = [&](const ScaleSpectrum& s) {
        REQUIRE_FALSE(s.radii.empty());
        for (std::size_t i = 1; i < s.radii.size(); ++i) {
            CHECK(s.radii[i] < s.radii[i - 1]);
            CHECK(s.covering_numbers[i] >= s.covering_numbers[i - 1]);
        }
        CHECK(s.covering_numbers.back() == s.translates);
        for (bool b : s.inclusion_holds) CHECK(b);
    };
    const auto ball = scale_spectrum(discretize(*ball_region(G, G->identity(), 0.15), net), 2, 8.0);
    check(ball);
    CHECK(ball.radii.front() <= 0.15 + 3 * net->cell_radius());
    const auto tb = scale_spectrum(discretize(*tube(builtin_subgroup(G, "so2_z"), 0.08), net), 2, 4.0);
    check(tb);
    CHECK(tb.radii.front() <= 0.08 + 3 * net->cell_radius());

    Rng rng(3);
    const auto far = G->exp_map(testutil::random_vector(3, 0.45, rng));
    const auto pair = scale_spectrum(discretize(*union_region(ball_region(G, G->identity(), 0.1),
                                                              ball_region(G, far, 0.1)),
                                                net),
                                     2, 8.0);
    check(pair);
    // translates near the far ball sit at about its displacement
    CHECK(pair.radii.front() > ball.radii.front());
    CHECK(pair.to_json()["radii"].size() == pair.radii.size());
}

TEST_CASE("scale spectrum on the circle") {
    const auto net = t1_net();
    const auto s = scale_spectrum(discretize(*arc(-0.05, 0.1), net), 3, 2.0);
    for (std::size_t i = 1; i < s.radii.size(); ++i) CHECK(s.radii[i] < s.radii[i - 1]);
    for (bool b : s.inclusion_holds) CHECK(b);
    // normalized distance on the circle is twice the arc length
    CHECK(s.radii.front() <= 0.2 + 0.01);
}

TEST_CASE("commutator shrink") {
    const auto t = commutator_shrink(make_torus(3), 200, {0.05, 0.1, 0.2}, 1);
    CHECK(t.abelian);
    for (double r : t.max_ratio) CHECK(r <= 1e-12);
    CHECK(t.r0 == 0.2);

    const auto s = commutator_shrink(make_so3(), 2000, {0.02, 0.04, 0.08, 0.16, 0.3}, 2);
    CHECK_FALSE(s.abelian);
    CHECK(s.r0 > 0);
    // [g, h] = O(r^2), so the ratio is linear in r
    CHECK(s.max_ratio[1] / s.max_ratio[0] == doctest::Approx(2.0).epsilon(0.2));
    CHECK(s.max_ratio[2] / s.max_ratio[1] == doctest::Approx(2.0).epsilon(0.2));
    MESSAGE("SO3 r0 " << s.r0);
    CHECK_THROWS_AS(commutator_shrink(make_so3(), 10, {}, 1), std::invalid_argument);
}

}  // TEST_SUITE
