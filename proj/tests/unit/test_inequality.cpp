#include <doctest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include "haarlab/inequality.hpp"
#include "torus_oracle.hpp"

using namespace haarlab;
using namespace testutil;

namespace {

constexpr double kPi = std::numbers::pi;

double so3_ball(double t) { return (kPi * t - std::sin(kPi * t)) / kPi; }
double so3_tube(double t) { return 0.5 * (1 - std::cos(kPi * t)); }

std::shared_ptr<const LatticeNet> t1_fine() {
    static auto net = build_lattice_net(make_torus(1), 20000);
    return net;
}
std::shared_ptr<const LatticeNet> t1_net() {
    static auto net = build_lattice_net(make_torus(1), 1000);
    return net;
}
std::shared_ptr<const LatticeNet> t2_net() {
    static auto net = build_lattice_net(make_torus(2), 128);
    return net;
}
std::shared_ptr<const ZonalNet> tube_net() {
    static auto net = build_zonal_net(make_so3(), "so3_tube", 200000);
    return net;
}

}  // namespace

TEST_SUITE("inequality_suite") {

TEST_CASE("verdict logic on synthetic brackets") {
    Rng rng(1);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 10000; ++i) {
        double a = u(rng), b = u(rng), c = u(rng), d = u(rng);
        const Bracket lhs{std::min(a, b), std::max(a, b)}, rhs{std::min(c, d), std::max(c, d)};
        const Verdict v = verdict_ge(lhs, rhs);
        // verified only if every pair of values satisfies the claim, violated
        // only if none does
        if (v == Verdict::Verified) CHECK(lhs.lower >= rhs.upper);
        if (v == Verdict::Violated) CHECK(lhs.upper < rhs.lower);
        if (lhs.lower >= rhs.upper) CHECK(v == Verdict::Verified);
        if (lhs.upper < rhs.lower - 1e-12) CHECK(v == Verdict::Violated);
    }
    CHECK(verdict_ge({1, 1}, {1, 1}) == Verdict::Verified);
    CHECK(verdict_ge({0.5, 1.5}, {1, 1}) == Verdict::Inconclusive);
    CHECK(combine({Verdict::Verified, Verdict::Inconclusive}) == Verdict::Inconclusive);
    CHECK(combine({Verdict::Verified, Verdict::Violated, Verdict::Inconclusive}) == Verdict::Violated);
    CHECK(combine({Verdict::Verified, Verdict::Verified}) == Verdict::Verified);
    CHECK(verdict_from_string(to_string(Verdict::Violated)) == Verdict::Violated);
}

TEST_CASE("doubling ratio: full group, circle arcs, SO3 tube") {
    const auto G = make_so3();
    const auto full = full_cells(tube_net());
    CHECK(doubling_ratio(full).lower <= 1.0);
    CHECK(doubling_ratio(full).upper >= 1.0);
    for (double a : {0.1, 0.25, 0.5}) {
        const auto A = arcs_set(t1_net(), {{0.3, a}});
        CHECK(doubling_ratio(A).contains(2.0));
    }
    const auto H = builtin_subgroup(G, "so2_z");
    const auto r = doubling_ratio(discretize(*tube(H, 0.05), tube_net()));
    CHECK(r.lower >= 3.5);
    CHECK(r.upper <= 4.05);
    // Monte Carlo tube oracle
    const auto m1 = mc_measure(*tube(H, 0.05), 400000, 3), m2 = mc_measure(*tube(H, 0.1), 400000, 4);
    CHECK(r.lower <= m2.upper / m1.lower);
    CHECK(m2.lower / m1.upper <= r.upper);
    CHECK_THROWS_AS(doubling_ratio(empty_cells(t1_net())), std::domain_error);
}

TEST_CASE("property: doubling ratio is at least one") {
    Rng rng(2);
    std::uniform_real_distribution<double> u(0.0, 1.0), l(0.005, 0.2);
    for (int t = 0; t < 30; ++t) {
        const auto A = rects_set(t2_net(), {{u(rng), u(rng), l(rng), l(rng)}, {u(rng), u(rng), l(rng), l(rng)}});
        const auto d = doubling_data(A);
        CHECK(d.ratio.upper >= 1.0 - d.set.width() - d.product.width());
    }
    const auto net = build_scattered_net(make_so3(), 5000, 2);
    const auto G = net->group();
    for (int t = 0; t < 5; ++t) {
        const auto A = discretize(*ball_region(G, G->haar_draw(rng), 0.15), net);
        CHECK(doubling_ratio(A).upper >= 1.0);
    }
}

TEST_CASE("minimal doubling: circle arcs") {
    const auto A = arcs_set(t1_fine(), {{0.1, 0.2}});
    const auto r = check_minimal_doubling(A);
    CHECK(r.fitted_constants.at("k") == 1);
    CHECK(std::abs(r.fitted_constants.at("C_mid")) <= 0.05);
    CHECK(r.fitted_constants.at("C_empirical") >= 0.0);
    CHECK(r.fitted_constants.at("C_empirical") <= 0.05);
    CHECK(r.verdict == Verdict::Verified);
}

TEST_CASE("minimal doubling: SO3 tubes have C close to 4") {
    // tubes around the circle satisfy mu(H_2d) = 4 m (1 - m) with m = mu(H_d)
    const auto G = make_so3();
    const auto H = builtin_subgroup(G, "so2_z");
    std::vector<double> cs;
    for (double d : {0.03, 0.05, 0.08, 0.1}) {
        const auto A = discretize(*tube(H, d), tube_net());
        const auto r = check_minimal_doubling(A);
        INFO("delta " << d);
        CHECK(r.verdict == Verdict::Verified);
        CHECK(r.fitted_constants.at("C_mid") == doctest::Approx(4.0).epsilon(0.05));
        cs.push_back(r.fitted_constants.at("C_empirical"));
        CHECK(check_minimal_doubling(A, 4.5).verdict == Verdict::Verified);
        CHECK(check_minimal_doubling(A, 0.0).verdict == Verdict::Violated);
    }
    CHECK(*std::max_element(cs.begin(), cs.end()) <= 2 * *std::min_element(cs.begin(), cs.end()));
}

TEST_CASE("minimal doubling: SO3 balls double by nearly 8") {
    const auto G = make_so3();
    const auto zn = build_zonal_net(G, "so3_class", 100000);
    for (double rho : {0.05, 0.1}) {
        const auto r = check_minimal_doubling(discretize(*ball_region(G, G->identity(), rho), zn), 0.0);
        CHECK(r.verdict == Verdict::Verified);
        CHECK(r.fitted_constants.at("ratio_lower") > 4.0);
        const double exact = so3_ball(2 * rho) / so3_ball(rho);
        CHECK(r.fitted_constants.at("ratio_lower") <= exact);
        CHECK(exact <= r.fitted_constants.at("ratio_upper"));
        CHECK(exact > 7.5);
    }
}

TEST_CASE("Brunn-Minkowski: circle equality case") {
    const auto A = arcs_set(t1_fine(), {{0.1, 0.2}}), B = arcs_set(t1_fine(), {{0.6, 0.35}});
    const auto r = check_brunn_minkowski(A, B, 1);
    CHECK(std::abs(r.fitted_constants.at("alpha_mid")) <= 1e-3);
    CHECK(r.fitted_constants.at("alpha_lower") <= 0.0);
    CHECK(r.fitted_constants.at("alpha_empirical") >= 0.0);
    CHECK(r.verdict == Verdict::Verified);
    CHECK(check_brunn_minkowski(A, B, 1, 0.01).verdict == Verdict::Verified);
    CHECK(check_brunn_minkowski(A, B, 1, 0.0).verdict == Verdict::Inconclusive);
    CHECK(check_brunn_minkowski(A, B, 1, -0.01).verdict == Verdict::Violated);
}

TEST_CASE("Brunn-Minkowski: SO3 tubes have alpha of order delta squared") {
    const auto G = make_so3();
    const auto H = builtin_subgroup(G, "so2_z");
    for (auto [d1, d2] : std::vector<std::pair<double, double>>{{0.03, 0.03}, {0.05, 0.02}, {0.08, 0.05}, {0.1, 0.1}}) {
        const auto r = check_brunn_minkowski(discretize(*tube(H, d1), tube_net()), discretize(*tube(H, d2), tube_net()));
        // sqrt of tube mass is sin(pi d / 2)
        const double exact = 1 - std::sin(kPi * (d1 + d2) / 2) / (std::sin(kPi * d1 / 2) + std::sin(kPi * d2 / 2));
        INFO(d1 << " " << d2);
        CHECK(r.fitted_constants.at("alpha_lower") <= exact);
        CHECK(exact <= r.fitted_constants.at("alpha_empirical"));
        // for equal widths alpha = 1 - cos(pi d / 2), about 1.23 d^2
        CHECK(r.fitted_constants.at("alpha_mid") <= 1.3 * std::max(d1, d2) * std::max(d1, d2) + 1e-4);
    }
}

TEST_CASE("Brunn-Minkowski: degenerate second set") {
    const auto G = make_so3();
    const auto H = builtin_subgroup(G, "so2_z");
    const auto A = discretize(*tube(H, 0.1), tube_net());
    const auto B = discretize(*tube(H, 0.001), tube_net());
    const auto r = check_brunn_minkowski(A, B);
    CHECK(r.verdict == Verdict::Verified);
    CHECK(r.fitted_constants.at("alpha_empirical") < 0.01);
}

TEST_CASE("local Brunn-Minkowski: flat torus balls") {
    const auto net = build_lattice_net(make_torus(3), 48);
    const auto G = net->group();
    const auto A = discretize(*ball_region(G, G->identity(), 0.12), net);
    const auto r = check_local_bm(A, A, 0.12);
    CHECK(r.fitted_constants.at("epsilon_lower") <= 0.0);
    CHECK(r.fitted_constants.at("epsilon_empirical") >= 0.0);
    CHECK(std::abs(r.fitted_constants.at("epsilon_mid")) < 0.1);
    CHECK_THROWS_AS(check_local_bm(A, A, 0.05), ContainmentError);
    CHECK_THROWS_AS(check_local_bm(A, A, 0.3), std::invalid_argument);
}

TEST_CASE("local Brunn-Minkowski: SO3 exponent near 2") {
    const auto zn = build_zonal_net(make_so3(), "so3_class", 200000);
    const auto s = local_bm_sweep(zn, {0.025, 0.05, 0.1, 0.2});
    CHECK(s.fit.points >= 3);
    MESSAGE("fitted p = " << s.fit.p);
    CHECK(s.fit.p >= 1.6);
    CHECK(s.fit.p <= 2.4);
    for (std::size_t i = 0; i < s.rhos.size(); ++i) {
        // exact epsilon for two equal balls
        const double rho = s.rhos[i];
        const double exact = 1 - std::cbrt(so3_ball(2 * rho)) / (2 * std::cbrt(so3_ball(rho)));
        CHECK(s.reports[i].fitted_constants.at("epsilon_lower") <= exact + 1e-12);
        CHECK(exact <= s.reports[i].fitted_constants.at("epsilon_empirical") + 1e-12);
    }
}

TEST_CASE("local Brunn-Minkowski: translating B keeps epsilon") {
    const auto net = build_scattered_net(make_so3(), 20000, 4);
    const auto G = net->group();
    const auto g = G->exp_map(basis_vector(3, 1) * 0.03);
    const auto A = discretize(*ball_region(G, G->identity(), 0.08), net);
    const auto B = discretize(*ball_region(G, g, 0.08), net);
    const auto centered = check_local_bm(A, A, 0.2);
    const auto moved = check_local_bm(A, B, 0.2);
    const Bracket c{centered.fitted_constants.at("epsilon_lower"), centered.fitted_constants.at("epsilon_empirical")};
    const Bracket m{moved.fitted_constants.at("epsilon_lower"), moved.fitted_constants.at("epsilon_empirical")};
    CHECK(c.lower <= m.upper);
    CHECK(m.lower <= c.upper);
    const double exact = 1 - std::cbrt(so3_ball(0.16)) / (2 * std::cbrt(so3_ball(0.08)));
    CHECK(m.contains(exact));
}

TEST_CASE("Kemperman: circle equality and SO3 tube slack") {
    const auto A = arcs_set(t1_net(), {{0.1, 0.2}}), B = arcs_set(t1_net(), {{0.5, 0.3}});
    const auto r = kemperman_check(A, B);
    CHECK(r.lhs.contains(0.5));
    CHECK(r.lhs.width() <= 4e-3);
    CHECK(r.verdict != Verdict::Violated);
    const auto G = make_so3();
    const auto T = discretize(*tube(builtin_subgroup(G, "so2_z"), 0.05), tube_net());
    const auto k = kemperman_check(T, T);
    CHECK(k.verdict == Verdict::Verified);
    CHECK(k.fitted_constants.at("slack_lower") > 0.5 * k.rhs.upper);
}

TEST_CASE("Kemperman: random rectangle unions on the 2-torus") {
    Rng rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0), l(0.02, 0.3);
    for (int t = 0; t < 20; ++t) {
        const std::vector<Rect> a{{u(rng), u(rng), l(rng), l(rng)}, {u(rng), u(rng), l(rng), l(rng)}};
        const std::vector<Rect> b{{u(rng), u(rng), l(rng), l(rng)}};
        const auto r = kemperman_check(rects_set(t2_net(), a), rects_set(t2_net(), b));
        const double exact = rects_measure(rect_sum(a, b));
        CHECK(r.lhs.contains(exact, 1e-12));
        CHECK(exact >= std::min(rects_measure(a) + rects_measure(b), 1.0));
        CHECK(r.verdict == Verdict::Verified);
    }
}

TEST_CASE("ball doubling curve") {
    const auto so3 = ball_doubling_curve(make_so3(), {0.025, 0.05, 0.1, 0.2}, 1);
    for (const auto& p : so3.points) {
        const double exact = so3_ball(2 * p.rho) / so3_ball(p.rho);
        CHECK(p.ratio == doctest::Approx(exact).epsilon(1e-9));
    }
    CHECK(so3.points[1].ratio > 7.5);
    CHECK(so3.points[1].ratio < 8.0);
    CHECK(so3.S_ci95.lower > 0);
    // deficit is nonnegative and grows with rho
    double prev = 0;
    for (const auto& p : so3.points) {
        const double deficit = 1 - p.ratio / 8;
        CHECK(deficit >= prev);
        prev = deficit;
    }
    const auto t3 = ball_doubling_curve(make_torus(3), {0.025, 0.05, 0.1, 0.2}, 1);
    CHECK(std::abs(t3.S) <= 1e-9);
    for (const auto& p : t3.points) CHECK(p.ratio == doctest::Approx(8.0));
    // SU2 has half the normalized scale of SO3, so its S is four times larger
    const auto su2 = ball_doubling_curve(make_su2(), {0.0125, 0.025, 0.05, 0.1}, 1);
    CHECK(su2.S / 4 == doctest::Approx(so3.S).epsilon(0.15));
    const auto so4 = ball_doubling_curve(make_son(4), {0.025, 0.05, 0.1}, 1);
    CHECK(so4.S_ci95.lower > 0);
    CHECK(so4.two_pow_d == 64);
    CHECK_THROWS_AS(ball_doubling_curve(make_so3(), {0.3}, 1), std::invalid_argument);
    CHECK_THROWS_AS(ball_doubling_curve(parse_group("so3xt1"), {0.1}, 1), std::invalid_argument);
}

TEST_CASE("double counting: tube, rectangle, empty") {
    const auto net = build_scattered_net(make_so3(), 30000, 6);
    const auto G = net->group();
    const auto H = builtin_subgroup(G, "so2_z");
    const auto T = discretize(*tube(H, 0.08), net);
    const auto rt = double_counting_check(T, H, 0.1, 0.1, 100, 1);
    CHECK(rt.verdict == Verdict::Verified);
    // every slice of a tube has the same mass, so the quadrature has no spread
    // beyond discretization
    CHECK(rt.details.at("nominal_lhs").get<double>() ==
          doctest::Approx(rt.details.at("nominal_rhs").get<double>()).epsilon(0.1));
    const auto R = discretize(*rectangle(H, G->identity(), 0.05, 0.1), net);
    const auto rr = double_counting_check(R, H, 0.05, 0.1, 200, 2);
    CHECK(rr.verdict == Verdict::Verified);
    const double nd = std::abs(rr.details.at("nominal_lhs").get<double>() - rr.details.at("nominal_rhs").get<double>());
    CHECK(nd <= 3 * rr.details.at("nominal_stderr").get<double>() + 1e-12);
    const auto re = double_counting_check(empty_cells(net), H, 0.05, 0.1, 10, 3);
    CHECK(re.lhs.upper == 0.0);
    CHECK(re.rhs.upper == 0.0);
    CHECK(re.verdict == Verdict::Verified);
    CHECK_THROWS_AS(double_counting_check(T, H, 0.03, 0.1, 10, 1), ContainmentError);
}

TEST_CASE("near-subgroup expansion") {
    const auto G = make_so3();
    const auto H = builtin_subgroup(G, "so2_z");
    const auto A = discretize(*tube(H, 0.04), tube_net());
    const auto r = near_subgroup_expansion_check(A, A, H, 0.1);
    CHECK(r.verdict == Verdict::Verified);
    const double m = r.details.at("measure_A").at("lower").get<double>();
    CHECK(r.lhs.upper / m == doctest::Approx(4.0).epsilon(0.02));
    // deficit 4 m for tubes
    CHECK(r.fitted_constants.at("epsilon_empirical") == doctest::Approx(4 * m).epsilon(0.1));
    CHECK(r.details.at("optimal_c_verdict") == "verified");
    const auto B = discretize(*tube(H, 0.02), tube_net());
    const auto r2 = near_subgroup_expansion_check(A, B, H, 0.1);
    CHECK(r2.fitted_constants.at("alpha_mid") <= r.fitted_constants.at("alpha_mid") + 1e-3);
    CHECK(r2.details.at("slicing_bound_c_optimal").get<double>() >=
          r2.details.at("slicing_bound_c_one").get<double>());
    // the optimal slicing bound reproduces the k-th-root sum
    CHECK(r2.details.at("slicing_bound_c_optimal").get<double>() ==
          doctest::Approx(r2.details.at("bm_sum_mid").get<double>()).epsilon(1e-9));
    // tiny B: the min form holds with no correction at all
    const auto tiny = discretize(*tube(H, 0.002), tube_net());
    CHECK(near_subgroup_expansion_check(A, tiny, H, 0.1, 0.0).details.at("expansion_verdict") == "verified");
    CHECK_THROWS_AS(near_subgroup_expansion_check(A, A, H, 0.05), ContainmentError);
}

TEST_CASE("property: no violated verdicts for true statements on tori") {
    Rng rng(11);
    std::uniform_real_distribution<double> u(0.0, 1.0), l(0.0, 0.25), w(0.02, 0.2);
    int instances = 0, wrong = 0;
    const auto net = t1_net();
    for (int t = 0; t < 60; ++t) {
        std::vector<Arc> a{{u(rng), l(rng)}}, b{{u(rng), l(rng)}};
        if (t % 3 == 0) a.push_back({u(rng), l(rng)});
        if (t % 4 == 0) b.push_back({u(rng), l(rng)});
        const auto A = arcs_set(net, a), B = arcs_set(net, b);
        const double ma = arcs_measure(a), mb = arcs_measure(b), mab = arcs_measure(arc_sum(a, b));
        const double maa = arcs_measure(arc_sum(a, a));
        auto tally = [&](const InequalityReport& r, bool truth, double exact_lhs) {
            ++instances;
            if (r.verdict == Verdict::Violated && truth) ++wrong;
            if (r.verdict == Verdict::Verified && !truth) ++wrong;
            if (!r.lhs.contains(exact_lhs, 1e-12)) ++wrong;
        };
        tally(kemperman_check(A, B), mab >= std::min(ma + mb, 1.0), mab);
        tally(check_brunn_minkowski(A, B, 1, 0.0), mab >= ma + mb, mab);
        if (ma > 0.002) tally(check_minimal_doubling(A, 0.0), maa >= 2 * ma, maa);
    }
    const auto net2 = t2_net();
    const auto H = builtin_subgroup(net2->group(), "t1_x");
    for (int t = 0; t < 40; ++t) {
        // thin boxes near the x-axis circle
        const std::vector<Rect> a{{u(rng), -0.05 * u(rng), w(rng), 0.05 * u(rng) + 0.01}};
        const std::vector<Rect> b{{u(rng), -0.05 * u(rng), w(rng), 0.05 * u(rng) + 0.01}};
        const auto A = rects_set(net2, a), B = rects_set(net2, b);
        const double ma = rects_measure(a), mb = rects_measure(b), mab = rects_measure(rect_sum(a, b));
        const auto r = kemperman_check(A, B);
        ++instances;
        if (r.verdict == Verdict::Violated) ++wrong;
        if (!r.lhs.contains(mab, 1e-12)) ++wrong;
        const auto e = near_subgroup_expansion_check(A, B, H, 0.25, 0.0, 0.0);
        ++instances;
        const bool truth = mab >= 2 * std::min(ma, mb);
        if (e.details.at("expansion_verdict") == "violated" && truth) ++wrong;
        if (e.details.at("expansion_verdict") == "verified" && !truth) ++wrong;
    }
    CHECK(instances >= 100);
    CHECK(wrong == 0);
}

TEST_CASE("reports: JSON round trip and CSV") {
    const auto A = arcs_set(t1_net(), {{0.1, 0.2}});
    auto r = kemperman_check(A, A);
    r.seed = 42;
    r.runtime_ms = 12.5;
    const auto j = r.to_json();
    CHECK_FALSE(j.contains("runtime_ms"));
    CHECK(r.to_json(true).at("runtime_ms") == 12.5);
    const auto back = InequalityReport::from_json(j);
    CHECK(back.to_json() == j);
    CHECK(back.net_hash == r.net_hash);
    const auto csv = reports_csv({r, check_minimal_doubling(A)});
    CHECK(csv.rfind("name,verdict,lhs_lower,lhs_upper,rhs_lower,rhs_upper,net_hash,seed", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
    CHECK(csv.find("C_empirical") != std::string::npos);
}

TEST_CASE("power-law fit") {
    const auto f = fit_power_law({0.1, 0.2, 0.4}, {3 * 0.01, 3 * 0.04, 3 * 0.16});
    CHECK(f.p == doctest::Approx(2.0));
    CHECK(f.C == doctest::Approx(3.0));
    CHECK(f.p_stderr < 1e-9);
    CHECK_THROWS(fit_power_law({0.1}, {1.0}));
}

}  // TEST_SUITE
