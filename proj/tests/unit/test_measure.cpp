#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numbers>

#include "haarlab/cellset.hpp"
#include "haarlab/expr.hpp"
#include "helpers.hpp"

using namespace haarlab;

namespace {

constexpr double kPi = std::numbers::pi;

// Haar mass of the SO(3) ball of normalized radius t (rotation angle pi t).
double so3_ball(double t) {
    t = std::clamp(t, 0.0, 1.0);
    return (kPi * t - std::sin(kPi * t)) / kPi;
}
// Haar mass of the tube of width t around the z-circle in SO(3).
double so3_tube(double t) { return 0.5 * (1 - std::cos(kPi * std::clamp(t, 0.0, 1.0))); }

std::shared_ptr<const ScatteredNet> so3_net() {
    static auto net = build_scattered_net(make_so3(), 20000, 7);
    return net;
}

std::shared_ptr<const LatticeNet> t1_net() {
    static auto net = build_lattice_net(make_torus(1), 1000);
    return net;
}

std::shared_ptr<const LatticeNet> t2_net() {
    static auto net = build_lattice_net(make_torus(2), 64);
    return net;
}

bool contains(const MeasureEstimate& m, double v, double slack = 1e-12) {
    return m.lower - slack <= v && v <= m.upper + slack;
}

bool subset(const CellBits& a, const CellBits& b) { return a.is_subset_of(b); }

CellSet arc_set(const NetPtr& net, double lo, double len) {
    return discretize(*box_region(net->group(), TorusBox{{lo}, {len}}), net);
}

// Exact measure of a union of arcs on the circle.
double arcs_measure(std::vector<std::pair<double, double>> arcs) {
    std::vector<std::pair<double, double>> iv;
    for (auto [lo, len] : arcs) {
        if (len >= 1) return 1.0;
        lo -= std::floor(lo);
        if (lo + len <= 1) iv.push_back({lo, lo + len});
        else {
            iv.push_back({lo, 1.0});
            iv.push_back({0.0, lo + len - 1});
        }
    }
    std::sort(iv.begin(), iv.end());
    double total = 0, cur_lo = -1, cur_hi = -1;
    for (auto [a, b] : iv) {
        if (a > cur_hi) {
            total += cur_hi - cur_lo;
            cur_lo = a;
            cur_hi = b;
        } else {
            cur_hi = std::max(cur_hi, b);
        }
    }
    return total + (cur_hi - cur_lo);
}

}  // namespace

TEST_SUITE("measure_engine") {

TEST_CASE("lattice net on the circle") {
    const auto net = t1_net();
    CHECK(net->size() == 1000);
    // half a cell is 1/2000 of the circumference
    CHECK(net->cell_radius() * net->group()->diameter_raw() == doctest::Approx(1.0 / 2000));
    double s = 0;
    for (double w : net->weights()) {
        CHECK(w == doctest::Approx(1e-3));
        s += w;
    }
    CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(net->locate(net->center(437)) == 437);
    CHECK(build_net(make_torus(2), 4096, 1)->kind() == NetKind::Lattice);
}

TEST_CASE("scattered net: weights, covering radius, count") {
    const auto net = so3_net();
    CHECK(std::abs(double(net->size()) / 20000 - 1) <= 0.05);
    double s = 0;
    for (double w : net->weights()) {
        CHECK(w >= 0.0);
        s += w;
    }
    CHECK(std::abs(s - 1.0) <= 1e-9);
    // independent Haar samples stay within the certified radius
    const auto G = net->group();
    const auto xs = G->haar_sample(424242, 100000);
    double worst = 0;
    for (const auto& x : xs) worst = std::max(worst, net->nearest(x).distance);
    CHECK(worst <= net->cell_radius());
    // nearest agrees with brute force on a few points
    for (int i = 0; i < 20; ++i) {
        double best = 2;
        std::size_t arg = 0;
        for (std::size_t k = 0; k < net->size(); ++k) {
            const double d = G->distance(xs[i], net->center(k));
            if (d < best) {
                best = d;
                arg = k;
            }
        }
        const auto nb = net->nearest(xs[i]);
        CHECK(nb.distance == doctest::Approx(best).epsilon(1e-9));
        CHECK(G->distance(xs[i], net->center(nb.index)) == doctest::Approx(best).epsilon(1e-9));
        (void)arg;
    }
}

TEST_CASE("scattered net: radius scales like N^(-1/d)") {
    const auto a = build_scattered_net(make_so3(), 4000, 3);
    const auto b = build_scattered_net(make_so3(), 8000, 3);
    const double ratio = (a->cell_radius() / b->cell_radius()) *
                         std::pow(double(a->size()) / 4000 * 8000 / double(b->size()), -1.0 / 3);
    MESSAGE("radius ratio " << ratio << " vs 2^(1/3) = " << std::cbrt(2.0));
    CHECK(ratio >= 1.1);
    CHECK(ratio <= 1.45);
}

TEST_CASE("scattered nets on the other families") {
    for (const auto& name : {"so4", "so5", "so3xt1", "su2"}) {
        const auto G = parse_group(name);
        const auto net = build_scattered_net(G, 3000, 5);
        INFO(name);
        CHECK(std::abs(double(net->size()) / 3000 - 1) <= 0.05);
        double worst = 0;
        for (const auto& x : G->haar_sample(9, 5000)) worst = std::max(worst, net->nearest(x).distance);
        CHECK(worst <= net->cell_radius());
        std::vector<Neighbor> nb;
        const auto c = net->center(17);
        net->within(c, 2 * net->cell_radius(), nb);
        CHECK(std::any_of(nb.begin(), nb.end(), [](const Neighbor& n) { return n.index == 17 && n.distance == 0; }));
        for (const auto& n : nb) CHECK(G->distance(c, net->center(n.index)) <= 2 * net->cell_radius() + 1e-12);
    }
}

TEST_CASE("discretize: full, empty, inner within outer") {
    for (NetPtr net : {NetPtr(so3_net()), NetPtr(t1_net())}) {
        const auto G = net->group();
        const auto full = discretize(*full_region(G), net);
        CHECK(full.inner.all());
        CHECK(full.outer.all());
        const auto m = measure(full);
        CHECK(m.lower == doctest::Approx(1.0));
        CHECK(m.upper == doctest::Approx(1.0));
        const auto empty = discretize(*empty_region(G), net);
        CHECK(empty.outer.none());
        CHECK(measure(empty).upper == 0.0);
        const auto ball = discretize(*ball_region(G, G->identity(), 0.2), net);
        CHECK(subset(ball.inner, *ball.nominal));
        CHECK(subset(*ball.nominal, ball.outer));
    }
}

TEST_CASE("discretize: SO3 ball bracket against Monte Carlo and closed form") {
    const auto net = so3_net();
    const auto G = net->group();
    Rng rng(1);
    const auto c = G->haar_draw(rng);
    const auto R = ball_region(G, c, 0.2);
    const auto m = measure(discretize(*R, net));
    const auto mc = mc_measure(*R, 1000000, 11);
    CHECK(m.lower <= mc.upper);
    CHECK(mc.lower <= m.upper);
    CHECK(contains(m, so3_ball(0.2)));
    CHECK(contains(mc, so3_ball(0.2)));
}

TEST_CASE("measure: circle arc bracket") {
    const auto net = t1_net();
    const auto A = arc_set(net, 0.1234, 0.3);
    const auto m = measure(A);
    CHECK(contains(m, 0.3));
    CHECK(m.width() <= 4 * net->cell_radius() + 1e-12);
    // the lattice weights are exact: width is at most two cells
    CHECK(m.width() <= 2e-3 + 1e-12);
}

TEST_CASE("product: circle arcs add") {
    const auto net = t1_net();
    for (auto [a, b] : std::vector<std::pair<double, double>>{{0.2, 0.3}, {0.45, 0.7}, {0.01, 0.02}}) {
        const auto m = measure(minkowski_product(arc_set(net, 0.3, a), arc_set(net, 0.9, b)));
        CHECK(contains(m, std::min(a + b, 1.0)));
    }
}

TEST_CASE("product: identity factor dilates by about one cell") {
    const auto net = so3_net();
    const auto G = net->group();
    const double r = net->cell_radius();
    const auto A = discretize(*ball_region(G, G->identity(), 0.15), net);
    const auto E = discretize(*ball_region(G, G->identity(), 2.5 * r), net);
    REQUIRE(E.inner.any());
    const auto AE = minkowski_product(A, E);
    const auto m = measure(AE);
    // A E is the ball of radius 0.15 + 2.5 r
    CHECK(contains(m, so3_ball(0.15 + 2.5 * r)));
    CHECK(subset(A.inner, AE.outer));
}

TEST_CASE("product: balls multiply to the ball of summed radius") {
    const auto net = so3_net();
    const auto G = net->group();
    Rng rng(2);
    for (int t = 0; t < 3; ++t) {
        const auto g = G->haar_draw(rng), h = G->haar_draw(rng);
        const auto A = discretize(*ball_region(G, g, 0.12), net);
        const auto B = discretize(*ball_region(G, h, 0.1), net);
        const auto m = measure(minkowski_product(A, B));
        CHECK(contains(m, so3_ball(0.22)));
        CHECK(m.lower > 0);
    }
}

TEST_CASE("product: tube square on a zonal net and on a scattered net") {
    const auto G = make_so3();
    const auto H = builtin_subgroup(G, "so2_z");
    const double delta = 0.05;
    const auto zn = build_zonal_net(G, "so3_tube", 20000);
    const auto A = discretize(*tube(H, delta), zn);
    const auto m = measure(minkowski_product(A, A));
    CHECK(contains(m, so3_tube(2 * delta)));
    CHECK(m.width() < 1e-3);
    const auto mc = mc_measure(*tube(H, 2 * delta), 200000, 5);
    CHECK(m.lower <= mc.upper);
    CHECK(mc.lower <= m.upper);

    const auto net = so3_net();
    const auto S = discretize(*tube(H, 0.08), net);
    const auto ms = measure(minkowski_product(S, S));
    CHECK(contains(ms, so3_tube(0.16)));
}

TEST_CASE("zonal products follow the exact shell arithmetic") {
    const auto G = make_so3();
    const auto zc = build_zonal_net(G, "so3_class", 4000);
    const auto B = discretize(*ball_region(G, G->identity(), 0.3), zc);
    CHECK(contains(measure(minkowski_product(B, B)), so3_ball(0.6)));
    const auto B2 = discretize(*ball_region(G, G->identity(), 0.7), zc);
    // products of large classes reach the rotations by pi
    CHECK(measure(minkowski_product(B2, B2)).lower == doctest::Approx(1.0));
    // tubes beyond the equator fold back
    const auto zt = build_zonal_net(G, "so3_tube", 4000);
    const auto H = builtin_subgroup(G, "so2_z");
    const auto shell = discretize(*inter_region(tube(H, 0.49), full_region(G)), zt);
    CHECK(contains(measure(minkowski_product(shell, shell)), so3_tube(0.98)));
    const auto U = make_su2();
    const auto zu = build_zonal_net(U, "su2_class", 4000);
    const auto Bu = discretize(*ball_region(U, U->identity(), 0.2), zu);
    const double exact = (2 * kPi * 0.4 - std::sin(2 * kPi * 0.4)) / (2 * kPi);
    CHECK(contains(measure(minkowski_product(Bu, Bu)), exact));
    CHECK_THROWS(translate(Bu, U->exp_map(basis_vector(3, 0) * 0.1)));
    CHECK_THROWS(discretize(*ball_region(U, U->exp_map(basis_vector(3, 0) * 0.1), 0.2), zu));
}

TEST_CASE("translate: identity, invariance, round trip") {
    const auto net = so3_net();
    const auto G = net->group();
    const auto A = discretize(*ball_region(G, G->identity(), 0.2), net);
    const auto same = translate(A, G->identity());
    CHECK(same.inner == A.inner);
    CHECK(same.outer == A.outer);
    const auto mA = measure(A);
    Rng rng(3);
    for (int i = 0; i < 20; ++i) {
        const auto g = G->haar_draw(rng);
        const auto side = i % 2 ? Side::Left : Side::Right;
        const auto T = translate(A, g, side);
        const auto mT = measure(T);
        CHECK(mT.lower <= mA.upper);
        CHECK(mA.lower <= mT.upper);
        CHECK(contains(mT, so3_ball(0.2)));
        if (i < 3) {
            const auto back = translate(T, G->inverse(g), side);
            CHECK(subset(A.inner, back.outer));
            CHECK(subset(back.inner, A.outer));
        }
    }
}

TEST_CASE("translate on the lattice is exact for grid shifts") {
    const auto net = t1_net();
    const auto G = net->group();
    const auto A = arc_set(net, 0.10047, 0.3);
    const auto T = translate(A, G->element_from_params({0.25}));
    const auto B = arc_set(net, 0.35047, 0.3);
    CHECK(T.inner == B.inner);
    CHECK(T.outer == B.outer);
    const auto U = translate(A, G->element_from_params({0.2503}));
    CHECK(contains(measure(U), 0.3));
}

TEST_CASE("slice: Ad-invariance, wide rho, empty") {
    const auto net = so3_net();
    const auto G = net->group();
    const auto H = builtin_subgroup(G, "so2_z");
    const auto A = discretize(*tube(H, 0.06), net);
    Rng rng(4);
    std::vector<MeasureEstimate> ms;
    for (int i = 0; i < 6; ++i) ms.push_back(measure(slice(A, H, H->sample(rng), 0.05, 0.1)));
    for (const auto& a : ms)
        for (const auto& b : ms) {
            CHECK(a.lower <= b.upper + 1e-12);
            CHECK(b.lower <= a.upper + 1e-12);
        }
    // MC oracle: rectangle mass is rho times the tube mass
    CHECK(contains(ms[0], 0.1 * so3_tube(0.05), 0.0));
    const auto wide = slice(A, H, G->identity(), 0.05, 1.0);
    const auto direct = cell_intersection(A, discretize(*tube(H, 0.05), net));
    CHECK(contains(measure(wide), so3_tube(0.05)));
    CHECK(measure(wide).lower <= measure(direct).upper);
    CHECK(measure(direct).lower <= measure(wide).upper);
    CHECK(slice(empty_cells(net), H, G->identity(), 0.05, 0.1).outer.none());
    CHECK_THROWS_AS(slice(A, H, G->identity(), 0.2, 0.1), ChartError);
}

TEST_CASE("mc_measure: full, monotone, agreement with brackets") {
    const auto G = make_so3();
    const auto full = mc_measure(*full_region(G), 5000, 1);
    CHECK(full.upper == 1.0);
    CHECK(full.lower > 0.999);
    const auto H = builtin_subgroup(G, "so2_z");
    double prev = 0;
    for (double d : {0.02, 0.05, 0.1, 0.2}) {
        const auto m = mc_measure(*tube(H, d), 20000, 2);
        CHECK(*m.nominal >= prev);
        prev = *m.nominal;
        CHECK(m.mc_stderr.has_value());
    }
    CHECK_THROWS(mc_measure(*full_region(G), 10, 1));
}

TEST_CASE("property: product brackets contain exact circle sumsets") {
    const auto net = t1_net();
    Rng rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0), l(0.0, 0.3);
    int violations = 0;
    for (int t = 0; t < 50; ++t) {
        std::vector<std::pair<double, double>> a{{u(rng), l(rng)}, {u(rng), l(rng)}}, b{{u(rng), l(rng)}};
        if (t % 2) b.push_back({u(rng), l(rng)});
        auto region = [&](const std::vector<std::pair<double, double>>& arcs) {
            RegionPtr r = box_region(net->group(), TorusBox{{arcs[0].first}, {arcs[0].second}});
            for (std::size_t i = 1; i < arcs.size(); ++i)
                r = union_region(r, box_region(net->group(), TorusBox{{arcs[i].first}, {arcs[i].second}}));
            return r;
        };
        std::vector<std::pair<double, double>> sum;
        for (auto x : a)
            for (auto y : b) sum.push_back({x.first + y.first, x.second + y.second});
        const double exact = arcs_measure(sum);
        const auto m = measure(minkowski_product(discretize(*region(a), net), discretize(*region(b), net)));
        if (!contains(m, exact)) ++violations;
    }
    CHECK(violations == 0);
}

TEST_CASE("property: product brackets contain exact torus box sumsets") {
    const auto net = t2_net();
    const auto G = net->group();
    Rng rng(6);
    std::uniform_real_distribution<double> u(0.0, 1.0), l(0.02, 0.6);
    int violations = 0;
    for (int t = 0; t < 50; ++t) {
        const TorusBox a{{u(rng), u(rng)}, {l(rng), l(rng)}}, b{{u(rng), u(rng)}, {l(rng), l(rng)}};
        const double exact = std::min(a.len[0] + b.len[0], 1.0) * std::min(a.len[1] + b.len[1], 1.0);
        const auto m = measure(minkowski_product(discretize(*box_region(G, a), net), discretize(*box_region(G, b), net)));
        if (!contains(m, exact)) ++violations;
    }
    CHECK(violations == 0);
}

TEST_CASE("property: monotonicity of products") {
    const auto net = so3_net();
    const auto G = net->group();
    Rng rng(7);
    const auto g = G->haar_draw(rng);
    const auto A = discretize(*ball_region(G, g, 0.08), net);
    const auto A2 = discretize(*ball_region(G, g, 0.12), net);
    const auto B = discretize(*tube(builtin_subgroup(G, "so2_z"), 0.05), net);
    const auto P = minkowski_product(A, B), P2 = minkowski_product(A2, B);
    CHECK(subset(P.outer, P2.outer));
    CHECK(measure(P).lower <= measure(P2).lower);
    const auto L = t1_net();
    const auto a = arc_set(L, 0.2, 0.1), a2 = arc_set(L, 0.15, 0.2), b = arc_set(L, 0.7, 0.05);
    CHECK(subset(minkowski_product(a, b).outer, minkowski_product(a2, b).outer));
    CHECK(measure(minkowski_product(a, b)).lower <= measure(minkowski_product(a2, b)).lower);
}

TEST_CASE("property: translation invariance of measure brackets") {
    const auto net = so3_net();
    const auto G = net->group();
    const auto A = discretize(*tube(builtin_subgroup(G, "so2_z"), 0.1), net);
    const auto mA = measure(A);
    Rng rng(8);
    for (int i = 0; i < 20; ++i) {
        const auto mT = measure(translate(A, G->haar_draw(rng)));
        // widths plus the Voronoi-weight noise of a boundary layer
        CHECK(std::abs(mT.mid() - mA.mid()) <= 0.5 * (mT.width() + mA.width()) + 0.002);
    }
}

TEST_CASE("property: associativity up to dilation") {
    // lattice outer sets agree exactly
    const auto L = t2_net();
    const auto G2 = L->group();
    const auto a = discretize(*box_region(G2, {{0.1, 0.2}, {0.1, 0.05}}), L);
    const auto b = discretize(*box_region(G2, {{0.5, 0.7}, {0.03, 0.2}}), L);
    const auto c = discretize(*box_region(G2, {{0.9, 0.1}, {0.2, 0.1}}), L);
    CHECK(minkowski_product(minkowski_product(a, b), c).outer ==
          minkowski_product(a, minkowski_product(b, c)).outer);
    // scattered: each side is inside the other dilated by two cell diameters
    const auto net = so3_net();
    const auto G = net->group();
    Rng rng(9);
    const auto A = discretize(*ball_region(G, G->haar_draw(rng), 0.05), net);
    const auto B = discretize(*ball_region(G, G->haar_draw(rng), 0.04), net);
    const auto C = discretize(*ball_region(G, G->haar_draw(rng), 0.05), net);
    const auto left = minkowski_product(minkowski_product(A, B), C).outer;
    const auto right = minkowski_product(A, minkowski_product(B, C)).outer;
    auto dilate = [&](const CellBits& x) {
        CellBits out(x.size());
        std::vector<Neighbor> nb;
        for (auto i = x.find_first(); i != CellBits::npos; i = x.find_next(i)) {
            nb.clear();
            net->within(net->center(i), 4 * net->cell_radius(), nb);
            for (const auto& n : nb) out[n.index] = true;
        }
        return out;
    };
    CHECK(subset(left, dilate(right)));
    CHECK(subset(right, dilate(left)));
}

TEST_CASE("union and intersection") {
    const auto net = t1_net();
    const auto a = arc_set(net, 0.1, 0.2), b = arc_set(net, 0.2, 0.2);
    CHECK(contains(measure(cell_union(a, b)), 0.3));
    CHECK(contains(measure(cell_intersection(a, b)), 0.1));
    CHECK_THROWS_AS(cell_union(a, arc_set(build_lattice_net(make_torus(1), 100), 0.1, 0.2)), NetMismatch);
}

TEST_CASE("serialization round trip and errors") {
    const auto net = so3_net();
    const auto G = net->group();
    const auto A = discretize(*ball_region(G, G->identity(), 0.2), net);
    const auto path = (std::filesystem::temp_directory_path() / "haarlab_cellset_test.hcs").string();
    save_cellset(A, path);
    const auto B = load_cellset(path, net);
    CHECK(B.inner == A.inner);
    CHECK(B.outer == A.outer);
    CHECK(*B.nominal == *A.nominal);
    CHECK(B.certified == A.certified);
    auto bytes = encode_cellset(A);
    CHECK(bytes[0] == 'H');
    CHECK(bytes[4] == 1);  // little-endian version
    CHECK_THROWS_AS(decode_cellset(bytes, build_lattice_net(make_torus(1), 10)), NetMismatch);
    bytes[0] = 'X';
    CHECK_THROWS(decode_cellset(bytes, net));
    std::filesystem::remove(path);
}

TEST_CASE("expressions: parse, print, errors") {
    for (std::string s : {"ball:1,0,0,0:0.2", "tube:so2_z:0.05", "rect:so2_z:e:0.05:0.1",
                          "union(ball:e:0.1,translate(tube:0:so2_z:0.03,0.1,0,0))", "inter(box:0.1:0.2,box:0.2:0.3)",
                          "file:/tmp/x.hcs"}) {
        const auto e = parse_expression(s);
        CHECK(to_string(*e) == s);
    }
    CHECK(to_string(*parse_expression(" union( ball:e:0.1 , ball:e:0.2 ) ")) == "union(ball:e:0.1,ball:e:0.2)");
    try {
        parse_expression("union(ball:e:0.1;ball:e:0.2)");
        FAIL("expected a parse error");
    } catch (const ExpressionError& err) {
        CHECK(err.line == 1);
        CHECK(err.column == 17);
    }
    try {
        parse_expression("ball:e:0.1,\n  blob:3");
        FAIL("expected a parse error");
    } catch (const ExpressionError& err) {
        CHECK(err.line == 1);
        CHECK(err.column == 11);
    }
    CHECK_THROWS_AS(parse_expression("tube::0.1"), ExpressionError);
    CHECK_THROWS_AS(parse_expression("box:0.1,0.2:0.3"), ExpressionError);
}

TEST_CASE("expressions: evaluation on nets") {
    const auto net = t1_net();
    const auto A = evaluate_expression(*parse_expression("union(box:0.1:0.2,box:0.2:0.2)"), net);
    CHECK(contains(measure(A), 0.3));
    const auto path = (std::filesystem::temp_directory_path() / "haarlab_expr_test.hcs").string();
    save_cellset(A, path);
    const auto B = evaluate_expression(*parse_expression("translate(file:" + path + ",0.5)"), net);
    CHECK(contains(measure(B), 0.3));
    CHECK(B.outer == translate(A, net->group()->element_from_params({0.5})).outer);
    std::filesystem::remove(path);
    const auto G = make_so3();
    const auto zn = build_zonal_net(G, "so3_class", 1000);
    CHECK(contains(measure(evaluate_expression(*parse_expression("ball:e:0.3"), zn)), so3_ball(0.3)));
    CHECK_THROWS(expression_region(*parse_expression("file:/nonexistent"), G));
    CHECK_THROWS_AS(evaluate_expression(*parse_expression("tube:u1:0.1"), zn), std::invalid_argument);
}

}  // TEST_SUITE
