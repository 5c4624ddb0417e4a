// haarlab command-line driver: one experiment per invocation.
//
// Exit codes: 0 verified or diagnostic run finished, 2 violated,
// 3 inconclusive, 1 usage or input error.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "haarlab/expr.hpp"
#include "haarlab/inequality.hpp"
#include "haarlab/stability.hpp"
#include "haarlab/transport.hpp"
#include "haarlab/version.hpp"

using namespace haarlab;
namespace fs = std::filesystem;

namespace {

constexpr const char* kGrammar =
    "set expression grammar:\n"
    "  ball:<c1>,<c2>,...:<r>            (center coordinates or e)\n"
    "  tube:<subgroup>:<delta>\n"
    "  rect:<subgroup>:<h1>,...:<delta>:<rho>\n"
    "  box:<lo1>,...:<len1>,...          (tori)\n"
    "  union(<e1>,<e2>)  inter(<e1>,<e2>)  translate(<e>,<g1>,...)\n"
    "  file:<path>\n";

constexpr const char* kOutDirEnv = "HAARLAB_OUT_DIR";

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Common {
    std::uint64_t seed = 0;
    std::string group = "so3";
    std::size_t cells = 20000;
    std::string net = "auto";
    std::string out;
    std::string csv;
    int threads = 1;
};

struct Result {
    nlohmann::json report;
    std::string csv;
    int exit_code = 0;
    NetPtr net;
};

int exit_for(Verdict v) {
    switch (v) {
        case Verdict::Verified: return 0;
        case Verdict::Violated: return 2;
        case Verdict::Inconclusive: return 3;
    }
    return 1;
}

ExprPtr parse_or_throw(const std::string& text) {
    if (text.empty()) throw UsageError("missing set expression");
    return parse_expression(text);
}

// Zonal nets when every set has an exact profile for one of the group's
// keys, lattice nets on tori, scattered nets otherwise.
NetPtr make_net(const Common& c, const GroupPtr& G, const std::vector<ExprPtr>& exprs) {
    const std::string& kind = c.net;
    if (kind == "scattered") return build_scattered_net(G, c.cells, c.seed);
    if (kind == "lattice") {
        const int per = static_cast<int>(std::lround(std::pow(double(c.cells), 1.0 / G->dim())));
        return build_lattice_net(G, std::max(per, 2));
    }
    if (kind.rfind("zonal:", 0) == 0) return build_zonal_net(G, kind.substr(6), c.cells);
    if (kind != "auto") throw UsageError("unknown --net '" + kind + "' (auto, scattered, lattice, zonal:<key>)");
    for (const auto& key : zonal_keys(*G)) {
        bool ok = !exprs.empty();
        for (const auto& e : exprs) {
            if (references_file(*e)) {
                ok = false;
                break;
            }
            if (!expression_region(*e, G)->zonal_profile(key)) {
                ok = false;
                break;
            }
        }
        if (ok) return build_zonal_net(G, key, c.cells);
    }
    return build_net(G, c.cells, c.seed);
}

std::vector<double> parse_list(const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        try {
            std::size_t pos = 0;
            out.push_back(std::stod(tok, &pos));
            if (pos != tok.size()) throw std::invalid_argument(tok);
        } catch (const std::exception&) {
            throw UsageError("bad number '" + tok + "' in list '" + s + "'");
        }
    }
    if (out.empty()) throw UsageError("empty list");
    return out;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw UsageError("cannot read " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw UsageError("cannot write " + path.string());
    out << text;
}

void add_common(CLI::App* sub, Common& c, bool with_net) {
    sub->add_option("--seed", c.seed, "Random seed (required)")->required();
    sub->add_option("--out", c.out, "JSON report path (default: $" + std::string(kOutDirEnv) + "/<command>.json)");
    sub->add_option("--csv", c.csv, "CSV output path, for commands with tabular output");
    sub->add_option("--threads", c.threads, "Worker threads")->check(CLI::Range(1, 256));
    sub->add_option("--group", c.group, "Carrier group: su2, so3, so4, so5, t1..t4, products like so3xt1");
    if (with_net) {
        sub->add_option("--cells", c.cells, "Net size")->check(CLI::Range(2, 50000000));
        sub->add_option("--net", c.net, "Net kind: auto, scattered, lattice, zonal:<key>");
    }
}

nlohmann::json envelope(const std::string& cmd, const Common& c, const Result& r) {
    nlohmann::json j;
    j["command"] = cmd;
    j["version"] = kVersion;
    j["modules"] = module_versions();
    j["seed"] = c.seed;
    j["group"] = c.group;
    j["net"] = r.net ? r.net->describe() : nlohmann::json(nullptr);
    j["report"] = r.report;
    return j;
}

int emit(const std::string& cmd, const Common& c, const Result& r, double runtime_ms,
         const std::vector<std::string>& argv) {
    const std::string text = envelope(cmd, c, r).dump(2) + "\n";
    std::cout << text;
    fs::path out = c.out;
    fs::path csv = c.csv;
    if (const char* dir = std::getenv(kOutDirEnv); dir && *dir) {
        if (out.empty()) out = fs::path(dir) / (cmd + ".json");
        if (csv.empty() && !r.csv.empty()) csv = fs::path(dir) / (cmd + ".csv");
    }
    if (!out.empty()) {
        write_file(out, text);
        fs::path meta = out;
        meta.replace_extension(".meta.json");
        const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
        char stamp[32];
        std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
        write_file(meta, nlohmann::json{{"runtime_ms", runtime_ms},
                                        {"finished_utc", stamp},
                                        {"threads", c.threads},
                                        {"argv", argv}}
                             .dump(2) +
                             "\n");
    }
    if (!csv.empty()) {
        if (r.csv.empty()) throw UsageError(cmd + " has no CSV output");
        write_file(csv, r.csv);
    }
    std::cerr << cmd << ": finished in " << std::llround(runtime_ms) << " ms, exit " << r.exit_code << "\n";
    return r.exit_code;
}

nlohmann::json group_summary(const GroupPtr& G) {
    return {{"name", G->name()},
            {"dim", G->dim()},
            {"abelian", G->abelian()},
            {"critical_exponent", critical_exponent(*G)},
            {"lie_algebra", lie_algebra_label(*G)},
            {"subgroups", builtin_subgroup_names(*G)},
            {"maximal_subgroups", maximal_subgroup_names(*G)},
            {"zonal_keys", zonal_keys(*G)},
            {"injectivity_radius", G->injectivity_radius()}};
}

std::string sweep_csv(const LocalBmSweep& s) {
    std::ostringstream os;
    os.precision(17);
    os << "rho,epsilon_empirical,epsilon_lower,epsilon_mid,used\n";
    for (std::size_t i = 0; i < s.rhos.size(); ++i) {
        const auto& f = s.reports[i].fitted_constants;
        os << s.rhos[i] << "," << f.at("epsilon_empirical") << "," << f.at("epsilon_lower") << ","
           << f.at("epsilon_mid") << "," << (s.used[i] ? 1 : 0) << "\n";
    }
    return os.str();
}

std::string curve_csv(const BallDoublingCurve& c) {
    std::ostringstream os;
    os.precision(17);
    os << "rho,ratio,stderr,band_lower,band_upper\n";
    for (const auto& p : c.points)
        os << p.rho << "," << p.ratio << "," << p.stderr_ << "," << p.ratio_band.lower << "," << p.ratio_band.upper
           << "\n";
    return os.str();
}

std::string slices_csv(const SliceProfile& p, const Group& G) {
    std::ostringstream os;
    os.precision(17);
    os << "i,h,lower,upper\n";
    for (std::size_t i = 0; i < p.h.size(); ++i)
        os << i << ",\"" << G.to_json(p.h[i]).dump() << "\"," << p.slices[i].lower << "," << p.slices[i].upper
           << "\n";
    return os.str();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"haarlab: measure, doubling and transport experiments on compact Lie groups"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);
    Common c;
    std::vector<std::string> args(argv, argv + argc);
    std::function<Result()> run;
    std::string cmd;

    auto bind = [&](CLI::App* sub, std::function<Result()> fn) {
        sub->callback([&, sub, fn] {
            cmd = sub->get_name();
            run = fn;
        });
    };

    // groups
    {
        auto* sub = app.add_subcommand("groups", "List carrier groups, subgroups and the maximal-dimension table");
        add_common(sub, c, false);
        bind(sub, [&] {
            Result r;
            nlohmann::json gs = nlohmann::json::array();
            for (const char* name : {"su2", "so3", "so4", "so5", "t1", "t2", "t3", "so3xt1"})
                gs.push_back(group_summary(parse_group(name)));
            r.report = {{"groups", gs}, {"catalog", catalog_json()}};
            std::ostringstream os;
            os << "family,rank,dim_g,codim,h\n";
            for (const auto& e : maximal_dimension_table())
                os << e.family << "," << e.rank << "," << e.dim_g << "," << e.codim << ",\"" << e.h_description
                   << "\"\n";
            r.csv = os.str();
            return r;
        });
    }

    // doubling
    std::string set_a, set_b;
    std::optional<double> constant, alpha;
    std::optional<int> k_exp;
    {
        auto* sub = app.add_subcommand("doubling", "Minimal doubling check mu(A^2) >= (2^k - C mu(A)^(2/k)) mu(A)");
        add_common(sub, c, true);
        sub->add_option("--set", set_a, "Set expression")->required();
        sub->add_option("--C", constant, "Constant C (default: certified empirical value)");
        bind(sub, [&] {
            const auto G = parse_group(c.group);
            const auto e = parse_or_throw(set_a);
            Result r;
            r.net = make_net(c, G, {e});
            const auto rep = check_minimal_doubling(evaluate_expression(*e, r.net), constant, c.threads);
            r.report = rep.to_json();
            r.csv = reports_csv({rep});
            r.exit_code = exit_for(rep.verdict);
            return r;
        });
    }

    // bm
    {
        auto* sub = app.add_subcommand("bm", "Brunn-Minkowski check mu(AB)^(1/k) >= (1 - alpha)(mu(A)^(1/k) + mu(B)^(1/k))");
        add_common(sub, c, true);
        sub->add_option("--setA", set_a, "Set expression for A")->required();
        sub->add_option("--setB", set_b, "Set expression for B")->required();
        sub->add_option("--k", k_exp, "Exponent (default: critical exponent)");
        sub->add_option("--alpha", alpha, "Defect alpha (default: certified empirical value)");
        bind(sub, [&] {
            const auto G = parse_group(c.group);
            const auto a = parse_or_throw(set_a), b = parse_or_throw(set_b);
            Result r;
            r.net = make_net(c, G, {a, b});
            const auto rep = check_brunn_minkowski(evaluate_expression(*a, r.net), evaluate_expression(*b, r.net),
                                                   k_exp, alpha, c.threads);
            r.report = rep.to_json();
            r.csv = reports_csv({rep});
            r.exit_code = exit_for(rep.verdict);
            return r;
        });
    }

    // local-bm
    double rho = 0.1;
    std::optional<double> eps;
    std::string rhos_text;
    double max_rel_width = 0.5;
    {
        auto* sub = app.add_subcommand("local-bm", "Local Brunn-Minkowski check with exponent dim G, or a ball sweep");
        add_common(sub, c, true);
        sub->add_option("--setA", set_a, "Set expression for A");
        sub->add_option("--setB", set_b, "Set expression for B");
        sub->add_option("--rho", rho, "Ball radius containing A and B");
        sub->add_option("--eps", eps, "Epsilon (default: certified empirical value)");
        sub->add_option("--rhos", rhos_text, "Sweep A = B = B(e, rho) over this comma list instead");
        sub->add_option("--max-relative-width", max_rel_width, "Bracket-width filter for the sweep fit");
        bind(sub, [&] {
            const auto G = parse_group(c.group);
            Result r;
            if (!rhos_text.empty()) {
                const auto rhos = parse_list(rhos_text);
                std::vector<ExprPtr> balls;
                for (double x : rhos) balls.push_back(parse_expression("ball:e:" + std::to_string(x)));
                r.net = make_net(c, G, balls);
                const auto s = local_bm_sweep(r.net, rhos, max_rel_width, c.threads);
                r.report = s.to_json();
                r.csv = sweep_csv(s);
                return r;
            }
            if (set_a.empty() || set_b.empty()) throw UsageError("local-bm needs --setA and --setB, or --rhos");
            const auto a = parse_or_throw(set_a), b = parse_or_throw(set_b);
            r.net = make_net(c, G, {a, b});
            const auto rep = check_local_bm(evaluate_expression(*a, r.net), evaluate_expression(*b, r.net), rho, eps,
                                            c.threads);
            r.report = rep.to_json();
            r.csv = reports_csv({rep});
            r.exit_code = exit_for(rep.verdict);
            return r;
        });
    }

    // kemperman
    {
        auto* sub = app.add_subcommand("kemperman", "Kemperman check mu(AB) >= min(mu(A) + mu(B), 1)");
        add_common(sub, c, true);
        sub->add_option("--setA", set_a, "Set expression for A")->required();
        sub->add_option("--setB", set_b, "Set expression for B")->required();
        bind(sub, [&] {
            const auto G = parse_group(c.group);
            const auto a = parse_or_throw(set_a), b = parse_or_throw(set_b);
            Result r;
            r.net = make_net(c, G, {a, b});
            const auto rep = kemperman_check(evaluate_expression(*a, r.net), evaluate_expression(*b, r.net), c.threads);
            r.report = rep.to_json();
            r.csv = reports_csv({rep});
            r.exit_code = exit_for(rep.verdict);
            return r;
        });
    }

    // balls
    int directions = 64;
    {
        auto* sub = app.add_subcommand("balls", "Ball doubling curve mu(B_2rho)/mu(B_rho) and its curvature fit");
        add_common(sub, c, false);
        rhos_text = "";
        sub->add_option("--rhos", rhos_text, "Comma list of radii (default 0.025,0.05,0.1,0.2)");
        sub->add_option("--directions", directions, "Random directions for the radial quadrature");
        bind(sub, [&] {
            const auto G = parse_group(c.group);
            const auto rhos = parse_list(rhos_text.empty() ? "0.025,0.05,0.1,0.2" : rhos_text);
            const auto curve = ball_doubling_curve(G, rhos, c.seed, directions);
            Result r;
            r.report = curve.to_json();
            r.csv = curve_csv(curve);
            return r;
        });
    }

    // double-counting
    std::string subgroup_name;
    double delta = 0.05;
    std::size_t n_h = 500;
    {
        auto* sub = app.add_subcommand("double-counting", "Slice quadrature over H against mu(X) mu_H(B_H(e, rho))");
        add_common(sub, c, true);
        sub->add_option("--set", set_a, "Set expression X")->required();
        sub->add_option("--subgroup", subgroup_name, "Subgroup name")->required();
        sub->add_option("--delta", delta, "Tube width");
        sub->add_option("--rho", rho, "Slice radius");
        sub->add_option("--nh", n_h, "Haar samples of H");
        bind(sub, [&] {
            const auto G = parse_group(c.group);
            const auto e = parse_or_throw(set_a);
            Result r;
            r.net = make_net(c, G, {e});
            const auto rep = double_counting_check(evaluate_expression(*e, r.net), builtin_subgroup(G, subgroup_name),
                                                   delta, rho, n_h, c.seed);
            r.report = rep.to_json();
            r.csv = reports_csv({rep});
            r.exit_code = exit_for(rep.verdict);
            return r;
        });
    }

    // ot-verify
    std::string source_path, target_path, plan_out;
    int knn = 20;
    std::size_t cycles = 1000;
    std::size_t exact_limit = 2000;
    std::vector<double> volumes;
    {
        auto* sub = app.add_subcommand("ot-verify", "Optimal transport between two point-cloud CSV files, with checks");
        add_common(sub, c, false);
        sub->add_option("--source", source_path, "Source cloud CSV")->required();
        sub->add_option("--target", target_path, "Target cloud CSV")->required();
        sub->add_option("--knn", knn, "Neighbors for the Monge-Ampere ratio");
        sub->add_option("--cycles", cycles, "Sampled 3-cycles for cyclical monotonicity");
        sub->add_option("--exact-limit", exact_limit, "Largest cloud solved exactly");
        sub->add_option("--plan-out", plan_out, "Write the coupling as i,j,mass CSV");
        sub->add_option("--volumes", volumes, "Volumes of A and B: also run the group map check on --group")
            ->expected(2);
        bind(sub, [&] {
            const auto src = cloud_from_csv(read_file(source_path));
            const auto tgt = cloud_from_csv(read_file(target_path));
            OtOptions opt;
            opt.exact_limit = exact_limit;
            const auto plan = solve_ot(src, tgt, opt);
            Result r;
            r.report["plan"] = plan.summary();
            const auto mono = check_cyclical_monotonicity(plan, 3, cycles, c.seed);
            r.report["monotonicity"] = {
                {"passed", mono.passed}, {"worst_violation", mono.worst_violation}, {"cycles", mono.cycles}};
            if (src.size() > std::size_t(knn) && tgt.size() > std::size_t(knn))
                r.report["monge_ampere"] = monge_ampere_ratio_check(plan, knn).to_json();
            if (!volumes.empty()) {
                GroupBmOptions g;
                g.volume_A = volumes[0];
                g.volume_B = volumes[1];
                g.seed = c.seed;
                g.k_nn = knn;
                r.report["group_map"] = group_bm_map(plan, parse_group(c.group), g).to_json();
            }
            r.csv = plan_to_csv(plan);
            if (!plan_out.empty()) write_file(plan_out, r.csv);
            // monotonicity failure of an exact plan is a solver bug
            r.exit_code = mono.passed ? 0 : 2;
            return r;
        });
    }

    // amgm
    int dim = 3;
    std::size_t trials = 10000;
    double amgm_c = 5.0;
    bool unperturbed = false;
    {
        auto* sub = app.add_subcommand("amgm", "det(I + M + S + E) >= (1 - c rho^2)(1 + det(M)^(1/d))^d on random samples");
        add_common(sub, c, false);
        sub->add_option("--d", dim, "Dimension (1..6)");
        sub->add_option("--trials", trials, "Number of random matrices");
        sub->add_option("--rho", rho, "Size of the perturbations");
        sub->add_option("--c", amgm_c, "Constant c");
        sub->add_flag("--unperturbed", unperturbed, "Use S = E = 0 (plain determinant inequality)");
        bind(sub, [&] {
            const auto rep = jacobian_amgm_check(dim, trials, rho, c.seed, amgm_c, !unperturbed);
            Result r;
            r.report = rep.to_json();
            r.exit_code = rep.violations == 0 ? 0 : 2;
            return r;
        });
    }

    // fit-tube
    std::size_t candidates = 200;
    std::vector<std::string> subgroups;
    bool trace = false;
    {
        auto* sub = app.add_subcommand("fit-tube", "Best conjugate tube g H_d' g^-1 for a set");
        add_common(sub, c, true);
        sub->add_option("--set", set_a, "Set expression")->required();
        sub->add_option("--candidates", candidates, "Random conjugators per subgroup");
        sub->add_option("--subgroups", subgroups, "Subgroups to try (default: maximal ones)");
        sub->add_flag("--trace", trace, "Include every evaluated candidate");
        bind(sub, [&] {
            const auto G = parse_group(c.group);
            const auto e = parse_or_throw(set_a);
            Result r;
            if (c.net == "auto") c.net = "scattered";  // conjugates are not zonal
            r.net = make_net(c, G, {e});
            TubeFitOptions opt;
            opt.candidates = candidates;
            opt.subgroups = subgroups;
            r.report = fit_tube(evaluate_expression(*e, r.net), c.seed, opt).to_json(*G, trace);
            return r;
        });
    }

    // slices
    std::size_t n_slices = 40;
    {
        auto* sub = app.add_subcommand("slices", "Slice profile of a set inside H_delta and its evenness");
        add_common(sub, c, true);
        sub->add_option("--set", set_a, "Set expression")->required();
        sub->add_option("--subgroup", subgroup_name, "Subgroup name")->required();
        sub->add_option("--delta", delta, "Tube width");
        sub->add_option("--rho", rho, "Slice radius (may exceed diam H)");
        sub->add_option("--nh", n_slices, "Haar samples of H");
        bind(sub, [&] {
            const auto G = parse_group(c.group);
            const auto e = parse_or_throw(set_a);
            Result r;
            if (c.net == "auto") c.net = G->abelian() ? "lattice" : "scattered";  // slices are not zonal
            r.net = make_net(c, G, {e});
            const auto p = slice_profile(evaluate_expression(*e, r.net), builtin_subgroup(G, subgroup_name), delta,
                                         rho, n_slices, c.seed);
            r.report = p.to_json(*G);
            r.csv = slices_csv(p, *G);
            return r;
        });
    }

    // rays
    RayOptions ray_opt;
    {
        auto* sub = app.add_subcommand("rays", "Ray profile of a set near the identity in exponential coordinates");
        add_common(sub, c, true);
        sub->add_option("--set", set_a, "Set expression")->required();
        sub->add_option("--rho", ray_opt.rho, "Chart radius containing the set");
        sub->add_option("--rho-min", ray_opt.rho_min, "Required interval length (default rho/2)");
        sub->add_option("--eps", ray_opt.eps, "Allowed hole fraction");
        sub->add_option("--directions", ray_opt.directions, "Number of rays");
        bind(sub, [&] {
            const auto G = parse_group(c.group);
            const auto e = parse_or_throw(set_a);
            Result r;
            r.net = make_net(c, G, {e});
            const auto p = ray_profile(evaluate_expression(*e, r.net), c.seed, ray_opt);
            r.report = p.to_json();
            r.csv = p.csv();
            return r;
        });
    }

    // scales
    int m_power = 2;
    double K = 8.0;
    std::optional<double> resolution;
    {
        auto* sub = app.add_subcommand("scales", "Scale spectrum of an approximate subgroup");
        add_common(sub, c, true);
        sub->add_option("--set", set_a, "Set expression for Lambda")->required();
        sub->add_option("--m", m_power, "Power of Lambda to cover");
        sub->add_option("--K", K, "Approximateness parameter");
        sub->add_option("--resolution", resolution, "Merge radii closer than this");
        bind(sub, [&] {
            const auto G = parse_group(c.group);
            const auto e = parse_or_throw(set_a);
            Result r;
            r.net = make_net(c, G, {e});
            r.report = scale_spectrum(evaluate_expression(*e, r.net), m_power, K, resolution, c.threads).to_json();
            return r;
        });
    }

    // report-merge
    std::vector<std::string> inputs;
    {
        auto* sub = app.add_subcommand("report-merge", "Merge JSON reports into one file and one CSV");
        add_common(sub, c, false);
        sub->add_option("inputs", inputs, "Report files")->required();
        bind(sub, [&] {
            Result r;
            nlohmann::json all = nlohmann::json::array();
            std::vector<InequalityReport> checks;
            std::vector<Verdict> verdicts;
            for (const auto& path : inputs) {
                nlohmann::json j;
                try {
                    j = nlohmann::json::parse(read_file(path));
                } catch (const nlohmann::json::exception& e) {
                    throw UsageError(path + ": " + e.what());
                }
                all.push_back({{"file", fs::path(path).filename().string()}, {"content", j}});
                const auto& rep = j.contains("report") ? j["report"] : j;
                if (rep.is_object() && rep.contains("verdict") && rep.contains("lhs")) {
                    checks.push_back(InequalityReport::from_json(rep));
                    verdicts.push_back(checks.back().verdict);
                }
            }
            r.report = {{"reports", all}, {"checks", checks.size()}};
            if (!checks.empty()) {
                const auto v = combine(verdicts);
                r.report["combined_verdict"] = to_string(v);
                r.csv = reports_csv(checks);
                r.exit_code = exit_for(v);
            }
            return r;
        });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }
    try {
        const auto t0 = std::chrono::steady_clock::now();
        const Result r = run();
        const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
        return emit(cmd, c, r, ms, args);
    } catch (const ExpressionError& e) {
        std::cerr << "error: " << e.what() << "\n" << kGrammar;
        return 1;
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
