#include <algorithm>
#include <stdexcept>

#include "haarlab/subgroup.hpp"

namespace haarlab {
namespace {

// Stored rows, ranks 1..8. Kept as literal data so the closed forms can be
// checked against it rather than generating it.
const std::vector<MaximalDimensionEntry> kTable = {
    {"a", 1, 3, 2, "R x a_0"},      {"a", 2, 8, 4, "R x a_1"},      {"a", 4, 24, 8, "R x a_3"},
    {"a", 5, 35, 10, "R x a_4"},    {"a", 6, 48, 12, "R x a_5"},    {"a", 7, 63, 14, "R x a_6"},
    {"a", 8, 80, 16, "R x a_7"},
    {"b", 3, 21, 6, "d_2"},         {"b", 4, 36, 8, "d_3"},         {"b", 5, 55, 10, "d_4"},
    {"b", 6, 78, 12, "d_5"},        {"b", 7, 105, 14, "d_6"},       {"b", 8, 136, 16, "d_7"},
    {"c", 2, 10, 4, "a_1 x c_1"},   {"c", 3, 21, 8, "a_1 x c_2"},   {"c", 4, 36, 12, "a_1 x c_3"},
    {"c", 5, 55, 16, "a_1 x c_4"},  {"c", 6, 78, 20, "a_1 x c_5"},  {"c", 7, 105, 24, "a_1 x c_6"},
    {"c", 8, 136, 28, "a_1 x c_7"},
    {"d", 3, 15, 5, "b_2"},         {"d", 4, 28, 7, "b_3"},         {"d", 5, 45, 9, "b_4"},
    {"d", 6, 66, 11, "b_5"},        {"d", 7, 91, 13, "b_6"},        {"d", 8, 120, 15, "b_7"},
    {"e6", 6, 78, 26, "f_4"},       {"e7", 7, 133, 54, "R x e_6"},  {"e8", 8, 248, 112, "a_1 x e_7"},
    {"f4", 4, 52, 16, "b_4"},       {"g2", 2, 14, 6, "a_2"},
};

int min_rank(const std::string& f) {
    if (f == "a") return 1;
    if (f == "b" || f == "d") return 3;
    if (f == "c") return 2;
    throw std::invalid_argument("unknown classical family '" + f + "'");
}

const MaximalDimensionEntry* exceptional(const std::string& f) {
    for (const auto& e : kTable)
        if (e.family == f && f.size() == 2) return &e;
    return nullptr;
}

}  // namespace

std::vector<MaximalDimensionEntry> maximal_dimension_table(int max_rank) {
    std::vector<MaximalDimensionEntry> out;
    for (const auto& e : kTable)
        if (e.family.size() == 2 || e.rank <= max_rank) out.push_back(e);
    return out;
}

nlohmann::json catalog_json(int max_rank) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& e : maximal_dimension_table(max_rank)) {
        nlohmann::json j;
        j["family"] = e.family;
        j["rank"] = e.rank;
        j["dim_g"] = e.dim_g;
        j["codim"] = e.codim;
        j["h_description"] = e.h_description;
        arr.push_back(j);
    }
    return arr;
}

int closed_form_dim(const std::string& family, int rank) {
    if (const auto* e = exceptional(family)) return e->dim_g;
    if (rank < min_rank(family)) throw std::invalid_argument("rank out of range for " + family);
    const int r = rank;
    if (family == "a") return r * (r + 2);
    if (family == "b" || family == "c") return r * (2 * r + 1);
    return r * (2 * r - 1);
}

int closed_form_codim(const std::string& family, int rank) {
    if (const auto* e = exceptional(family)) return e->codim;
    if (rank < min_rank(family)) throw std::invalid_argument("rank out of range for " + family);
    const int r = rank;
    if (family == "a") return r == 3 ? closed_form_codim("d", 3) : 2 * r;
    if (family == "b") return 2 * r;
    if (family == "c") return 4 * (r - 1);
    return 2 * r - 1;
}

std::string lie_algebra_label(const Group& G) {
    switch (G.family()) {
        case Family::SU2:
        case Family::SO3:
            return "a1";
        case Family::SOn:
            if (G.dim() == 3) return "a1";
            if (G.dim() == 6) return "a1+a1";
            return "c2";  // so(5) = b_2 = c_2
        default:
            return {};
    }
}

int critical_exponent(const Group& G) {
    switch (G.family()) {
        case Family::SU2:
        case Family::SO3:
            return closed_form_codim("a", 1);
        case Family::Torus:
            return 1;
        case Family::SOn:
            // so(4) = a1 + a1 is not simple: reduce one factor
            if (G.dim() == 3 || G.dim() == 6) return closed_form_codim("a", 1);
            return closed_form_codim("c", 2);
        case Family::Product: {
            int best = 1 << 30;
            for (const auto& f : G.factors()) best = std::min(best, critical_exponent(*f));
            return best;
        }
    }
    throw std::invalid_argument("unsupported family");
}

}  // namespace haarlab
