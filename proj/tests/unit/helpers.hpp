#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "haarlab/group.hpp"

namespace testutil {

inline haarlab::AlgebraVector random_direction(int dim, haarlab::Rng& rng) {
    std::normal_distribution<double> n01;
    haarlab::AlgebraVector v = haarlab::zero_vector(dim);
    for (int i = 0; i < dim; ++i) v.x[i] = n01(rng);
    return v * (1.0 / v.norm());
}

inline haarlab::AlgebraVector random_vector(int dim, double norm, haarlab::Rng& rng) {
    return random_direction(dim, rng) * norm;
}

// Every carrier family, including a product.
inline std::vector<haarlab::GroupPtr> all_groups() {
    using namespace haarlab;
    return {make_su2(), make_so3(), make_torus(1), make_torus(3), make_son(4), make_son(5),
            parse_group("so3xt1")};
}

inline double max_abs(const haarlab::ParamVec& a, const haarlab::ParamVec& b) {
    return (a - b).cwiseAbs().maxCoeff();
}

}  // namespace testutil
