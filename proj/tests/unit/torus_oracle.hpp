#pragma once

// Exact measures of arc unions on the circle and box unions on the 2-torus,
// used as oracles against the cell brackets.

#include <algorithm>
#include <array>
#include <cmath>
#include <utility>
#include <vector>

#include "haarlab/cellset.hpp"
#include "haarlab/region.hpp"

namespace testutil {

using namespace haarlab;

struct Arc {
    double lo, len;
};
struct Rect {
    double x, y, w, h;
};

// Exact measure of a union of arcs on the circle.
inline double arcs_measure(const std::vector<Arc>& arcs) {
    std::vector<std::pair<double, double>> iv;
    for (auto a : arcs) {
        if (a.len >= 1) return 1.0;
        const double lo = a.lo - std::floor(a.lo);
        if (lo + a.len <= 1) iv.push_back({lo, lo + a.len});
        else {
            iv.push_back({lo, 1.0});
            iv.push_back({0.0, lo + a.len - 1});
        }
    }
    std::sort(iv.begin(), iv.end());
    double total = 0, lo = -1, hi = -1;
    for (auto [a, b] : iv) {
        if (a > hi) {
            total += hi - lo;
            lo = a;
            hi = b;
        } else {
            hi = std::max(hi, b);
        }
    }
    return total + (hi - lo);
}

inline std::vector<Arc> arc_sum(const std::vector<Arc>& a, const std::vector<Arc>& b) {
    std::vector<Arc> s;
    for (auto x : a)
        for (auto y : b) s.push_back({x.lo + y.lo, x.len + y.len});
    return s;
}

// Exact area of a union of boxes on the 2-torus by coordinate compression.
inline double rects_measure(const std::vector<Rect>& rects) {
    std::vector<std::array<double, 4>> pieces;  // x0, x1, y0, y1 inside [0,1]^2
    auto split = [](double lo, double len) {
        std::vector<std::pair<double, double>> out;
        if (len >= 1) return std::vector<std::pair<double, double>>{{0.0, 1.0}};
        lo -= std::floor(lo);
        if (lo + len <= 1) out.push_back({lo, lo + len});
        else {
            out.push_back({lo, 1.0});
            out.push_back({0.0, lo + len - 1});
        }
        return out;
    };
    for (const auto& r : rects)
        for (auto [x0, x1] : split(r.x, r.w))
            for (auto [y0, y1] : split(r.y, r.h)) pieces.push_back({x0, x1, y0, y1});
    std::vector<double> xs{0.0, 1.0}, ys{0.0, 1.0};
    for (const auto& p : pieces) {
        xs.push_back(p[0]);
        xs.push_back(p[1]);
        ys.push_back(p[2]);
        ys.push_back(p[3]);
    }
    std::sort(xs.begin(), xs.end());
    std::sort(ys.begin(), ys.end());
    double area = 0;
    for (std::size_t i = 0; i + 1 < xs.size(); ++i)
        for (std::size_t j = 0; j + 1 < ys.size(); ++j) {
            const double cx = 0.5 * (xs[i] + xs[i + 1]), cy = 0.5 * (ys[j] + ys[j + 1]);
            for (const auto& p : pieces)
                if (p[0] <= cx && cx < p[1] && p[2] <= cy && cy < p[3]) {
                    area += (xs[i + 1] - xs[i]) * (ys[j + 1] - ys[j]);
                    break;
                }
        }
    return area;
}

inline std::vector<Rect> rect_sum(const std::vector<Rect>& a, const std::vector<Rect>& b) {
    std::vector<Rect> s;
    for (auto p : a)
        for (auto q : b) s.push_back({p.x + q.x, p.y + q.y, p.w + q.w, p.h + q.h});
    return s;
}

inline CellSet arcs_set(const NetPtr& net, const std::vector<Arc>& arcs) {
    RegionPtr r;
    for (auto a : arcs) {
        auto b = box_region(net->group(), TorusBox{{a.lo}, {a.len}});
        r = r ? union_region(r, b) : b;
    }
    return discretize(*r, net);
}

inline CellSet rects_set(const NetPtr& net, const std::vector<Rect>& rects) {
    RegionPtr r;
    for (auto p : rects) {
        auto b = box_region(net->group(), TorusBox{{p.x, p.y}, {p.w, p.h}});
        r = r ? union_region(r, b) : b;
    }
    return discretize(*r, net);
}

}  // namespace testutil
