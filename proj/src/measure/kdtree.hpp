#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <utility>
#include <vector>

namespace haarlab::detail {

// Bucket kd-tree over points of a fixed dimension, supporting incremental
// insertion. Each point carries a user id (several points may share one).
class KdTree {
public:
    explicit KdTree(int dim) : dim_(dim) { nodes_.push_back(Node{}); }

    int dim() const { return dim_; }
    std::size_t size() const { return ids_.size(); }

    void insert(const double* p, std::uint32_t id) {
        const auto idx = static_cast<std::uint32_t>(ids_.size());
        coords_.insert(coords_.end(), p, p + dim_);
        ids_.push_back(id);
        std::uint32_t n = 0;
        while (nodes_[n].split_dim >= 0)
            n = p[nodes_[n].split_dim] < nodes_[n].split ? nodes_[n].left : nodes_[n].right;
        nodes_[n].bucket.push_back(idx);
        if (nodes_[n].bucket.size() > kBucket) split(n);
    }

    // Closest stored point in Euclidean distance; returns {id, squared distance}.
    std::pair<std::uint32_t, double> nearest(const double* q) const {
        std::pair<std::uint32_t, double> best{0, std::numeric_limits<double>::infinity()};
        nearest_rec(0, q, best);
        return best;
    }

    // Squared distance to the closest point, or +inf if none is within sqrt(r2).
    double nearest_within(const double* q, double r2) const {
        std::pair<std::uint32_t, double> best{0, r2};
        bool found = false;
        nearest_bounded(0, q, best, found);
        return found ? best.second : std::numeric_limits<double>::infinity();
    }

    // Calls f(id, squared distance) for every point with squared distance <= r2.
    template <class F>
    void within(const double* q, double r2, F&& f) const {
        within_rec(0, q, r2, f);
    }

private:
    static constexpr std::size_t kBucket = 12;

    struct Node {
        int split_dim = -1;
        double split = 0.0;
        std::uint32_t left = 0, right = 0;
        std::vector<std::uint32_t> bucket;
    };

    const double* pt(std::uint32_t i) const { return coords_.data() + std::size_t(i) * dim_; }

    double dist2(const double* q, std::uint32_t i) const {
        const double* p = pt(i);
        double s = 0;
        for (int k = 0; k < dim_; ++k) {
            const double d = q[k] - p[k];
            s += d * d;
        }
        return s;
    }

    void split(std::uint32_t n) {
        auto bucket = std::move(nodes_[n].bucket);
        int best_dim = 0;
        double best_spread = -1;
        for (int k = 0; k < dim_; ++k) {
            double lo = std::numeric_limits<double>::infinity(), hi = -lo;
            for (auto i : bucket) {
                lo = std::min(lo, pt(i)[k]);
                hi = std::max(hi, pt(i)[k]);
            }
            if (hi - lo > best_spread) {
                best_spread = hi - lo;
                best_dim = k;
            }
        }
        if (best_spread <= 0) {  // coincident points: keep as an oversized leaf
            nodes_[n].bucket = std::move(bucket);
            return;
        }
        std::vector<double> vals;
        for (auto i : bucket) vals.push_back(pt(i)[best_dim]);
        std::nth_element(vals.begin(), vals.begin() + vals.size() / 2, vals.end());
        double s = vals[vals.size() / 2];
        const double mx = *std::max_element(vals.begin(), vals.end());
        if (s == mx) {  // all points at or above the median would go right
            s = *std::min_element(vals.begin(), vals.end());
            s = 0.5 * (s + mx);
        }
        const auto l = static_cast<std::uint32_t>(nodes_.size());
        nodes_.push_back(Node{});
        nodes_.push_back(Node{});
        for (auto i : bucket) nodes_[pt(i)[best_dim] < s ? l : l + 1].bucket.push_back(i);
        nodes_[n].split_dim = best_dim;
        nodes_[n].split = s;
        nodes_[n].left = l;
        nodes_[n].right = l + 1;
    }

    void nearest_rec(std::uint32_t n, const double* q, std::pair<std::uint32_t, double>& best) const {
        const Node& nd = nodes_[n];
        if (nd.split_dim < 0) {
            for (auto i : nd.bucket) {
                const double d = dist2(q, i);
                if (d < best.second) best = {ids_[i], d};
            }
            return;
        }
        const double diff = q[nd.split_dim] - nd.split;
        const std::uint32_t first = diff < 0 ? nd.left : nd.right;
        const std::uint32_t second = diff < 0 ? nd.right : nd.left;
        nearest_rec(first, q, best);
        if (diff * diff < best.second) nearest_rec(second, q, best);
    }

    void nearest_bounded(std::uint32_t n, const double* q, std::pair<std::uint32_t, double>& best,
                         bool& found) const {
        const Node& nd = nodes_[n];
        if (nd.split_dim < 0) {
            for (auto i : nd.bucket) {
                const double d = dist2(q, i);
                if (d <= best.second) {
                    best = {ids_[i], d};
                    found = true;
                }
            }
            return;
        }
        const double diff = q[nd.split_dim] - nd.split;
        const std::uint32_t first = diff < 0 ? nd.left : nd.right;
        const std::uint32_t second = diff < 0 ? nd.right : nd.left;
        nearest_bounded(first, q, best, found);
        if (diff * diff <= best.second) nearest_bounded(second, q, best, found);
    }

    template <class F>
    void within_rec(std::uint32_t n, const double* q, double r2, F& f) const {
        const Node& nd = nodes_[n];
        if (nd.split_dim < 0) {
            for (auto i : nd.bucket) {
                const double d = dist2(q, i);
                if (d <= r2) f(ids_[i], d);
            }
            return;
        }
        const double diff = q[nd.split_dim] - nd.split;
        if (diff < 0 || diff * diff <= r2) within_rec(nd.left, q, r2, f);
        if (diff >= 0 || diff * diff <= r2) within_rec(nd.right, q, r2, f);
    }

    int dim_;
    std::vector<double> coords_;
    std::vector<std::uint32_t> ids_;
    std::vector<Node> nodes_;
};

}  // namespace haarlab::detail
