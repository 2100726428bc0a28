// Copyright Contributors to the weathersplat project
// SPDX-License-Identifier: Apache-2.0

/// @file kdtree.hpp
/// @brief Static 3D kd-tree for k-nearest-neighbor queries.

#pragma once

#include "weathersplat/core.hpp"

#include <numeric>
#include <optional>
#include <queue>

namespace weathersplat {

struct Neighbor {
    double distance = 0.0;
    std::size_t index = 0;

    friend bool operator<(const Neighbor &a, const Neighbor &b) {
        return a.distance != b.distance ? a.distance < b.distance : a.index < b.index;
    }
};

/// Built once over a point set and read-only afterwards; queries are safe to
/// run concurrently.
class KdTree {
  public:
    KdTree() = default;
    explicit KdTree(std::vector<Vec3> points) : points_(std::move(points)) {
        order_.resize(points_.size());
        std::iota(order_.begin(), order_.end(), std::size_t{0});
        if (!points_.empty()) root_ = build(0, order_.size());
    }

    std::size_t size() const { return points_.size(); }
    const Vec3 &point(std::size_t i) const { return points_[i]; }

    /// The k nearest points to `query`, sorted by (distance, index). A point
    /// whose index equals `skip` is ignored.
    std::vector<Neighbor> knn(const Vec3 &query, std::size_t k, std::optional<std::size_t> skip = {}) const {
        std::priority_queue<Neighbor> heap;
        if (k > 0 && root_ >= 0) search(root_, query, k, skip, heap);
        std::vector<Neighbor> out(heap.size());
        for (std::size_t i = out.size(); i-- > 0; heap.pop()) out[i] = heap.top();
        return out;
    }

  private:
    struct Node {
        std::size_t begin, end; ///< range in order_ (leaves only)
        int axis = -1;          ///< -1 for leaves
        double split = 0.0;
        int left = -1, right = -1;
    };
    static constexpr std::size_t kLeafSize = 8;

    int build(std::size_t begin, std::size_t end) {
        const int id = static_cast<int>(nodes_.size());
        nodes_.push_back({begin, end});
        if (end - begin <= kLeafSize) return id;
        Aabb box;
        for (std::size_t i = begin; i < end; ++i) box.extend(points_[order_[i]]);
        int axis = 0;
        box.extent().maxCoeff(&axis);
        const std::size_t mid = begin + (end - begin) / 2;
        std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                         [&](std::size_t a, std::size_t b) {
                             return points_[a][axis] != points_[b][axis] ? points_[a][axis] < points_[b][axis] : a < b;
                         });
        const double split = points_[order_[mid]][axis];
        const int left = build(begin, mid);
        const int right = build(mid, end);
        nodes_[id].axis = axis;
        nodes_[id].split = split;
        nodes_[id].left = left;
        nodes_[id].right = right;
        return id;
    }

    void search(int id, const Vec3 &q, std::size_t k, std::optional<std::size_t> skip,
                std::priority_queue<Neighbor> &heap) const {
        const Node &n = nodes_[id];
        if (n.axis < 0) {
            for (std::size_t i = n.begin; i < n.end; ++i) {
                const std::size_t idx = order_[i];
                if (skip && *skip == idx) continue;
                const Neighbor cand{(points_[idx] - q).norm(), idx};
                if (heap.size() < k) {
                    heap.push(cand);
                } else if (cand < heap.top()) {
                    heap.pop();
                    heap.push(cand);
                }
            }
            return;
        }
        const double diff = q[n.axis] - n.split;
        const int near = diff < 0.0 ? n.left : n.right;
        const int far = diff < 0.0 ? n.right : n.left;
        search(near, q, k, skip, heap);
        // <= keeps equal-distance candidates with smaller indices reachable.
        if (heap.size() < k || std::abs(diff) <= heap.top().distance) search(far, q, k, skip, heap);
    }

    std::vector<Vec3> points_;
    std::vector<std::size_t> order_;
    std::vector<Node> nodes_;
    int root_ = -1;
};

} // namespace weathersplat
