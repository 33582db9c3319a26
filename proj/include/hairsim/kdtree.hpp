#pragma once

#include "types.hpp"

#include <algorithm>
#include <numeric>

namespace hairsim {

/// Static 3D kd-tree for nearest-neighbour queries. Ties in distance resolve
/// to the lower point index, so results do not depend on tree layout.
class PointKdTree {
public:
    PointKdTree() = default;

    explicit PointKdTree(std::vector<Vec3> const& points)
    {
        points_.reserve(points.size());
        for (auto const& p : points)
            points_.push_back(p.cast<double>());
        order_.resize(points_.size());
        std::iota(order_.begin(), order_.end(), 0u);
        if (!points_.empty())
            build(0, std::uint32_t(points_.size()), 0);
    }

    struct Result {
        std::uint32_t index = 0;
        double distance_sq = std::numeric_limits<double>::infinity();
    };

    Result nearest(Vec3d const& q) const
    {
        Result best;
        if (!points_.empty())
            search(0, std::uint32_t(points_.size()), 0, q, best);
        return best;
    }

    Result nearest(Vec3 const& q) const { return nearest(Vec3d(q.cast<double>())); }

    std::size_t size() const { return points_.size(); }

private:
    static constexpr std::uint32_t kLeaf = 8;

    // Node for range [lo, hi) is implicit: split at mid = (lo + hi) / 2 along
    // axis = depth % 3 unless the range is a leaf.
    void build(std::uint32_t lo, std::uint32_t hi, int depth)
    {
        if (hi - lo <= kLeaf)
            return;
        int const axis = depth % 3;
        std::uint32_t const mid = (lo + hi) / 2;
        std::nth_element(order_.begin() + lo, order_.begin() + mid, order_.begin() + hi,
                         [&](std::uint32_t a, std::uint32_t b) {
                             if (points_[a][axis] != points_[b][axis])
                                 return points_[a][axis] < points_[b][axis];
                             return a < b;
                         });
        build(lo, mid, depth + 1);
        build(mid + 1, hi, depth + 1);
    }

    void consider(std::uint32_t idx, Vec3d const& q, Result& best) const
    {
        double const d2 = (points_[idx] - q).squaredNorm();
        if (d2 < best.distance_sq || (d2 == best.distance_sq && idx < best.index))
            best = {idx, d2};
    }

    void search(std::uint32_t lo, std::uint32_t hi, int depth, Vec3d const& q, Result& best) const
    {
        if (hi - lo <= kLeaf) {
            for (std::uint32_t i = lo; i < hi; ++i)
                consider(order_[i], q, best);
            return;
        }
        int const axis = depth % 3;
        std::uint32_t const mid = (lo + hi) / 2;
        std::uint32_t const pivot = order_[mid];
        double const diff = q[axis] - points_[pivot][axis];
        consider(pivot, q, best);
        bool const left_first = diff <= 0;
        if (left_first)
            search(lo, mid, depth + 1, q, best);
        else
            search(mid + 1, hi, depth + 1, q, best);
        // <= keeps equal-distance candidates on the far side reachable for the
        // lower-index tie-break.
        if (diff * diff <= best.distance_sq) {
            if (left_first)
                search(mid + 1, hi, depth + 1, q, best);
            else
                search(lo, mid, depth + 1, q, best);
        }
    }

    std::vector<Vec3d> points_;
    std::vector<std::uint32_t> order_;
};

} // namespace hairsim
