#pragma once

#include "geometry.hpp"

#include <numeric>

namespace hairsim {

struct ClosestHit {
    double distance_sq = std::numeric_limits<double>::infinity();
    Vec3d point = Vec3d::Zero();
    Vec3d bary = Vec3d::Zero();
    std::uint32_t face = 0; // index into the mesh face list
    Feature feature = Feature::Face;
    int local_id = -1;
};

struct SignedDistance {
    float distance;
    Vec3 closest_point;
    Vec3 normal; // unit direction of increasing distance (pseudo-normal on the surface)
    std::uint32_t face;
};

/// Axis-aligned BVH over a triangle mesh (or a subset of its faces) with
/// angle-weighted pseudo-normals for inside/outside classification.
/// Queries are const and may run concurrently after construction.
class MeshBvh {
public:
    MeshBvh() = default;

    /// Watertightness is checked when `signed_queries` is set; signed queries
    /// on a mesh built without it throw.
    MeshBvh(std::vector<Vec3> const& vertices, std::vector<Face> faces, bool signed_queries = true,
            std::vector<std::uint32_t> face_subset = {})
        : faces_(std::move(faces)), signed_(signed_queries)
    {
        if (faces_.empty())
            throw Error("MeshBvh: mesh has no faces");
        if (face_subset.empty()) {
            face_ids_.resize(faces_.size());
            std::iota(face_ids_.begin(), face_ids_.end(), 0u);
        }
        else {
            for (auto f : face_subset)
                if (f >= faces_.size())
                    throw Error("MeshBvh: face subset index out of range");
            face_ids_ = std::move(face_subset);
            std::sort(face_ids_.begin(), face_ids_.end());
            face_ids_.erase(std::unique(face_ids_.begin(), face_ids_.end()), face_ids_.end());
        }
        if (signed_) {
            if (face_ids_.size() != faces_.size())
                throw Error("MeshBvh: signed queries need the full mesh");
            if (auto d = watertight_defect(faces_, vertices.size()); !d.empty())
                throw Error("MeshBvh: mesh is not watertight: " + d);
            build_edge_slots();
        }
        set_vertices(vertices);
        build_tree();
    }

    /// Updates vertex positions for an unchanged topology and refits boxes.
    void refit(std::vector<Vec3> const& vertices)
    {
        if (vertices.size() != vertices_.size())
            throw Error("MeshBvh::refit: vertex count changed");
        set_vertices(vertices);
        for (std::size_t n = nodes_.size(); n-- > 0;)
            fit_node(nodes_[n]);
    }

    ClosestHit closest(Vec3d const& p) const
    {
        ClosestHit best;
        if (nodes_.empty())
            return best;
        std::uint32_t stack[64];
        int top = 0;
        stack[top++] = 0;
        while (top > 0) {
            Node const& node = nodes_[stack[--top]];
            if (box_dist_sq(node, p) > best.distance_sq * (1 + 1e-12) + 1e-300)
                continue;
            if (node.count > 0) {
                for (std::uint32_t i = node.first; i < node.first + node.count; ++i)
                    test_face(face_ids_[order_[i]], p, best);
                continue;
            }
            double const dl = box_dist_sq(nodes_[node.left], p);
            double const dr = box_dist_sq(nodes_[node.left + 1], p);
            if (dl <= dr) {
                stack[top++] = node.left + 1;
                stack[top++] = node.left;
            }
            else {
                stack[top++] = node.left;
                stack[top++] = node.left + 1;
            }
        }
        return best;
    }

    SignedDistance signed_distance(Vec3 const& p) const { return signed_distance(to_d(p)); }

    SignedDistance signed_distance(Vec3d const& p) const
    {
        if (!signed_)
            throw Error("MeshBvh: signed queries require a watertight build");
        ClosestHit const h = closest(p);
        Vec3d const n = pseudo_normal(h);
        double const dist = std::sqrt(h.distance_sq);
        double const side = (p - h.point).dot(n);
        double const sd = dist == 0.0 ? 0.0 : (side < 0 ? -dist : dist);
        Vec3d const grad = dist > 1e-12 ? Vec3d((p - h.point) / sd) : n;
        return {float(sd), h.point.cast<float>(), grad.cast<float>(), h.face};
    }

    Vec3d pseudo_normal(ClosestHit const& h) const
    {
        auto const& f = faces_[h.face];
        switch (h.feature) {
        case Feature::Vertex:
            return vertex_normals_[f[h.local_id]];
        case Feature::Edge:
            return edge_normals_[edge_slot_[3 * h.face + h.local_id]];
        default:
            return face_normals_[h.face];
        }
    }

    std::vector<Vec3d> const& vertices() const { return vertices_; }
    std::vector<Face> const& faces() const { return faces_; }
    Vec3d const& face_normal(std::uint32_t f) const { return face_normals_[f]; }
    std::size_t node_count() const { return nodes_.size(); }
    bool is_signed() const { return signed_; }

    // Leaf membership, for structural checks.
    std::vector<std::uint32_t> leaf_faces() const
    {
        std::vector<std::uint32_t> out;
        for (auto const& n : nodes_)
            if (n.count > 0)
                for (std::uint32_t i = n.first; i < n.first + n.count; ++i)
                    out.push_back(face_ids_[order_[i]]);
        return out;
    }

    std::vector<Vec3d> const& vertex_normals() const { return vertex_normals_; }
    std::vector<Vec3d> const& edge_normals() const { return edge_normals_; }

private:
    struct Node {
        Vec3d lo, hi;
        std::uint32_t left = 0;  // index of left child; right is left + 1
        std::uint32_t first = 0; // leaf range into order_
        std::uint32_t count = 0; // 0 for interior nodes
    };

    static constexpr std::uint32_t kLeafSize = 4;

    void build_edge_slots()
    {
        std::unordered_map<std::uint64_t, std::uint32_t> slots;
        edge_slot_.resize(faces_.size() * 3);
        for (std::size_t fi = 0; fi < faces_.size(); ++fi)
            for (int k = 0; k < 3; ++k) {
                auto key = edge_key(faces_[fi][k], faces_[fi][(k + 1) % 3]);
                auto [it, inserted] = slots.emplace(key, std::uint32_t(slots.size()));
                edge_slot_[3 * fi + k] = it->second;
            }
        n_edges_ = slots.size();
    }

    void set_vertices(std::vector<Vec3> const& vertices)
    {
        vertices_.resize(vertices.size());
        for (std::size_t i = 0; i < vertices.size(); ++i)
            vertices_[i] = to_d(vertices[i]);

        face_normals_.assign(faces_.size(), Vec3d::Zero());
        for (auto fi : face_ids_) {
            auto const& f = faces_[fi];
            Vec3d const n = (vertices_[f[1]] - vertices_[f[0]]).cross(vertices_[f[2]] - vertices_[f[0]]);
            double const len = n.norm();
            face_normals_[fi] = len > 0 ? Vec3d(n / len) : Vec3d::Zero();
        }
        if (!signed_)
            return;

        vertex_normals_.assign(vertices_.size(), Vec3d::Zero());
        edge_normals_.assign(n_edges_, Vec3d::Zero());
        for (std::size_t fi = 0; fi < faces_.size(); ++fi) {
            auto const& f = faces_[fi];
            Vec3d const& n = face_normals_[fi];
            for (int k = 0; k < 3; ++k) {
                Vec3d const e1 = vertices_[f[(k + 1) % 3]] - vertices_[f[k]];
                Vec3d const e2 = vertices_[f[(k + 2) % 3]] - vertices_[f[k]];
                double const denom = e1.norm() * e2.norm();
                double const angle = denom > 0 ? std::acos(std::clamp(e1.dot(e2) / denom, -1.0, 1.0)) : 0.0;
                vertex_normals_[f[k]] += angle * n;
                edge_normals_[edge_slot_[3 * fi + k]] += n;
            }
        }
        for (auto& n : vertex_normals_)
            if (double l = n.norm(); l > 0)
                n /= l;
        for (auto& n : edge_normals_)
            if (double l = n.norm(); l > 0)
                n /= l;
    }

    void build_tree()
    {
        order_.resize(face_ids_.size());
        std::iota(order_.begin(), order_.end(), 0u);
        std::vector<Vec3d> centroids(face_ids_.size());
        for (std::size_t i = 0; i < face_ids_.size(); ++i) {
            auto const& f = faces_[face_ids_[i]];
            centroids[i] = (vertices_[f[0]] + vertices_[f[1]] + vertices_[f[2]]) / 3.0;
        }
        nodes_.clear();
        nodes_.reserve(2 * face_ids_.size() / kLeafSize + 2);
        nodes_.push_back({});
        // Iterative build; children always appended after their parent.
        struct Task {
            std::uint32_t node, first, count;
        };
        std::vector<Task> tasks{{0, 0, std::uint32_t(order_.size())}};
        while (!tasks.empty()) {
            Task t = tasks.back();
            tasks.pop_back();
            if (t.count <= kLeafSize) {
                nodes_[t.node].first = t.first;
                nodes_[t.node].count = t.count;
                continue;
            }
            Vec3d lo = centroids[order_[t.first]], hi = lo;
            for (std::uint32_t i = t.first; i < t.first + t.count; ++i) {
                lo = lo.cwiseMin(centroids[order_[i]]);
                hi = hi.cwiseMax(centroids[order_[i]]);
            }
            int axis;
            (hi - lo).maxCoeff(&axis);
            std::uint32_t const mid = t.first + t.count / 2;
            std::nth_element(order_.begin() + t.first, order_.begin() + mid, order_.begin() + t.first + t.count,
                             [&](std::uint32_t a, std::uint32_t b) {
                                 if (centroids[a][axis] != centroids[b][axis])
                                     return centroids[a][axis] < centroids[b][axis];
                                 return a < b;
                             });
            std::uint32_t const left = std::uint32_t(nodes_.size());
            nodes_.push_back({});
            nodes_.push_back({});
            nodes_[t.node].left = left;
            tasks.push_back({left, t.first, mid - t.first});
            tasks.push_back({left + 1, mid, t.first + t.count - mid});
        }
        for (std::size_t n = nodes_.size(); n-- > 0;)
            fit_node(nodes_[n]);
    }

    void fit_node(Node& node)
    {
        if (node.count > 0) {
            node.lo = Vec3d::Constant(std::numeric_limits<double>::infinity());
            node.hi = -node.lo;
            for (std::uint32_t i = node.first; i < node.first + node.count; ++i)
                for (auto v : faces_[face_ids_[order_[i]]]) {
                    node.lo = node.lo.cwiseMin(vertices_[v]);
                    node.hi = node.hi.cwiseMax(vertices_[v]);
                }
        }
        else {
            node.lo = nodes_[node.left].lo.cwiseMin(nodes_[node.left + 1].lo);
            node.hi = nodes_[node.left].hi.cwiseMax(nodes_[node.left + 1].hi);
        }
    }

    static double box_dist_sq(Node const& n, Vec3d const& p)
    {
        Vec3d const d = (n.lo - p).cwiseMax(Vec3d::Zero()).cwiseMax(p - n.hi);
        return d.squaredNorm();
    }

    void test_face(std::uint32_t fi, Vec3d const& p, ClosestHit& best) const
    {
        auto const& f = faces_[fi];
        TriangleHit const h = closest_point_on_triangle(p, vertices_[f[0]], vertices_[f[1]], vertices_[f[2]]);
        double const d2 = (p - h.point).squaredNorm();
        double const tol = 1e-12 * d2 + 1e-300;
        bool const better = d2 < best.distance_sq - tol;
        bool const tie = !better && std::abs(d2 - best.distance_sq) <= tol && fi < best.face;
        if (better || tie)
            best = {d2, h.point, h.bary, fi, h.feature, h.local_id};
    }

    std::vector<Vec3d> vertices_;
    std::vector<Face> faces_;
    std::vector<std::uint32_t> face_ids_;
    std::vector<std::uint32_t> order_;
    std::vector<Node> nodes_;
    std::vector<Vec3d> face_normals_;
    std::vector<Vec3d> vertex_normals_;
    std::vector<Vec3d> edge_normals_;
    std::vector<std::uint32_t> edge_slot_;
    std::size_t n_edges_ = 0;
    bool signed_ = true;
};

} // namespace hairsim
