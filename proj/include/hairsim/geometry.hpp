#pragma once

#include "types.hpp"

#include <algorithm>
#include <numbers>
#include <unordered_map>

namespace hairsim {

// Which part of a triangle a closest point landed on. Vertex/edge ids are
// local to the face: vertex k, edge k runs from vertex k to vertex (k+1)%3.
enum class Feature : std::uint8_t { Vertex, Edge, Face };

struct TriangleHit {
    Vec3d point;
    Vec3d bary;
    Feature feature;
    int local_id; // vertex or edge index within the face, -1 for Face
};

/// Closest point on triangle (a, b, c) to p, with Voronoi-region feature.
inline TriangleHit closest_point_on_triangle(Vec3d const& p, Vec3d const& a, Vec3d const& b, Vec3d const& c)
{
    Vec3d const ab = b - a, ac = c - a, ap = p - a;
    double const d1 = ab.dot(ap), d2 = ac.dot(ap);
    if (d1 <= 0 && d2 <= 0)
        return {a, {1, 0, 0}, Feature::Vertex, 0};

    Vec3d const bp = p - b;
    double const d3 = ab.dot(bp), d4 = ac.dot(bp);
    if (d3 >= 0 && d4 <= d3)
        return {b, {0, 1, 0}, Feature::Vertex, 1};

    double const vc = d1 * d4 - d3 * d2;
    if (vc <= 0 && d1 >= 0 && d3 <= 0) {
        double const v = d1 / (d1 - d3);
        return {a + v * ab, {1 - v, v, 0}, Feature::Edge, 0};
    }

    Vec3d const cp = p - c;
    double const d5 = ab.dot(cp), d6 = ac.dot(cp);
    if (d6 >= 0 && d5 <= d6)
        return {c, {0, 0, 1}, Feature::Vertex, 2};

    double const vb = d5 * d2 - d1 * d6;
    if (vb <= 0 && d2 >= 0 && d6 <= 0) {
        double const w = d2 / (d2 - d6);
        return {a + w * ac, {1 - w, 0, w}, Feature::Edge, 2};
    }

    double const va = d3 * d6 - d5 * d4;
    if (va <= 0 && (d4 - d3) >= 0 && (d5 - d6) >= 0) {
        double const w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return {b + w * (c - b), {0, 1 - w, w}, Feature::Edge, 1};
    }

    double const denom = 1.0 / (va + vb + vc);
    double const v = vb * denom, w = vc * denom;
    return {a + ab * v + ac * w, {1 - v - w, v, w}, Feature::Face, -1};
}

inline Vec3d to_d(Vec3 const& v) { return v.cast<double>(); }

inline Vec3d face_normal_unnormalized(std::vector<Vec3> const& verts, Face const& f)
{
    Vec3d const a = to_d(verts[f[0]]), b = to_d(verts[f[1]]), c = to_d(verts[f[2]]);
    return (b - a).cross(c - a);
}

inline std::uint64_t edge_key(std::uint32_t a, std::uint32_t b)
{
    if (a > b)
        std::swap(a, b);
    return (std::uint64_t(a) << 32) | b;
}

/// Unique undirected edges (i < j), sorted.
inline std::vector<std::pair<std::uint32_t, std::uint32_t>> unique_edges(std::vector<Face> const& faces)
{
    std::vector<std::uint64_t> keys;
    keys.reserve(faces.size() * 3);
    for (auto const& f : faces)
        for (int k = 0; k < 3; ++k)
            keys.push_back(edge_key(f[k], f[(k + 1) % 3]));
    std::sort(keys.begin(), keys.end());
    keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
    std::vector<std::pair<std::uint32_t, std::uint32_t>> out;
    out.reserve(keys.size());
    for (auto k : keys)
        out.emplace_back(std::uint32_t(k >> 32), std::uint32_t(k & 0xffffffffu));
    return out;
}

/// Empty string if every edge is shared by exactly two faces with opposite
/// orientation; otherwise a description of the first defect found.
inline std::string watertight_defect(std::vector<Face> const& faces, std::size_t n_vertices)
{
    if (faces.empty())
        return "mesh has no faces";
    std::unordered_map<std::uint64_t, int> directed;
    directed.reserve(faces.size() * 3);
    for (std::size_t fi = 0; fi < faces.size(); ++fi) {
        auto const& f = faces[fi];
        for (int k = 0; k < 3; ++k) {
            if (f[k] >= n_vertices)
                return "face " + std::to_string(fi) + " index out of range";
            if (f[k] == f[(k + 1) % 3])
                return "face " + std::to_string(fi) + " is degenerate";
            std::uint64_t const key = (std::uint64_t(f[k]) << 32) | f[(k + 1) % 3];
            if (++directed[key] > 1)
                return "edge (" + std::to_string(f[k]) + "," + std::to_string(f[(k + 1) % 3]) +
                       ") used twice in the same direction";
        }
    }
    for (auto const& [key, count] : directed) {
        std::uint64_t const rev = ((key & 0xffffffffu) << 32) | (key >> 32);
        if (!directed.count(rev))
            return "boundary edge (" + std::to_string(key >> 32) + "," + std::to_string(key & 0xffffffffu) + ")";
    }
    return {};
}

inline bool is_watertight(std::vector<Face> const& faces, std::size_t n_vertices)
{
    return watertight_defect(faces, n_vertices).empty();
}

/// Signed solid angle of triangle (a, b, c) seen from the origin
/// (Van Oosterom and Strackee).
inline double solid_angle(Vec3d const& a, Vec3d const& b, Vec3d const& c)
{
    double const la = a.norm(), lb = b.norm(), lc = c.norm();
    double const num = a.dot(b.cross(c));
    double const den = la * lb * lc + a.dot(b) * lc + a.dot(c) * lb + b.dot(c) * la;
    return 2.0 * std::atan2(num, den);
}

/// Generalized winding number of a closed mesh around p: 1 inside, 0 outside.
inline double winding_number(std::vector<Vec3> const& verts, std::vector<Face> const& faces, Vec3d const& p)
{
    double sum = 0;
    for (auto const& f : faces)
        sum += solid_angle(to_d(verts[f[0]]) - p, to_d(verts[f[1]]) - p, to_d(verts[f[2]]) - p);
    return sum / (4.0 * std::numbers::pi);
}

inline double bounding_diameter(std::vector<Vec3> const& pts)
{
    if (pts.empty())
        return 0;
    Vec3d lo = to_d(pts[0]), hi = lo;
    for (auto const& p : pts) {
        lo = lo.cwiseMin(to_d(p));
        hi = hi.cwiseMax(to_d(p));
    }
    return (hi - lo).norm();
}

inline double mesh_volume(std::vector<Vec3> const& verts, std::vector<Face> const& faces)
{
    double v = 0;
    for (auto const& f : faces)
        v += to_d(verts[f[0]]).dot(to_d(verts[f[1]]).cross(to_d(verts[f[2]])));
    return v / 6.0;
}

/// Euler characteristic V - E + F, counting only referenced vertices.
inline long euler_characteristic(std::vector<Face> const& faces)
{
    std::vector<std::uint32_t> vs;
    for (auto const& f : faces)
        vs.insert(vs.end(), f.begin(), f.end());
    std::sort(vs.begin(), vs.end());
    vs.erase(std::unique(vs.begin(), vs.end()), vs.end());
    return long(vs.size()) - long(unique_edges(faces).size()) + long(faces.size());
}

} // namespace hairsim
