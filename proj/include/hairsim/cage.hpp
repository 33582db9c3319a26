#pragma once

#include "bvh.hpp"
#include "rig.hpp"
#include "splat_points.hpp"

#include <deque>
#include <queue>
#include <unordered_set>

namespace hairsim {

// ---------------------------------------------------------------------------
// Voxelization

struct VoxelGrid {
    Vec3d origin = Vec3d::Zero();
    double voxel_size = 1;
    std::array<int, 3> dims{1, 1, 1};
    std::vector<std::uint8_t> occupancy;

    std::size_t index(int i, int j, int k) const
    {
        return (std::size_t(k) * std::size_t(dims[1]) + std::size_t(j)) * std::size_t(dims[0]) + std::size_t(i);
    }
    bool inside(int i, int j, int k) const
    {
        return i >= 0 && j >= 0 && k >= 0 && i < dims[0] && j < dims[1] && k < dims[2];
    }
    bool occupied(int i, int j, int k) const { return inside(i, j, k) && occupancy[index(i, j, k)] != 0; }
    void set(int i, int j, int k, bool v = true) { occupancy[index(i, j, k)] = v ? 1 : 0; }

    std::size_t count() const
    {
        std::size_t n = 0;
        for (auto o : occupancy)
            n += o != 0;
        return n;
    }

    std::array<int, 3> cell_of(Vec3d const& p) const
    {
        std::array<int, 3> c{};
        for (int a = 0; a < 3; ++a)
            c[a] = std::clamp(int(std::floor((p[a] - origin[a]) / voxel_size)), 0, dims[a] - 1);
        return c;
    }

    Vec3d corner(int i, int j, int k) const { return origin + voxel_size * Vec3d(i, j, k); }
};

namespace detail {

inline VoxelGrid dilate26(VoxelGrid const& g)
{
    VoxelGrid out = g;
    for (int k = 0; k < g.dims[2]; ++k)
        for (int j = 0; j < g.dims[1]; ++j)
            for (int i = 0; i < g.dims[0]; ++i) {
                if (g.occupied(i, j, k))
                    continue;
                bool hit = false;
                for (int dk = -1; dk <= 1 && !hit; ++dk)
                    for (int dj = -1; dj <= 1 && !hit; ++dj)
                        for (int di = -1; di <= 1 && !hit; ++di)
                            hit = g.occupied(i + di, j + dj, k + dk);
                if (hit)
                    out.set(i, j, k);
            }
    return out;
}

// Out-of-grid counts as empty.
inline VoxelGrid erode26(VoxelGrid const& g)
{
    VoxelGrid out = g;
    for (int k = 0; k < g.dims[2]; ++k)
        for (int j = 0; j < g.dims[1]; ++j)
            for (int i = 0; i < g.dims[0]; ++i) {
                if (!g.occupied(i, j, k))
                    continue;
                bool keep = true;
                for (int dk = -1; dk <= 1 && keep; ++dk)
                    for (int dj = -1; dj <= 1 && keep; ++dj)
                        for (int di = -1; di <= 1 && keep; ++di)
                            keep = g.occupied(i + di, j + dj, k + dk);
                if (!keep)
                    out.set(i, j, k, false);
            }
    return out;
}

inline constexpr int kFaceNbr[6][3] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};

} // namespace detail

/// Occupancy grid of a point cloud, dilated `dilation` times over the
/// 26-neighbourhood and then closed once. The box is padded by dilation + 1
/// voxels on every side.
inline VoxelGrid voxelize(std::vector<Vec3> const& points, double voxel_size, int dilation)
{
    if (points.empty())
        throw Error("voxelize: empty point list");
    if (!(voxel_size > 0))
        throw Error("voxelize: voxel_size must be positive");
    if (dilation < 0)
        throw Error("voxelize: dilation must be nonnegative");
    Vec3d lo = to_d(points[0]), hi = lo;
    for (auto const& p : points) {
        if (!p.allFinite())
            throw Error("voxelize: non-finite point");
        lo = lo.cwiseMin(to_d(p));
        hi = hi.cwiseMax(to_d(p));
    }
    int const pad = dilation + 1;
    VoxelGrid g;
    g.voxel_size = voxel_size;
    g.origin = lo - Vec3d::Constant(pad * voxel_size);
    for (int a = 0; a < 3; ++a)
        g.dims[a] = int(std::floor((hi[a] - g.origin[a]) / voxel_size)) + 1 + pad;
    std::size_t const total = std::size_t(g.dims[0]) * g.dims[1] * g.dims[2];
    if (total > (std::size_t(1) << 31))
        throw Error("voxelize: grid too large; increase voxel_size");
    g.occupancy.assign(total, 0);
    for (auto const& p : points) {
        auto c = g.cell_of(to_d(p));
        g.set(c[0], c[1], c[2]);
    }
    for (int d = 0; d < dilation; ++d)
        g = detail::dilate26(g);
    g = detail::erode26(detail::dilate26(g));
    return g;
}

/// Number of 6-connected components of occupied voxels.
inline std::size_t occupied_components(VoxelGrid const& g)
{
    std::vector<std::uint8_t> seen(g.occupancy.size(), 0);
    std::size_t components = 0;
    std::vector<std::array<int, 3>> stack;
    for (int k = 0; k < g.dims[2]; ++k)
        for (int j = 0; j < g.dims[1]; ++j)
            for (int i = 0; i < g.dims[0]; ++i) {
                if (!g.occupied(i, j, k) || seen[g.index(i, j, k)])
                    continue;
                ++components;
                seen[g.index(i, j, k)] = 1;
                stack.push_back({i, j, k});
                while (!stack.empty()) {
                    auto c = stack.back();
                    stack.pop_back();
                    for (auto const& n : detail::kFaceNbr) {
                        int const x = c[0] + n[0], y = c[1] + n[1], z = c[2] + n[2];
                        if (g.occupied(x, y, z) && !seen[g.index(x, y, z)]) {
                            seen[g.index(x, y, z)] = 1;
                            stack.push_back({x, y, z});
                        }
                    }
                }
            }
    return components;
}

namespace detail {

// Fills empty voxels not reachable from outside the grid.
inline bool fill_cavities(VoxelGrid& g)
{
    std::vector<std::uint8_t> outside(g.occupancy.size(), 0);
    std::vector<std::array<int, 3>> stack;
    auto seed = [&](int i, int j, int k) {
        if (!g.occupied(i, j, k) && !outside[g.index(i, j, k)]) {
            outside[g.index(i, j, k)] = 1;
            stack.push_back({i, j, k});
        }
    };
    for (int k = 0; k < g.dims[2]; ++k)
        for (int j = 0; j < g.dims[1]; ++j)
            for (int i = 0; i < g.dims[0]; ++i)
                if (i == 0 || j == 0 || k == 0 || i == g.dims[0] - 1 || j == g.dims[1] - 1 || k == g.dims[2] - 1)
                    seed(i, j, k);
    while (!stack.empty()) {
        auto c = stack.back();
        stack.pop_back();
        for (auto const& n : kFaceNbr) {
            int const x = c[0] + n[0], y = c[1] + n[1], z = c[2] + n[2];
            if (g.inside(x, y, z))
                seed(x, y, z);
        }
    }
    bool changed = false;
    for (std::size_t i = 0; i < g.occupancy.size(); ++i)
        if (!g.occupancy[i] && !outside[i]) {
            g.occupancy[i] = 1;
            changed = true;
        }
    return changed;
}

// Counts 6-connected groups among the cells of a 2x2x2 block whose
// occupancy equals `value`. Cells are indexed by bits (x | y<<1 | z<<2).
inline int block_groups(std::array<bool, 8> const& cells, bool value)
{
    int groups = 0;
    std::uint8_t seen = 0;
    for (int s = 0; s < 8; ++s) {
        if (cells[s] != value || (seen >> s & 1))
            continue;
        ++groups;
        int stack[8], top = 0;
        stack[top++] = s;
        seen |= std::uint8_t(1 << s);
        while (top > 0) {
            int const c = stack[--top];
            for (int bit = 0; bit < 3; ++bit) {
                int const n = c ^ (1 << bit);
                if (cells[n] == value && !(seen >> n & 1)) {
                    seen |= std::uint8_t(1 << n);
                    stack[top++] = n;
                }
            }
        }
    }
    return groups;
}

// Adds voxels until every 2x2x2 block has one face-connected group of
// occupied cells and one of empty cells. Such sets have a 2-manifold voxel
// boundary (no edge- or corner-only contacts). Grid borders count as empty.
inline bool make_well_composed(VoxelGrid& g)
{
    bool any = false;
    for (bool changed = true; changed;) {
        changed = false;
        for (int k = -1; k < g.dims[2]; ++k)
            for (int j = -1; j < g.dims[1]; ++j)
                for (int i = -1; i < g.dims[0]; ++i) {
                    std::array<bool, 8> cells;
                    int occupied = 0;
                    for (int s = 0; s < 8; ++s) {
                        cells[s] = g.occupied(i + (s & 1), j + (s >> 1 & 1), k + (s >> 2 & 1));
                        occupied += cells[s];
                    }
                    if (occupied == 0 || occupied == 8)
                        continue;
                    if (block_groups(cells, true) == 1 && block_groups(cells, false) == 1)
                        continue;
                    for (int s = 0; s < 8; ++s) {
                        int const x = i + (s & 1), y = j + (s >> 1 & 1), z = k + (s >> 2 & 1);
                        if (!cells[s] && g.inside(x, y, z)) {
                            g.set(x, y, z);
                            changed = any = true;
                        }
                    }
                }
    }
    return any;
}

} // namespace detail

/// Solidifies a grid for surface extraction: fills enclosed cavities and
/// removes edge/corner-only contacts. Only ever adds voxels.
inline void solidify(VoxelGrid& g)
{
    for (bool changed = true; changed;) {
        bool const a = detail::fill_cavities(g);
        bool const b = detail::make_well_composed(g);
        changed = a || b;
    }
}

/// Closed triangle surface of the occupied voxels: one quad (two triangles)
/// per occupied/empty face pair, outward oriented, corners welded. The grid
/// is solidified first.
inline TriMesh extract_surface(VoxelGrid grid)
{
    if (grid.count() == 0)
        throw Error("extract_surface: no occupied voxels");
    if (auto n = occupied_components(grid); n != 1)
        throw Error("extract_surface: disconnected occupancy (" + std::to_string(n) +
                    " components); increase dilation");
    solidify(grid);

    TriMesh mesh;
    std::unordered_map<std::uint64_t, std::uint32_t> corner_ids;
    auto const sx = std::uint64_t(grid.dims[0]) + 1, sy = std::uint64_t(grid.dims[1]) + 1;
    auto corner = [&](int i, int j, int k) {
        std::uint64_t const key = (std::uint64_t(k) * sy + std::uint64_t(j)) * sx + std::uint64_t(i);
        auto [it, inserted] = corner_ids.emplace(key, std::uint32_t(mesh.vertices.size()));
        if (inserted)
            mesh.vertices.push_back(grid.corner(i, j, k).cast<float>());
        return it->second;
    };

    for (int k = 0; k < grid.dims[2]; ++k)
        for (int j = 0; j < grid.dims[1]; ++j)
            for (int i = 0; i < grid.dims[0]; ++i) {
                if (!grid.occupied(i, j, k))
                    continue;
                int const cell[3] = {i, j, k};
                for (int a = 0; a < 3; ++a)
                    for (int dir = 1; dir >= -1; dir -= 2) {
                        int n[3] = {i, j, k};
                        n[a] += dir;
                        if (grid.occupied(n[0], n[1], n[2]))
                            continue;
                        int const b = (a + 1) % 3, c = (a + 2) % 3;
                        int base[3] = {cell[0], cell[1], cell[2]};
                        if (dir > 0)
                            base[a] += 1;
                        std::array<std::uint32_t, 4> q;
                        int offs[4][2] = {{0, 0}, {1, 0}, {1, 1}, {0, 1}};
                        for (int m = 0; m < 4; ++m) {
                            int p[3] = {base[0], base[1], base[2]};
                            p[b] += offs[m][0];
                            p[c] += offs[m][1];
                            q[m] = corner(p[0], p[1], p[2]);
                        }
                        // e_b x e_c = e_a, so the ring above faces +a.
                        if (dir > 0) {
                            mesh.faces.push_back({q[0], q[1], q[2]});
                            mesh.faces.push_back({q[0], q[2], q[3]});
                        }
                        else {
                            mesh.faces.push_back({q[0], q[2], q[1]});
                            mesh.faces.push_back({q[0], q[3], q[2]});
                        }
                    }
            }
    return mesh;
}

// ---------------------------------------------------------------------------
// Enclosure-preserving quadric decimation

struct DecimateReport {
    std::size_t input_vertices = 0;
    std::size_t output_vertices = 0;
    std::size_t collapses = 0;
    std::size_t rejected_enclosure = 0;
    bool reached_target = true;
    std::vector<std::string> warnings;
};

struct DecimateResult {
    TriMesh mesh;
    DecimateReport report;
};

namespace detail {

// Bucketed point set for box queries.
class PointGrid {
public:
    PointGrid(std::vector<Vec3d> const& pts, double cell) : pts_(pts), cell_(cell)
    {
        if (pts.empty())
            return;
        lo_ = pts[0];
        Vec3d hi = lo_;
        for (auto const& p : pts) {
            lo_ = lo_.cwiseMin(p);
            hi = hi.cwiseMax(p);
        }
        for (int a = 0; a < 3; ++a)
            dims_[a] = std::max(1, int(std::floor((hi[a] - lo_[a]) / cell_)) + 1);
        std::vector<std::uint32_t> counts(std::size_t(dims_[0]) * dims_[1] * dims_[2] + 1, 0);
        std::vector<std::uint32_t> cell_of(pts.size());
        for (std::size_t i = 0; i < pts.size(); ++i) {
            cell_of[i] = std::uint32_t(linear(clamp_cell(pts[i])));
            ++counts[cell_of[i] + 1];
        }
        for (std::size_t c = 1; c < counts.size(); ++c)
            counts[c] += counts[c - 1];
        start_ = counts;
        items_.resize(pts.size());
        for (std::size_t i = 0; i < pts.size(); ++i)
            items_[counts[cell_of[i]]++] = std::uint32_t(i);
    }

    template <class F>
    void query(Vec3d const& lo, Vec3d const& hi, F&& f) const
    {
        if (pts_.empty())
            return;
        auto a = clamp_cell(lo), b = clamp_cell(hi);
        for (int k = a[2]; k <= b[2]; ++k)
            for (int j = a[1]; j <= b[1]; ++j)
                for (int i = a[0]; i <= b[0]; ++i) {
                    std::size_t const c = linear({i, j, k});
                    for (std::uint32_t s = start_[c]; s < start_[c + 1]; ++s) {
                        Vec3d const& p = pts_[items_[s]];
                        if ((p.array() >= lo.array()).all() && (p.array() <= hi.array()).all())
                            f(p);
                    }
                }
    }

private:
    std::array<int, 3> clamp_cell(Vec3d const& p) const
    {
        std::array<int, 3> c{};
        for (int a = 0; a < 3; ++a)
            c[a] = std::clamp(int(std::floor((p[a] - lo_[a]) / cell_)), 0, dims_[a] - 1);
        return c;
    }
    std::size_t linear(std::array<int, 3> const& c) const
    {
        return (std::size_t(c[2]) * dims_[1] + c[1]) * dims_[0] + c[0];
    }

    std::vector<Vec3d> const& pts_;
    double cell_;
    Vec3d lo_ = Vec3d::Zero();
    std::array<int, 3> dims_{1, 1, 1};
    std::vector<std::uint32_t> start_;
    std::vector<std::uint32_t> items_;
};

struct Quadric {
    Eigen::Matrix3d A = Eigen::Matrix3d::Zero();
    Vec3d b = Vec3d::Zero();
    double c = 0;

    static Quadric plane(Vec3d const& n, double d, double weight)
    {
        Quadric q;
        q.A = weight * n * n.transpose();
        q.b = weight * d * n;
        q.c = weight * d * d;
        return q;
    }
    Quadric& operator+=(Quadric const& o)
    {
        A += o.A;
        b += o.b;
        c += o.c;
        return *this;
    }
    double eval(Vec3d const& v) const { return std::max(0.0, v.dot(A * v) + 2 * b.dot(v) + c); }
};

class Decimator {
public:
    Decimator(TriMesh const& mesh, std::vector<Vec3d> const& enclosed, double margin)
        : enclosed_(enclosed), margin_(margin)
    {
        pos_.reserve(mesh.vertices.size());
        for (auto const& v : mesh.vertices)
            pos_.push_back(to_d(v));
        faces_ = mesh.faces;
        face_alive_.assign(faces_.size(), 1);
        vfaces_.resize(pos_.size());
        vertex_alive_.assign(pos_.size(), 0);
        for (std::uint32_t f = 0; f < faces_.size(); ++f)
            for (auto v : faces_[f]) {
                vfaces_[v].push_back(f);
                vertex_alive_[v] = 1;
            }
        alive_count_ = 0;
        for (auto a : vertex_alive_)
            alive_count_ += a;
        quadrics_.resize(pos_.size());
        for (std::uint32_t f = 0; f < faces_.size(); ++f) {
            Vec3d n = normal(f);
            double const area = 0.5 * n.norm();
            if (area <= 0)
                continue;
            n.normalize();
            Quadric const q = Quadric::plane(n, -n.dot(pos_[faces_[f][0]]), area);
            for (auto v : faces_[f])
                quadrics_[v] += q;
        }
        double const diag = bounding_diameter(mesh.vertices);
        scale_ = diag > 0 ? diag : 1.0;
        double cell = std::max(margin_ * 4, scale_ / 64);
        grid_.emplace(enclosed_, cell);
    }

    DecimateReport run(std::size_t target)
    {
        DecimateReport rep;
        rep.input_vertices = alive_count_;
        for (auto const& e : unique_edges(faces_))
            push(e.first, e.second);
        while (alive_count_ > target && !queue_.empty()) {
            Entry const top = queue_.top();
            queue_.pop();
            if (!vertex_alive_[top.a] || !vertex_alive_[top.b])
                continue;
            auto cand = evaluate(top.a, top.b);
            if (!cand)
                continue;
            if (cand->cost > top.cost * (1 + 1e-9) + 1e-18) {
                queue_.push({cand->cost, top.a, top.b});
                continue;
            }
            if (!encloses(top.a, top.b, cand->position)) {
                ++rep.rejected_enclosure;
                continue;
            }
            collapse(top.a, top.b, cand->position);
            ++rep.collapses;
            for (auto n : neighbors(top.a))
                push(top.a, n);
        }
        rep.output_vertices = alive_count_;
        rep.reached_target = alive_count_ <= target;
        if (!rep.reached_target)
            rep.warnings.push_back("decimate: stopped at " + std::to_string(alive_count_) + " vertices (target " +
                                   std::to_string(target) + ") without violating enclosure");
        return rep;
    }

    TriMesh result() const
    {
        TriMesh out;
        std::vector<std::uint32_t> remap(pos_.size(), std::numeric_limits<std::uint32_t>::max());
        for (std::uint32_t f = 0; f < faces_.size(); ++f) {
            if (!face_alive_[f])
                continue;
            Face nf;
            for (int k = 0; k < 3; ++k) {
                auto v = faces_[f][k];
                if (remap[v] == std::numeric_limits<std::uint32_t>::max()) {
                    remap[v] = std::uint32_t(out.vertices.size());
                    out.vertices.push_back(pos_[v].cast<float>());
                }
                nf[k] = remap[v];
            }
            out.faces.push_back(nf);
        }
        return out;
    }

private:
    struct Entry {
        double cost;
        std::uint32_t a, b;
        bool operator<(Entry const& o) const
        {
            if (cost != o.cost)
                return cost > o.cost; // min-heap
            if (a != o.a)
                return a > o.a;
            return b > o.b;
        }
    };
    struct Candidate {
        Vec3d position;
        double cost;
    };

    Vec3d normal(std::uint32_t f) const
    {
        auto const& t = faces_[f];
        return (pos_[t[1]] - pos_[t[0]]).cross(pos_[t[2]] - pos_[t[0]]);
    }

    std::vector<std::uint32_t> live_faces(std::uint32_t v) const
    {
        std::vector<std::uint32_t> out;
        for (auto f : vfaces_[v])
            if (face_alive_[f])
                out.push_back(f);
        return out;
    }

    std::vector<std::uint32_t> neighbors(std::uint32_t v) const
    {
        std::vector<std::uint32_t> out;
        for (auto f : vfaces_[v])
            if (face_alive_[f])
                for (auto w : faces_[f])
                    if (w != v)
                        out.push_back(w);
        std::sort(out.begin(), out.end());
        out.erase(std::unique(out.begin(), out.end()), out.end());
        return out;
    }

    void push(std::uint32_t a, std::uint32_t b)
    {
        if (a > b)
            std::swap(a, b);
        if (auto c = evaluate(a, b))
            queue_.push({c->cost, a, b});
    }

    static bool contains(Face const& f, std::uint32_t v) { return f[0] == v || f[1] == v || f[2] == v; }

    std::optional<Candidate> evaluate(std::uint32_t a, std::uint32_t b) const
    {
        if (alive_count_ <= 4)
            return std::nullopt;
        auto const fa = live_faces(a), fb = live_faces(b);
        std::vector<std::uint32_t> shared;
        for (auto f : fa)
            if (contains(faces_[f], b))
                shared.push_back(f);
        if (shared.size() != 2)
            return std::nullopt;

        // Link condition: common neighbours are exactly the two opposite vertices.
        std::vector<std::uint32_t> opposite;
        for (auto f : shared)
            for (auto w : faces_[f])
                if (w != a && w != b)
                    opposite.push_back(w);
        auto na = neighbors(a), nb = neighbors(b);
        std::vector<std::uint32_t> common;
        std::set_intersection(na.begin(), na.end(), nb.begin(), nb.end(), std::back_inserter(common));
        std::sort(opposite.begin(), opposite.end());
        if (opposite.size() != 2 || opposite[0] == opposite[1] || common != opposite)
            return std::nullopt;
        for (auto o : opposite)
            if (live_faces(o).size() <= 3)
                return std::nullopt;

        std::vector<std::uint32_t> star = fa;
        for (auto f : fb)
            if (!contains(faces_[f], a))
                star.push_back(f);

        struct Plane {
            Vec3d n;
            double d;
        };
        std::vector<Plane> planes;
        for (auto f : star) {
            Vec3d n = normal(f);
            double const len = n.norm();
            if (len <= 0)
                return std::nullopt;
            n /= len;
            planes.push_back({n, n.dot(pos_[faces_[f][0]])});
        }

        Quadric q = quadrics_[a];
        q += quadrics_[b];
        Vec3d const mid = 0.5 * (pos_[a] + pos_[b]);
        std::vector<Vec3d> starts{mid, pos_[a], pos_[b]};
        Eigen::FullPivLU<Eigen::Matrix3d> lu(q.A);
        if (lu.rank() == 3) {
            Vec3d const opt = lu.solve(-q.b);
            if ((opt - mid).norm() < 2 * (pos_[a] - pos_[b]).norm())
                starts.insert(starts.begin(), opt);
        }

        double const tol = 1e-12 * scale_;
        std::optional<Candidate> best;
        for (Vec3d v : starts) {
            // Cyclic projection onto the outside half-spaces of the star.
            bool feasible = false;
            for (int sweep = 0; sweep < 64 && !feasible; ++sweep) {
                feasible = true;
                for (auto const& p : planes) {
                    double const s = p.n.dot(v) - p.d;
                    if (s < -tol) {
                        v -= (s - tol) * p.n;
                        feasible = false;
                    }
                }
            }
            if (!feasible || !valid_fan(a, b, v, star))
                continue;
            double const cost = q.eval(v);
            if (!best || cost < best->cost)
                best = Candidate{v, cost};
        }
        return best;
    }

    // New faces around the merged vertex must keep their orientation and area.
    bool valid_fan(std::uint32_t a, std::uint32_t b, Vec3d const& v, std::vector<std::uint32_t> const& star) const
    {
        for (auto f : star) {
            auto const& t = faces_[f];
            if (contains(t, a) && contains(t, b))
                continue;
            Vec3d p[3];
            for (int k = 0; k < 3; ++k)
                p[k] = (t[k] == a || t[k] == b) ? v : pos_[t[k]];
            Vec3d const nn = (p[1] - p[0]).cross(p[2] - p[0]);
            Vec3d const on = normal(f);
            double const nl = nn.norm(), ol = on.norm();
            if (nl < 1e-10 * scale_ * scale_)
                return false;
            if (nn.dot(on) < 0.05 * nl * ol)
                return false;
        }
        return true;
    }

    // Tracked points must stay inside with at least `margin` clearance from
    // the new faces. The old and new patches share a boundary loop, so the
    // winding number of any point changes only if the solid angles of the two
    // patches differ by 4*pi.
    bool encloses(std::uint32_t a, std::uint32_t b, Vec3d const& v) const
    {
        if (enclosed_.empty())
            return true;
        std::vector<std::array<Vec3d, 3>> old_tris, new_tris;
        std::unordered_set<std::uint32_t> seen;
        for (auto v0 : {a, b})
            for (auto f : live_faces(v0)) {
                if (!seen.insert(f).second)
                    continue;
                auto const& t = faces_[f];
                old_tris.push_back({pos_[t[0]], pos_[t[1]], pos_[t[2]]});
                if (contains(t, a) && contains(t, b))
                    continue;
                std::array<Vec3d, 3> nt;
                for (int k = 0; k < 3; ++k)
                    nt[k] = (t[k] == a || t[k] == b) ? v : pos_[t[k]];
                new_tris.push_back(nt);
            }
        Vec3d lo = v, hi = v;
        for (auto const& t : old_tris)
            for (auto const& p : t) {
                lo = lo.cwiseMin(p);
                hi = hi.cwiseMax(p);
            }
        lo.array() -= margin_;
        hi.array() += margin_;
        double const m2 = margin_ * margin_;
        bool ok = true;
        grid_->query(lo, hi, [&](Vec3d const& p) {
            if (!ok)
                return;
            double omega = 0;
            for (auto const& t : new_tris) {
                auto const h = closest_point_on_triangle(p, t[0], t[1], t[2]);
                if ((h.point - p).squaredNorm() < m2) {
                    ok = false;
                    return;
                }
                omega += solid_angle(t[0] - p, t[1] - p, t[2] - p);
            }
            for (auto const& t : old_tris)
                omega -= solid_angle(t[0] - p, t[1] - p, t[2] - p);
            if (std::abs(omega) > 2 * std::numbers::pi)
                ok = false;
        });
        return ok;
    }

    void collapse(std::uint32_t a, std::uint32_t b, Vec3d const& v)
    {
        for (auto f : vfaces_[b]) {
            if (!face_alive_[f])
                continue;
            auto& t = faces_[f];
            if (contains(t, a)) {
                face_alive_[f] = 0;
                continue;
            }
            for (auto& w : t)
                if (w == b)
                    w = a;
            vfaces_[a].push_back(f);
        }
        std::vector<std::uint32_t> live;
        for (auto f : vfaces_[a])
            if (face_alive_[f])
                live.push_back(f);
        std::sort(live.begin(), live.end());
        live.erase(std::unique(live.begin(), live.end()), live.end());
        vfaces_[a] = std::move(live);
        vfaces_[b].clear();
        pos_[a] = v;
        quadrics_[a] += quadrics_[b];
        vertex_alive_[b] = 0;
        --alive_count_;
    }

    std::vector<Vec3d> const& enclosed_;
    double margin_;
    double scale_ = 1;
    std::vector<Vec3d> pos_;
    std::vector<Face> faces_;
    std::vector<std::uint8_t> face_alive_;
    std::vector<std::vector<std::uint32_t>> vfaces_;
    std::vector<std::uint8_t> vertex_alive_;
    std::size_t alive_count_ = 0;
    std::vector<Quadric> quadrics_;
    std::optional<PointGrid> grid_;
    std::priority_queue<Entry> queue_;
};

} // namespace detail

/// Quadric edge-collapse decimation that never lets a tracked point leave
/// the surface: merged vertices are placed on the outer side of every plane
/// of the collapsed star, and collapses that would bring a tracked point
/// within `margin` of the surface or outside it are rejected.
inline DecimateResult decimate(TriMesh const& mesh, std::size_t target_vertices,
                               std::vector<Vec3> const& enclosed = {}, double margin = 0)
{
    if (target_vertices < 4)
        throw Error("decimate: target must be at least 4 vertices");
    if (auto d = watertight_defect(mesh.faces, mesh.vertices.size()); !d.empty())
        throw Error("decimate: input is not watertight: " + d);
    std::vector<Vec3d> pts;
    pts.reserve(enclosed.size());
    for (auto const& p : enclosed)
        pts.push_back(to_d(p));
    detail::Decimator dec(mesh, pts, margin);
    DecimateResult out;
    out.report = dec.run(target_vertices);
    out.mesh = out.report.collapses == 0 ? mesh : dec.result();
    return out;
}

// ---------------------------------------------------------------------------
// Kinematic roots

/// Cage vertices within `radius` of the scalp become kinematic (zero inverse
/// mass) and anchor to the closest scalp point; all others get unit mass.
inline Cage mark_roots(Cage cage, SkinnedMesh const& mesh, double radius)
{
    if (mesh.scalp_faces.empty())
        throw Error("mark_roots: mesh has no scalp faces");
    if (!(radius > 0))
        throw Error("mark_roots: radius must be positive");
    MeshBvh const scalp(mesh.vertices, mesh.faces, false, mesh.scalp_faces);
    std::size_t const M = cage.vertices.size();
    cage.inv_mass.assign(M, 1.f);
    cage.root_anchor.assign(M, std::nullopt);
    if (cage.velocities.size() != M)
        cage.velocities.assign(M, Vec3::Zero());
    std::size_t roots = 0;
    for (std::size_t j = 0; j < M; ++j) {
        auto const hit = scalp.closest(to_d(cage.vertices[j]));
        if (std::sqrt(hit.distance_sq) <= radius) {
            cage.inv_mass[j] = 0.f;
            cage.root_anchor[j] = RootAnchor{hit.face, hit.bary.cast<float>()};
            ++roots;
        }
    }
    if (roots == 0)
        throw Error("mark_roots: no roots found within radius " + std::to_string(radius));
    return cage;
}

/// Prescribes kinematic cage vertices from the head motion. With joint
/// transforms a root is skinned like the scalp point it hangs from (skin
/// weights blended by its barycentric coordinates); with explicit vertices it
/// rides rigidly in the frame of its anchor triangle.
class RootDriver {
public:
    RootDriver() = default;

    RootDriver(Cage const& cage, SkinnedMesh const& mesh)
    {
        for (std::uint32_t j = 0; j < cage.vertices.size(); ++j) {
            if (cage.inv_mass[j] != 0.f)
                continue;
            if (!cage.root_anchor[j])
                throw Error("RootDriver: kinematic vertex " + std::to_string(j) + " has no root anchor");
            auto const& anc = *cage.root_anchor[j];
            if (anc.face >= mesh.faces.size())
                throw Error("RootDriver: anchor face out of range");
            Root r;
            r.vertex = j;
            r.face = anc.face;
            r.rest = cage.vertices[j];
            std::map<std::uint32_t, double> blend;
            if (mesh.skin_weights.size() == mesh.vertices.size())
                for (int k = 0; k < 3; ++k)
                    for (auto const& w : mesh.skin_weights[mesh.faces[anc.face][k]])
                        blend[w.joint] += double(anc.bary[k]) * w.weight;
            double sum = 0;
            for (auto const& [jt, w] : blend)
                sum += w;
            for (auto const& [jt, w] : blend)
                r.weights.push_back({jt, float(w / sum)});
            TriangleFrame const fr = triangle_frame(mesh.vertices, mesh.faces, anc.face);
            GaussianSplat probe;
            probe.mu = r.rest;
            r.local = global_to_local(probe, fr, anc.face).mu;
            roots_.push_back(std::move(r));
        }
    }

    std::size_t size() const { return roots_.size(); }

    std::vector<std::uint32_t> vertices() const
    {
        std::vector<std::uint32_t> v;
        for (auto const& r : roots_)
            v.push_back(r.vertex);
        return v;
    }

    /// Targets in root order for a posed mesh.
    std::vector<Vec3> targets(SkinnedMesh const& mesh, MotionFrame const& frame, std::vector<Vec3> const& posed) const
    {
        std::vector<Vec3> out(roots_.size());
        if (auto const* jt = std::get_if<JointTransforms>(&frame)) {
            auto const joints = resolve_joints(mesh, *jt);
            for (std::size_t i = 0; i < roots_.size(); ++i)
                out[i] = roots_[i].weights.empty() ? roots_[i].rest
                                                   : skin_point(roots_[i].rest, roots_[i].weights, joints);
            return out;
        }
        return targets_from_vertices(mesh.faces, posed);
    }

    std::vector<Vec3> targets_from_vertices(std::vector<Face> const& faces, std::vector<Vec3> const& posed) const
    {
        std::vector<Vec3> out(roots_.size());
        for (std::size_t i = 0; i < roots_.size(); ++i) {
            GaussianSplat local;
            local.mu = roots_[i].local;
            local.binding = roots_[i].face;
            out[i] = local_to_global(local, triangle_frame(posed, faces, roots_[i].face)).mu;
        }
        return out;
    }

private:
    struct Root {
        std::uint32_t vertex;
        std::uint32_t face;
        Vec3 rest;
        Vec3 local;
        std::vector<SkinWeight> weights;
    };
    std::vector<Root> roots_;
};

// ---------------------------------------------------------------------------
// Full pipeline

struct CageBuildConfig {
    double voxel_size = 0; // 0: 2% of the hair bounding-box diagonal
    int dilation = 2;
    std::size_t target_vertices = 500;
    int max_dilation = 8;  // retries when the occupancy is disconnected
};

struct CageBuildResult {
    Cage cage;
    double voxel_size = 0;
    int dilation = 0;
    std::size_t surface_vertices = 0;
    DecimateReport decimation;
};

inline std::vector<Vec3> tracked_points(SplatSet const& hair)
{
    std::vector<Vec3> pts;
    pts.reserve(hair.size() * kPointsPerSplat);
    for (auto const& s : hair.splats) {
        auto const e = endpoints(s);
        pts.insert(pts.end(), e.points.begin(), e.points.end());
    }
    return pts;
}

/// Voxelize all tracked splat points, extract the voxel surface and decimate
/// it while keeping every tracked point at least half a voxel inside.
inline CageBuildResult build_cage(SplatSet const& hair, CageBuildConfig const& cfg = {})
{
    if (hair.empty())
        throw Error("build_cage: empty hair set");
    auto const pts = tracked_points(hair);
    CageBuildResult out;
    out.voxel_size = cfg.voxel_size > 0 ? cfg.voxel_size : 0.02 * bounding_diameter(pts);
    if (!(out.voxel_size > 0))
        throw Error("build_cage: hair has zero extent");
    TriMesh surface;
    for (out.dilation = cfg.dilation;; ++out.dilation) {
        VoxelGrid const grid = voxelize(pts, out.voxel_size, out.dilation);
        if (occupied_components(grid) == 1 || out.dilation >= cfg.max_dilation) {
            surface = extract_surface(grid);
            break;
        }
    }
    out.surface_vertices = surface.vertices.size();
    auto dec = decimate(surface, cfg.target_vertices, pts, 0.5 * out.voxel_size);
    out.decimation = std::move(dec.report);
    out.cage = Cage::from_mesh(std::move(dec.mesh));
    return out;
}

} // namespace hairsim
