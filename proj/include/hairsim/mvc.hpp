#pragma once

#include "geometry.hpp"
#include "kdtree.hpp"
#include "parallel.hpp"
#include "splat_points.hpp"

#include <numbers>
#include <span>

namespace hairsim {

// ---------------------------------------------------------------------------
// Mean value coordinates for closed triangle cages (Ju, Schaefer, Warren).

enum class MvcLocation { Interior, OnVertex, OnFace, Exterior };

// Special-case thresholds: a point within kOnVertexRel * diameter of a cage
// vertex snaps to it; a spherical triangle whose determinant falls below
// kCoplanarDet is treated as coplanar with the point.
inline constexpr double kOnVertexRel = 1e-8;
inline constexpr double kCoplanarDet = 1e-10;
inline constexpr double kOnFaceAngle = 1e-7;

/// Cage geometry in double precision, shared by all point evaluations.
class MvcCage {
public:
    MvcCage(std::vector<Vec3> const& vertices, std::vector<Face> const& faces) : faces_(faces)
    {
        if (vertices.size() < 4 || faces.size() < 4)
            throw Error("mvc: cage needs at least 4 vertices and 4 faces");
        for (auto const& f : faces)
            for (auto v : f)
                if (v >= vertices.size())
                    throw Error("mvc: cage face index out of range");
        vertices_.reserve(vertices.size());
        for (auto const& v : vertices)
            vertices_.push_back(to_d(v));
        diameter_ = bounding_diameter(vertices);
    }

    std::size_t size() const { return vertices_.size(); }
    double diameter() const { return diameter_; }
    std::vector<Vec3d> const& vertices() const { return vertices_; }
    std::vector<Face> const& faces() const { return faces_; }

    /// Writes normalized weights into `w` (length M). `scratch` must hold 4M
    /// doubles. Exterior points still receive weights.
    MvcLocation evaluate(Vec3d const& x, std::span<double> w, std::span<double> scratch) const
    {
        std::size_t const M = vertices_.size();
        std::fill(w.begin(), w.end(), 0.0);
        double* d = scratch.data();
        double* u = scratch.data() + M; // 3 * M

        double const snap = kOnVertexRel * diameter_;
        for (std::size_t j = 0; j < M; ++j) {
            Vec3d const diff = vertices_[j] - x;
            d[j] = diff.norm();
            if (d[j] < snap) {
                w[j] = 1.0;
                return MvcLocation::OnVertex;
            }
            Vec3d const uj = diff / d[j];
            u[3 * j] = uj.x();
            u[3 * j + 1] = uj.y();
            u[3 * j + 2] = uj.z();
        }
        auto unit = [&](std::uint32_t j) { return Vec3d(u[3 * j], u[3 * j + 1], u[3 * j + 2]); };

        double winding = 0;
        for (auto const& f : faces_) {
            Vec3d const uu[3] = {unit(f[0]), unit(f[1]), unit(f[2])};
            double theta[3], c[3], s[3];
            for (int k = 0; k < 3; ++k) {
                Vec3d const& a = uu[(k + 1) % 3];
                Vec3d const& b = uu[(k + 2) % 3];
                theta[k] = std::atan2(a.cross(b).norm(), a.dot(b));
            }
            double const h = 0.5 * (theta[0] + theta[1] + theta[2]);
            if (std::numbers::pi - h < kOnFaceAngle) {
                // x lies on this triangle: plain barycentric weights.
                std::fill(w.begin(), w.end(), 0.0);
                double sum = 0;
                for (int k = 0; k < 3; ++k) {
                    double const wk = std::sin(theta[k]) * d[f[(k + 2) % 3]] * d[f[(k + 1) % 3]];
                    w[f[k]] += wk;
                    sum += wk;
                }
                for (int k = 0; k < 3; ++k)
                    w[f[k]] /= sum;
                return MvcLocation::OnFace;
            }
            double const det = uu[0].dot(uu[1].cross(uu[2]));
            winding += 2.0 * std::atan2(det, 1.0 + uu[0].dot(uu[1]) + uu[1].dot(uu[2]) + uu[2].dot(uu[0]));
            if (std::abs(det) < kCoplanarDet)
                continue;
            double const sign = det < 0 ? -1.0 : 1.0;
            double const sin_h = std::sin(h);
            bool skip = false;
            for (int k = 0; k < 3; ++k) {
                double const denom = std::sin(theta[(k + 1) % 3]) * std::sin(theta[(k + 2) % 3]);
                c[k] = 2.0 * sin_h * std::sin(h - theta[k]) / denom - 1.0;
                s[k] = sign * std::sqrt(std::max(0.0, 1.0 - c[k] * c[k]));
                if (std::abs(s[k]) <= kCoplanarDet)
                    skip = true;
            }
            if (skip)
                continue;
            for (int k = 0; k < 3; ++k) {
                int const kp = (k + 1) % 3, km = (k + 2) % 3;
                w[f[k]] += (theta[k] - c[kp] * theta[km] - c[km] * theta[kp]) /
                           (d[f[k]] * std::sin(theta[kp]) * s[km]);
            }
        }
        double sum = 0;
        for (std::size_t j = 0; j < M; ++j)
            sum += w[j];
        for (std::size_t j = 0; j < M; ++j)
            w[j] /= sum;
        return winding / (4.0 * std::numbers::pi) < 0.5 ? MvcLocation::Exterior : MvcLocation::Interior;
    }

private:
    std::vector<Vec3d> vertices_;
    std::vector<Face> faces_;
    double diameter_ = 0;
};

struct MvcPointWeights {
    std::vector<double> weights;
    MvcLocation location;
};

/// Weights of a single point. Exterior points are rejected.
inline MvcPointWeights mvc_weights_point(Vec3 const& x, MvcCage const& cage)
{
    MvcPointWeights out;
    out.weights.resize(cage.size());
    std::vector<double> scratch(4 * cage.size());
    out.location = cage.evaluate(to_d(x), out.weights, scratch);
    if (out.location == MvcLocation::Exterior)
        throw Error("mvc_weights_point: exterior point");
    return out;
}

inline MvcPointWeights mvc_weights_point(Vec3 const& x, std::vector<Vec3> const& cage_vertices,
                                         std::vector<Face> const& cage_faces)
{
    return mvc_weights_point(x, MvcCage(cage_vertices, cage_faces));
}

// ---------------------------------------------------------------------------
// Baked weight tensor, N splats x 7 tracked points x M cage vertices.
// Rows are dense f32, sparse (index, weight) lists, or absent when a bake
// skipped them.

enum class RowKind : std::uint8_t { Absent, Dense, Sparse };

struct RowView {
    RowKind kind = RowKind::Absent;
    std::span<float const> weights;
    std::span<std::uint32_t const> indices; // empty for dense rows

    std::size_t size() const { return weights.size(); }
};

class MvcWeights {
public:
    MvcWeights() = default;
    MvcWeights(std::size_t n_splats, std::size_t n_cage_verts)
        : n_splats_(n_splats), n_cage_verts_(n_cage_verts), rows_(n_splats * kPointsPerSplat)
    {
    }

    std::size_t n_splats() const { return n_splats_; }
    std::size_t n_cage_verts() const { return n_cage_verts_; }
    std::size_t n_rows() const { return rows_.size(); }
    static std::size_t row_index(std::size_t splat, int point) { return splat * kPointsPerSplat + point; }

    bool has_row(std::size_t r) const { return rows_.at(r).kind != RowKind::Absent; }

    RowView row(std::size_t r) const
    {
        auto const& info = rows_.at(r);
        RowView v;
        v.kind = info.kind;
        if (info.kind == RowKind::Absent)
            return v;
        v.weights = {values_.data() + info.value_offset, info.count};
        if (info.kind == RowKind::Sparse)
            v.indices = {indices_.data() + info.index_offset, info.count};
        return v;
    }

    void set_dense(std::size_t r, std::span<float const> w)
    {
        if (w.size() != n_cage_verts_)
            throw Error("MvcWeights: dense row length mismatch");
        auto& info = rows_.at(r);
        if (info.kind != RowKind::Absent)
            throw Error("MvcWeights: row already set");
        info = {values_.size(), 0, std::uint32_t(w.size()), RowKind::Dense};
        values_.insert(values_.end(), w.begin(), w.end());
    }

    void set_sparse(std::size_t r, std::span<std::uint32_t const> idx, std::span<float const> w)
    {
        if (idx.size() != w.size())
            throw Error("MvcWeights: sparse row index/weight length mismatch");
        for (auto i : idx)
            if (i >= n_cage_verts_)
                throw Error("MvcWeights: sparse row index out of range");
        auto& info = rows_.at(r);
        if (info.kind != RowKind::Absent)
            throw Error("MvcWeights: row already set");
        info = {values_.size(), indices_.size(), std::uint32_t(w.size()), RowKind::Sparse};
        values_.insert(values_.end(), w.begin(), w.end());
        indices_.insert(indices_.end(), idx.begin(), idx.end());
    }

    /// Reserves dense storage for `rows` (absent so far) and returns nothing;
    /// fill through dense_storage(). Lets bakes write rows in parallel.
    void allocate_dense(std::vector<std::size_t> const& rows)
    {
        std::size_t offset = values_.size();
        for (auto r : rows) {
            auto& info = rows_.at(r);
            if (info.kind != RowKind::Absent)
                throw Error("MvcWeights: row already set");
            info = {offset, 0, std::uint32_t(n_cage_verts_), RowKind::Dense};
            offset += n_cage_verts_;
        }
        values_.resize(offset, 0.f);
    }

    std::span<float> dense_storage(std::size_t r)
    {
        auto const& info = rows_.at(r);
        if (info.kind != RowKind::Dense)
            throw Error("MvcWeights: row is not dense");
        return {values_.data() + info.value_offset, info.count};
    }

    /// Row expanded to length M (zeros for absent entries).
    std::vector<float> expand(std::size_t r) const
    {
        std::vector<float> out(n_cage_verts_, 0.f);
        RowView const v = row(r);
        if (v.kind == RowKind::Absent)
            throw Error("MvcWeights: row " + std::to_string(r) + " was not baked");
        for (std::size_t k = 0; k < v.size(); ++k)
            out[v.kind == RowKind::Dense ? k : v.indices[k]] = v.weights[k];
        return out;
    }

    /// Fraction of stored entries relative to a fully dense tensor.
    double density() const
    {
        double stored = 0;
        for (auto const& r : rows_)
            stored += r.count;
        double const full = double(rows_.size()) * double(n_cage_verts_);
        return full > 0 ? stored / full : 0.0;
    }

    std::size_t memory_bytes() const
    {
        return values_.size() * sizeof(float) + indices_.size() * sizeof(std::uint32_t) +
               rows_.size() * sizeof(RowInfo);
    }

    friend bool operator==(MvcWeights const& a, MvcWeights const& b)
    {
        if (a.n_splats_ != b.n_splats_ || a.n_cage_verts_ != b.n_cage_verts_)
            return false;
        for (std::size_t r = 0; r < a.rows_.size(); ++r) {
            RowView const x = a.row(r), y = b.row(r);
            if (x.kind != y.kind || !std::equal(x.weights.begin(), x.weights.end(), y.weights.begin(), y.weights.end()) ||
                !std::equal(x.indices.begin(), x.indices.end(), y.indices.begin(), y.indices.end()))
                return false;
        }
        return true;
    }

private:
    struct RowInfo {
        std::size_t value_offset = 0;
        std::size_t index_offset = 0;
        std::uint32_t count = 0;
        RowKind kind = RowKind::Absent;
    };

    std::size_t n_splats_ = 0;
    std::size_t n_cage_verts_ = 0;
    std::vector<RowInfo> rows_;
    std::vector<float> values_;
    std::vector<std::uint32_t> indices_;
};

// Which tracked points to bake. The runtime deformer only reads the two
// principal-axis ends of each splat, so large scenes can skip the rest.
enum class BakeSelection { AllPoints, PrincipalEnds, PrincipalEndsAndCenter };

class MvcExteriorError : public Error {
public:
    explicit MvcExteriorError(std::vector<std::size_t> splats)
        : Error(message(splats)), splats_(std::move(splats))
    {
    }
    std::vector<std::size_t> const& splats() const { return splats_; }

private:
    static std::string message(std::vector<std::size_t> const& s)
    {
        std::string m = "bake_weights: " + std::to_string(s.size()) + " splat(s) have points outside the cage:";
        for (std::size_t i = 0; i < s.size() && i < 20; ++i)
            m += " " + std::to_string(s[i]);
        if (s.size() > 20)
            m += " ...";
        return m;
    }
    std::vector<std::size_t> splats_;
};

inline MvcWeights bake_weights(SplatSet const& hair, std::vector<Vec3> const& cage_vertices,
                               std::vector<Face> const& cage_faces,
                               BakeSelection selection = BakeSelection::AllPoints)
{
    if (hair.frame != SplatFrame::Global)
        throw Error("bake_weights: hair must be a global splat set");
    MvcCage const cage(cage_vertices, cage_faces);
    std::size_t const N = hair.size(), M = cage.size();

    std::vector<SplatEndpoints> ends(N);
    parallel_for(N, [&](std::size_t i) { ends[i] = endpoints(hair.splats[i]); });

    std::vector<std::size_t> rows;
    rows.reserve(N * kPointsPerSplat);
    for (std::size_t i = 0; i < N; ++i) {
        int const a = ends[i].principal_axis;
        for (int p = 0; p < kPointsPerSplat; ++p) {
            bool const principal = p == positive_end(a) || p == negative_end(a);
            bool const take = selection == BakeSelection::AllPoints || principal ||
                              (selection == BakeSelection::PrincipalEndsAndCenter && p == kCenter);
            if (take)
                rows.push_back(MvcWeights::row_index(i, p));
        }
    }

    MvcWeights out(N, M);
    out.allocate_dense(rows);
    std::vector<std::uint8_t> exterior(rows.size(), 0);
    parallel_for(
        rows.size(),
        [&](std::size_t k) {
            thread_local std::vector<double> w, scratch;
            w.resize(M);
            scratch.resize(4 * M);
            std::size_t const r = rows[k];
            Vec3 const& x = ends[r / kPointsPerSplat].points[r % kPointsPerSplat];
            if (cage.evaluate(to_d(x), w, scratch) == MvcLocation::Exterior)
                exterior[k] = 1;
            auto dst = out.dense_storage(r);
            for (std::size_t j = 0; j < M; ++j)
                dst[j] = float(w[j]);
        },
        16);

    std::vector<std::size_t> bad;
    for (std::size_t k = 0; k < rows.size(); ++k)
        if (exterior[k] && (bad.empty() || bad.back() != rows[k] / kPointsPerSplat))
            bad.push_back(rows[k] / kPointsPerSplat);
    if (!bad.empty())
        throw MvcExteriorError(std::move(bad));
    return out;
}

inline MvcWeights bake_weights(SplatSet const& hair, Cage const& cage,
                               BakeSelection selection = BakeSelection::AllPoints)
{
    return bake_weights(hair, cage.vertices, cage.faces, selection);
}

/// Drops entries below `threshold` in magnitude; rows whose surviving
/// density is under `density_limit` are stored sparse and renormalized to
/// sum to one. Denser rows stay untouched.
inline MvcWeights sparsify(MvcWeights const& in, float threshold = 1e-7f, double density_limit = 0.3)
{
    MvcWeights out(in.n_splats(), in.n_cage_verts());
    std::vector<std::uint32_t> idx;
    std::vector<float> val;
    for (std::size_t r = 0; r < in.n_rows(); ++r) {
        RowView const v = in.row(r);
        if (v.kind == RowKind::Absent)
            continue;
        idx.clear();
        val.clear();
        for (std::size_t k = 0; k < v.size(); ++k)
            if (std::abs(v.weights[k]) >= threshold) {
                idx.push_back(v.kind == RowKind::Dense ? std::uint32_t(k) : v.indices[k]);
                val.push_back(v.weights[k]);
            }
        if (double(idx.size()) < density_limit * double(in.n_cage_verts())) {
            double sum = 0;
            for (float w : val)
                sum += w;
            for (float& w : val)
                w = float(w / sum);
            out.set_sparse(r, idx, val);
        }
        else if (v.kind == RowKind::Dense)
            out.set_dense(r, v.weights);
        else
            out.set_sparse(r, v.indices, v.weights);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Applying weights to a deformed cage

/// Cage positions split by coordinate for vectorized row products.
struct CageSoA {
    std::vector<float> x, y, z;

    CageSoA() = default;
    explicit CageSoA(std::vector<Vec3> const& v) { assign(v); }

    void assign(std::vector<Vec3> const& v)
    {
        x.resize(v.size());
        y.resize(v.size());
        z.resize(v.size());
        for (std::size_t i = 0; i < v.size(); ++i) {
            x[i] = v[i].x();
            y[i] = v[i].y();
            z[i] = v[i].z();
        }
    }
    std::size_t size() const { return x.size(); }
};

/// Sum of w[m] * c[m] over a dense row. Sixteen independent lanes keep the
/// loop vectorizable without reassociation; lanes combine in double.
inline Vec3 apply_dense_row(float const* w, CageSoA const& c)
{
    constexpr std::size_t L = 16;
    std::size_t const M = c.size();
    float ax[L] = {}, ay[L] = {}, az[L] = {};
    float const* xs = c.x.data();
    float const* ys = c.y.data();
    float const* zs = c.z.data();
    std::size_t m = 0;
    for (; m + L <= M; m += L)
        for (std::size_t l = 0; l < L; ++l) {
            ax[l] += w[m + l] * xs[m + l];
            ay[l] += w[m + l] * ys[m + l];
            az[l] += w[m + l] * zs[m + l];
        }
    for (std::size_t l = 0; m < M; ++m, ++l) {
        ax[l] += w[m] * xs[m];
        ay[l] += w[m] * ys[m];
        az[l] += w[m] * zs[m];
    }
    double sx = 0, sy = 0, sz = 0;
    for (std::size_t l = 0; l < L; ++l) {
        sx += ax[l];
        sy += ay[l];
        sz += az[l];
    }
    return Vec3(float(sx), float(sy), float(sz));
}

inline Vec3 apply_row(RowView const& row, CageSoA const& c)
{
    if (row.kind == RowKind::Dense) {
        if (row.size() != c.size())
            throw Error("apply_cage: row length does not match cage vertex count");
        return apply_dense_row(row.weights.data(), c);
    }
    if (row.kind == RowKind::Absent)
        throw Error("apply_cage: row was not baked");
    double sx = 0, sy = 0, sz = 0;
    for (std::size_t k = 0; k < row.size(); ++k) {
        auto const m = row.indices[k];
        if (m >= c.size())
            throw Error("apply_cage: sparse index out of range");
        sx += double(row.weights[k]) * c.x[m];
        sy += double(row.weights[k]) * c.y[m];
        sz += double(row.weights[k]) * c.z[m];
    }
    return Vec3(float(sx), float(sy), float(sz));
}

/// Interpolation of one weight row (any length-M vector) over cage vertices.
inline Vec3 apply_cage(std::span<double const> row, std::vector<Vec3> const& deformed)
{
    if (row.size() != deformed.size())
        throw Error("apply_cage: row length " + std::to_string(row.size()) + " does not match cage vertex count " +
                    std::to_string(deformed.size()));
    Vec3d acc = Vec3d::Zero();
    for (std::size_t m = 0; m < row.size(); ++m)
        acc += row[m] * to_d(deformed[m]);
    return acc.cast<float>();
}

inline Vec3 apply_cage(std::span<float const> row, std::vector<Vec3> const& deformed)
{
    if (row.size() != deformed.size())
        throw Error("apply_cage: row length " + std::to_string(row.size()) + " does not match cage vertex count " +
                    std::to_string(deformed.size()));
    Vec3d acc = Vec3d::Zero();
    for (std::size_t m = 0; m < row.size(); ++m)
        acc += double(row[m]) * to_d(deformed[m]);
    return acc.cast<float>();
}

/// All baked points (7 per splat, row-major) under a deformed cage. Rows that
/// were not baked come back as NaN.
inline std::vector<Vec3> apply_cage(MvcWeights const& weights, std::vector<Vec3> const& deformed)
{
    if (deformed.size() != weights.n_cage_verts())
        throw Error("apply_cage: cage has " + std::to_string(deformed.size()) + " vertices, weights expect " +
                    std::to_string(weights.n_cage_verts()));
    CageSoA const soa(deformed);
    std::vector<Vec3> out(weights.n_rows());
    parallel_for(weights.n_rows(), [&](std::size_t r) {
        RowView const v = weights.row(r);
        out[r] = v.kind == RowKind::Absent ? Vec3::Constant(std::numeric_limits<float>::quiet_NaN())
                                           : apply_row(v, soa);
    });
    return out;
}

// ---------------------------------------------------------------------------
// Collision proxies: each cage vertex borrows the center weights of its
// nearest splat, so its proxy tracks where that splat would be.

struct ProxyBinding {
    std::uint32_t source_splat = 0;
    std::vector<float> weight_row; // length M
};

inline std::vector<ProxyBinding> bind_proxies(std::vector<Vec3> const& cage_vertices, std::vector<Face> const& cage_faces,
                                              SplatSet const& hair, MvcWeights const& weights)
{
    if (hair.empty())
        throw Error("bind_proxies: empty hair set");
    if (weights.n_splats() != hair.size() || weights.n_cage_verts() != cage_vertices.size())
        throw Error("bind_proxies: weights were baked for a different hair set or cage");
    std::vector<Vec3> centers(hair.size());
    for (std::size_t i = 0; i < hair.size(); ++i)
        centers[i] = hair.splats[i].mu;
    PointKdTree const tree(centers);

    std::optional<MvcCage> cage;
    std::vector<ProxyBinding> out(cage_vertices.size());
    for (std::size_t j = 0; j < cage_vertices.size(); ++j) {
        auto const nn = tree.nearest(cage_vertices[j]);
        out[j].source_splat = nn.index;
        std::size_t const r = MvcWeights::row_index(nn.index, kCenter);
        if (weights.has_row(r)) {
            out[j].weight_row = weights.expand(r);
            continue;
        }
        if (!cage)
            cage.emplace(cage_vertices, cage_faces);
        auto const pw = mvc_weights_point(centers[nn.index], *cage);
        out[j].weight_row.assign(pw.weights.begin(), pw.weights.end());
    }
    return out;
}

inline std::vector<ProxyBinding> bind_proxies(Cage const& cage, SplatSet const& hair, MvcWeights const& weights)
{
    return bind_proxies(cage.vertices, cage.faces, hair, weights);
}

inline Vec3 proxy_position(ProxyBinding const& proxy, CageSoA const& positions)
{
    return apply_dense_row(proxy.weight_row.data(), positions);
}

} // namespace hairsim
