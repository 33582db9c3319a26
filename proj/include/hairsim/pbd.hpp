#pragma once

#include "bvh.hpp"
#include "mvc.hpp"

namespace hairsim {

struct StretchConstraint {
    std::uint32_t i, j;
    float rest_length;
    float compliance;
};

/// Dihedral constraint across the edge (v[0], v[1]). v[2] is opposite in the
/// face holding the directed edge v[0]->v[1], v[3] in the other face.
struct BendConstraint {
    std::array<std::uint32_t, 4> v;
    float rest_angle;
    float compliance;
    float rest_hinge = 0.f; // |v1 - v0| at rest; caps the projection step
};

struct VolumeConstraint {
    double rest_volume;
    float compliance;
};

struct ConstraintSet {
    std::vector<StretchConstraint> stretch;
    std::vector<BendConstraint> bend;
    std::optional<VolumeConstraint> volume;
    std::vector<Face> faces; // for the volume constraint
    float collision_margin = 0;
};

/// Signed dihedral angle across edge p0-p1 (0 when flat, positive when the
/// two faces fold away from their normals). Fills d(angle)/dp_k when
/// `grad` is given. Returns nullopt for degenerate triangles.
inline std::optional<double> dihedral_angle(Vec3d const& p0, Vec3d const& p1, Vec3d const& p2, Vec3d const& p3,
                                            std::array<Vec3d, 4>* grad = nullptr)
{
    Vec3d const e = p1 - p0;
    Vec3d const n1 = e.cross(p2 - p0);
    Vec3d const n2 = (p0 - p1).cross(p3 - p1);
    double const el = e.norm(), l1 = n1.squaredNorm(), l2 = n2.squaredNorm();
    if (el < 1e-12 || l1 < 1e-24 || l2 < 1e-24)
        return std::nullopt;
    Vec3d const u1 = n1 / std::sqrt(l1), u2 = n2 / std::sqrt(l2);
    double const angle = std::atan2(u1.cross(u2).dot(e / el), u1.dot(u2));
    if (grad) {
        // Bridson et al. bending gradients with x3 = p0, x4 = p1, x1 = p2, x2 = p3.
        Vec3d const a = n1 / l1, b = n2 / l2;
        (*grad)[2] = el * a;
        (*grad)[3] = el * b;
        (*grad)[0] = ((p2 - p1).dot(e) / el) * a + ((p3 - p1).dot(e) / el) * b;
        (*grad)[1] = -((p2 - p0).dot(e) / el) * a - ((p3 - p0).dot(e) / el) * b;
        for (auto& g : *grad)
            g = -g;
    }
    return angle;
}

inline double wrap_angle(double a)
{
    constexpr double pi = std::numbers::pi;
    while (a > pi)
        a -= 2 * pi;
    while (a <= -pi)
        a += 2 * pi;
    return a;
}

inline double enclosed_volume(std::vector<Vec3> const& v, std::vector<Face> const& faces)
{
    double vol = 0;
    for (auto const& f : faces)
        vol += to_d(v[f[0]]).dot(to_d(v[f[1]]).cross(to_d(v[f[2]])));
    return vol / 6;
}

/// One stretch constraint per unique edge, one bend constraint per edge with
/// two incident faces, at the rest pose of the cage.
inline ConstraintSet build_constraints(std::vector<Vec3> const& rest, std::vector<Face> const& faces,
                                       SolverConfig const& config)
{
    ConstraintSet cs;
    cs.collision_margin = config.collision_margin;
    cs.faces = faces;
    for (auto [i, j] : unique_edges(faces)) {
        float const len = float((to_d(rest[i]) - to_d(rest[j])).norm());
        if (!(len > 0))
            throw Error("build_constraints: zero-length edge " + std::to_string(i) + "-" + std::to_string(j));
        cs.stretch.push_back({i, j, len, config.stretch_compliance});
    }

    // Directed edge -> opposite vertex.
    std::unordered_map<std::uint64_t, std::uint32_t> opposite;
    auto directed = [](std::uint32_t a, std::uint32_t b) { return (std::uint64_t(a) << 32) | b; };
    for (auto const& f : faces)
        for (int k = 0; k < 3; ++k)
            opposite[directed(f[k], f[(k + 1) % 3])] = f[(k + 2) % 3];
    for (auto [i, j] : unique_edges(faces)) {
        auto a = opposite.find(directed(i, j));
        auto b = opposite.find(directed(j, i));
        if (a == opposite.end() || b == opposite.end())
            continue;
        BendConstraint bc{{i, j, a->second, b->second}, 0.f, config.bend_compliance};
        auto angle = dihedral_angle(to_d(rest[i]), to_d(rest[j]), to_d(rest[a->second]), to_d(rest[b->second]));
        if (!angle)
            continue;
        bc.rest_angle = float(*angle);
        bc.rest_hinge = (rest[j] - rest[i]).norm();
        cs.bend.push_back(bc);
    }
    if (config.volume_constraint)
        cs.volume = VolumeConstraint{enclosed_volume(rest, faces), config.volume_compliance};
    return cs;
}

inline ConstraintSet build_constraints(Cage const& cage, SolverConfig const& config)
{
    return build_constraints(cage.vertices, cage.faces, config);
}

struct SolverState {
    std::vector<Vec3> positions; // c
    std::vector<Vec3> predicted; // p
    std::vector<Vec3> velocities;
    std::vector<float> inv_mass;
    std::vector<double> lambda_stretch, lambda_bend;
    double lambda_volume = 0;
    double time = 0;

    static SolverState from_cage(Cage const& cage)
    {
        SolverState s;
        s.positions = cage.vertices;
        s.predicted = cage.vertices;
        s.velocities = cage.velocities.size() == cage.vertices.size()
                           ? cage.velocities
                           : std::vector<Vec3>(cage.vertices.size(), Vec3::Zero());
        s.inv_mass = cage.inv_mass;
        return s;
    }

    std::size_t size() const { return positions.size(); }
};

/// Prescribed positions for kinematic vertices at the end of a step.
struct KinematicTargets {
    std::vector<std::uint32_t> vertices;
    std::vector<Vec3> positions;
};

/// Semi-implicit Euler prediction. Free vertices get damped gravity; kinematic
/// vertices jump to their targets with the matching velocity. Resets the
/// constraint multipliers.
inline void predict(SolverState& s, SolverConfig const& config, float dt, KinematicTargets const& targets = {})
{
    if (!(dt > 0))
        throw Error("predict: dt must be positive");
    std::size_t const M = s.size();
    s.predicted.resize(M);
    for (std::size_t j = 0; j < M; ++j) {
        if (s.inv_mass[j] == 0.f) {
            s.predicted[j] = s.positions[j];
            continue;
        }
        s.velocities[j] = (1.f - config.damping) * (s.velocities[j] + dt * s.inv_mass[j] * config.gravity);
        s.predicted[j] = s.positions[j] + dt * s.velocities[j];
    }
    if (targets.vertices.size() != targets.positions.size())
        throw Error("predict: kinematic target size mismatch");
    for (std::size_t k = 0; k < targets.vertices.size(); ++k) {
        auto const j = targets.vertices[k];
        if (j >= M)
            throw Error("predict: kinematic vertex out of range");
        if (s.inv_mass[j] != 0.f)
            throw Error("predict: target given for free vertex " + std::to_string(j));
        s.predicted[j] = targets.positions[k];
        s.velocities[j] = (targets.positions[k] - s.positions[j]) / dt;
    }
    s.lambda_stretch.clear();
    s.lambda_bend.clear();
    s.lambda_volume = 0;
}

enum class CollisionMode { Proxy, Direct, None };

struct CollisionContext {
    MeshBvh const* mesh = nullptr;
    CollisionMode mode = CollisionMode::None;
    std::vector<ProxyBinding> const* proxies = nullptr;
};

struct ProjectionStats {
    std::size_t sdf_queries = 0;
    std::size_t sdf_skipped = 0;
    std::size_t corrections = 0;
};

namespace detail {

inline void solve_stretch(SolverState& s, ConstraintSet const& cs, double dt2)
{
    for (std::size_t c = 0; c < cs.stretch.size(); ++c) {
        auto const& k = cs.stretch[c];
        double const wi = s.inv_mass[k.i], wj = s.inv_mass[k.j];
        double const alpha = k.compliance / dt2;
        if (wi + wj + alpha == 0)
            continue;
        Vec3d const d = to_d(s.predicted[k.i]) - to_d(s.predicted[k.j]);
        double const len = d.norm();
        if (len < 1e-12)
            continue;
        Vec3d const n = d / len;
        double const C = len - k.rest_length;
        double const dl = (-C - alpha * s.lambda_stretch[c]) / (wi + wj + alpha);
        s.lambda_stretch[c] += dl;
        if (wi > 0)
            s.predicted[k.i] = (to_d(s.predicted[k.i]) + wi * dl * n).cast<float>();
        if (wj > 0)
            s.predicted[k.j] = (to_d(s.predicted[k.j]) - wj * dl * n).cast<float>();
    }
}

inline void solve_bend(SolverState& s, ConstraintSet const& cs, double dt2)
{
    std::array<Vec3d, 4> g;
    for (std::size_t c = 0; c < cs.bend.size(); ++c) {
        auto const& k = cs.bend[c];
        double w[4];
        double denom = k.compliance / dt2;
        double const alpha = denom;
        auto angle = dihedral_angle(to_d(s.predicted[k.v[0]]), to_d(s.predicted[k.v[1]]), to_d(s.predicted[k.v[2]]),
                                    to_d(s.predicted[k.v[3]]), &g);
        if (!angle)
            continue;
        for (int m = 0; m < 4; ++m) {
            w[m] = s.inv_mass[k.v[m]];
            denom += w[m] * g[m].squaredNorm();
        }
        if (denom < 1e-18)
            continue;
        double const C = wrap_angle(*angle - k.rest_angle);
        double dl = (-C - alpha * s.lambda_bend[c]) / denom;
        if (k.rest_hinge > 0) {
            double step = 0;
            for (int m = 0; m < 4; ++m)
                step = std::max(step, w[m] * std::abs(dl) * g[m].norm());
            if (step > k.rest_hinge)
                dl *= k.rest_hinge / step;
        }
        s.lambda_bend[c] += dl;
        for (int m = 0; m < 4; ++m)
            if (w[m] > 0)
                s.predicted[k.v[m]] = (to_d(s.predicted[k.v[m]]) + w[m] * dl * g[m]).cast<float>();
    }
}

inline void solve_volume(SolverState& s, ConstraintSet const& cs, double dt2)
{
    if (!cs.volume)
        return;
    std::vector<Vec3d> g(s.size(), Vec3d::Zero());
    double vol = 0;
    for (auto const& f : cs.faces) {
        Vec3d const a = to_d(s.predicted[f[0]]), b = to_d(s.predicted[f[1]]), c = to_d(s.predicted[f[2]]);
        vol += a.dot(b.cross(c));
        g[f[0]] += b.cross(c);
        g[f[1]] += c.cross(a);
        g[f[2]] += a.cross(b);
    }
    vol /= 6;
    double const alpha = cs.volume->compliance / dt2;
    double denom = alpha;
    for (std::size_t j = 0; j < g.size(); ++j) {
        g[j] /= 6;
        denom += s.inv_mass[j] * g[j].squaredNorm();
    }
    if (denom < 1e-18)
        return;
    double const dl = (-(vol - cs.volume->rest_volume) - alpha * s.lambda_volume) / denom;
    s.lambda_volume += dl;
    for (std::size_t j = 0; j < g.size(); ++j)
        if (s.inv_mass[j] > 0)
            s.predicted[j] = (to_d(s.predicted[j]) + s.inv_mass[j] * dl * g[j]).cast<float>();
}

} // namespace detail

/// Per-substep collision state. Signed distance is 1-Lipschitz, so a query
/// point that moved less than (cached sd - margin) since its last query
/// cannot be inside the margin and the query is skipped; the result is the
/// same as querying every time.
class CollisionCache {
public:
    void reset(std::size_t n)
    {
        point_.assign(n, Vec3::Zero());
        sd_.assign(n, -std::numeric_limits<float>::infinity());
    }

    template <class Query>
    std::optional<SignedDistance> query(std::size_t j, Vec3 const& p, float margin, Query&& q, ProjectionStats& stats)
    {
        double const moved = (to_d(p) - to_d(point_[j])).norm();
        if (double(sd_[j]) - moved - 1e-6 * (1 + std::abs(sd_[j])) >= double(margin)) {
            ++stats.sdf_skipped;
            return std::nullopt;
        }
        ++stats.sdf_queries;
        SignedDistance const sd = q(p);
        point_[j] = p;
        sd_[j] = sd.distance;
        return sd;
    }

    void invalidate(std::size_t j) { sd_[j] = -std::numeric_limits<float>::infinity(); }

private:
    std::vector<Vec3> point_;
    std::vector<float> sd_;
};

/// Gauss-Seidel projection: per iteration stretch, bend, volume, then
/// collision, each in index order. Collision pushes the predicted position
/// of a free vertex by (margin - sd) along the surface normal at its proxy
/// (or at the vertex itself in direct mode).
inline ProjectionStats project_constraints(SolverState& s, ConstraintSet const& cs, float dt, int iterations,
                                           CollisionContext const& col = {}, CollisionCache* cache = nullptr)
{
    if (iterations < 1)
        throw Error("project_constraints: iterations must be at least 1");
    ProjectionStats stats;
    double const dt2 = double(dt) * dt;
    s.lambda_stretch.assign(cs.stretch.size(), 0.0);
    s.lambda_bend.assign(cs.bend.size(), 0.0);
    s.lambda_volume = 0;

    std::size_t const M = s.size();
    bool const collide = col.mode != CollisionMode::None && col.mesh != nullptr;
    if (collide && col.mode == CollisionMode::Proxy && (!col.proxies || col.proxies->size() != M))
        throw Error("project_constraints: one proxy per cage vertex required");
    CollisionCache local_cache;
    if (!cache) {
        local_cache.reset(M);
        cache = &local_cache;
    }
    CageSoA soa;
    if (collide && col.mode == CollisionMode::Proxy)
        soa.assign(s.predicted);
    float const eps = cs.collision_margin;
    auto query = [&](Vec3 const& p) { return col.mesh->signed_distance(p); };

    for (int it = 0; it < iterations; ++it) {
        detail::solve_stretch(s, cs, dt2);
        detail::solve_bend(s, cs, dt2);
        detail::solve_volume(s, cs, dt2);
        if (!collide)
            continue;
        if (col.mode == CollisionMode::Proxy)
            soa.assign(s.predicted);
        for (std::size_t j = 0; j < M; ++j) {
            if (s.inv_mass[j] == 0.f)
                continue;
            Vec3 const probe =
                col.mode == CollisionMode::Proxy ? proxy_position((*col.proxies)[j], soa) : s.predicted[j];
            auto sd = cache->query(j, probe, eps, query, stats);
            if (!sd || !(sd->distance < eps))
                continue;
            Vec3 const delta = (eps - sd->distance) * sd->normal;
            s.predicted[j] += delta;
            ++stats.corrections;
            cache->invalidate(j);
            if (col.mode == CollisionMode::Proxy) {
                soa.x[j] = s.predicted[j].x();
                soa.y[j] = s.predicted[j].y();
                soa.z[j] = s.predicted[j].z();
            }
        }
    }
    return stats;
}

/// Finite-difference velocities for free vertices, then commit positions.
inline void update_velocities(SolverState& s, float dt)
{
    for (std::size_t j = 0; j < s.size(); ++j) {
        if (s.inv_mass[j] != 0.f)
            s.velocities[j] = (s.predicted[j] - s.positions[j]) / dt;
        s.positions[j] = s.predicted[j];
    }
    s.time += dt;
}

inline double kinetic_energy(SolverState const& s)
{
    double e = 0;
    for (std::size_t j = 0; j < s.size(); ++j)
        if (s.inv_mass[j] > 0)
            e += 0.5 / s.inv_mass[j] * to_d(s.velocities[j]).squaredNorm();
    return e;
}

inline double max_stretch_residual(SolverState const& s, ConstraintSet const& cs, bool relative = false)
{
    double r = 0;
    for (auto const& k : cs.stretch) {
        double c = std::abs((to_d(s.positions[k.i]) - to_d(s.positions[k.j])).norm() - k.rest_length);
        if (relative)
            c /= k.rest_length;
        r = std::max(r, c);
    }
    return r;
}

/// Sum over points of max(0, margin - sd)^2.
inline double collision_penalty(std::vector<Vec3> const& points, MeshBvh const& mesh, float margin)
{
    double total = 0;
    for (auto const& p : points) {
        double const sd = mesh.signed_distance(to_d(p)).distance;
        double const v = std::max(0.0, double(margin) - sd);
        total += v * v;
    }
    return total;
}

} // namespace hairsim
