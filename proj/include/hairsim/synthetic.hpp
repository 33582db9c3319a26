#pragma once

#include "engine.hpp"

#include <random>

// Procedural fixtures: a spherical head with a scalp region, three hair
// styles, bald splats, and a nodding motion.

namespace hairsim::synthetic {

inline constexpr float kHeadRadius = 0.1f;
inline Vec3 const kNeckPivot(0.f, -0.12f, 0.f);

/// Icosphere of the given radius around the origin.
inline TriMesh icosphere(float radius, int subdivisions)
{
    float const t = (1.f + std::sqrt(5.f)) / 2.f;
    std::vector<Vec3d> v = {{-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0}, {0, -1, t}, {0, 1, t},
                            {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
    std::vector<Face> f = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
                           {11, 10, 2}, {10, 7, 6}, {7, 1, 8},  {3, 9, 4},  {3, 4, 2},   {3, 2, 6}, {3, 6, 8},
                           {3, 8, 9},   {4, 9, 5},  {2, 4, 11}, {6, 2, 10}, {8, 6, 7},   {9, 8, 1}};
    for (auto& p : v)
        p.normalize();
    for (int s = 0; s < subdivisions; ++s) {
        std::map<std::uint64_t, std::uint32_t> mid;
        auto midpoint = [&](std::uint32_t a, std::uint32_t b) {
            auto key = edge_key(a, b);
            auto it = mid.find(key);
            if (it != mid.end())
                return it->second;
            v.push_back((v[a] + v[b]).normalized());
            return mid[key] = std::uint32_t(v.size() - 1);
        };
        std::vector<Face> nf;
        for (auto const& tri : f) {
            auto const a = midpoint(tri[0], tri[1]), b = midpoint(tri[1], tri[2]), c = midpoint(tri[2], tri[0]);
            nf.push_back({tri[0], a, c});
            nf.push_back({tri[1], b, a});
            nf.push_back({tri[2], c, b});
            nf.push_back({a, b, c});
        }
        f = std::move(nf);
    }
    TriMesh m;
    for (auto const& p : v)
        m.vertices.push_back((radius * p).cast<float>());
    m.faces = std::move(f);
    return m;
}

/// Scalp: top and back of the head, away from the face (+z).
inline bool on_scalp(Vec3 const& dir)
{
    return dir.y() > 0.15f || (dir.z() < -0.45f && dir.y() > -0.35f);
}

/// Rigid spherical head skinned fully to joint "head"; "neck" is listed but
/// carries no weight.
inline SkinnedMesh head(int subdivisions = 3, float radius = kHeadRadius)
{
    TriMesh const m = icosphere(radius, subdivisions);
    SkinnedMesh mesh;
    mesh.vertices = m.vertices;
    mesh.faces = m.faces;
    mesh.joints = {"neck", "head"};
    mesh.skin_weights.assign(mesh.vertices.size(), {SkinWeight{1, 1.f}});
    for (std::uint32_t f = 0; f < mesh.faces.size(); ++f) {
        Vec3 const c = (mesh.vertices[mesh.faces[f][0]] + mesh.vertices[mesh.faces[f][1]] +
                        mesh.vertices[mesh.faces[f][2]]) / 3.f;
        if (on_scalp(c.normalized()))
            mesh.scalp_faces.push_back(f);
    }
    return mesh;
}

enum class HairStyle { StraightBob, LongPonytail, CurlyVolume };

inline char const* style_name(HairStyle s)
{
    switch (s) {
    case HairStyle::StraightBob: return "straight_bob";
    case HairStyle::LongPonytail: return "long_ponytail";
    default: return "curly_volume";
    }
}

namespace detail {

inline Quat frame_quat(Vec3d const& tangent)
{
    Vec3d const x = tangent.normalized();
    Vec3d y = x.unitOrthogonal();
    Vec3d const z = x.cross(y);
    Mat3 R;
    R.col(0) = x.cast<float>();
    R.col(1) = y.cast<float>();
    R.col(2) = z.cast<float>();
    return matrix_to_quat(R);
}

// Splats along a polyline, one per segment, long axis on the segment.
inline void emit_strand(std::vector<Vec3d> const& pts, std::mt19937& rng, Vec3 const& base_color,
                        std::vector<GaussianSplat>& out)
{
    std::uniform_real_distribution<float> jitter(-0.06f, 0.06f);
    std::uniform_real_distribution<float> thick(0.0006f, 0.0012f);
    float const shade = jitter(rng);
    for (std::size_t k = 0; k + 1 < pts.size(); ++k) {
        Vec3d const a = pts[k], b = pts[k + 1];
        double const len = (b - a).norm();
        if (len < 1e-6)
            continue;
        GaussianSplat s;
        s.mu = (0.5 * (a + b)).cast<float>();
        s.rot = frame_quat(b - a);
        float const th = thick(rng);
        s.scale = Vec3(float(0.6 * len), th, th);
        s.opacity = 0.85f;
        s.color = (base_color + Vec3::Constant(shade)).cwiseMax(0.f).cwiseMin(1.f);
        out.push_back(s);
    }
}

inline Vec3d sphere_point(double rho, double polar, double azimuth)
{
    return rho * Vec3d(std::sin(polar) * std::cos(azimuth), std::cos(polar), std::sin(polar) * std::sin(azimuth));
}

// Azimuth measured from +x in the xz plane; the face looks along +z.
inline bool over_face(double azimuth)
{
    double const d = std::remainder(azimuth - std::numbers::pi / 2, 2 * std::numbers::pi);
    return std::abs(d) < 0.95;
}

// Path over the scalp down to the equator, then straight down.
inline std::vector<Vec3d> bob_path(double rho, double polar0, double azimuth, double hang, int samples)
{
    double const arc = (std::numbers::pi / 2 - polar0) * rho;
    double const total = arc + hang;
    std::vector<Vec3d> pts;
    for (int i = 0; i <= samples; ++i) {
        double const s = total * i / samples;
        if (s <= arc)
            pts.push_back(sphere_point(rho, polar0 + s / rho, azimuth));
        else
            pts.push_back(Vec3d(rho * std::cos(azimuth), -(s - arc), rho * std::sin(azimuth)));
    }
    return pts;
}

} // namespace detail

/// Hair splat cloud outside a head of radius `head_radius` centred at the
/// origin. Every splat endpoint keeps a clearance of at least 4 mm.
inline SplatSet hair(HairStyle style, std::size_t target_splats, std::uint32_t seed = 7,
                     double head_radius = kHeadRadius)
{
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    SplatSet set;
    set.frame = SplatFrame::Global;
    auto& out = set.splats;
    Vec3 const brown(0.25f, 0.16f, 0.09f);
    double const R = head_radius;
    constexpr double pi = std::numbers::pi;

    int const per_strand = style == HairStyle::LongPonytail ? 24 : 16;
    std::size_t const strands = std::max<std::size_t>(1, target_splats / std::size_t(per_strand));
    out.reserve(strands * std::size_t(per_strand));
    for (std::size_t k = 0; out.size() < target_splats && k < 50 * strands; ++k) {
        double const polar0 = 0.25 * u01(rng);
        double azimuth = 2 * pi * u01(rng);
        std::vector<Vec3d> pts;
        switch (style) {
        case HairStyle::StraightBob: {
            if (detail::over_face(azimuth))
                continue;
            double const rho = R + 0.006 + 0.012 * u01(rng);
            pts = detail::bob_path(rho, polar0, azimuth, 0.05 + 0.02 * u01(rng), per_strand);
            break;
        }
        case HairStyle::CurlyVolume: {
            if (detail::over_face(azimuth))
                continue;
            double const curl = 0.008 + 0.004 * u01(rng);
            double const rho = R + 0.006 + curl + 0.012 * u01(rng);
            auto base = detail::bob_path(rho, polar0, azimuth, 0.04 + 0.02 * u01(rng), 4 * per_strand);
            double const phase = 2 * pi * u01(rng);
            std::vector<Vec3d> curled;
            for (std::size_t i = 0; i < base.size(); ++i) {
                Vec3d const tng = (base[std::min(i + 1, base.size() - 1)] - base[i > 0 ? i - 1 : 0]).normalized();
                Vec3d const radial = Vec3d(base[i].x(), 0, base[i].z()).normalized();
                Vec3d const side = tng.cross(radial).normalized();
                Vec3d const out_dir = side.cross(tng).normalized();
                double const a = phase + 0.45 * double(i);
                double const amp = curl * std::min(1.0, double(i) / 8.0);
                curled.push_back(base[i] + amp * (std::cos(a) * side + std::sin(a) * out_dir));
            }
            std::vector<Vec3d> sparse;
            for (std::size_t i = 0; i < curled.size(); i += 4)
                sparse.push_back(curled[i]);
            pts = sparse;
            break;
        }
        case HairStyle::LongPonytail: {
            // Scalp strands run to a tie at the back of the head; the tail
            // hangs from the tie as a bundle.
            Vec3d const tie(0, 0.02, -(R + 0.025));
            bool const tail = u01(rng) < 0.55;
            if (!tail) {
                if (detail::over_face(azimuth))
                    continue;
                double const rho = R + 0.006 + 0.006 * u01(rng);
                Vec3d const root = detail::sphere_point(rho, polar0, azimuth);
                for (int i = 0; i <= per_strand; ++i) {
                    double const s = double(i) / per_strand;
                    Vec3d p = (1 - s) * root + s * tie;
                    double const r = p.norm();
                    if (r < rho)
                        p *= rho / r;
                    pts.push_back(p);
                }
            }
            else {
                double const ang = 2 * pi * u01(rng), rad = 0.012 * std::sqrt(u01(rng));
                Vec3d const off(rad * std::cos(ang), 0, rad * std::sin(ang));
                double const length = 0.22 + 0.05 * u01(rng);
                for (int i = 0; i <= per_strand; ++i) {
                    double const s = double(i) / per_strand;
                    Vec3d p = tie + off * (1 + 0.8 * s);
                    p.y() -= length * s;
                    p.z() -= 0.03 * std::sin(pi * s);
                    pts.push_back(p);
                }
            }
            break;
        }
        }
        detail::emit_strand(pts, rng, brown, out);
    }
    if (out.size() > target_splats)
        out.resize(target_splats);
    return set;
}

/// Flat skin-coloured splats on every head face, in global coordinates.
inline SplatSet bald(SkinnedMesh const& mesh)
{
    SplatSet set;
    set.frame = SplatFrame::Global;
    for (std::uint32_t f = 0; f < mesh.faces.size(); ++f) {
        Vec3 const a = mesh.vertices[mesh.faces[f][0]], b = mesh.vertices[mesh.faces[f][1]],
                   c = mesh.vertices[mesh.faces[f][2]];
        TriangleFrame const fr = triangle_frame(a, b, c);
        GaussianSplat s;
        s.mu = fr.t;
        Mat3 R;
        R.col(0) = fr.R.col(0);
        R.col(1) = fr.R.col(2);
        R.col(2) = R.col(0).cross(R.col(1));
        s.rot = matrix_to_quat(R);
        float const size = 0.5f * (b - a).norm();
        s.scale = Vec3(size, size, 0.1f * size);
        s.opacity = 0.95f;
        s.color = Vec3(0.86f, 0.67f, 0.56f);
        set.splats.push_back(s);
    }
    return set;
}

inline Mat4 rotation_about(Vec3 const& pivot, Vec3 const& axis, float angle)
{
    Mat4 t = Mat4::Identity();
    Mat3 const r = Eigen::AngleAxisf(angle, axis.normalized()).toRotationMatrix();
    t.topLeftCorner<3, 3>() = r;
    t.topRightCorner<3, 1>() = pivot - r * pivot;
    return t;
}

inline MotionFrame identity_frame()
{
    JointTransforms jt;
    jt.transforms["neck"] = Mat4::Identity();
    jt.transforms["head"] = Mat4::Identity();
    return jt;
}

/// Head nod about the neck pivot: amplitude in degrees, `period` frames per cycle.
inline std::vector<MotionFrame> nodding(std::size_t frames, float amplitude_deg = 20.f, float period = 60.f)
{
    std::vector<MotionFrame> out;
    for (std::size_t f = 0; f < frames; ++f) {
        float const a = amplitude_deg * float(std::numbers::pi) / 180.f *
                        float(std::sin(2 * std::numbers::pi * double(f + 1) / double(period)));
        JointTransforms jt;
        jt.transforms["neck"] = Mat4::Identity();
        jt.transforms["head"] = rotation_about(kNeckPivot, Vec3::UnitX(), a);
        out.emplace_back(std::move(jt));
    }
    return out;
}

inline std::vector<MotionFrame> still(std::size_t frames) { return std::vector<MotionFrame>(frames, identity_frame()); }

/// Closed column of `rings` square rings (4 vertices each) with capped ends.
inline TriMesh column(int rings, float half_width, float height, Vec3 const& base = Vec3::Zero())
{
    TriMesh m;
    for (int r = 0; r < rings; ++r) {
        float const y = base.y() + height * float(r) / float(rings - 1);
        for (int k = 0; k < 4; ++k) {
            float const ang = float(std::numbers::pi) / 2.f * float(k);
            m.vertices.emplace_back(base.x() + half_width * std::cos(ang), y, base.z() + half_width * std::sin(ang));
        }
    }
    auto id = [](int r, int k) { return std::uint32_t(4 * r + (k % 4)); };
    for (int r = 0; r + 1 < rings; ++r)
        for (int k = 0; k < 4; ++k) {
            m.faces.push_back({id(r, k), id(r + 1, k), id(r + 1, k + 1)});
            m.faces.push_back({id(r, k), id(r + 1, k + 1), id(r, k + 1)});
        }
    m.faces.push_back({id(0, 0), id(0, 1), id(0, 2)});
    m.faces.push_back({id(0, 0), id(0, 2), id(0, 3)});
    int const t = rings - 1;
    m.faces.push_back({id(t, 0), id(t, 2), id(t, 1)});
    m.faces.push_back({id(t, 0), id(t, 3), id(t, 2)});
    return m;
}

struct DemoOptions {
    HairStyle style = HairStyle::StraightBob;
    std::size_t hair_splats = 4000;
    int head_subdivisions = 3;
    CageBuildConfig cage;
    double root_radius = 0; // 0: 2.5 voxels
    SolverConfig solver;
    BakeSelection bake = BakeSelection::PrincipalEndsAndCenter;
    std::uint32_t seed = 7;
};

struct Demo {
    Scene scene;
    CageBuildResult cage_report;
};

/// Head, bald and hair splats, cage with roots, weights and proxies.
inline Demo demo_scene(DemoOptions const& opt = {})
{
    Demo d;
    Scene& s = d.scene;
    s.mesh = head(opt.head_subdivisions);
    s.bald_local = bind_nearest(bald(s.mesh), s.mesh);
    s.hair = hair(opt.style, opt.hair_splats, opt.seed);
    d.cage_report = build_cage(s.hair, opt.cage);
    double const radius = opt.root_radius > 0 ? opt.root_radius : 2.5 * d.cage_report.voxel_size;
    s.cage = mark_roots(d.cage_report.cage, s.mesh, radius);
    s.weights = bake_weights(s.hair, s.cage, opt.bake);
    s.proxies = bind_proxies(s.cage, s.hair, s.weights);
    s.solver = opt.solver;
    return d;
}

} // namespace hairsim::synthetic
