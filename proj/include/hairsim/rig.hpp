#pragma once

#include "bvh.hpp"
#include "parallel.hpp"

namespace hairsim {

/// Rigid-plus-uniform-scale frame of a host triangle. Columns of R are
/// [edge direction, face normal, edge x normal]; t is the centroid and eta
/// the mean of the first edge length and the height of v2 above it.
struct TriangleFrame {
    Mat3 R = Mat3::Identity();
    Vec3 t = Vec3::Zero();
    float eta = 1.f;
    Quat q; // quaternion of R

    static TriangleFrame identity() { return {}; }
};

inline constexpr double kDegenerateArea = 1e-12;

inline TriangleFrame triangle_frame(Vec3 const& a, Vec3 const& b, Vec3 const& c)
{
    Vec3d const v0 = to_d(a), v1 = to_d(b), v2 = to_d(c);
    Vec3d const e1 = v1 - v0;
    Vec3d const n = e1.cross(v2 - v0);
    double const len = e1.norm();
    double const area2 = n.norm();
    if (!(0.5 * area2 > kDegenerateArea) || !(len > 0))
        throw Error("triangle_frame: degenerate face");
    Vec3d const x = e1 / len;
    Vec3d const y = n / area2;
    Vec3d const z = x.cross(y);
    Mat3d R;
    R.col(0) = x;
    R.col(1) = y;
    R.col(2) = z;
    TriangleFrame f;
    f.R = R.cast<float>();
    f.t = ((v0 + v1 + v2) / 3.0).cast<float>();
    f.eta = float(0.5 * (len + area2 / len));
    f.q = matrix_to_quat(f.R);
    return f;
}

inline TriangleFrame triangle_frame(std::vector<Vec3> const& vertices, std::vector<Face> const& faces,
                                    std::size_t face)
{
    if (face >= faces.size())
        throw Error("triangle_frame: face index " + std::to_string(face) + " out of range");
    auto const& f = faces[face];
    return triangle_frame(vertices[f[0]], vertices[f[1]], vertices[f[2]]);
}

inline bool is_degenerate_face(std::vector<Vec3> const& vertices, Face const& f)
{
    Vec3d const e1 = to_d(vertices[f[1]]) - to_d(vertices[f[0]]);
    return !(0.5 * e1.cross(to_d(vertices[f[2]]) - to_d(vertices[f[0]])).norm() > kDegenerateArea);
}

/// Triangle-local splat to world space. The binding is carried through.
inline GaussianSplat local_to_global(GaussianSplat const& local, TriangleFrame const& frame)
{
    if (!local.binding)
        throw Error("local_to_global: splat has no triangle binding");
    GaussianSplat g = local;
    Mat3d const R = frame.R.cast<double>();
    double const eta = frame.eta;
    g.mu = (eta * (R * to_d(local.mu)) + to_d(frame.t)).cast<float>();
    g.rot = (frame.q * local.rot).normalized();
    g.scale = (eta * local.scale.cast<double>()).cast<float>();
    return g;
}

/// World-space splat into the frame of triangle `binding`.
inline GaussianSplat global_to_local(GaussianSplat const& global, TriangleFrame const& frame, std::uint32_t binding)
{
    GaussianSplat l = global;
    Mat3d const R = frame.R.cast<double>();
    double const inv_eta = 1.0 / double(frame.eta);
    l.mu = (inv_eta * (R.transpose() * (to_d(global.mu) - to_d(frame.t)))).cast<float>();
    l.rot = (frame.q.conjugate() * global.rot).normalized();
    l.scale = (inv_eta * global.scale.cast<double>()).cast<float>();
    l.binding = binding;
    return l;
}

/// Binds every splat to the triangle holding its closest surface point and
/// expresses it in that triangle's frame. Equidistant faces resolve to the
/// lower face index; degenerate faces never host splats.
inline SplatSet bind_nearest(SplatSet const& splats, std::vector<Vec3> const& vertices, std::vector<Face> const& faces)
{
    if (faces.empty() || vertices.empty())
        throw Error("bind_nearest: empty mesh");
    if (splats.frame != SplatFrame::Global)
        throw Error("bind_nearest: expected a global splat set");
    std::vector<std::uint32_t> usable;
    for (std::uint32_t f = 0; f < faces.size(); ++f)
        if (!is_degenerate_face(vertices, faces[f]))
            usable.push_back(f);
    if (usable.empty())
        throw Error("bind_nearest: every face is degenerate");
    MeshBvh const bvh(vertices, faces, false, usable);

    SplatSet out;
    out.frame = SplatFrame::TriangleLocal;
    out.splats.resize(splats.size());
    parallel_for(splats.size(), [&](std::size_t i) {
        auto const& s = splats.splats[i];
        auto const hit = bvh.closest(to_d(s.mu));
        out.splats[i] = global_to_local(s, triangle_frame(vertices, faces, hit.face), hit.face);
    });
    return out;
}

inline SplatSet bind_nearest(SplatSet const& splats, SkinnedMesh const& mesh)
{
    return bind_nearest(splats, mesh.vertices, mesh.faces);
}

/// Places triangle-local splats on a posed mesh. Output is a global set with
/// bindings stripped.
inline SplatSet pose_splats(SplatSet const& local, std::vector<Vec3> const& posed, std::vector<Face> const& faces)
{
    if (local.frame != SplatFrame::TriangleLocal)
        throw Error("pose_splats: expected a triangle-local splat set");
    std::vector<TriangleFrame> frames(faces.size());
    std::vector<std::uint8_t> ready(faces.size(), 0);
    for (auto const& s : local.splats) {
        if (!s.binding || *s.binding >= faces.size())
            throw Error("pose_splats: splat binding out of range");
        if (!ready[*s.binding]) {
            frames[*s.binding] = triangle_frame(posed, faces, *s.binding);
            ready[*s.binding] = 1;
        }
    }
    SplatSet out;
    out.frame = SplatFrame::Global;
    out.splats.resize(local.size());
    parallel_for(local.size(), [&](std::size_t i) {
        auto const& s = local.splats[i];
        out.splats[i] = local_to_global(s, frames[*s.binding]);
        out.splats[i].binding.reset();
    });
    return out;
}

// ---------------------------------------------------------------------------
// Linear blend skinning

/// Joint transforms in mesh joint order.
inline std::vector<Mat4> resolve_joints(SkinnedMesh const& mesh, JointTransforms const& jt)
{
    std::vector<Mat4> out;
    out.reserve(mesh.joints.size());
    for (auto const& name : mesh.joints) {
        auto it = jt.transforms.find(name);
        if (it == jt.transforms.end())
            throw Error("lbs_pose: motion frame is missing joint '" + name + "'");
        out.push_back(it->second);
    }
    return out;
}

inline Vec3 skin_point(Vec3 const& rest, std::vector<SkinWeight> const& weights, std::vector<Mat4> const& joints)
{
    Vec3d acc = Vec3d::Zero();
    Eigen::Vector4d const r(rest.x(), rest.y(), rest.z(), 1.0);
    for (auto const& w : weights)
        acc += double(w.weight) * (joints[w.joint].cast<double>() * r).head<3>();
    return acc.cast<float>();
}

inline std::vector<Vec3> lbs_pose(SkinnedMesh const& mesh, MotionFrame const& frame)
{
    if (auto const* ev = std::get_if<ExplicitVertices>(&frame)) {
        if (ev->vertices.size() != mesh.vertices.size())
            throw Error("lbs_pose: explicit vertex count " + std::to_string(ev->vertices.size()) +
                        " does not match mesh vertex count " + std::to_string(mesh.vertices.size()));
        return ev->vertices;
    }
    auto const joints = resolve_joints(mesh, std::get<JointTransforms>(frame));
    if (mesh.skin_weights.size() != mesh.vertices.size())
        throw Error("lbs_pose: skin weight count does not match vertex count");
    std::vector<Vec3> out(mesh.vertices.size());
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = skin_point(mesh.vertices[i], mesh.skin_weights[i], joints);
    return out;
}

} // namespace hairsim
