#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace hairsim {

using Vec2 = Eigen::Vector2f;
using Vec3 = Eigen::Vector3f;
using Vec3d = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3f;
using Mat3d = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4f;
using Face = std::array<std::uint32_t, 3>;

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Quaternion, stored (w, x, y, z).

struct Quat {
    float w = 1.f;
    float x = 0.f;
    float y = 0.f;
    float z = 0.f;

    static Quat identity() { return {}; }

    float norm() const { return std::sqrt(w * w + x * x + y * y + z * z); }

    Quat normalized() const
    {
        float const n = norm();
        return {w / n, x / n, y / n, z / n};
    }

    Quat conjugate() const { return {w, -x, -y, -z}; }

    friend Quat operator*(Quat const& a, Quat const& b)
    {
        return {a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
                a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
                a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
                a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w};
    }

    friend Quat operator-(Quat const& q) { return {-q.w, -q.x, -q.y, -q.z}; }

    float dot(Quat const& o) const { return w * o.w + x * o.x + y * o.y + z * o.z; }

    static Quat from_axis_angle(Vec3 const& axis, float angle)
    {
        Vec3 const a = axis.normalized();
        float const s = std::sin(0.5f * angle);
        return {std::cos(0.5f * angle), a.x() * s, a.y() * s, a.z() * s};
    }
};

inline constexpr float kQuatUnitTol = 1e-6f;
inline constexpr float kQuatRenormTol = 1e-3f;

/// Rotation matrix of a unit quaternion. Inputs off the unit sphere by less
/// than 1e-3 are renormalized; anything further is rejected.
inline Mat3 quat_to_matrix(Quat q)
{
    float const n = q.norm();
    if (!(std::abs(n - 1.f) <= kQuatRenormTol))
        throw Error("quat_to_matrix: non-unit quaternion (norm " + std::to_string(n) + ")");
    if (std::abs(n - 1.f) > kQuatUnitTol)
        q = q.normalized();

    double const w = q.w, x = q.x, y = q.y, z = q.z;
    Mat3d m;
    m << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
        2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
        2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
    return m.cast<float>();
}

/// Quaternion of a proper rotation matrix (Shepperd's method). Sign is
/// chosen with w >= 0.
inline Quat matrix_to_quat(Mat3 const& mf)
{
    Mat3d const m = mf.cast<double>();
    double const tr = m.trace();
    double w, x, y, z;
    if (tr > 0) {
        double const s = std::sqrt(tr + 1.0) * 2;
        w = 0.25 * s;
        x = (m(2, 1) - m(1, 2)) / s;
        y = (m(0, 2) - m(2, 0)) / s;
        z = (m(1, 0) - m(0, 1)) / s;
    }
    else if (m(0, 0) > m(1, 1) && m(0, 0) > m(2, 2)) {
        double const s = std::sqrt(1.0 + m(0, 0) - m(1, 1) - m(2, 2)) * 2;
        w = (m(2, 1) - m(1, 2)) / s;
        x = 0.25 * s;
        y = (m(0, 1) + m(1, 0)) / s;
        z = (m(0, 2) + m(2, 0)) / s;
    }
    else if (m(1, 1) > m(2, 2)) {
        double const s = std::sqrt(1.0 + m(1, 1) - m(0, 0) - m(2, 2)) * 2;
        w = (m(0, 2) - m(2, 0)) / s;
        x = (m(0, 1) + m(1, 0)) / s;
        y = 0.25 * s;
        z = (m(1, 2) + m(2, 1)) / s;
    }
    else {
        double const s = std::sqrt(1.0 + m(2, 2) - m(0, 0) - m(1, 1)) * 2;
        w = (m(1, 0) - m(0, 1)) / s;
        x = (m(0, 2) + m(2, 0)) / s;
        y = (m(1, 2) + m(2, 1)) / s;
        z = 0.25 * s;
    }
    double const n = std::sqrt(w * w + x * x + y * y + z * z);
    double const sign = w < 0 ? -1.0 : 1.0;
    return Quat{float(sign * w / n), float(sign * x / n), float(sign * y / n), float(sign * z / n)};
}

inline Vec3 rotate(Quat const& q, Vec3 const& v) { return quat_to_matrix(q) * v; }

// ---------------------------------------------------------------------------
// Splats

struct GaussianSplat {
    Vec3 mu = Vec3::Zero();
    Quat rot;
    Vec3 scale = Vec3::Constant(0.01f);   // per-axis std dev, linear, meters
    float opacity = 1.f;
    Vec3 color = Vec3::Constant(0.5f);    // RGB, SH degree 0
    std::optional<Vec2> feature;          // segmentation logits
    std::optional<std::uint32_t> binding; // host triangle for local splats
};

enum class SplatFrame { Global, TriangleLocal };

struct SplatSet {
    std::vector<GaussianSplat> splats;
    SplatFrame frame = SplatFrame::Global;

    std::size_t size() const { return splats.size(); }
    bool empty() const { return splats.empty(); }
};

struct Violation {
    std::size_t index;
    std::string rule;

    friend bool operator==(Violation const&, Violation const&) = default;
};

inline std::vector<Violation> validate_splat_set(SplatSet const& set)
{
    std::vector<Violation> out;
    for (std::size_t i = 0; i < set.splats.size(); ++i) {
        auto const& s = set.splats[i];
        if (!s.mu.allFinite())
            out.push_back({i, "non-finite position"});
        if (!(std::abs(s.rot.norm() - 1.f) <= kQuatUnitTol))
            out.push_back({i, "non-unit quaternion"});
        if (!(s.scale.array() > 0.f).all() || !s.scale.allFinite())
            out.push_back({i, "non-positive scale"});
        if (!(s.opacity >= 0.f && s.opacity <= 1.f))
            out.push_back({i, "opacity out of range"});
        if (!(s.color.array() >= 0.f).all() || !(s.color.array() <= 1.f).all())
            out.push_back({i, "color out of range"});
        if (set.frame == SplatFrame::TriangleLocal && !s.binding)
            out.push_back({i, "local splat without binding"});
        if (set.frame == SplatFrame::Global && s.binding)
            out.push_back({i, "global splat with binding"});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Meshes

struct TriMesh {
    std::vector<Vec3> vertices;
    std::vector<Face> faces;
};

struct SkinWeight {
    std::uint32_t joint;
    float weight;
};

struct SkinnedMesh {
    std::vector<Vec3> vertices;
    std::vector<Face> faces;
    std::vector<std::string> joints;
    std::vector<std::vector<SkinWeight>> skin_weights;
    std::vector<std::uint32_t> scalp_faces;
};

inline std::vector<std::string> validate_mesh(SkinnedMesh const& mesh)
{
    std::vector<std::string> out;
    auto const nv = mesh.vertices.size();
    for (std::size_t f = 0; f < mesh.faces.size(); ++f)
        for (auto v : mesh.faces[f])
            if (v >= nv) {
                out.push_back("face " + std::to_string(f) + " index out of range");
                break;
            }
    if (!mesh.skin_weights.empty() && mesh.skin_weights.size() != nv)
        out.push_back("skin weight count does not match vertex count");
    for (std::size_t i = 0; i < mesh.skin_weights.size(); ++i) {
        double sum = 0;
        for (auto const& w : mesh.skin_weights[i]) {
            if (w.joint >= mesh.joints.size())
                out.push_back("vertex " + std::to_string(i) + " references unknown joint");
            sum += w.weight;
        }
        if (std::abs(sum - 1.0) > 1e-6)
            out.push_back("vertex " + std::to_string(i) + " weights do not sum to 1");
    }
    for (auto f : mesh.scalp_faces)
        if (f >= mesh.faces.size())
            out.push_back("scalp face " + std::to_string(f) + " out of range");
    return out;
}

// One timestep of driving signal: per-joint rigid transforms (row-major 4x4
// in files) or a full set of replacement vertex positions.
struct JointTransforms {
    std::map<std::string, Mat4> transforms;
};
struct ExplicitVertices {
    std::vector<Vec3> vertices;
};
using MotionFrame = std::variant<JointTransforms, ExplicitVertices>;

inline bool is_rigid(Mat4 const& t, float tol = 1e-5f)
{
    Mat3 const r = t.topLeftCorner<3, 3>();
    if (!((r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff() <= tol))
        return false;
    if (!(std::abs(r.determinant() - 1.f) <= 3 * tol))
        return false;
    return t(3, 0) == 0.f && t(3, 1) == 0.f && t(3, 2) == 0.f && t(3, 3) == 1.f;
}

inline std::vector<std::string> validate_motion(MotionFrame const& frame)
{
    std::vector<std::string> out;
    if (auto const* jt = std::get_if<JointTransforms>(&frame)) {
        for (auto const& [name, t] : jt->transforms)
            if (!is_rigid(t))
                out.push_back("joint '" + name + "' transform is not rigid");
    }
    return out;
}

// ---------------------------------------------------------------------------
// Solver configuration. Defaults for dt, substeps, gravity, damping and the
// compliances are engine choices; iterations = 15 is the reference setting.

struct SolverConfig {
    float dt = 1.f / 30.f;
    int substeps = 4;
    int iterations = 15;
    Vec3 gravity = Vec3(0.f, -9.8f, 0.f);
    float damping = 0.02f;
    float stretch_compliance = 0.f;
    float bend_compliance = 0.f;
    float collision_margin = 0.002f;
    std::size_t max_splats_warn = 200000;

    // Optional global cage-volume constraint.
    bool volume_constraint = false;
    float volume_compliance = 0.f;
};

inline std::vector<std::string> validate_config(SolverConfig const& c)
{
    std::vector<std::string> out;
    if (!(c.dt > 0.f))
        out.push_back("dt must be positive");
    if (c.substeps < 1)
        out.push_back("substeps must be >= 1");
    if (c.iterations < 1)
        out.push_back("iterations must be >= 1");
    if (!(c.damping >= 0.f && c.damping < 1.f))
        out.push_back("damping must be in [0,1)");
    if (!(c.stretch_compliance >= 0.f) || !(c.bend_compliance >= 0.f) || !(c.volume_compliance >= 0.f))
        out.push_back("compliance must be nonnegative");
    if (!(c.collision_margin >= 0.f))
        out.push_back("collision_margin must be nonnegative");
    if (!c.gravity.allFinite())
        out.push_back("gravity must be finite");
    return out;
}

// ---------------------------------------------------------------------------
// Cage

// Kinematic cage vertices hang off a scalp triangle: the closest point on
// `face` has barycentric coordinates `bary`.
struct RootAnchor {
    std::uint32_t face = 0;
    Vec3 bary = Vec3::Zero();
};

struct Cage {
    std::vector<Vec3> vertices; // rest pose
    std::vector<Face> faces;
    std::vector<float> inv_mass;
    std::vector<Vec3> velocities;
    std::vector<std::optional<RootAnchor>> root_anchor;

    std::size_t size() const { return vertices.size(); }

    static Cage from_mesh(TriMesh mesh)
    {
        Cage c;
        c.vertices = std::move(mesh.vertices);
        c.faces = std::move(mesh.faces);
        c.inv_mass.assign(c.vertices.size(), 1.f);
        c.velocities.assign(c.vertices.size(), Vec3::Zero());
        c.root_anchor.assign(c.vertices.size(), std::nullopt);
        return c;
    }

    TriMesh mesh() const { return {vertices, faces}; }
};

} // namespace hairsim
