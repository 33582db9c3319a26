#pragma once

#include "types.hpp"

#include <numbers>

namespace hairsim {

// Tracked point order for a splat: center, then the axis end pairs.
enum TrackedPoint : int { kCenter = 0, kXPos, kXNeg, kYPos, kYNeg, kZPos, kZNeg };
inline constexpr int kPointsPerSplat = 7;

inline constexpr int positive_end(int axis) { return 1 + 2 * axis; }
inline constexpr int negative_end(int axis) { return 2 + 2 * axis; }

struct SplatEndpoints {
    std::array<Vec3, kPointsPerSplat> points;
    int principal_axis = 0;

    Vec3 const& center() const { return points[kCenter]; }
};

/// Axis with the largest end-to-end separation; ties go to x, then y.
inline int principal_axis_of(std::array<Vec3, kPointsPerSplat> const& pts)
{
    int best = 0;
    double best_len = -1;
    for (int a = 0; a < 3; ++a) {
        double const len = (pts[positive_end(a)] - pts[negative_end(a)]).cast<double>().norm();
        if (len > best_len) {
            best = a;
            best_len = len;
        }
    }
    return best;
}

inline SplatEndpoints endpoints(GaussianSplat const& s)
{
    SplatEndpoints e;
    Mat3 const R = quat_to_matrix(s.rot);
    e.points[kCenter] = s.mu;
    for (int a = 0; a < 3; ++a) {
        Vec3 const half = s.scale[a] * R.col(a);
        e.points[positive_end(a)] = s.mu + half;
        e.points[negative_end(a)] = s.mu - half;
    }
    e.principal_axis = principal_axis_of(e.points);
    return e;
}

inline constexpr double kDegenerateAxis = 1e-9;

/// Rotation taking unit vector `from` onto `to` along the shortest arc. For
/// opposite vectors the half turn is taken about `fallback_axis`.
inline Quat minimal_rotation(Vec3d const& from, Vec3d const& to, Vec3d const& fallback_axis)
{
    Vec3d const cross = from.cross(to);
    double const s = cross.norm();
    double const c = from.dot(to);
    if (s < 1e-6) {
        if (c > 0)
            return Quat::identity();
        Vec3d axis = fallback_axis - fallback_axis.dot(from) * from;
        if (axis.norm() < 1e-9)
            axis = from.unitOrthogonal();
        axis.normalize();
        return Quat{0.f, float(axis.x()), float(axis.y()), float(axis.z())};
    }
    double const angle = std::atan2(s, c);
    Vec3d const axis = cross / s;
    double const hs = std::sin(0.5 * angle);
    return Quat{float(std::cos(0.5 * angle)), float(axis.x() * hs), float(axis.y() * hs), float(axis.z() * hs)};
}

/// Index of the longest axis other than `principal` (ties to the lower axis).
inline int second_axis(Vec3 const& scale, int principal)
{
    int best = -1;
    for (int a = 0; a < 3; ++a) {
        if (a == principal)
            continue;
        if (best < 0 || scale[a] > scale[best])
            best = a;
    }
    return best;
}

struct Reconstruction {
    GaussianSplat splat;
    bool degenerate = false;
};

/// Rebuilds a splat from its principal-axis endpoints after deformation:
/// the center is the midpoint of the deformed pair, the rotation picks up the
/// shortest-arc turn of the axis, and all scales follow the axis-length ratio.
inline Reconstruction reconstruct_from_axis(GaussianSplat const& source, SplatEndpoints const& src,
                                            Vec3 const& pos_end, Vec3 const& neg_end)
{
    int const i = src.principal_axis;
    Vec3d const src_axis = (src.points[positive_end(i)] - src.points[negative_end(i)]).cast<double>();
    double const src_len = src_axis.norm();
    if (!(src_len > kDegenerateAxis))
        throw Error("reconstruct: source principal axis is degenerate");

    Reconstruction out{source, false};
    out.splat.mu = 0.5f * (pos_end + neg_end);

    Vec3d const dst_axis = (pos_end - neg_end).cast<double>();
    double const dst_len = dst_axis.norm();
    if (!(dst_len >= kDegenerateAxis) || !std::isfinite(dst_len)) {
        out.splat.opacity = 0.f;
        out.degenerate = true;
        return out;
    }

    Mat3 const R = quat_to_matrix(source.rot);
    Vec3d const fallback = R.col(second_axis(source.scale, i)).cast<double>();
    Quat const dR = minimal_rotation(src_axis / src_len, dst_axis / dst_len, fallback);
    out.splat.rot = (dR * source.rot).normalized();
    out.splat.scale = (source.scale.cast<double>() * (dst_len / src_len)).cast<float>();
    return out;
}

inline Reconstruction reconstruct(GaussianSplat const& source, SplatEndpoints const& src,
                                  std::array<Vec3, kPointsPerSplat> const& deformed)
{
    int const i = src.principal_axis;
    return reconstruct_from_axis(source, src, deformed[positive_end(i)], deformed[negative_end(i)]);
}

} // namespace hairsim
