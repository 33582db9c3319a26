#pragma once

#include "kdtree.hpp"
#include "parallel.hpp"

namespace hairsim {

/// Symmetric Chamfer distance: mean squared nearest distance from a to b
/// plus the same from b to a.
inline double chamfer(std::vector<Vec3> const& a, std::vector<Vec3> const& b)
{
    if (a.empty() || b.empty())
        throw Error("chamfer: empty point set");
    auto one_way = [](std::vector<Vec3> const& from, std::vector<Vec3> const& to) {
        PointKdTree const tree(to);
        std::vector<double> d(from.size());
        parallel_for(from.size(), [&](std::size_t i) { d[i] = tree.nearest(from[i]).distance_sq; });
        double sum = 0;
        for (double v : d)
            sum += v;
        return sum / double(from.size());
    };
    return one_way(a, b) + one_way(b, a);
}

inline std::vector<Vec3> positions(SplatSet const& set)
{
    std::vector<Vec3> p;
    p.reserve(set.size());
    for (auto const& s : set.splats)
        p.push_back(s.mu);
    return p;
}

struct ReassignConfig {
    double boundary_radius = 0.01;
    double color_weight = 1.0;
    double scale_weight = 1.0;
};

inline std::vector<std::string> validate_reassign_config(ReassignConfig const& c)
{
    std::vector<std::string> out;
    if (!(c.boundary_radius > 0))
        out.push_back("boundary_radius must be positive");
    if (!(c.color_weight >= 0) || !(c.scale_weight >= 0))
        out.push_back("feature weights must be nonnegative");
    if (c.color_weight == 0 && c.scale_weight == 0)
        out.push_back("feature weights must not both be zero");
    return out;
}

struct BoundarySplit {
    std::vector<std::uint32_t> boundary;
    std::vector<std::uint32_t> interior;
};

/// A hair splat is boundary when some bald splat center lies within
/// `boundary_radius` of its own center.
inline BoundarySplit split_boundary(SplatSet const& hair, SplatSet const& bald, ReassignConfig const& cfg)
{
    if (hair.empty() || bald.empty())
        throw Error("split_boundary: empty splat set");
    if (auto v = validate_reassign_config(cfg); !v.empty())
        throw Error("split_boundary: " + v.front());
    PointKdTree const tree(positions(bald));
    std::vector<std::uint8_t> flag(hair.size());
    double const r2 = cfg.boundary_radius * cfg.boundary_radius;
    parallel_for(hair.size(), [&](std::size_t i) { flag[i] = tree.nearest(hair.splats[i].mu).distance_sq <= r2; });
    BoundarySplit out;
    for (std::uint32_t i = 0; i < hair.size(); ++i)
        (flag[i] ? out.boundary : out.interior).push_back(i);
    return out;
}

using Feature6 = Eigen::Matrix<double, 6, 1>;

inline Feature6 splat_feature(GaussianSplat const& s, ReassignConfig const& cfg)
{
    Feature6 f;
    for (int k = 0; k < 3; ++k) {
        f[k] = cfg.color_weight * s.color[k];
        f[3 + k] = cfg.scale_weight * std::log(double(s.scale[k]));
    }
    return f;
}

struct ReassignResult {
    SplatSet hair;                        // retained splats in original order
    std::vector<std::uint32_t> expelled;  // indices into the input hair set
};

/// Each boundary splat joins the nearer of two class centers in feature
/// space: the mean of the interior hair splats or the mean of the bald set.
/// Splats closer to the skin center are dropped from the hair; ties stay.
inline ReassignResult reassign(SplatSet const& hair, SplatSet const& bald, std::vector<std::uint32_t> const& boundary,
                               ReassignConfig const& cfg)
{
    if (auto v = validate_reassign_config(cfg); !v.empty())
        throw Error("reassign: " + v.front());
    if (bald.empty())
        throw Error("reassign: empty bald set");
    std::vector<std::uint8_t> is_boundary(hair.size(), 0);
    for (auto i : boundary) {
        if (i >= hair.size())
            throw Error("reassign: boundary index out of range");
        is_boundary[i] = 1;
    }
    Feature6 hair_center = Feature6::Zero(), skin_center = Feature6::Zero();
    std::size_t interior = 0;
    for (std::size_t i = 0; i < hair.size(); ++i)
        if (!is_boundary[i]) {
            hair_center += splat_feature(hair.splats[i], cfg);
            ++interior;
        }
    if (interior == 0)
        throw Error("reassign: no interior hair");
    hair_center /= double(interior);
    for (auto const& s : bald.splats)
        skin_center += splat_feature(s, cfg);
    skin_center /= double(bald.size());

    ReassignResult out;
    out.hair.frame = hair.frame;
    for (std::uint32_t i = 0; i < hair.size(); ++i) {
        if (is_boundary[i]) {
            Feature6 const f = splat_feature(hair.splats[i], cfg);
            if ((f - skin_center).squaredNorm() < (f - hair_center).squaredNorm()) {
                out.expelled.push_back(i);
                continue;
            }
        }
        out.hair.splats.push_back(hair.splats[i]);
    }
    return out;
}

} // namespace hairsim
