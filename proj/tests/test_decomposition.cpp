#include "test_util.hpp"

#include <hairsim/decomposition.hpp>

#include <gtest/gtest.h>

using namespace hairsim;

namespace {

GaussianSplat colored(Vec3 const& mu, Vec3 const& color, float scale)
{
    GaussianSplat s;
    s.mu = mu;
    s.color = color;
    s.scale = Vec3::Constant(scale);
    return s;
}

} // namespace

TEST(Chamfer, Examples)
{
    EXPECT_EQ(chamfer({Vec3(0, 0, 0)}, {Vec3(0, 0, 0)}), 0.0);
    EXPECT_NEAR(chamfer({Vec3(0, 0, 0)}, {Vec3(1, 0, 0)}), 2.0, 1e-12);
    // a->b: (0 + 1) / 2, b->a: 0
    EXPECT_NEAR(chamfer({Vec3(0, 0, 0), Vec3(0, 1, 0)}, {Vec3(0, 0, 0)}), 0.5, 1e-12);
    EXPECT_THROW(chamfer({}, {Vec3::Zero()}), Error);
}

TEST(Chamfer, SymmetricAndMatchesBruteForce)
{
    std::mt19937 rng(137);
    std::uniform_real_distribution<float> u(-1, 1);
    std::vector<Vec3> a(300), b(170);
    for (auto& p : a)
        p = Vec3(u(rng), u(rng), u(rng));
    for (auto& p : b)
        p = Vec3(u(rng), u(rng), u(rng));
    auto brute = [](std::vector<Vec3> const& x, std::vector<Vec3> const& y) {
        double sum = 0;
        for (auto const& p : x) {
            double best = 1e300;
            for (auto const& q : y)
                best = std::min(best, double((p - q).squaredNorm()));
            sum += best;
        }
        return sum / double(x.size());
    };
    double const want = brute(a, b) + brute(b, a);
    EXPECT_NEAR(chamfer(a, b), want, 1e-9);
    EXPECT_EQ(chamfer(a, b), chamfer(b, a));
}

TEST(SplitBoundary, PlantedScene)
{
    SplatSet bald, hair;
    bald.splats.push_back(colored(Vec3(0, 0, 0), Vec3(0.9f, 0.7f, 0.6f), 0.01f));
    hair.splats.push_back(colored(Vec3(0.005f, 0, 0), Vec3(0.1f, 0.1f, 0.1f), 0.01f));
    hair.splats.push_back(colored(Vec3(1, 0, 0), Vec3(0.1f, 0.1f, 0.1f), 0.01f));
    hair.splats.push_back(colored(Vec3(0, 0.01f, 0), Vec3(0.1f, 0.1f, 0.1f), 0.01f));
    ReassignConfig cfg;
    auto split = split_boundary(hair, bald, cfg);
    EXPECT_EQ(split.boundary, (std::vector<std::uint32_t>{0, 2}));
    EXPECT_EQ(split.interior, (std::vector<std::uint32_t>{1}));
}

TEST(Reassign, SkinColoredBoundaryIsExpelled)
{
    Vec3 const skin(0.9f, 0.7f, 0.6f), dark(0.1f, 0.08f, 0.05f);
    SplatSet bald, hair;
    for (int i = 0; i < 10; ++i)
        bald.splats.push_back(colored(Vec3(0.1f * i, 0, 0), skin, 0.01f));
    for (int i = 0; i < 10; ++i)
        hair.splats.push_back(colored(Vec3(0.1f * i, 1, 0), dark, 0.005f));
    hair.splats.push_back(colored(Vec3(0.3f, 0.002f, 0), skin, 0.01f));  // 10: skin lookalike
    hair.splats.push_back(colored(Vec3(0.5f, 0.002f, 0), dark, 0.005f)); // 11: real hair at the scalp
    ReassignConfig cfg;
    auto split = split_boundary(hair, bald, cfg);
    EXPECT_EQ(split.boundary, (std::vector<std::uint32_t>{10, 11}));
    auto r = reassign(hair, bald, split.boundary, cfg);
    EXPECT_EQ(r.expelled, (std::vector<std::uint32_t>{10}));
    ASSERT_EQ(r.hair.size(), 11u);
    EXPECT_EQ(r.hair.splats.back().mu, hair.splats[11].mu);

    // Running again on the result changes nothing.
    auto again = reassign(r.hair, bald, split_boundary(r.hair, bald, cfg).boundary, cfg);
    EXPECT_TRUE(again.expelled.empty());
    EXPECT_EQ(again.hair.size(), r.hair.size());
}

TEST(Reassign, Validation)
{
    ReassignConfig cfg;
    cfg.boundary_radius = 0;
    EXPECT_FALSE(validate_reassign_config(cfg).empty());
    cfg = {};
    cfg.color_weight = 0;
    cfg.scale_weight = 0;
    EXPECT_FALSE(validate_reassign_config(cfg).empty());
    SplatSet one;
    one.splats.push_back(colored(Vec3::Zero(), Vec3::Zero(), 0.01f));
    EXPECT_THROW(reassign(one, one, {0}, ReassignConfig{}), Error);
    EXPECT_THROW(reassign(one, one, {3}, ReassignConfig{}), Error);
    EXPECT_THROW(reassign(one, SplatSet{}, {}, ReassignConfig{}), Error);
    EXPECT_THROW(split_boundary(SplatSet{}, one, ReassignConfig{}), Error);
}
