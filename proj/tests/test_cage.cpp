#include "test_util.hpp"

#include <gtest/gtest.h>

using namespace hairsim;

namespace {

SkinnedMesh skinned_cube()
{
    auto c = testutil::cube();
    SkinnedMesh m;
    m.vertices = c.vertices;
    m.faces = c.faces;
    m.joints = {"head"};
    m.skin_weights.assign(m.vertices.size(), {{0, 1.f}});
    m.scalp_faces = {2, 3}; // top (z = 1)
    return m;
}

} // namespace

TEST(Voxelize, SinglePoint)
{
    auto g = voxelize({Vec3(0.3f, 0.3f, 0.3f)}, 0.1, 0);
    EXPECT_EQ(g.count(), 1u);
    g = voxelize({Vec3(0.3f, 0.3f, 0.3f)}, 0.1, 1);
    EXPECT_EQ(g.count(), 27u);
}

TEST(Voxelize, SeparatedPoints)
{
    auto g = voxelize({Vec3(0, 0, 0), Vec3(1.05f, 0, 0)}, 0.1, 0);
    EXPECT_EQ(g.count(), 2u);
    EXPECT_GE(g.dims[0], 11);
    EXPECT_EQ(occupied_components(g), 2u);
    EXPECT_THROW(extract_surface(g), Error);
}

TEST(Voxelize, ContainsEveryPoint)
{
    std::mt19937 rng(107);
    std::uniform_real_distribution<float> u(-1, 1);
    std::vector<Vec3> pts(500);
    for (auto& p : pts)
        p = Vec3(u(rng), u(rng), u(rng));
    auto g = voxelize(pts, 0.13, 1);
    for (auto const& p : pts) {
        auto c = g.cell_of(to_d(p));
        EXPECT_TRUE(g.occupied(c[0], c[1], c[2]));
        Vec3d const lo = g.corner(c[0], c[1], c[2]);
        EXPECT_TRUE((to_d(p).array() >= lo.array() - 1e-9).all());
        EXPECT_TRUE((to_d(p).array() <= lo.array() + g.voxel_size + 1e-9).all());
    }
}

TEST(Voxelize, Errors)
{
    EXPECT_THROW(voxelize({}, 0.1, 0), Error);
    EXPECT_THROW(voxelize({Vec3::Zero()}, 0, 0), Error);
    EXPECT_THROW(voxelize({Vec3::Zero()}, 0.1, -1), Error);
}

TEST(ExtractSurface, SingleVoxel)
{
    auto g = voxelize({Vec3(0.05f, 0.05f, 0.05f)}, 0.1, 0);
    auto m = extract_surface(g);
    EXPECT_EQ(m.vertices.size(), 8u);
    EXPECT_EQ(m.faces.size(), 12u);
    EXPECT_TRUE(is_watertight(m.faces, m.vertices.size()));
    EXPECT_NEAR(mesh_volume(m.vertices, m.faces), 1e-3, 1e-8);
}

TEST(ExtractSurface, TwoVoxelBox)
{
    auto g = voxelize({Vec3(0.05f, 0.05f, 0.05f), Vec3(0.15f, 0.05f, 0.05f)}, 0.1, 0);
    auto m = extract_surface(g);
    EXPECT_EQ(m.vertices.size(), 12u);
    EXPECT_EQ(m.faces.size(), 20u);
    EXPECT_EQ(euler_characteristic(m.faces), 2);
    EXPECT_NEAR(mesh_volume(m.vertices, m.faces), 2e-3, 1e-8);
}

TEST(ExtractSurface, RandomCloudIsClosedGenusZero)
{
    std::mt19937 rng(109);
    std::normal_distribution<float> n(0.f, 0.3f);
    std::vector<Vec3> pts(3000);
    for (auto& p : pts)
        p = Vec3(n(rng), n(rng), n(rng));
    auto m = extract_surface(voxelize(pts, 0.05, 2));
    EXPECT_TRUE(is_watertight(m.faces, m.vertices.size()));
    EXPECT_EQ(euler_characteristic(m.faces), 2);
    EXPECT_GT(mesh_volume(m.vertices, m.faces), 0.0);
}

TEST(Decimate, SphereKeepsEnclosure)
{
    auto sphere = synthetic::icosphere(1.f, 5);
    ASSERT_GT(sphere.vertices.size(), 10000u);
    std::mt19937 rng(113);
    std::uniform_real_distribution<float> u(-0.9f, 0.9f);
    std::vector<Vec3> inside;
    while (inside.size() < 1000) {
        Vec3 const p(u(rng), u(rng), u(rng));
        if (p.norm() < 0.9f)
            inside.push_back(p);
    }
    double const margin = 0.02;
    auto r = decimate(sphere, 200, inside, margin);
    EXPECT_LE(r.mesh.vertices.size(), 200u);
    EXPECT_TRUE(r.report.reached_target);
    EXPECT_TRUE(is_watertight(r.mesh.faces, r.mesh.vertices.size()));
    EXPECT_EQ(euler_characteristic(r.mesh.faces), 2);
    MeshBvh const bvh(r.mesh.vertices, r.mesh.faces);
    for (auto const& p : inside) {
        EXPECT_NEAR(winding_number(r.mesh.vertices, r.mesh.faces, to_d(p)), 1.0, 1e-6);
        EXPECT_LT(bvh.signed_distance(p).distance, -margin + 1e-6);
    }
}

TEST(Decimate, TargetAboveInputLeavesMeshUnchanged)
{
    auto c = testutil::cube();
    auto r = decimate(c, 100);
    EXPECT_EQ(r.mesh.vertices, c.vertices);
    EXPECT_EQ(r.mesh.faces, c.faces);
    EXPECT_EQ(r.report.collapses, 0u);
}

TEST(Decimate, RejectsOpenMeshAndTinyTarget)
{
    auto c = testutil::cube();
    EXPECT_THROW(decimate(c, 3), Error);
    c.faces.pop_back();
    EXPECT_THROW(decimate(c, 6), Error);
}

TEST(MarkRoots, InfiniteRadiusMakesAllKinematic)
{
    auto mesh = skinned_cube();
    auto cage = Cage::from_mesh(testutil::cube(Vec3(0.2f, 0.2f, 1.1f), 0.5f));
    auto out = mark_roots(cage, mesh, 1e9);
    for (std::size_t j = 0; j < out.size(); ++j) {
        EXPECT_EQ(out.inv_mass[j], 0.f);
        ASSERT_TRUE(out.root_anchor[j].has_value());
        EXPECT_TRUE(out.root_anchor[j]->face == 2 || out.root_anchor[j]->face == 3);
    }
}

TEST(MarkRoots, VertexOnScalpFace)
{
    auto mesh = skinned_cube();
    auto cage = Cage::from_mesh(testutil::cube(Vec3(0.2f, 0.2f, 1.f), 0.5f));
    auto out = mark_roots(cage, mesh, 0.01);
    for (std::size_t j = 0; j < out.size(); ++j) {
        bool const on = cage.vertices[j].z() == 1.f;
        EXPECT_EQ(out.inv_mass[j], on ? 0.f : 1.f);
        if (!on)
            continue;
        auto const& a = *out.root_anchor[j];
        auto const& f = mesh.faces[a.face];
        Vec3 const p = a.bary[0] * mesh.vertices[f[0]] + a.bary[1] * mesh.vertices[f[1]] + a.bary[2] * mesh.vertices[f[2]];
        EXPECT_LT((p - cage.vertices[j]).norm(), 1e-6f);
    }
}

TEST(MarkRoots, Errors)
{
    auto mesh = skinned_cube();
    auto cage = Cage::from_mesh(testutil::cube(Vec3(5, 5, 5), 0.5f));
    try {
        mark_roots(cage, mesh, 0.1);
        FAIL();
    }
    catch (Error const& e) {
        EXPECT_NE(std::string(e.what()).find("no roots found"), std::string::npos);
    }
    EXPECT_THROW(mark_roots(cage, mesh, 0), Error);
    mesh.scalp_faces.clear();
    EXPECT_THROW(mark_roots(cage, mesh, 1), Error);
}

TEST(RootDriver, RestAndRigidMotion)
{
    auto mesh = skinned_cube();
    auto cage = mark_roots(Cage::from_mesh(testutil::cube(Vec3(0.2f, 0.2f, 1.05f), 0.5f)), mesh, 0.1);
    RootDriver const driver(cage, mesh);
    ASSERT_EQ(driver.size(), 4u);

    JointTransforms still;
    still.transforms["head"] = Mat4::Identity();
    auto t = driver.targets(mesh, still, mesh.vertices);
    auto const verts = driver.vertices();
    for (std::size_t i = 0; i < t.size(); ++i)
        EXPECT_LT((t[i] - cage.vertices[verts[i]]).norm(), 1e-6f);

    Mat3 const Q = quat_to_matrix(Quat::from_axis_angle(Vec3(0.3f, 1.f, 0.2f).normalized(), 0.7f));
    Vec3 const d(0.1f, 0.2f, -0.3f);
    JointTransforms moved;
    moved.transforms["head"] = Mat4::Identity();
    moved.transforms["head"].topLeftCorner<3, 3>() = Q;
    moved.transforms["head"].topRightCorner<3, 1>() = d;
    std::vector<Vec3> posed;
    for (auto const& v : mesh.vertices)
        posed.push_back(Q * v + d);
    auto const a = driver.targets(mesh, moved, posed);
    auto const b = driver.targets(mesh, ExplicitVertices{posed}, posed);
    for (std::size_t i = 0; i < a.size(); ++i) {
        Vec3 const want = Q * cage.vertices[verts[i]] + d;
        EXPECT_LT((a[i] - want).norm(), 1e-5f);
        EXPECT_LT((b[i] - want).norm(), 1e-5f);
    }
}

TEST(BuildCage, EnclosesTrackedPoints)
{
    auto hair = synthetic::hair(synthetic::HairStyle::StraightBob, 2000, 7);
    CageBuildConfig cfg;
    cfg.target_vertices = 300;
    auto r = build_cage(hair, cfg);
    EXPECT_LE(r.cage.size(), 300u);
    EXPECT_TRUE(is_watertight(r.cage.faces, r.cage.size()));
    MeshBvh const bvh(r.cage.vertices, r.cage.faces);
    for (auto const& p : tracked_points(hair))
        EXPECT_LT(bvh.signed_distance(p).distance, 0.f);
    EXPECT_EQ(r.cage.inv_mass.size(), r.cage.size());
}
