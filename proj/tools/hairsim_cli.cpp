#include <hairsim.hpp>
#include <hairsim/synthetic.hpp>

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

using namespace hairsim;

namespace {

struct SolverFlags {
    std::optional<float> dt, damping, stretch, bend, margin;
    std::optional<int> substeps, iterations;
    std::optional<std::string> gravity;
    std::optional<std::string> config;

    void add(CLI::App* app)
    {
        app->add_option("--config", config, "key=value solver config file");
        app->add_option("--dt", dt, "frame interval in seconds");
        app->add_option("--substeps", substeps, "substeps per frame");
        app->add_option("--iterations", iterations, "constraint iterations per substep");
        app->add_option("--gravity", gravity, "gravity vector \"x,y,z\"");
        app->add_option("--damping", damping, "velocity damping in [0,1)");
        app->add_option("--stretch-compliance", stretch, "XPBD stretch compliance");
        app->add_option("--bend-compliance", bend, "XPBD bend compliance");
        app->add_option("--margin", margin, "collision margin in meters");
    }

    SolverConfig resolve(std::optional<fs::path> fallback = {}) const
    {
        SolverConfig c;
        if (config)
            c = read_config(*config);
        else if (fallback && fs::exists(*fallback))
            c = read_config(*fallback);
        if (dt)
            c.dt = *dt;
        if (substeps)
            c.substeps = *substeps;
        if (iterations)
            c.iterations = *iterations;
        if (gravity)
            apply_config_value(c, "gravity", *gravity);
        if (damping)
            c.damping = *damping;
        if (stretch)
            c.stretch_compliance = *stretch;
        if (bend)
            c.bend_compliance = *bend;
        if (margin)
            c.collision_margin = *margin;
        if (auto v = validate_config(c); !v.empty())
            throw Error("solver config: " + v.front());
        return c;
    }
};

struct CageFlags {
    double voxel_size = 0;
    int dilation = 2;
    std::size_t target = 500;

    void add(CLI::App* app)
    {
        app->add_option("--voxel-size", voxel_size, "voxel edge in meters (0: 2% of the hair bbox diagonal)");
        app->add_option("--dilation", dilation, "26-neighbourhood dilation passes");
        app->add_option("--target-verts", target, "cage vertex budget");
    }

    CageBuildConfig config() const
    {
        CageBuildConfig c;
        c.voxel_size = voxel_size;
        c.dilation = dilation;
        c.target_vertices = target;
        return c;
    }
};

BakeSelection parse_selection(std::string const& s)
{
    if (s == "all")
        return BakeSelection::AllPoints;
    if (s == "principal")
        return BakeSelection::PrincipalEnds;
    if (s == "principal+center")
        return BakeSelection::PrincipalEndsAndCenter;
    throw Error("unknown bake selection '" + s + "' (all, principal, principal+center)");
}

CollisionMode parse_collision(std::string const& s)
{
    if (s == "proxy")
        return CollisionMode::Proxy;
    if (s == "direct")
        return CollisionMode::Direct;
    if (s == "none")
        return CollisionMode::None;
    throw Error("unknown collision mode '" + s + "' (proxy, direct, none)");
}

void print_report(SequenceReport const& rep)
{
    auto const m = rep.mean();
    std::printf("frames %zu\n", rep.frames.size());
    std::printf("pose_ms %.3f\nsimulate_ms %.3f\ndeform_ms %.3f\nexport_ms %.3f\ntotal_ms %.3f\n", m.pose_ms,
                m.simulate_ms, m.deform_ms, m.export_ms, m.total_ms);
    double const sim_deform = m.simulate_ms + m.deform_ms;
    std::printf("simulate_plus_deform_ms %.3f\n", sim_deform);
    std::printf("fps %.2f\n", m.total_ms > 0 ? 1000.0 / m.total_ms : 0.0);
    std::printf("degenerate_splats %zu\n", rep.degenerate_splats);
}

Scene load_scene(fs::path const& dir, std::optional<std::string> const& weights_path, SolverConfig const& solver,
                 BakeSelection selection)
{
    Scene s;
    s.mesh = read_skinned_mesh(dir / "head.obj");
    s.bald_local = read_splats(dir / "bald.ply");
    if (s.bald_local.frame != SplatFrame::TriangleLocal)
        s.bald_local = bind_nearest(s.bald_local, s.mesh);
    s.hair = read_splats(dir / "hair.ply");
    s.cage = read_cage(dir / "cage.obj");
    fs::path const wp = weights_path ? fs::path(*weights_path) : dir / "weights.mvcw";
    s.weights = fs::exists(wp) ? read_weights(wp) : bake_weights(s.hair, s.cage, selection);
    s.proxies = bind_proxies(s.cage, s.hair, s.weights);
    s.solver = solver;
    return s;
}

void write_fixture(fs::path const& dir, synthetic::Demo const& demo, std::size_t frames)
{
    ensure_writable_dir(dir);
    Scene const& s = demo.scene;
    write_skinned_mesh(dir / "head.obj", s.mesh);
    write_splats(dir / "bald.ply", s.bald_local);
    write_splats(dir / "hair.ply", s.hair);
    write_cage(dir / "cage.obj", s.cage);
    write_weights(dir / "weights.mvcw", s.weights);
    write_motion(dir / "motion.json", synthetic::nodding(frames));
    write_config(dir / "solver.cfg", s.solver);
    Camera cam;
    cam.pose = synthetic::rotation_about(Vec3::Zero(), Vec3::UnitY(), float(std::numbers::pi));
    cam.pose(2, 3) = 0.6f;
    cam.width = 320;
    cam.height = 240;
    cam.fx = cam.fy = 400;
    cam.cx = 160;
    cam.cy = 120;
    nlohmann::json j;
    std::vector<float> pose;
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c)
            pose.push_back(cam.pose(r, c));
    j["pose"] = pose;
    j["fx"] = cam.fx;
    j["fy"] = cam.fy;
    j["cx"] = cam.cx;
    j["cy"] = cam.cy;
    j["width"] = cam.width;
    j["height"] = cam.height;
    write_json(dir / "camera.json", j);
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"hairsim: cage-driven Gaussian splat hair dynamics"};
    app.failure_message(CLI::FailureMessage::help);
    app.require_subcommand(1);
    unsigned threads = 0;
    app.add_option("--threads", threads, "worker threads (0: all cores)");

    // build-cage
    auto* bc = app.add_subcommand("build-cage", "voxelize hair, extract and decimate a watertight cage");
    std::string bc_hair, bc_out;
    std::optional<std::string> bc_mesh;
    double bc_radius = 0;
    CageFlags bc_flags;
    bc->add_option("--hair", bc_hair, "hair splat PLY")->required();
    bc->add_option("--out", bc_out, "cage OBJ (sidecar JSON next to it)")->required();
    bc->add_option("--mesh", bc_mesh, "head OBJ; when given, roots are marked");
    bc->add_option("--root-radius", bc_radius, "root radius in meters (0: 2.5 voxels)");
    bc_flags.add(bc);

    // mark-roots
    auto* mr = app.add_subcommand("mark-roots", "mark kinematic cage vertices near the scalp");
    std::string mr_cage, mr_mesh, mr_out;
    double mr_radius = 0;
    mr->add_option("--cage", mr_cage, "cage OBJ")->required();
    mr->add_option("--mesh", mr_mesh, "head OBJ with scalp_faces sidecar")->required();
    mr->add_option("--root-radius", mr_radius, "root radius in meters")->required();
    mr->add_option("--out", mr_out, "output cage OBJ")->required();

    // bind-weights
    auto* bw = app.add_subcommand("bind-weights", "bake mean value coordinates of all tracked splat points");
    std::string bw_hair, bw_cage, bw_out, bw_sel = "all";
    bw->add_option("--hair", bw_hair, "hair splat PLY")->required();
    bw->add_option("--cage", bw_cage, "cage OBJ")->required();
    bw->add_option("--out", bw_out, "weight cache")->required();
    bw->add_option("--select", bw_sel, "rows to bake: all, principal, principal+center");

    // rig-bald
    auto* rb = app.add_subcommand("rig-bald", "bind global bald splats to their nearest head triangles");
    std::string rb_bald, rb_mesh, rb_out;
    rb->add_option("--bald", rb_bald, "global bald splat PLY")->required();
    rb->add_option("--mesh", rb_mesh, "head OBJ")->required();
    rb->add_option("--out", rb_out, "triangle-local splat PLY")->required();

    // simulate
    auto* sm = app.add_subcommand("simulate", "run a motion sequence and export frames");
    std::string sm_scene, sm_out, sm_collision = "proxy", sm_sel = "principal+center";
    std::optional<std::string> sm_motion, sm_weights, sm_camera;
    SolverFlags sm_solver;
    sm->add_option("--scene", sm_scene, "scene directory (head.obj, bald.ply, hair.ply, cage.obj, ...)")->required();
    sm->add_option("--motion", sm_motion, "motion JSON (default: <scene>/motion.json)");
    sm->add_option("--weights", sm_weights, "weight cache (default: <scene>/weights.mvcw, baked when missing)");
    sm->add_option("--out", sm_out, "output directory")->required();
    sm->add_option("--camera", sm_camera, "camera JSON for per-frame previews");
    sm->add_option("--collision", sm_collision, "proxy, direct or none");
    sm_solver.add(sm);

    // reassign
    auto* ra = app.add_subcommand("reassign", "expel skin-like splats from the hair/bald boundary");
    std::string ra_hair, ra_bald, ra_out;
    ReassignConfig ra_cfg;
    ra->add_option("--hair", ra_hair, "hair splat PLY")->required();
    ra->add_option("--bald", ra_bald, "global bald splat PLY")->required();
    ra->add_option("--out", ra_out, "cleaned hair PLY")->required();
    ra->add_option("--boundary-radius", ra_cfg.boundary_radius, "boundary band radius in meters");
    ra->add_option("--color-weight", ra_cfg.color_weight, "feature weight of RGB");
    ra->add_option("--scale-weight", ra_cfg.scale_weight, "feature weight of log scale");

    // chamfer
    auto* ch = app.add_subcommand("chamfer", "symmetric Chamfer distance between two splat sets");
    std::string ch_a, ch_b;
    ch->add_option("a", ch_a, "first splat PLY")->required();
    ch->add_option("b", ch_b, "second splat PLY")->required();

    // penalty
    auto* pe = app.add_subcommand("penalty", "collision penalty of splat centers against a mesh");
    std::string pe_splats, pe_mesh;
    float pe_margin = SolverConfig{}.collision_margin;
    pe->add_option("--splats", pe_splats, "splat PLY")->required();
    pe->add_option("--mesh", pe_mesh, "watertight OBJ")->required();
    pe->add_option("--margin", pe_margin, "margin in meters");

    // preview
    auto* pv = app.add_subcommand("preview", "project splats to an RGB image and depth map");
    std::string pv_splats, pv_camera, pv_out;
    std::optional<std::string> pv_depth;
    pv->add_option("--splats", pv_splats, "splat PLY")->required();
    pv->add_option("--camera", pv_camera, "camera JSON")->required();
    pv->add_option("--out", pv_out, "output PPM")->required();
    pv->add_option("--depth", pv_depth, "output PFM depth");

    // bench
    auto* be = app.add_subcommand("bench", "time simulate + deform on a synthetic scene");
    std::size_t be_splats = 100000, be_frames = 300;
    std::string be_style = "straight_bob", be_collision = "proxy";
    CageFlags be_cage;
    SolverFlags be_solver;
    be->add_option("--splats", be_splats, "hair splats");
    be->add_option("--frames", be_frames, "frames to run");
    be->add_option("--style", be_style, "straight_bob, long_ponytail or curly_volume");
    be->add_option("--collision", be_collision, "proxy, direct or none");
    be_cage.add(be);
    be_solver.add(be);

    // make-fixture
    auto* mf = app.add_subcommand("make-fixture", "write a synthetic scene directory");
    std::string mf_out, mf_style = "straight_bob";
    std::size_t mf_splats = 4000, mf_frames = 60;
    mf->add_option("--out", mf_out, "output directory")->required();
    mf->add_option("--style", mf_style, "straight_bob, long_ponytail or curly_volume");
    mf->add_option("--splats", mf_splats, "hair splats");
    mf->add_option("--frames", mf_frames, "motion frames");

    CLI11_PARSE(app, argc, argv);
    set_thread_count(threads);

    auto parse_style = [](std::string const& s) {
        for (auto st : {synthetic::HairStyle::StraightBob, synthetic::HairStyle::LongPonytail,
                        synthetic::HairStyle::CurlyVolume})
            if (s == synthetic::style_name(st))
                return st;
        throw Error("unknown style '" + s + "'");
    };

    try {
        if (*bc) {
            SplatSet const hair = read_splats(bc_hair);
            auto res = build_cage(hair, bc_flags.config());
            for (auto const& w : res.decimation.warnings)
                std::fprintf(stderr, "warning: %s\n", w.c_str());
            if (bc_mesh) {
                double const radius = bc_radius > 0 ? bc_radius : 2.5 * res.voxel_size;
                res.cage = mark_roots(res.cage, read_skinned_mesh(*bc_mesh), radius);
            }
            write_cage(bc_out, res.cage);
            std::printf("voxel_size %.6g\ndilation %d\nsurface_vertices %zu\ncage_vertices %zu\ncage_faces %zu\n",
                        res.voxel_size, res.dilation, res.surface_vertices, res.cage.size(), res.cage.faces.size());
        }
        else if (*mr) {
            Cage const cage = mark_roots(read_cage(mr_cage), read_skinned_mesh(mr_mesh), mr_radius);
            write_cage(mr_out, cage);
            std::size_t k = 0;
            for (float w : cage.inv_mass)
                k += w == 0.f;
            std::printf("kinematic %zu of %zu\n", k, cage.size());
        }
        else if (*bw) {
            MvcWeights const w = bake_weights(read_splats(bw_hair), read_cage(bw_cage), parse_selection(bw_sel));
            write_weights(bw_out, w);
            std::printf("splats %zu\ncage_vertices %zu\ndensity %.4f\n", w.n_splats(), w.n_cage_verts(), w.density());
        }
        else if (*rb) {
            SplatSet const local = bind_nearest(read_splats(rb_bald), read_skinned_mesh(rb_mesh));
            write_splats(rb_out, local);
            std::printf("bound %zu splats\n", local.size());
        }
        else if (*sm) {
            fs::path const dir = sm_scene;
            SolverConfig const solver = sm_solver.resolve(dir / "solver.cfg");
            Scene const scene = load_scene(dir, sm_weights, solver, parse_selection(sm_sel));
            auto const motion = read_motion(sm_motion ? fs::path(*sm_motion) : dir / "motion.json");
            if (scene.hair.size() > solver.max_splats_warn)
                std::fprintf(stderr, "warning: %zu hair splats exceeds max_splats_warn\n", scene.hair.size());
            SequenceOptions opt;
            opt.output_dir = fs::path(sm_out);
            opt.collision = parse_collision(sm_collision);
            if (sm_camera)
                opt.preview = read_camera(*sm_camera);
            print_report(run_sequence(scene, motion, opt));
        }
        else if (*ra) {
            SplatSet const hair = read_splats(ra_hair), bald = read_splats(ra_bald);
            auto const split = split_boundary(hair, bald, ra_cfg);
            auto const res = reassign(hair, bald, split.boundary, ra_cfg);
            write_splats(ra_out, res.hair);
            std::printf("boundary %zu\nexpelled %zu\nretained %zu\n", split.boundary.size(), res.expelled.size(),
                        res.hair.size());
        }
        else if (*ch) {
            std::printf("%.9g\n", chamfer(positions(read_splats(ch_a)), positions(read_splats(ch_b))));
        }
        else if (*pe) {
            TriMesh const m = read_obj(pe_mesh);
            MeshBvh const bvh(m.vertices, m.faces, true);
            std::printf("%.9g\n", collision_penalty(positions(read_splats(pe_splats)), bvh, pe_margin));
        }
        else if (*pv) {
            Image const img = preview_project(read_splats(pv_splats), read_camera(pv_camera));
            write_ppm(pv_out, img);
            if (pv_depth)
                write_pfm(*pv_depth, img);
        }
        else if (*be) {
            synthetic::DemoOptions d;
            d.style = parse_style(be_style);
            d.hair_splats = be_splats;
            d.cage = be_cage.config();
            d.solver = be_solver.resolve();
            d.bake = BakeSelection::PrincipalEndsAndCenter;
            auto t0 = Clock::now();
            auto const demo = synthetic::demo_scene(d);
            std::printf("setup_ms %.1f\nhair_splats %zu\ncage_vertices %zu\nsubsteps %d\niterations %d\n",
                        ms_since(t0), demo.scene.hair.size(), demo.scene.cage.size(), d.solver.substeps,
                        d.solver.iterations);
            SequenceOptions opt;
            opt.collision = parse_collision(be_collision);
            print_report(run_sequence(demo.scene, synthetic::nodding(be_frames), opt));
        }
        else if (*mf) {
            synthetic::DemoOptions d;
            d.style = parse_style(mf_style);
            d.hair_splats = mf_splats;
            auto const demo = synthetic::demo_scene(d);
            write_fixture(mf_out, demo, mf_frames);
            std::printf("wrote %s (hair %zu, cage %zu)\n", mf_out.c_str(), demo.scene.hair.size(),
                        demo.scene.cage.size());
        }
    }
    catch (std::exception const& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
