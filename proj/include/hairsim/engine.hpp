#pragma once

#include "cage.hpp"
#include "io.hpp"
#include "pbd.hpp"
#include "rig.hpp"
#include "splat_deform.hpp"

#include <chrono>
#include <cstdio>
#include <functional>

namespace hairsim {

struct Scene {
    SplatSet bald_local; // triangle-local
    SplatSet hair;       // global, rest pose
    Cage cage;
    MvcWeights weights;
    std::vector<ProxyBinding> proxies;
    SkinnedMesh mesh;
    SolverConfig solver;
};

inline std::vector<std::string> validate_scene(Scene const& s)
{
    std::vector<std::string> out;
    if (s.bald_local.frame != SplatFrame::TriangleLocal)
        out.push_back("bald set must be triangle-local");
    for (auto const& b : s.bald_local.splats)
        if (!b.binding || *b.binding >= s.mesh.faces.size()) {
            out.push_back("bald splat binding out of range");
            break;
        }
    if (s.hair.frame != SplatFrame::Global)
        out.push_back("hair set must be global");
    if (s.weights.n_splats() != s.hair.size())
        out.push_back("weights were baked for " + std::to_string(s.weights.n_splats()) + " splats, hair has " +
                      std::to_string(s.hair.size()));
    if (s.weights.n_cage_verts() != s.cage.size())
        out.push_back("weights were baked for a different cage");
    if (s.proxies.size() != s.cage.size())
        out.push_back("one proxy per cage vertex required");
    for (auto const& p : s.proxies)
        if (p.source_splat >= s.hair.size() || p.weight_row.size() != s.cage.size()) {
            out.push_back("proxy binding inconsistent with hair or cage");
            break;
        }
    if (s.cage.inv_mass.size() != s.cage.size() || s.cage.root_anchor.size() != s.cage.size())
        out.push_back("cage per-vertex arrays have the wrong length");
    else
        for (std::size_t j = 0; j < s.cage.size(); ++j)
            if (s.cage.inv_mass[j] == 0.f &&
                (!s.cage.root_anchor[j] || s.cage.root_anchor[j]->face >= s.mesh.faces.size())) {
                out.push_back("kinematic cage vertex " + std::to_string(j) + " lacks a valid root anchor");
                break;
            }
    if (auto w = watertight_defect(s.cage.faces, s.cage.size()); !w.empty())
        out.push_back("cage: " + w);
    for (auto const& m : validate_mesh(s.mesh))
        out.push_back("mesh: " + m);
    for (auto const& c : validate_config(s.solver))
        out.push_back("solver: " + c);
    return out;
}

struct FrameTiming {
    double pose_ms = 0;
    double simulate_ms = 0;
    double deform_ms = 0;
    double export_ms = 0;
    double total_ms = 0;
};

struct FrameOutput {
    SplatSet bald;
    DeformResult hair;
};

using Clock = std::chrono::steady_clock;

inline double ms_since(Clock::time_point t0)
{
    return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

/// Runs the per-frame loop: pose the head and bald splats, drive the root
/// vertices, simulate the free cage vertices in substeps, then deform the
/// hair by the cage. Kinematic targets and the collision surface move
/// linearly from the previous frame's pose to the new one across substeps;
/// the last substep lands exactly on the new pose.
class Simulator {
public:
    explicit Simulator(Scene const& scene, CollisionMode mode = CollisionMode::Proxy)
        : scene_(&scene), mode_(mode), deformer_(scene.hair, scene.weights)
    {
        if (auto v = validate_scene(scene); !v.empty())
            throw Error("Simulator: invalid scene: " + v.front());
        constraints_ = build_constraints(scene.cage, scene.solver);
        state_ = SolverState::from_cage(scene.cage);
        driver_ = RootDriver(scene.cage, scene.mesh);
        kinematic_.vertices = driver_.vertices();
        posed_ = scene.mesh.vertices;
        collider_ = MeshBvh(posed_, scene.mesh.faces, true);
        cache_.reset(state_.size());
    }

    FrameOutput step_frame(MotionFrame const& motion, FrameTiming* timing = nullptr)
    {
        FrameOutput out;
        auto t0 = Clock::now();
        std::vector<Vec3> const posed = lbs_pose(scene_->mesh, motion);
        out.bald = pose_splats(scene_->bald_local, posed, scene_->mesh.faces);
        double const pose_ms = ms_since(t0);

        t0 = Clock::now();
        std::vector<Vec3> const targets = driver_.targets(scene_->mesh, motion, posed);
        simulate(posed, targets);
        double const sim_ms = ms_since(t0);

        t0 = Clock::now();
        soa_.assign(state_.positions);
        deformer_.deform_into(soa_, out.hair);
        double const deform_ms = ms_since(t0);
        if (timing) {
            timing->pose_ms = pose_ms;
            timing->simulate_ms = sim_ms;
            timing->deform_ms = deform_ms;
        }
        return out;
    }

    /// Advances the cage only (no splat output).
    void simulate(std::vector<Vec3> const& posed, std::vector<Vec3> const& targets)
    {
        SolverConfig const& cfg = scene_->solver;
        int const S = cfg.substeps;
        float const dt = cfg.dt / float(S);
        std::vector<Vec3> prev_targets(kinematic_.vertices.size());
        for (std::size_t k = 0; k < prev_targets.size(); ++k)
            prev_targets[k] = state_.positions[kinematic_.vertices[k]];
        std::vector<Vec3> const prev_posed = posed_;
        std::vector<Vec3> mesh_s(posed.size());
        last_stats_ = {};
        for (int s = 1; s <= S; ++s) {
            if (s == S) {
                kinematic_.positions = targets;
                mesh_s = posed;
            }
            else {
                float const a = float(s) / float(S);
                kinematic_.positions.resize(targets.size());
                for (std::size_t k = 0; k < targets.size(); ++k)
                    kinematic_.positions[k] = prev_targets[k] + a * (targets[k] - prev_targets[k]);
                for (std::size_t i = 0; i < posed.size(); ++i)
                    mesh_s[i] = prev_posed[i] + a * (posed[i] - prev_posed[i]);
            }
            collider_.refit(mesh_s);
            cache_.reset(state_.size());
            predict(state_, cfg, dt, kinematic_);
            auto const st = project_constraints(state_, constraints_, dt, cfg.iterations,
                                                {&collider_, mode_, &scene_->proxies}, &cache_);
            last_stats_.sdf_queries += st.sdf_queries;
            last_stats_.sdf_skipped += st.sdf_skipped;
            last_stats_.corrections += st.corrections;
            update_velocities(state_, dt);
        }
        posed_ = posed;
    }

    SolverState const& state() const { return state_; }
    ConstraintSet const& constraints() const { return constraints_; }
    MeshBvh const& collider() const { return collider_; }
    std::vector<Vec3> const& posed_mesh() const { return posed_; }
    ProjectionStats const& last_stats() const { return last_stats_; }
    RootDriver const& driver() const { return driver_; }
    CollisionMode mode() const { return mode_; }

    /// Proxy point of every cage vertex at the current positions.
    std::vector<Vec3> proxy_points() const
    {
        CageSoA const soa(state_.positions);
        std::vector<Vec3> out(state_.size());
        for (std::size_t j = 0; j < out.size(); ++j)
            out[j] = proxy_position(scene_->proxies[j], soa);
        return out;
    }

private:
    Scene const* scene_;
    CollisionMode mode_;
    HairDeformer deformer_;
    ConstraintSet constraints_;
    SolverState state_;
    RootDriver driver_;
    KinematicTargets kinematic_;
    std::vector<Vec3> posed_;
    MeshBvh collider_;
    CollisionCache cache_;
    CageSoA soa_;
    ProjectionStats last_stats_;
};

inline SplatSet merge_sets(SplatSet const& bald, SplatSet const& hair)
{
    SplatSet out;
    out.frame = SplatFrame::Global;
    out.splats.reserve(bald.size() + hair.size());
    out.splats.insert(out.splats.end(), bald.splats.begin(), bald.splats.end());
    out.splats.insert(out.splats.end(), hair.splats.begin(), hair.splats.end());
    return out;
}

// ---------------------------------------------------------------------------
// Preview projection

struct Camera {
    Mat4 pose = Mat4::Identity(); // world to camera
    float fx = 500, fy = 500, cx = 320, cy = 240;
    int width = 640, height = 480;
};

inline std::vector<std::string> validate_camera(Camera const& c)
{
    std::vector<std::string> out;
    if (!(c.fx > 0) || !(c.fy > 0))
        out.push_back("focal lengths must be positive");
    if (c.width < 1 || c.height < 1)
        out.push_back("image size must be positive");
    if (!is_rigid(c.pose))
        out.push_back("camera pose must be a rigid transform");
    return out;
}

inline Camera read_camera(fs::path const& path)
{
    auto const j = read_json(path);
    Camera c;
    try {
        auto const p = j.at("pose").get<std::vector<float>>();
        if (p.size() != 16)
            throw IoError(path, "pose needs 16 values");
        for (int r = 0; r < 4; ++r)
            for (int k = 0; k < 4; ++k)
                c.pose(r, k) = p[std::size_t(4 * r + k)];
        c.fx = j.at("fx").get<float>();
        c.fy = j.at("fy").get<float>();
        c.cx = j.at("cx").get<float>();
        c.cy = j.at("cy").get<float>();
        c.width = j.at("width").get<int>();
        c.height = j.at("height").get<int>();
    }
    catch (nlohmann::json::exception const& e) {
        throw IoError(path, std::string("bad camera: ") + e.what());
    }
    if (auto v = validate_camera(c); !v.empty())
        throw IoError(path, v.front());
    return c;
}

struct Image {
    int width = 0, height = 0;
    std::vector<Vec3> rgb;    // row-major, top row first
    std::vector<float> depth; // camera z; +inf where empty

    Vec3 const& color(int x, int y) const { return rgb[std::size_t(y) * width + x]; }
    float depth_at(int x, int y) const { return depth[std::size_t(y) * width + x]; }
};

/// Pinhole point-disc projection with a per-pixel depth test. Each splat
/// covers the pixel under its center plus all pixels whose centers fall in a
/// disc of radius (largest scale) * focal / depth.
inline Image preview_project(SplatSet const& splats, Camera const& cam, Vec3 const& background = Vec3::Zero())
{
    if (auto v = validate_camera(cam); !v.empty())
        throw Error("preview_project: " + v.front());
    Image img;
    img.width = cam.width;
    img.height = cam.height;
    img.rgb.assign(std::size_t(cam.width) * cam.height, background);
    img.depth.assign(img.rgb.size(), std::numeric_limits<float>::infinity());
    Mat3d const R = cam.pose.topLeftCorner<3, 3>().cast<double>();
    Vec3d const t = cam.pose.topRightCorner<3, 1>().cast<double>();
    auto plot = [&](int x, int y, float z, Vec3 const& c) {
        if (x < 0 || y < 0 || x >= img.width || y >= img.height)
            return;
        std::size_t const i = std::size_t(y) * img.width + x;
        if (z < img.depth[i]) {
            img.depth[i] = z;
            img.rgb[i] = c;
        }
    };
    for (auto const& s : splats.splats) {
        Vec3d const p = R * to_d(s.mu) + t;
        if (!(p.z() > 0))
            continue;
        double const u = cam.fx * p.x() / p.z() + cam.cx;
        double const v = cam.fy * p.y() / p.z() + cam.cy;
        double const r = std::max(cam.fx, cam.fy) * double(s.scale.maxCoeff()) / p.z();
        float const z = float(p.z());
        Vec3 const c = s.color * s.opacity;
        if (!std::isfinite(u) || !std::isfinite(v))
            continue;
        plot(int(std::floor(u)), int(std::floor(v)), z, c);
        int const x0 = int(std::floor(u - r)), x1 = int(std::ceil(u + r));
        int const y0 = int(std::floor(v - r)), y1 = int(std::ceil(v + r));
        if (x1 < 0 || y1 < 0 || x0 >= img.width || y0 >= img.height)
            continue;
        for (int y = std::max(y0, 0); y <= std::min(y1, img.height - 1); ++y)
            for (int x = std::max(x0, 0); x <= std::min(x1, img.width - 1); ++x) {
                double const dx = x + 0.5 - u, dy = y + 0.5 - v;
                if (dx * dx + dy * dy <= r * r)
                    plot(x, y, z, c);
            }
    }
    return img;
}

inline void write_ppm(fs::path const& path, Image const& img)
{
    auto out = detail::open_out(path, true);
    out << "P6\n" << img.width << ' ' << img.height << "\n255\n";
    std::string data(img.rgb.size() * 3, '\0');
    for (std::size_t i = 0; i < img.rgb.size(); ++i)
        for (int k = 0; k < 3; ++k)
            data[3 * i + k] = char(std::uint8_t(std::lround(std::clamp(img.rgb[i][k], 0.f, 1.f) * 255.f)));
    out.write(data.data(), std::streamsize(data.size()));
    if (!out)
        throw IoError(path, "write failed");
}

/// Depth as a little-endian greyscale PFM (rows bottom to top).
inline void write_pfm(fs::path const& path, Image const& img)
{
    auto out = detail::open_out(path, true);
    out << "Pf\n" << img.width << ' ' << img.height << "\n-1.0\n";
    for (int y = img.height - 1; y >= 0; --y)
        out.write(reinterpret_cast<char const*>(img.depth.data() + std::size_t(y) * img.width),
                  std::streamsize(sizeof(float) * img.width));
    if (!out)
        throw IoError(path, "write failed");
}

// ---------------------------------------------------------------------------
// Sequences

struct SequenceOptions {
    std::optional<fs::path> output_dir; // no files when unset
    std::optional<Camera> preview;
    CollisionMode collision = CollisionMode::Proxy;
    std::function<void(std::size_t, FrameOutput const&, Simulator const&)> on_frame;
};

struct SequenceReport {
    std::vector<FrameTiming> frames;
    std::size_t degenerate_splats = 0;

    FrameTiming mean() const
    {
        FrameTiming m;
        for (auto const& f : frames) {
            m.pose_ms += f.pose_ms;
            m.simulate_ms += f.simulate_ms;
            m.deform_ms += f.deform_ms;
            m.export_ms += f.export_ms;
            m.total_ms += f.total_ms;
        }
        if (!frames.empty()) {
            double const n = double(frames.size());
            m.pose_ms /= n;
            m.simulate_ms /= n;
            m.deform_ms /= n;
            m.export_ms /= n;
            m.total_ms /= n;
        }
        return m;
    }
};

inline std::string frame_name(std::size_t i, char const* ext = ".ply")
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "frame_%04zu%s", i, ext);
    return buf;
}

inline void ensure_writable_dir(fs::path const& dir)
{
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir))
        throw IoError(dir, "cannot create output directory");
    fs::path const probe = dir / ".write_probe";
    {
        std::ofstream f(probe);
        if (!f)
            throw IoError(dir, "output directory is not writable");
    }
    fs::remove(probe, ec);
}

/// Steps every motion frame and exports bald + hair per frame as
/// frame_NNNN.ply (plus frame_NNNN.ppm/.pfm previews when a camera is set).
inline SequenceReport run_sequence(Scene const& scene, std::vector<MotionFrame> const& motion,
                                   SequenceOptions const& opt = {})
{
    if (motion.empty())
        throw Error("run_sequence: no motion frames");
    if (opt.output_dir)
        ensure_writable_dir(*opt.output_dir);
    Simulator sim(scene, opt.collision);
    SequenceReport rep;
    for (std::size_t f = 0; f < motion.size(); ++f) {
        auto const t0 = Clock::now();
        FrameTiming ft;
        FrameOutput const out = sim.step_frame(motion[f], &ft);
        auto const te = Clock::now();
        if (opt.output_dir) {
            SplatSet const merged = merge_sets(out.bald, out.hair.splats);
            write_splats(*opt.output_dir / frame_name(f), merged);
            if (opt.preview) {
                Image const img = preview_project(merged, *opt.preview);
                write_ppm(*opt.output_dir / frame_name(f, ".ppm"), img);
                write_pfm(*opt.output_dir / frame_name(f, ".pfm"), img);
            }
        }
        ft.export_ms = ms_since(te);
        ft.total_ms = ms_since(t0);
        rep.degenerate_splats += out.hair.degenerate;
        rep.frames.push_back(ft);
        if (opt.on_frame)
            opt.on_frame(f, out, sim);
    }
    return rep;
}

} // namespace hairsim
