#include <hairsim.hpp>
#include <hairsim/synthetic.hpp>

#include <cstdio>
#include <random>

using namespace hairsim;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(char const* f, auto... args)
{
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

double seconds_since(Clock::time_point t0) { return ms_since(t0) / 1000.0; }

Quat random_quat(std::mt19937& rng)
{
    std::normal_distribution<float> n;
    return Quat{n(rng), n(rng), n(rng), n(rng)}.normalized();
}

// ---------------------------------------------------------------------------

std::vector<Vec3> interior_samples(TriMesh const& m, std::size_t n, std::mt19937& rng)
{
    Vec3 lo = m.vertices[0], hi = lo;
    for (auto const& v : m.vertices) {
        lo = lo.cwiseMin(v);
        hi = hi.cwiseMax(v);
    }
    MeshBvh const bvh(m.vertices, m.faces);
    std::uniform_real_distribution<float> u(0, 1);
    std::vector<Vec3> out;
    while (out.size() < n) {
        Vec3 const p = lo + (hi - lo).cwiseProduct(Vec3(u(rng), u(rng), u(rng)));
        if (bvh.signed_distance(p).distance < -1e-4f)
            out.push_back(p);
    }
    return out;
}

Outcome mvc_correctness()
{
    auto const t0 = Clock::now();
    std::mt19937 rng(2024);
    std::vector<TriMesh> cages;
    std::uniform_real_distribution<float> u(-0.5f, 0.5f);
    for (int c = 0; c < 3; ++c) {
        auto m = synthetic::icosphere(1.f, 1);
        Mat3 A = Mat3::Identity();
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                A(i, j) += u(rng);
        if (A.determinant() < 0)
            A.col(0) *= -1.f;
        Vec3 const b(u(rng), u(rng), u(rng));
        for (auto& v : m.vertices)
            v = A * v + b;
        cages.push_back(m);
    }
    for (int c = 0; c < 2; ++c) {
        std::normal_distribution<float> n(0.f, 0.3f);
        std::vector<Vec3> pts(400);
        for (auto& p : pts)
            p = Vec3(n(rng), n(rng), n(rng));
        cages.push_back(extract_surface(voxelize(pts, 0.2, 1)));
    }

    double worst_pou = 0, worst_lin = 0;
    std::size_t points = 0;
    for (auto const& cage : cages) {
        MvcCage const mc(cage.vertices, cage.faces);
        for (auto const& x : interior_samples(cage, 1000, rng)) {
            auto const w = mvc_weights_point(x, mc).weights;
            double sum = 0;
            Vec3d acc = Vec3d::Zero();
            for (std::size_t j = 0; j < w.size(); ++j) {
                sum += w[j];
                acc += w[j] * to_d(cage.vertices[j]);
            }
            worst_pou = std::max(worst_pou, std::abs(sum - 1));
            worst_lin = std::max(worst_lin, (acc - to_d(x)).norm() / mc.diameter());
            ++points;
        }
    }
    double const secs = seconds_since(t0);
    bool const pass = worst_pou < 1e-4 && worst_lin < 1e-4 && secs < 10;
    return {pass, fmt("%zu cages, %zu points: max |sum w - 1| = %.2e, max linear error / diameter = %.2e, %.2f s",
                      cages.size(), points, worst_pou, worst_lin, secs)};
}

Outcome rig_round_trip()
{
    auto const t0 = Clock::now();
    std::mt19937 rng(7);
    std::uniform_real_distribution<float> u(-1, 1), s(0.005f, 0.2f), c(0, 1);
    double worst_mu = 0, worst_rot = 0, worst_scale = 0;
    for (int i = 0; i < 10000; ++i) {
        TriangleFrame f;
        for (;;) {
            Vec3 const a(u(rng), u(rng), u(rng)), b(u(rng), u(rng), u(rng)), d(u(rng), u(rng), u(rng));
            if ((b - a).cross(d - a).norm() < 1e-3f)
                continue;
            f = triangle_frame(a, b, d);
            break;
        }
        GaussianSplat g;
        g.mu = Vec3(u(rng), u(rng), u(rng));
        g.rot = random_quat(rng);
        g.scale = Vec3(s(rng), s(rng), s(rng));
        g.opacity = c(rng);
        auto const back = local_to_global(global_to_local(g, f, 0), f);
        worst_mu = std::max(worst_mu, double((back.mu - g.mu).cwiseAbs().maxCoeff()));
        worst_rot = std::max(worst_rot, 1.0 - std::abs(double(back.rot.dot(g.rot))));
        worst_scale = std::max(worst_scale, double((back.scale - g.scale).cwiseAbs().maxCoeff()));
    }
    double const secs = seconds_since(t0);
    bool const pass = worst_mu < 1e-5 && worst_rot < 1e-5 && worst_scale < 1e-5 && secs < 5;
    return {pass, fmt("10000 pairs: max |dmu| = %.2e, max 1-|q.q'| = %.2e, max |dscale| = %.2e, %.2f s", worst_mu,
                      worst_rot, worst_scale, secs)};
}

Outcome pbd_unit_dynamics()
{
    SolverConfig cfg;
    cfg.gravity = Vec3(0, 0, -9.8f);
    cfg.damping = 0;
    SolverState s;
    s.positions = s.predicted = {Vec3::Zero()};
    s.velocities = {Vec3::Zero()};
    s.inv_mass = {1.f};
    predict(s, cfg, 0.1f);
    float const vz = s.velocities[0].z();
    bool const fall_ok = vz == -0.98f && s.velocities[0].x() == 0.f && s.velocities[0].y() == 0.f;

    SolverState t;
    t.positions = t.predicted = {Vec3(0, 0, 0), Vec3(2, 0, 0)};
    t.velocities.assign(2, Vec3::Zero());
    t.inv_mass = {1.f, 1.f};
    ConstraintSet cs;
    cs.stretch.push_back({0, 1, 1.f, 0.f});
    project_constraints(t, cs, 0.1f, 1);
    double const err = std::abs((to_d(t.predicted[1]) - to_d(t.predicted[0])).norm() - 1.0);
    bool const pass = fall_ok && err < 1e-6;
    return {pass, fmt("free fall v_z = %.9g (expected %.9g), stretch error after one iteration = %.2e", vz, -0.98f,
                      err)};
}

Outcome chain_convergence()
{
    int const n = 20;
    float const rest = 0.05f;
    SolverConfig cfg;
    SolverState s;
    for (int i = 0; i < n; ++i)
        s.positions.push_back(Vec3(0, -2.f * rest * float(i), 0));
    s.predicted = s.positions;
    s.velocities.assign(n, Vec3::Zero());
    s.inv_mass.assign(n, 1.f);
    s.inv_mass[0] = 0.f;
    ConstraintSet cs;
    for (int i = 0; i + 1 < n; ++i)
        cs.stretch.push_back({std::uint32_t(i), std::uint32_t(i + 1), rest, 0.f});
    double const initial = max_stretch_residual(s, cs, true);
    float const h = cfg.dt / float(cfg.substeps);
    predict(s, cfg, h);
    project_constraints(s, cs, h, cfg.iterations);
    update_velocities(s, h);
    double const residual = max_stretch_residual(s, cs, true);
    int steps = 1;
    for (double r = residual; r >= 0.01 && steps < 1000; ++steps) {
        predict(s, cfg, h);
        project_constraints(s, cs, h, cfg.iterations);
        update_velocities(s, h);
        r = max_stretch_residual(s, cs, true);
    }
    return {residual < 0.01, fmt("20-vertex chain, initial residual %.0f%%, after one %d-iteration projection %.3f%% "
                                 "(below 1%% after %d substeps)",
                                 100 * initial, cfg.iterations, 100 * residual, steps)};
}

// ---------------------------------------------------------------------------

struct CollisionRun {
    std::size_t proxy_violations = 0;
    std::size_t penetrations = 0;
    double mean_gap = 0;
    double worst_proxy_sd = 1e9;
};

CollisionRun run_collision(Scene const& scene, std::vector<MotionFrame> const& motion, CollisionMode mode)
{
    Simulator sim(scene, mode);
    float const eps = scene.solver.collision_margin;
    CollisionRun r;
    double gap = 0;
    std::size_t samples = 0;
    for (auto const& m : motion) {
        auto const out = sim.step_frame(m);
        MeshBvh const& col = sim.collider();
        for (auto const& p : sim.proxy_points()) {
            float const sd = col.signed_distance(p).distance;
            r.worst_proxy_sd = std::min(r.worst_proxy_sd, double(sd));
            if (sd < eps - 1e-4f)
                ++r.proxy_violations;
        }
        for (auto const& g : out.hair.splats.splats) {
            float const sd = col.signed_distance(g.mu).distance;
            gap += sd;
            ++samples;
            if (sd < -eps)
                ++r.penetrations;
        }
    }
    r.mean_gap = gap / double(samples);
    return r;
}

Outcome proxy_collision()
{
    synthetic::DemoOptions opt;
    opt.hair_splats = 4000;
    auto const demo = synthetic::demo_scene(opt);
    auto const motion = synthetic::nodding(300);
    auto const proxy = run_collision(demo.scene, motion, CollisionMode::Proxy);
    auto const direct = run_collision(demo.scene, motion, CollisionMode::Direct);
    bool const pass = proxy.proxy_violations == 0 && proxy.mean_gap < direct.mean_gap && proxy.penetrations == 0 &&
                      direct.penetrations == 0;
    return {pass, fmt("300 frames: proxy points below eps-1e-4 = %zu (min sd %.5f, eps %.4f); mean splat gap proxy "
                      "%.5f vs direct %.5f; splat penetrations beyond eps proxy %zu, direct %zu",
                      proxy.proxy_violations, proxy.worst_proxy_sd, demo.scene.solver.collision_margin,
                      proxy.mean_gap, direct.mean_gap, proxy.penetrations, direct.penetrations)};
}

Outcome pipeline_identity()
{
    synthetic::DemoOptions opt;
    opt.solver.gravity = Vec3::Zero();
    auto const demo = synthetic::demo_scene(opt);
    auto const& scene = demo.scene;
    auto const t0 = Clock::now();
    SplatSet const rest =
        merge_sets(pose_splats(scene.bald_local, scene.mesh.vertices, scene.mesh.faces), scene.hair);
    double worst = 0;
    SequenceOptions so;
    so.on_frame = [&](std::size_t, FrameOutput const& out, Simulator const&) {
        SplatSet const merged = merge_sets(out.bald, out.hair.splats);
        for (std::size_t i = 0; i < merged.size(); ++i)
            worst = std::max(worst, double((merged.splats[i].mu - rest.splats[i].mu).cwiseAbs().maxCoeff()));
    };
    run_sequence(scene, synthetic::still(50), so);
    double const secs = seconds_since(t0);
    return {worst < 1e-5 && secs < 30,
            fmt("50 frames, %zu splats: max |mu - rest| = %.2e, %.2f s", rest.size(), worst, secs)};
}

// ---------------------------------------------------------------------------
// Straight-line reference of one frame: substep interpolation, prediction,
// stretch/bend/collision projection, velocity update, then cage deformation
// of every splat by its principal axis.

namespace oracle {

struct Tri {
    Vec3d a, b, c;
};

Vec3d closest_on_triangle(Vec3d const& p, Tri const& t)
{
    // Minimise over the face interior, then over the three edges.
    Vec3d const e0 = t.b - t.a, e1 = t.c - t.a;
    Eigen::Matrix2d G;
    G << e0.dot(e0), e0.dot(e1), e0.dot(e1), e1.dot(e1);
    Eigen::Vector2d const rhs(e0.dot(p - t.a), e1.dot(p - t.a));
    Eigen::Vector2d const st = G.inverse() * rhs;
    if (st[0] >= 0 && st[1] >= 0 && st[0] + st[1] <= 1)
        return t.a + st[0] * e0 + st[1] * e1;
    auto seg = [&](Vec3d const& x, Vec3d const& y) {
        double const k = std::clamp((p - x).dot(y - x) / (y - x).squaredNorm(), 0.0, 1.0);
        return Vec3d(x + k * (y - x));
    };
    Vec3d best = seg(t.a, t.b);
    for (Vec3d const q : {seg(t.b, t.c), seg(t.c, t.a)})
        if ((q - p).squaredNorm() < (best - p).squaredNorm())
            best = q;
    return best;
}

double solid_angle(Vec3d const& p, Tri const& t)
{
    Vec3d const a = t.a - p, b = t.b - p, c = t.c - p;
    double const la = a.norm(), lb = b.norm(), lc = c.norm();
    double const num = a.dot(b.cross(c));
    double const den = la * lb * lc + a.dot(b) * lc + b.dot(c) * la + c.dot(a) * lb;
    return 2 * std::atan2(num, den);
}

// Signed distance (negative inside) and the direction of increasing distance.
std::pair<double, Vec3d> signed_distance(Vec3d const& p, std::vector<Tri> const& mesh)
{
    double best = 1e300, winding = 0;
    Vec3d q = p;
    for (auto const& t : mesh) {
        Vec3d const c = closest_on_triangle(p, t);
        if ((c - p).squaredNorm() < best) {
            best = (c - p).squaredNorm();
            q = c;
        }
        winding += solid_angle(p, t);
    }
    double const d = std::sqrt(best);
    double const sign = winding / (4 * std::numbers::pi) > 0.5 ? -1.0 : 1.0;
    return {sign * d, d > 0 ? Vec3d(sign * (p - q) / d) : Vec3d::Zero()};
}

double dihedral(Vec3d const& p0, Vec3d const& p1, Vec3d const& p2, Vec3d const& p3)
{
    Vec3d const e = (p1 - p0).normalized();
    Vec3d const n1 = (p1 - p0).cross(p2 - p0).normalized();
    Vec3d const n2 = (p0 - p1).cross(p3 - p1).normalized();
    return std::atan2(n1.cross(n2).dot(e), n1.dot(n2));
}

double wrap(double a)
{
    while (a > std::numbers::pi)
        a -= 2 * std::numbers::pi;
    while (a <= -std::numbers::pi)
        a += 2 * std::numbers::pi;
    return a;
}

Mat3d rotation(Quat const& q)
{
    double const w = q.w, x = q.x, y = q.y, z = q.z;
    Mat3d R;
    R << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y), 2 * (x * y + w * z),
        1 - 2 * (x * x + z * z), 2 * (y * z - w * x), 2 * (x * z - w * y), 2 * (y * z + w * x),
        1 - 2 * (x * x + y * y);
    return R;
}

Eigen::Vector4d hamilton(Eigen::Vector4d const& a, Eigen::Vector4d const& b)
{
    return {a[0] * b[0] - a[1] * b[1] - a[2] * b[2] - a[3] * b[3], a[0] * b[1] + a[1] * b[0] + a[2] * b[3] - a[3] * b[2],
            a[0] * b[2] - a[1] * b[3] + a[2] * b[0] + a[3] * b[1], a[0] * b[3] + a[1] * b[2] - a[2] * b[1] + a[3] * b[0]};
}

struct Splat {
    Vec3d mu;
    Eigen::Vector4d rot;
    Vec3d scale;
};

struct Model {
    // Inputs taken from the scene.
    std::vector<std::array<std::uint32_t, 2>> edges;
    std::vector<std::array<std::uint32_t, 4>> hinges;
    std::vector<Face> mesh_faces;
    std::vector<float> inv_mass;
    std::vector<std::vector<double>> proxy_rows;
    std::vector<std::array<std::vector<double>, 2>> end_rows;
    std::vector<GaussianSplat> rest_splats;
    SolverConfig cfg;

    // Derived here.
    std::vector<double> rest_len, rest_angle, rest_hinge;
    std::vector<int> axis;

    // State.
    std::vector<Vec3d> x, v;
    std::vector<Vec3d> prev_mesh;
};

Model build(Scene const& scene, ConstraintSet const& cs)
{
    Model m;
    m.cfg = scene.solver;
    for (auto const& k : cs.stretch)
        m.edges.push_back({k.i, k.j});
    for (auto const& k : cs.bend)
        m.hinges.push_back(k.v);
    m.mesh_faces = scene.mesh.faces;
    m.inv_mass = scene.cage.inv_mass;
    for (auto const& p : scene.cage.vertices) {
        m.x.push_back(to_d(p));
        m.v.push_back(Vec3d::Zero());
    }
    for (auto const& [i, j] : m.edges)
        m.rest_len.push_back((m.x[i] - m.x[j]).norm());
    for (auto const& h : m.hinges) {
        m.rest_angle.push_back(dihedral(m.x[h[0]], m.x[h[1]], m.x[h[2]], m.x[h[3]]));
        m.rest_hinge.push_back((m.x[h[1]] - m.x[h[0]]).norm());
    }
    auto const M = scene.cage.size();
    for (std::size_t j = 0; j < M; ++j) {
        std::size_t best = 0;
        for (std::size_t i = 1; i < scene.hair.size(); ++i)
            if ((scene.hair.splats[i].mu - scene.cage.vertices[j]).squaredNorm() <
                (scene.hair.splats[best].mu - scene.cage.vertices[j]).squaredNorm())
                best = i;
        auto const row = scene.weights.expand(MvcWeights::row_index(best, kCenter));
        m.proxy_rows.emplace_back(row.begin(), row.end());
    }
    for (std::size_t i = 0; i < scene.hair.size(); ++i) {
        auto const& g = scene.hair.splats[i];
        m.rest_splats.push_back(g);
        Mat3d const R = rotation(g.rot);
        int a = 0;
        for (int k = 1; k < 3; ++k)
            if ((2.0 * g.scale[k] * R.col(k)).norm() > (2.0 * g.scale[a] * R.col(a)).norm())
                a = k;
        m.axis.push_back(a);
        auto const pos = scene.weights.expand(MvcWeights::row_index(i, 1 + 2 * a));
        auto const neg = scene.weights.expand(MvcWeights::row_index(i, 2 + 2 * a));
        m.end_rows.push_back({std::vector<double>(pos.begin(), pos.end()), std::vector<double>(neg.begin(), neg.end())});
    }
    m.prev_mesh.clear();
    for (auto const& p : scene.mesh.vertices)
        m.prev_mesh.push_back(to_d(p));
    return m;
}

Vec3d blend(std::vector<double> const& w, std::vector<Vec3d> const& x)
{
    Vec3d acc = Vec3d::Zero();
    for (std::size_t j = 0; j < x.size(); ++j)
        acc += w[j] * x[j];
    return acc;
}

void step_frame(Model& m, std::vector<Vec3> const& posed, std::vector<std::uint32_t> const& roots,
                std::vector<Vec3> const& targets)
{
    int const S = m.cfg.substeps;
    double const h = double(m.cfg.dt) / S;
    double const eps = m.cfg.collision_margin;
    std::vector<Vec3d> start_targets;
    for (auto r : roots)
        start_targets.push_back(m.x[r]);
    std::vector<Vec3d> mesh_now(posed.size());
    for (int s = 1; s <= S; ++s) {
        double const a = double(s) / S;
        for (std::size_t i = 0; i < posed.size(); ++i)
            mesh_now[i] = s == S ? to_d(posed[i]) : m.prev_mesh[i] + a * (to_d(posed[i]) - m.prev_mesh[i]);
        std::vector<Tri> tris;
        for (auto const& f : m.mesh_faces)
            tris.push_back({mesh_now[f[0]], mesh_now[f[1]], mesh_now[f[2]]});

        std::vector<Vec3d> p(m.x.size());
        for (std::size_t j = 0; j < m.x.size(); ++j) {
            if (m.inv_mass[j] == 0) {
                p[j] = m.x[j];
                continue;
            }
            m.v[j] = (1 - double(m.cfg.damping)) * (m.v[j] + h * m.inv_mass[j] * to_d(m.cfg.gravity));
            p[j] = m.x[j] + h * m.v[j];
        }
        for (std::size_t k = 0; k < roots.size(); ++k) {
            Vec3d const t =
                s == S ? to_d(targets[k]) : start_targets[k] + a * (to_d(targets[k]) - start_targets[k]);
            p[roots[k]] = t;
            m.v[roots[k]] = (t - m.x[roots[k]]) / h;
        }

        for (int it = 0; it < m.cfg.iterations; ++it) {
            for (std::size_t c = 0; c < m.edges.size(); ++c) {
                auto const [i, j] = m.edges[c];
                double const wi = m.inv_mass[i], wj = m.inv_mass[j];
                if (wi + wj == 0)
                    continue;
                Vec3d const d = p[i] - p[j];
                double const C = d.norm() - m.rest_len[c];
                Vec3d const n = d.normalized();
                p[i] -= wi / (wi + wj) * C * n;
                p[j] += wj / (wi + wj) * C * n;
            }
            for (std::size_t c = 0; c < m.hinges.size(); ++c) {
                auto const& hv = m.hinges[c];
                auto angle = [&](std::array<Vec3d, 4> const& q) { return dihedral(q[0], q[1], q[2], q[3]); };
                std::array<Vec3d, 4> q{p[hv[0]], p[hv[1]], p[hv[2]], p[hv[3]]};
                double const C = wrap(angle(q) - m.rest_angle[c]);
                std::array<Vec3d, 4> g;
                double denom = 0;
                for (int k = 0; k < 4; ++k) {
                    for (int d = 0; d < 3; ++d) {
                        double const fd = 1e-7;
                        auto qp = q, qm = q;
                        qp[k][d] += fd;
                        qm[k][d] -= fd;
                        g[k][d] = wrap(angle(qp) - angle(qm)) / (2 * fd);
                    }
                    denom += m.inv_mass[hv[k]] * g[k].squaredNorm();
                }
                if (denom < 1e-18)
                    continue;
                double dl = -C / denom;
                double stepmax = 0;
                for (int k = 0; k < 4; ++k)
                    stepmax = std::max(stepmax, m.inv_mass[hv[k]] * std::abs(dl) * g[k].norm());
                if (stepmax > m.rest_hinge[c])
                    dl *= m.rest_hinge[c] / stepmax;
                for (int k = 0; k < 4; ++k)
                    p[hv[k]] += m.inv_mass[hv[k]] * dl * g[k];
            }
            for (std::size_t j = 0; j < p.size(); ++j) {
                if (m.inv_mass[j] == 0)
                    continue;
                auto const [sd, n] = signed_distance(blend(m.proxy_rows[j], p), tris);
                if (sd < eps)
                    p[j] += (eps - sd) * n;
            }
        }
        for (std::size_t j = 0; j < p.size(); ++j) {
            if (m.inv_mass[j] != 0)
                m.v[j] = (p[j] - m.x[j]) / h;
            m.x[j] = p[j];
        }
    }
    for (std::size_t i = 0; i < posed.size(); ++i)
        m.prev_mesh[i] = to_d(posed[i]);
}

std::vector<Splat> deform(Model const& m)
{
    std::vector<Splat> out;
    for (std::size_t i = 0; i < m.rest_splats.size(); ++i) {
        auto const& g = m.rest_splats[i];
        int const a = m.axis[i];
        Mat3d const R = rotation(g.rot);
        Vec3d const src = 2.0 * double(g.scale[a]) * R.col(a);
        Vec3d const pos = blend(m.end_rows[i][0], m.x), neg = blend(m.end_rows[i][1], m.x);
        Vec3d const dst = pos - neg;
        Vec3d const us = src.normalized(), ud = dst.normalized();
        Vec3d const axis = us.cross(ud);
        double const angle = std::atan2(axis.norm(), us.dot(ud));
        Eigen::Vector4d dq(1, 0, 0, 0);
        if (axis.norm() > 1e-12) {
            Vec3d const k = axis.normalized() * std::sin(angle / 2);
            dq = {std::cos(angle / 2), k.x(), k.y(), k.z()};
        }
        Splat s;
        s.mu = 0.5 * (pos + neg);
        s.rot = hamilton(dq, Eigen::Vector4d(g.rot.w, g.rot.x, g.rot.y, g.rot.z)).normalized();
        s.scale = g.scale.cast<double>() * (dst.norm() / src.norm());
        out.push_back(s);
    }
    return out;
}

} // namespace oracle

Scene oracle_fixture()
{
    Scene s;
    s.mesh = synthetic::head(2);
    s.bald_local = bind_nearest(synthetic::bald(s.mesh), s.mesh);
    s.hair.frame = SplatFrame::Global;
    std::mt19937 rng(11);
    std::uniform_real_distribution<float> u(-1, 1), y(0.11f, 0.19f);
    for (int i = 0; i < 10; ++i) {
        GaussianSplat g;
        g.mu = Vec3(0.008f * u(rng), y(rng), 0.008f * u(rng));
        g.rot = random_quat(rng);
        g.scale = Vec3(0.006f, 0.003f, 0.002f);
        g.opacity = 0.8f;
        g.color = Vec3(0.3f, 0.2f, 0.1f);
        s.hair.splats.push_back(g);
    }
    auto const column = synthetic::column(5, 0.035f, 0.12f, Vec3(0, 0.094f, 0));
    s.cage = mark_roots(Cage::from_mesh(column), s.mesh, 0.01);
    s.solver.collision_margin = 0.03f;
    s.weights = bake_weights(s.hair, s.cage);
    s.proxies = bind_proxies(s.cage, s.hair, s.weights);
    return s;
}

Outcome oracle_equivalence()
{
    Scene const scene = oracle_fixture();
    Simulator sim(scene);
    auto model = oracle::build(scene, sim.constraints());
    auto const roots = sim.driver().vertices();
    auto const motion = synthetic::nodding(3, 20.f, 6.f);
    double worst = 0;
    std::size_t corrections = 0;
    for (auto const& m : motion) {
        auto const posed = lbs_pose(scene.mesh, m);
        auto const targets = sim.driver().targets(scene.mesh, m, posed);
        auto const out = sim.step_frame(m);
        corrections += sim.last_stats().corrections;
        oracle::step_frame(model, posed, roots, targets);
        auto const ref = oracle::deform(model);
        for (std::size_t j = 0; j < model.x.size(); ++j)
            worst = std::max(worst, (to_d(sim.state().positions[j]) - model.x[j]).cwiseAbs().maxCoeff());
        for (std::size_t i = 0; i < ref.size(); ++i) {
            auto const& g = out.hair.splats.splats[i];
            worst = std::max(worst, (to_d(g.mu) - ref[i].mu).cwiseAbs().maxCoeff());
            worst = std::max(worst, (g.scale.cast<double>() - ref[i].scale).cwiseAbs().maxCoeff());
            Eigen::Vector4d q(g.rot.w, g.rot.x, g.rot.y, g.rot.z);
            if (q.dot(ref[i].rot) < 0)
                q = -q;
            worst = std::max(worst, (q - ref[i].rot).cwiseAbs().maxCoeff());
        }
    }
    return {worst < 1e-4, fmt("3 frames, %zu splats, %zu cage vertices (%zu kinematic), %zu collision corrections: "
                              "max coordinate difference %.2e",
                              scene.hair.size(), scene.cage.size(), roots.size(), corrections, worst)};
}

Outcome realtime()
{
    auto const t0 = Clock::now();
    synthetic::DemoOptions opt;
    opt.hair_splats = 100000;
    opt.cage.target_vertices = 500;
    auto const demo = synthetic::demo_scene(opt);
    double const setup = seconds_since(t0);
    auto const& scene = demo.scene;
    auto const rep = run_sequence(scene, synthetic::nodding(300));
    auto const mean = rep.mean();
    double const budget = mean.simulate_ms + mean.deform_ms;
    return {budget <= 33.0,
            fmt("%zu splats, %zu cage vertices, %d iterations, %d substeps, %u threads: simulate %.2f ms + deform "
                "%.2f ms = %.2f ms/frame over 300 frames (budget 33 ms; setup %.0f s)",
                scene.hair.size(), scene.cage.size(), scene.solver.iterations, scene.solver.substeps, thread_count(),
                mean.simulate_ms, mean.deform_ms, budget, setup)};
}

Outcome cage_validity()
{
    bool pass = true;
    std::string detail;
    for (auto style : {synthetic::HairStyle::StraightBob, synthetic::HairStyle::LongPonytail,
                       synthetic::HairStyle::CurlyVolume}) {
        auto const hair = synthetic::hair(style, 20000, 3);
        auto const r = build_cage(hair);
        bool const tight = is_watertight(r.cage.faces, r.cage.size());
        MeshBvh const bvh(r.cage.vertices, r.cage.faces);
        std::size_t inside = 0, total = 0;
        double worst = -1e9;
        for (auto const& p : tracked_points(hair)) {
            double const sd = bvh.signed_distance(p).distance;
            worst = std::max(worst, sd);
            inside += sd <= -0.5 * r.voxel_size;
            ++total;
        }
        bool const ok = tight && r.cage.size() <= 500 && inside == total;
        pass = pass && ok;
        detail += fmt("%s%s: %zu vertices, watertight %s, %zu/%zu points with >= half-voxel margin (max sd %.4f, "
                      "voxel %.4f)",
                      detail.empty() ? "" : "; ", synthetic::style_name(style), r.cage.size(), tight ? "yes" : "no",
                      inside, total, worst, r.voxel_size);
    }
    return {pass, detail};
}

Outcome reassignment()
{
    auto const mesh = synthetic::head(3);
    SplatSet const bald = synthetic::bald(mesh);
    SplatSet hair = synthetic::hair(synthetic::HairStyle::StraightBob, 3000, 5);
    std::size_t const n_hair = hair.size();
    std::mt19937 rng(17);
    std::uniform_int_distribution<std::size_t> pick(0, bald.size() - 1);
    std::vector<std::uint32_t> planted;
    for (int i = 0; i < 40; ++i) {
        GaussianSplat g = bald.splats[pick(rng)];
        g.mu = g.mu * 1.02f;
        planted.push_back(std::uint32_t(hair.size()));
        hair.splats.push_back(g);
    }
    ReassignConfig cfg;
    cfg.boundary_radius = 0.004;
    auto const split = split_boundary(hair, bald, cfg);
    auto const r = reassign(hair, bald, split.boundary, cfg);
    std::size_t expelled_planted = 0;
    for (auto i : planted)
        expelled_planted += std::binary_search(r.expelled.begin(), r.expelled.end(), i);
    std::size_t modified = 0, kept = 0;
    for (std::size_t k = 0; k < r.hair.size(); ++k) {
        auto const& g = r.hair.splats[k];
        // Retained splats appear in input order; match them back to the originals.
        while (kept < hair.size() && std::binary_search(r.expelled.begin(), r.expelled.end(), std::uint32_t(kept)))
            ++kept;
        if (kept >= n_hair || !(g.mu == hair.splats[kept].mu && g.color == hair.splats[kept].color &&
                                g.scale == hair.splats[kept].scale))
            ++modified;
        ++kept;
    }
    std::size_t hair_expelled = 0;
    for (auto i : r.expelled)
        hair_expelled += i < n_hair;
    modified += hair_expelled;
    bool const pass = expelled_planted == planted.size() && modified == 0;
    return {pass, fmt("%zu boundary splats; planted skin-like expelled %zu/%zu; hair splats modified or removed %zu",
                      split.boundary.size(), expelled_planted, planted.size(), modified)};
}

} // namespace

int main()
{
    struct Criterion {
        int id;
        char const* name;
        Outcome (*run)();
    };
    Criterion const criteria[] = {
        {1, "MVC correctness", mvc_correctness},
        {2, "rigging round trip", rig_round_trip},
        {3, "PBD unit dynamics", pbd_unit_dynamics},
        {4, "constraint convergence", chain_convergence},
        {5, "proxy collision guarantee", proxy_collision},
        {6, "full-pipeline identity", pipeline_identity},
        {7, "oracle equivalence", oracle_equivalence},
        {8, "real-time contract", realtime},
        {9, "cage validity", cage_validity},
        {10, "reassignment fixture", reassignment},
    };
    int failed = 0;
    for (auto const& c : criteria) {
        Outcome o;
        try {
            o = c.run();
        }
        catch (std::exception const& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        std::printf("[%s] %d %s: %s\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str());
        std::fflush(stdout);
        failed += !o.pass;
    }
    std::printf("%d of %zu criteria passed\n", int(std::size(criteria)) - failed, std::size(criteria));
    return failed == 0 ? 0 : 1;
}
