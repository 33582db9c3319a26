#pragma once

#include "mvc.hpp"

#include <nlohmann/json.hpp>

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace hairsim {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

namespace fs = std::filesystem;

inline constexpr double kShC0 = 0.28209479177387814;

class IoError : public Error {
public:
    IoError(fs::path const& path, std::string const& what) : Error(path.string() + ": " + what) {}
};

namespace detail {

inline std::ifstream open_in(fs::path const& path, bool binary)
{
    std::ifstream in(path, binary ? std::ios::binary : std::ios::in);
    if (!in)
        throw IoError(path, "cannot open for reading");
    return in;
}

inline std::ofstream open_out(fs::path const& path, bool binary)
{
    std::ofstream out(path, binary ? std::ios::binary | std::ios::trunc : std::ios::trunc);
    if (!out)
        throw IoError(path, "cannot open for writing");
    return out;
}

inline double logit(double p)
{
    p = std::clamp(p, 0.0, 1.0);
    double const v = std::log(p) - std::log1p(-p);
    return std::clamp(v, -30.0, 30.0);
}

inline double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

} // namespace detail

// ---------------------------------------------------------------------------
// PLY splat files (3DGS layout)

namespace detail {

enum class PlyType { I8, U8, I16, U16, I32, U32, F32, F64 };

inline PlyType ply_type(std::string const& t, fs::path const& path)
{
    static std::map<std::string, PlyType> const m = {
        {"char", PlyType::I8},    {"int8", PlyType::I8},     {"uchar", PlyType::U8},   {"uint8", PlyType::U8},
        {"short", PlyType::I16},  {"int16", PlyType::I16},   {"ushort", PlyType::U16}, {"uint16", PlyType::U16},
        {"int", PlyType::I32},    {"int32", PlyType::I32},   {"uint", PlyType::U32},   {"uint32", PlyType::U32},
        {"float", PlyType::F32},  {"float32", PlyType::F32}, {"double", PlyType::F64}, {"float64", PlyType::F64}};
    auto it = m.find(t);
    if (it == m.end())
        throw IoError(path, "unsupported PLY property type '" + t + "'");
    return it->second;
}

inline std::size_t ply_size(PlyType t)
{
    switch (t) {
    case PlyType::I8:
    case PlyType::U8:
        return 1;
    case PlyType::I16:
    case PlyType::U16:
        return 2;
    case PlyType::I32:
    case PlyType::U32:
    case PlyType::F32:
        return 4;
    default:
        return 8;
    }
}

template <class T>
double read_as(char const* p)
{
    T v;
    std::memcpy(&v, p, sizeof(T));
    return double(v);
}

inline double ply_value(PlyType t, char const* p)
{
    switch (t) {
    case PlyType::I8: return read_as<std::int8_t>(p);
    case PlyType::U8: return read_as<std::uint8_t>(p);
    case PlyType::I16: return read_as<std::int16_t>(p);
    case PlyType::U16: return read_as<std::uint16_t>(p);
    case PlyType::I32: return read_as<std::int32_t>(p);
    case PlyType::U32: return read_as<std::uint32_t>(p);
    case PlyType::F32: return read_as<float>(p);
    default: return read_as<double>(p);
    }
}

struct PlyProperty {
    std::string name;
    PlyType type;
    std::size_t offset;
};

} // namespace detail

/// Reads a splat PLY (binary little-endian or ascii). Quaternions are
/// normalized on read. A `comment frame triangle_local` header line marks a
/// triangle-local set; its per-splat `binding` property names the host face.
inline SplatSet read_splats(fs::path const& path)
{
    auto in = detail::open_in(path, true);
    std::string line;
    std::getline(in, line);
    if (line.rfind("ply", 0) != 0)
        throw IoError(path, "not a PLY file");
    bool binary = false, in_vertex = false, local = false;
    std::size_t count = 0, stride = 0;
    std::vector<detail::PlyProperty> props;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        std::istringstream ls(line);
        std::string kw;
        ls >> kw;
        if (kw == "format") {
            std::string f;
            ls >> f;
            if (f == "binary_little_endian")
                binary = true;
            else if (f != "ascii")
                throw IoError(path, "unsupported PLY format '" + f + "'");
        }
        else if (kw == "comment") {
            std::string a, b;
            ls >> a >> b;
            if (a == "frame" && b == "triangle_local")
                local = true;
        }
        else if (kw == "element") {
            std::string name;
            ls >> name;
            in_vertex = name == "vertex";
            if (in_vertex)
                ls >> count;
            else if (count == 0)
                throw IoError(path, "PLY element '" + name + "' before vertex is not supported");
        }
        else if (kw == "property" && in_vertex) {
            std::string type, name;
            ls >> type;
            if (type == "list")
                throw IoError(path, "list properties are not supported in the vertex element");
            ls >> name;
            auto const t = detail::ply_type(type, path);
            props.push_back({name, t, stride});
            stride += detail::ply_size(t);
        }
        else if (kw == "end_header")
            break;
    }
    std::map<std::string, std::size_t> col;
    for (std::size_t i = 0; i < props.size(); ++i)
        col[props[i].name] = i;
    for (char const* req : {"x", "y", "z"})
        if (!col.count(req))
            throw IoError(path, std::string("missing required property '") + req + "'");

    std::vector<double> values(props.size());
    std::vector<char> record(stride);
    auto get = [&](char const* name, double fallback) {
        auto it = col.find(name);
        return it == col.end() ? fallback : values[it->second];
    };

    SplatSet set;
    set.frame = local ? SplatFrame::TriangleLocal : SplatFrame::Global;
    set.splats.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
        if (binary) {
            if (!in.read(record.data(), std::streamsize(stride)))
                throw IoError(path, "truncated vertex data at splat " + std::to_string(i));
            for (std::size_t k = 0; k < props.size(); ++k)
                values[k] = detail::ply_value(props[k].type, record.data() + props[k].offset);
        }
        else {
            for (auto& v : values)
                if (!(in >> v))
                    throw IoError(path, "truncated vertex data at splat " + std::to_string(i));
        }
        GaussianSplat& s = set.splats[i];
        s.mu = Vec3(float(get("x", 0)), float(get("y", 0)), float(get("z", 0)));
        s.color = Vec3(float(0.5 + kShC0 * get("f_dc_0", 0)), float(0.5 + kShC0 * get("f_dc_1", 0)),
                       float(0.5 + kShC0 * get("f_dc_2", 0)));
        s.opacity = float(detail::sigmoid(get("opacity", 30)));
        s.scale = Vec3(float(std::exp(get("scale_0", std::log(0.01)))), float(std::exp(get("scale_1", std::log(0.01)))),
                       float(std::exp(get("scale_2", std::log(0.01)))));
        Quat q{float(get("rot_0", 1)), float(get("rot_1", 0)), float(get("rot_2", 0)), float(get("rot_3", 0))};
        if (!(q.norm() > 0))
            throw IoError(path, "zero quaternion at splat " + std::to_string(i));
        s.rot = q.normalized();
        if (col.count("seg_0") && col.count("seg_1"))
            s.feature = Vec2(float(get("seg_0", 0)), float(get("seg_1", 0)));
        if (col.count("binding")) {
            double const b = get("binding", -1);
            if (b >= 0)
                s.binding = std::uint32_t(b);
        }
    }
    if (!local)
        for (auto& s : set.splats)
            s.binding.reset();
    return set;
}

/// Binary little-endian PLY in the standard 3DGS property layout.
inline void write_splats(fs::path const& path, SplatSet const& set)
{
    bool const has_feature = !set.empty() && std::all_of(set.splats.begin(), set.splats.end(),
                                                           [](GaussianSplat const& s) { return s.feature.has_value(); });
    bool const local = set.frame == SplatFrame::TriangleLocal;
    std::ostringstream h;
    h << "ply\nformat binary_little_endian 1.0\n";
    if (local)
        h << "comment frame triangle_local\n";
    h << "element vertex " << set.size() << "\n";
    for (char const* n : {"x", "y", "z", "f_dc_0", "f_dc_1", "f_dc_2", "opacity", "scale_0", "scale_1", "scale_2",
                          "rot_0", "rot_1", "rot_2", "rot_3"})
        h << "property float " << n << "\n";
    if (has_feature)
        h << "property float seg_0\nproperty float seg_1\n";
    if (local)
        h << "property int binding\n";
    h << "end_header\n";

    std::size_t const nf = 14 + (has_feature ? 2 : 0);
    std::size_t const stride = nf * 4 + (local ? 4 : 0);
    std::string data(stride * set.size(), '\0');
    for (std::size_t i = 0; i < set.size(); ++i) {
        auto const& s = set.splats[i];
        float f[16] = {s.mu.x(),
                       s.mu.y(),
                       s.mu.z(),
                       float((s.color.x() - 0.5) / kShC0),
                       float((s.color.y() - 0.5) / kShC0),
                       float((s.color.z() - 0.5) / kShC0),
                       float(detail::logit(s.opacity)),
                       float(std::log(double(s.scale.x()))),
                       float(std::log(double(s.scale.y()))),
                       float(std::log(double(s.scale.z()))),
                       s.rot.w,
                       s.rot.x,
                       s.rot.y,
                       s.rot.z,
                       0.f,
                       0.f};
        if (has_feature) {
            f[14] = s.feature->x();
            f[15] = s.feature->y();
        }
        char* p = data.data() + i * stride;
        std::memcpy(p, f, nf * 4);
        if (local) {
            std::int32_t const b = s.binding ? std::int32_t(*s.binding) : -1;
            std::memcpy(p + nf * 4, &b, 4);
        }
    }
    auto out = detail::open_out(path, true);
    std::string const header = h.str();
    out.write(header.data(), std::streamsize(header.size()));
    out.write(data.data(), std::streamsize(data.size()));
    if (!out)
        throw IoError(path, "write failed");
}

// ---------------------------------------------------------------------------
// OBJ meshes (v/f only)

inline TriMesh read_obj(fs::path const& path)
{
    auto in = detail::open_in(path, false);
    TriMesh mesh;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::istringstream ls(line);
        std::string kw;
        ls >> kw;
        if (kw == "v") {
            float x, y, z;
            if (!(ls >> x >> y >> z))
                throw IoError(path, "bad vertex on line " + std::to_string(lineno));
            mesh.vertices.emplace_back(x, y, z);
        }
        else if (kw == "f") {
            std::vector<std::uint32_t> idx;
            std::string tok;
            while (ls >> tok) {
                long v = std::stol(tok.substr(0, tok.find('/')));
                if (v < 0)
                    v += long(mesh.vertices.size()) + 1;
                if (v < 1)
                    throw IoError(path, "bad face index on line " + std::to_string(lineno));
                idx.push_back(std::uint32_t(v - 1));
            }
            if (idx.size() < 3)
                throw IoError(path, "face with fewer than 3 vertices on line " + std::to_string(lineno));
            for (std::size_t k = 1; k + 1 < idx.size(); ++k)
                mesh.faces.push_back({idx[0], idx[k], idx[k + 1]});
        }
    }
    for (auto const& f : mesh.faces)
        for (auto v : f)
            if (v >= mesh.vertices.size())
                throw IoError(path, "face index out of range");
    return mesh;
}

inline void write_obj(fs::path const& path, TriMesh const& mesh)
{
    auto out = detail::open_out(path, false);
    out.precision(9);
    for (auto const& v : mesh.vertices)
        out << "v " << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
    for (auto const& f : mesh.faces)
        out << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
    if (!out)
        throw IoError(path, "write failed");
}

inline nlohmann::json read_json(fs::path const& path)
{
    auto in = detail::open_in(path, false);
    try {
        return nlohmann::json::parse(in);
    }
    catch (nlohmann::json::exception const& e) {
        throw IoError(path, std::string("invalid JSON: ") + e.what());
    }
}

inline void write_json(fs::path const& path, nlohmann::json const& j)
{
    auto out = detail::open_out(path, false);
    out << j.dump(1) << '\n';
    if (!out)
        throw IoError(path, "write failed");
}

inline fs::path sidecar_path(fs::path const& obj)
{
    fs::path p = obj;
    p.replace_extension(".json");
    return p;
}

/// Skinned mesh: OBJ plus sidecar JSON with joints, per-vertex weights
/// (a list of [joint_index, weight] pairs per vertex) and scalp faces.
inline SkinnedMesh read_skinned_mesh(fs::path const& obj, std::optional<fs::path> sidecar = {})
{
    TriMesh const m = read_obj(obj);
    SkinnedMesh mesh{m.vertices, m.faces, {}, {}, {}};
    fs::path const side = sidecar ? *sidecar : sidecar_path(obj);
    if (!fs::exists(side))
        return mesh;
    auto const j = read_json(side);
    try {
        if (j.contains("joints"))
            mesh.joints = j.at("joints").get<std::vector<std::string>>();
        if (j.contains("weights")) {
            for (auto const& vw : j.at("weights")) {
                std::vector<SkinWeight> ws;
                if (!vw.empty() && vw[0].is_number())
                    ws.push_back({vw.at(0).get<std::uint32_t>(), vw.at(1).get<float>()});
                else
                    for (auto const& p : vw)
                        ws.push_back({p.at(0).get<std::uint32_t>(), p.at(1).get<float>()});
                mesh.skin_weights.push_back(std::move(ws));
            }
        }
        if (j.contains("scalp_faces"))
            mesh.scalp_faces = j.at("scalp_faces").get<std::vector<std::uint32_t>>();
    }
    catch (nlohmann::json::exception const& e) {
        throw IoError(side, std::string("bad mesh sidecar: ") + e.what());
    }
    if (auto v = validate_mesh(mesh); !v.empty())
        throw IoError(side, v.front());
    return mesh;
}

inline void write_skinned_mesh(fs::path const& obj, SkinnedMesh const& mesh)
{
    write_obj(obj, {mesh.vertices, mesh.faces});
    nlohmann::json j;
    j["joints"] = mesh.joints;
    j["weights"] = nlohmann::json::array();
    for (auto const& vw : mesh.skin_weights) {
        auto arr = nlohmann::json::array();
        for (auto const& w : vw)
            arr.push_back({w.joint, w.weight});
        j["weights"].push_back(arr);
    }
    j["scalp_faces"] = mesh.scalp_faces;
    write_json(sidecar_path(obj), j);
}

/// Cage: OBJ plus sidecar JSON with inv_mass and root anchors.
inline Cage read_cage(fs::path const& obj, std::optional<fs::path> sidecar = {})
{
    Cage cage = Cage::from_mesh(read_obj(obj));
    fs::path const side = sidecar ? *sidecar : sidecar_path(obj);
    if (!fs::exists(side))
        return cage;
    auto const j = read_json(side);
    try {
        if (j.contains("inv_mass")) {
            cage.inv_mass = j.at("inv_mass").get<std::vector<float>>();
            if (cage.inv_mass.size() != cage.size())
                throw IoError(side, "inv_mass length does not match vertex count");
        }
        if (j.contains("root_anchor")) {
            auto const& ra = j.at("root_anchor");
            if (ra.size() != cage.size())
                throw IoError(side, "root_anchor length does not match vertex count");
            for (std::size_t i = 0; i < ra.size(); ++i) {
                if (ra[i].is_null())
                    continue;
                auto const b = ra[i].at("bary").get<std::vector<float>>();
                if (b.size() != 3)
                    throw IoError(side, "bary needs 3 values");
                cage.root_anchor[i] = RootAnchor{ra[i].at("face").get<std::uint32_t>(), Vec3(b[0], b[1], b[2])};
            }
        }
    }
    catch (nlohmann::json::exception const& e) {
        throw IoError(side, std::string("bad cage sidecar: ") + e.what());
    }
    for (std::size_t i = 0; i < cage.size(); ++i) {
        if (!(cage.inv_mass[i] >= 0))
            throw IoError(side, "negative inv_mass at vertex " + std::to_string(i));
        if (cage.inv_mass[i] == 0 && !cage.root_anchor[i])
            throw IoError(side, "kinematic vertex " + std::to_string(i) + " has no root_anchor");
    }
    return cage;
}

inline void write_cage(fs::path const& obj, Cage const& cage)
{
    write_obj(obj, cage.mesh());
    nlohmann::json j;
    j["inv_mass"] = cage.inv_mass;
    j["root_anchor"] = nlohmann::json::array();
    for (auto const& a : cage.root_anchor) {
        if (!a)
            j["root_anchor"].push_back(nullptr);
        else
            j["root_anchor"].push_back({{"face", a->face}, {"bary", {a->bary.x(), a->bary.y(), a->bary.z()}}});
    }
    write_json(sidecar_path(obj), j);
}

// ---------------------------------------------------------------------------
// Motion

inline std::vector<MotionFrame> parse_motion(nlohmann::json const& j, fs::path const& path = "<motion>")
{
    if (!j.is_array())
        throw IoError(path, "motion must be a JSON array");
    std::vector<MotionFrame> frames;
    for (std::size_t f = 0; f < j.size(); ++f) {
        auto const& fr = j[f];
        try {
            if (fr.contains("joints")) {
                JointTransforms jt;
                for (auto const& [name, m] : fr.at("joints").items()) {
                    auto const v = m.get<std::vector<float>>();
                    if (v.size() != 16)
                        throw IoError(path, "frame " + std::to_string(f) + " joint '" + name + "' needs 16 values");
                    Mat4 t;
                    for (int r = 0; r < 4; ++r)
                        for (int c = 0; c < 4; ++c)
                            t(r, c) = v[std::size_t(4 * r + c)];
                    jt.transforms[name] = t;
                }
                frames.emplace_back(std::move(jt));
            }
            else if (fr.contains("vertices")) {
                auto const v = fr.at("vertices").get<std::vector<float>>();
                if (v.size() % 3 != 0)
                    throw IoError(path, "frame " + std::to_string(f) + " vertex array length not divisible by 3");
                ExplicitVertices ev;
                for (std::size_t i = 0; i < v.size(); i += 3)
                    ev.vertices.emplace_back(v[i], v[i + 1], v[i + 2]);
                frames.emplace_back(std::move(ev));
            }
            else
                throw IoError(path, "frame " + std::to_string(f) + " has neither joints nor vertices");
        }
        catch (nlohmann::json::exception const& e) {
            throw IoError(path, "frame " + std::to_string(f) + ": " + e.what());
        }
        if (auto v = validate_motion(frames.back()); !v.empty())
            throw IoError(path, "frame " + std::to_string(f) + ": " + v.front());
    }
    return frames;
}

inline std::vector<MotionFrame> read_motion(fs::path const& path) { return parse_motion(read_json(path), path); }

inline nlohmann::json motion_to_json(std::vector<MotionFrame> const& frames)
{
    auto j = nlohmann::json::array();
    for (auto const& fr : frames) {
        nlohmann::json o;
        if (auto const* jt = std::get_if<JointTransforms>(&fr)) {
            o["joints"] = nlohmann::json::object();
            for (auto const& [name, t] : jt->transforms) {
                std::vector<float> v;
                for (int r = 0; r < 4; ++r)
                    for (int c = 0; c < 4; ++c)
                        v.push_back(t(r, c));
                o["joints"][name] = v;
            }
        }
        else {
            std::vector<float> v;
            for (auto const& p : std::get<ExplicitVertices>(fr).vertices)
                v.insert(v.end(), {p.x(), p.y(), p.z()});
            o["vertices"] = v;
        }
        j.push_back(o);
    }
    return j;
}

inline void write_motion(fs::path const& path, std::vector<MotionFrame> const& frames)
{
    write_json(path, motion_to_json(frames));
}

// ---------------------------------------------------------------------------
// Weight cache: "MVCW", u32 version, u64 N, u64 M, then N*7 rows of
// (u32 count, count * (u32 index, f32 weight)). Unbaked rows have count 0.

inline void write_weights(fs::path const& path, MvcWeights const& w)
{
    std::string buf;
    auto put = [&](auto v) {
        char b[sizeof(v)];
        std::memcpy(b, &v, sizeof(v));
        buf.append(b, sizeof(v));
    };
    buf.append("MVCW", 4);
    put(std::uint32_t(1));
    put(std::uint64_t(w.n_splats()));
    put(std::uint64_t(w.n_cage_verts()));
    for (std::size_t r = 0; r < w.n_rows(); ++r) {
        RowView const v = w.row(r);
        put(std::uint32_t(v.size()));
        for (std::size_t k = 0; k < v.size(); ++k) {
            put(std::uint32_t(v.kind == RowKind::Dense ? k : v.indices[k]));
            put(float(v.weights[k]));
        }
    }
    auto out = detail::open_out(path, true);
    out.write(buf.data(), std::streamsize(buf.size()));
    if (!out)
        throw IoError(path, "write failed");
}

inline MvcWeights read_weights(fs::path const& path)
{
    auto in = detail::open_in(path, true);
    std::string const buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    std::size_t pos = 0;
    auto get = [&](auto& v) {
        if (pos + sizeof(v) > buf.size())
            throw IoError(path, "truncated weight cache");
        std::memcpy(&v, buf.data() + pos, sizeof(v));
        pos += sizeof(v);
    };
    if (buf.compare(0, 4, "MVCW") != 0)
        throw IoError(path, "bad magic (expected MVCW)");
    pos = 4;
    std::uint32_t version;
    std::uint64_t N, M;
    get(version);
    if (version != 1)
        throw IoError(path, "unsupported weight cache version " + std::to_string(version));
    get(N);
    get(M);
    MvcWeights w(N, M);
    std::vector<std::uint32_t> idx;
    std::vector<float> val;
    for (std::size_t r = 0; r < N * kPointsPerSplat; ++r) {
        std::uint32_t count;
        get(count);
        if (count > M)
            throw IoError(path, "row " + std::to_string(r) + " has more entries than cage vertices");
        idx.resize(count);
        val.resize(count);
        bool dense = count == M;
        for (std::uint32_t k = 0; k < count; ++k) {
            get(idx[k]);
            get(val[k]);
            if (idx[k] >= M)
                throw IoError(path, "row " + std::to_string(r) + " index out of range");
            dense = dense && idx[k] == k;
        }
        if (count == 0)
            continue;
        if (dense)
            w.set_dense(r, val);
        else
            w.set_sparse(r, idx, val);
    }
    if (pos != buf.size())
        throw IoError(path, "trailing bytes in weight cache");
    return w;
}

// ---------------------------------------------------------------------------
// key=value solver config

inline void apply_config_value(SolverConfig& c, std::string const& key, std::string const& value)
{
    auto num = [&](std::string const& s) {
        std::size_t used = 0;
        double v = std::stod(s, &used);
        if (used != s.size())
            throw Error("config: bad number '" + s + "' for key '" + key + "'");
        return v;
    };
    if (key == "dt")
        c.dt = float(num(value));
    else if (key == "substeps")
        c.substeps = int(num(value));
    else if (key == "iterations")
        c.iterations = int(num(value));
    else if (key == "gravity") {
        std::string s = value;
        std::replace(s.begin(), s.end(), ',', ' ');
        std::istringstream ss(s);
        float x, y, z;
        if (!(ss >> x >> y >> z))
            throw Error("config: gravity needs three numbers");
        c.gravity = Vec3(x, y, z);
    }
    else if (key == "damping")
        c.damping = float(num(value));
    else if (key == "stretch_compliance")
        c.stretch_compliance = float(num(value));
    else if (key == "bend_compliance")
        c.bend_compliance = float(num(value));
    else if (key == "collision_margin")
        c.collision_margin = float(num(value));
    else if (key == "max_splats_warn")
        c.max_splats_warn = std::size_t(num(value));
    else if (key == "volume_constraint")
        c.volume_constraint = value == "1" || value == "true";
    else if (key == "volume_compliance")
        c.volume_compliance = float(num(value));
    else
        throw Error("config: unknown key '" + key + "'");
}

inline SolverConfig read_config(fs::path const& path, SolverConfig c = {})
{
    auto in = detail::open_in(path, false);
    std::string line;
    std::size_t lineno = 0;
    auto trim = [](std::string s) {
        auto const b = s.find_first_not_of(" \t\r");
        auto const e = s.find_last_not_of(" \t\r");
        return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    while (std::getline(in, line)) {
        ++lineno;
        line = trim(line.substr(0, line.find('#')));
        if (line.empty())
            continue;
        auto const eq = line.find('=');
        if (eq == std::string::npos)
            throw IoError(path, "line " + std::to_string(lineno) + ": expected key=value");
        try {
            apply_config_value(c, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
        }
        catch (std::exception const& e) {
            throw IoError(path, "line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    if (auto v = validate_config(c); !v.empty())
        throw IoError(path, v.front());
    return c;
}

inline void write_config(fs::path const& path, SolverConfig const& c)
{
    auto out = detail::open_out(path, false);
    out.precision(9);
    out << "dt=" << c.dt << "\nsubsteps=" << c.substeps << "\niterations=" << c.iterations << "\ngravity="
        << c.gravity.x() << "," << c.gravity.y() << "," << c.gravity.z() << "\ndamping=" << c.damping
        << "\nstretch_compliance=" << c.stretch_compliance << "\nbend_compliance=" << c.bend_compliance
        << "\ncollision_margin=" << c.collision_margin << "\nmax_splats_warn=" << c.max_splats_warn
        << "\nvolume_constraint=" << (c.volume_constraint ? "true" : "false")
        << "\nvolume_compliance=" << c.volume_compliance << "\n";
}

} // namespace hairsim
