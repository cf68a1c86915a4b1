#include "punit/voxel_grid.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include "punit/errors.hpp"
#include "punit/io_util.hpp"
#include <nlohmann/json.hpp>

namespace punit {

VoxelGrid::VoxelGrid(std::array<std::int64_t, 3> dims, std::uint8_t fill) : dims_(dims) {
    for (auto d : dims)
        if (d < 1) throw validation_error("voxel grid dimension must be >= 1");
    // Guard nx*ny*nz against overflow before allocating.
    const std::int64_t limit = std::numeric_limits<std::int64_t>::max();
    if (dims[0] > limit / dims[1] || dims[0] * dims[1] > limit / dims[2])
        throw validation_error("voxel grid size overflows");
    data_.assign(dims[0] * dims[1] * dims[2], fill ? 1 : 0);
}

std::int64_t VoxelGrid::solid_count() const {
    std::int64_t n = 0;
    for (auto v : data_) n += v;
    return n;
}

VoxelGrid boolean(const VoxelGrid& a, const VoxelGrid& b, BoolOp op) {
    if (a.dims() != b.dims()) throw validation_error("boolean: grid dimensions differ");
    VoxelGrid out(a.dims(), 0);
    const auto& da = a.data();
    const auto& db = b.data();
    auto& dst = out.data();
    const std::int64_t n = a.size();
    switch (op) {
        case BoolOp::unite:
            for (std::int64_t i = 0; i < n; ++i) dst[i] = da[i] | db[i];
            break;
        case BoolOp::intersect:
            for (std::int64_t i = 0; i < n; ++i) dst[i] = da[i] & db[i];
            break;
        case BoolOp::subtract:
            for (std::int64_t i = 0; i < n; ++i) dst[i] = da[i] & static_cast<std::uint8_t>(!db[i]);
            break;
    }
    return out;
}

Primitive Primitive::box(std::array<double, 3> lo, std::array<double, 3> hi) {
    Primitive p;
    p.kind = Kind::box;
    p.lo = lo;
    p.hi = hi;
    p.validate();
    return p;
}

Primitive Primitive::bar(int axis, double c1, double c2, double radius) {
    Primitive p;
    p.kind = Kind::bar;
    p.axis = axis;
    p.lo = {c1, c2, 0};
    p.radius = radius;
    p.validate();
    return p;
}

Primitive Primitive::sphere(std::array<double, 3> center, double radius) {
    Primitive p;
    p.kind = Kind::sphere;
    p.lo = center;
    p.radius = radius;
    p.validate();
    return p;
}

void Primitive::validate() const {
    auto in01 = [](double v) { return v >= 0.0 && v <= 1.0; };
    switch (kind) {
        case Kind::box:
            for (int a = 0; a < 3; ++a) {
                if (!in01(lo[a]) || !in01(hi[a])) throw validation_error("box corner outside [0,1]");
                if (hi[a] <= lo[a]) throw validation_error("box extent must be positive");
            }
            break;
        case Kind::bar:
            if (axis < 0 || axis > 2) throw validation_error("bar axis must be 0, 1 or 2");
            if (!in01(lo[0]) || !in01(lo[1])) throw validation_error("bar center outside [0,1]");
            if (radius <= 0) throw validation_error("bar radius must be positive");
            break;
        case Kind::sphere:
            for (int a = 0; a < 3; ++a)
                if (!in01(lo[a])) throw validation_error("sphere center outside [0,1]");
            if (radius <= 0) throw validation_error("sphere radius must be positive");
            break;
    }
}

bool Primitive::contains(double x, double y, double z) const {
    switch (kind) {
        case Kind::box:
            return x >= lo[0] && x <= hi[0] && y >= lo[1] && y <= hi[1] && z >= lo[2] && z <= hi[2];
        case Kind::bar: {
            // Circular cross-section running the full length of `axis`.
            double a, b;
            if (axis == 0) { a = y; b = z; }
            else if (axis == 1) { a = x; b = z; }
            else { a = x; b = y; }
            double du = a - lo[0], dv = b - lo[1];
            return du * du + dv * dv <= radius * radius;
        }
        case Kind::sphere: {
            double dx = x - lo[0], dy = y - lo[1], dz = z - lo[2];
            return dx * dx + dy * dy + dz * dz <= radius * radius;
        }
    }
    return false;
}

VoxelGrid rasterize(const Primitive& p, std::array<std::int64_t, 3> dims) {
    p.validate();
    VoxelGrid g(dims, 0);
    for (std::int64_t k = 0; k < dims[2]; ++k) {
        double z = (k + 0.5) / dims[2];
        for (std::int64_t j = 0; j < dims[1]; ++j) {
            double y = (j + 0.5) / dims[1];
            for (std::int64_t i = 0; i < dims[0]; ++i) {
                double x = (i + 0.5) / dims[0];
                if (p.contains(x, y, z)) g.set(i, j, k, 1);
            }
        }
    }
    return g;
}

VoxelGrid run_csg(const std::vector<CsgStep>& steps, std::array<std::int64_t, 3> dims) {
    VoxelGrid acc(dims, 0);
    for (const auto& step : steps)
        acc = boolean(acc, rasterize(step.primitive, dims), step.op);
    return acc;
}

std::vector<CsgStep> parse_csg_script(const std::string& json_text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        throw validation_error(std::string("CSG script is not valid JSON: ") + e.what());
    }
    if (!doc.is_array()) throw validation_error("CSG script must be a JSON array");

    std::vector<CsgStep> steps;
    try {
    for (const auto& entry : doc) {
        CsgStep step;
        std::string op = entry.value("op", "union");
        if (op == "union") step.op = BoolOp::unite;
        else if (op == "intersect") step.op = BoolOp::intersect;
        else if (op == "subtract") step.op = BoolOp::subtract;
        else throw validation_error("unknown CSG op: " + op);

        if (!entry.contains("primitive")) throw validation_error("CSG entry missing primitive");
        const auto& pr = entry["primitive"];
        std::string kind = pr.value("kind", "");
        auto vec3 = [&](const char* key) -> std::array<double, 3> {
            auto v = pr.at(key);
            return {v.at(0).get<double>(), v.at(1).get<double>(), v.at(2).get<double>()};
        };
        if (kind == "box") {
            step.primitive = Primitive::box(vec3("lo"), vec3("hi"));
        } else if (kind == "bar") {
            step.primitive = Primitive::bar(pr.at("axis").get<int>(),
                                            pr.at("center").at(0).get<double>(),
                                            pr.at("center").at(1).get<double>(),
                                            pr.at("radius").get<double>());
        } else if (kind == "sphere") {
            step.primitive = Primitive::sphere(vec3("center"), pr.at("radius").get<double>());
        } else {
            throw validation_error("unknown primitive kind: " + kind);
        }
        steps.push_back(step);
    }
    } catch (const nlohmann::json::exception& e) {
        throw validation_error(std::string("bad CSG entry: ") + e.what());
    }
    return steps;
}

namespace {

constexpr std::array<std::uint8_t, 8> kVgridMagic = {'V', 'G', 'R', 'I', 'D', 0, 0, 1};

void push_u32_le(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(v & 0xff);
    out.push_back((v >> 8) & 0xff);
    out.push_back((v >> 16) & 0xff);
    out.push_back((v >> 24) & 0xff);
}

std::uint32_t read_u32_le(const std::uint8_t* p) {
    return std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) | (std::uint32_t(p[2]) << 16) |
           (std::uint32_t(p[3]) << 24);
}

} // namespace

std::vector<std::uint8_t> write_vgrid(const VoxelGrid& g) {
    std::vector<std::uint8_t> out(kVgridMagic.begin(), kVgridMagic.end());
    push_u32_le(out, static_cast<std::uint32_t>(g.nx()));
    push_u32_le(out, static_cast<std::uint32_t>(g.ny()));
    push_u32_le(out, static_cast<std::uint32_t>(g.nz()));
    const std::int64_t n = g.size();
    const std::int64_t nbytes = (n + 7) / 8;
    std::size_t base = out.size();
    out.resize(base + nbytes, 0);
    const auto& data = g.data();
    for (std::int64_t i = 0; i < n; ++i)
        if (data[i]) out[base + (i >> 3)] |= std::uint8_t(1u << (i & 7));
    return out;
}

VoxelGrid read_vgrid(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < 20 || !std::equal(kVgridMagic.begin(), kVgridMagic.end(), bytes.begin()))
        throw io_error(".vgrid: bad magic");
    std::array<std::int64_t, 3> dims = {read_u32_le(&bytes[8]), read_u32_le(&bytes[12]),
                                        read_u32_le(&bytes[16])};
    for (auto d : dims)
        if (d < 1) throw io_error(".vgrid: zero dimension");
    const std::int64_t n = dims[0] * dims[1] * dims[2];
    const std::int64_t nbytes = (n + 7) / 8;
    if (static_cast<std::int64_t>(bytes.size()) != 20 + nbytes)
        throw io_error(".vgrid: payload size mismatch (truncated or trailing bytes)");
    VoxelGrid g(dims, 0);
    auto& data = g.data();
    for (std::int64_t i = 0; i < n; ++i)
        data[i] = (bytes[20 + (i >> 3)] >> (i & 7)) & 1;
    return g;
}

std::string write_vgrid_text(const VoxelGrid& g) {
    std::ostringstream os;
    os << g.nx() << ' ' << g.ny() << ' ' << g.nz() << '\n';
    const auto& data = g.data();
    const std::int64_t n = g.size();
    for (std::int64_t i = 0; i < n; ++i) {
        os << int(data[i]);
        os << (((i + 1) % g.nx() == 0) ? '\n' : ' ');
    }
    return os.str();
}

VoxelGrid read_vgrid_text(const std::string& text) {
    std::istringstream is(text);
    std::int64_t nx, ny, nz;
    if (!(is >> nx >> ny >> nz)) throw io_error("voxel text: missing dimensions");
    if (nx < 1 || ny < 1 || nz < 1) throw io_error("voxel text: bad dimensions");
    VoxelGrid g({nx, ny, nz}, 0);
    auto& data = g.data();
    for (std::int64_t i = 0; i < g.size(); ++i) {
        int v;
        if (!(is >> v)) throw io_error("voxel text: truncated payload");
        if (v != 0 && v != 1) throw io_error("voxel text: values must be 0 or 1");
        data[i] = static_cast<std::uint8_t>(v);
    }
    return g;
}

void save_voxel_file(const VoxelGrid& g, const std::string& path) {
    if (path.size() > 4 && path.substr(path.size() - 4) == ".txt")
        write_file_atomic(path, write_vgrid_text(g));
    else
        write_file_atomic(path, write_vgrid(g));
}

VoxelGrid load_voxel_file(const std::string& path) {
    auto bytes = read_file_bytes(path);
    if (bytes.size() >= 8 && std::equal(kVgridMagic.begin(), kVgridMagic.end(), bytes.begin()))
        return read_vgrid(bytes);
    return read_vgrid_text(std::string(bytes.begin(), bytes.end()));
}

} // namespace punit
