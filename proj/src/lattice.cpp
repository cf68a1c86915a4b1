#include "punit/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <unordered_map>

#include "punit/errors.hpp"
#include "punit/io_util.hpp"
#include "punit/parallel.hpp"

namespace punit {

double psi(int cells, double u) {
    double t = u * cells;
    return t - std::floor(t);
}

void LatticeSpec::validate() const {
    for (int a = 0; a < 3; ++a)
        if (cells[a] < 1) throw validation_error("lattice: cell counts must be >= 1");
    unit.validate();
    if (threshold_field) threshold_field->validate();
}

double LatticeSpec::threshold_at(double u, double v, double w) const {
    return threshold_field ? threshold_field->eval(u, v, w) : threshold;
}

double eval_structure(const LatticeSpec& spec, double u, double v, double w) {
    if (!(u >= 0.0 && u <= 1.0 && v >= 0.0 && v <= 1.0 && w >= 0.0 && w <= 1.0))
        throw validation_error("lattice: evaluation point outside the unit cube");
    return spec.unit.eval(psi(spec.cells[0], u), psi(spec.cells[1], v), psi(spec.cells[2], w));
}

bool structure_solid(const LatticeSpec& spec, double u, double v, double w) {
    return eval_structure(spec, u, v, w) <= spec.threshold_at(u, v, w);
}

double relative_density(const PeriodicBSpline& phi, double c, int resolution) {
    if (resolution < 32) throw validation_error("density: resolution must be >= 32");
    auto samples = sample_spline(phi, {resolution, resolution, resolution});
    std::int64_t solid = 0;
    for (double v : samples.data())
        if (v <= c) ++solid;
    return double(solid) / double(samples.size());
}

namespace {

// Smallest sampled value whose empirical cumulative fraction reaches rho.
double quantile_sorted(const std::vector<double>& sorted, double rho) {
    const std::int64_t n = static_cast<std::int64_t>(sorted.size());
    std::int64_t k = static_cast<std::int64_t>(std::ceil(rho * double(n)));
    k = std::clamp<std::int64_t>(k, 1, n);
    return sorted[k - 1];
}

} // namespace

double threshold_for_density(const PeriodicBSpline& phi, double rho, int resolution) {
    if (!(rho > 0.0 && rho < 1.0))
        throw validation_error("density: target must lie strictly between 0 and 1");
    if (resolution < 32) throw validation_error("density: resolution must be >= 32");
    auto samples = sample_spline(phi, {resolution, resolution, resolution});
    std::vector<double> sorted = samples.data();
    std::sort(sorted.begin(), sorted.end());
    return quantile_sorted(sorted, rho);
}

ThresholdFieldResult threshold_field_from_density(const PeriodicBSpline& phi,
                                                  const PeriodicBSpline& density_field,
                                                  std::array<int, 3> cells,
                                                  const FitConfig& cfg, int resolution) {
    for (int a = 0; a < 3; ++a)
        if (cells[a] < 1) throw validation_error("lattice: cell counts must be >= 1");
    if (resolution < 32) throw validation_error("density: resolution must be >= 32");
    phi.validate();
    density_field.validate();

    auto samples = sample_spline(phi, {resolution, resolution, resolution});
    std::vector<double> sorted = samples.data();
    std::sort(sorted.begin(), sorted.end());
    const double lo = 1.0 / double(sorted.size());
    const double hi = 1.0 - lo;

    ThresholdFieldResult out;
    const std::int64_t ncells = std::int64_t(cells[0]) * cells[1] * cells[2];
    std::vector<std::array<double, 3>> points(ncells);
    std::vector<double> values(ncells);
    for (std::int64_t t = 0; t < ncells; ++t) {
        const std::int64_t ei = t % cells[0];
        const std::int64_t ej = (t / cells[0]) % cells[1];
        const std::int64_t ek = t / (std::int64_t(cells[0]) * cells[1]);

        // Cell-average density target from a 2x2x2 midpoint probe.
        double target = 0.0;
        for (int s = 0; s < 8; ++s) {
            double u = (double(ei) + (0.25 + 0.5 * (s & 1))) / cells[0];
            double v = (double(ej) + (0.25 + 0.5 * ((s >> 1) & 1))) / cells[1];
            double w = (double(ek) + (0.25 + 0.5 * ((s >> 2) & 1))) / cells[2];
            target += density_field.eval(u, v, w);
        }
        target /= 8.0;
        if (target < lo || target > hi) {
            target = std::clamp(target, lo, hi);
            ++out.clamped_cells;
        }

        points[t] = {(double(ei) + 0.5) / cells[0], (double(ej) + 0.5) / cells[1],
                     (double(ek) + 0.5) / cells[2]};
        values[t] = quantile_sorted(sorted, target);
    }

    FitConfig fit_cfg = cfg;
    fit_cfg.r = {0, 0, 0}; // the threshold field carries no mirror constraint
    auto fitted = con_lspia(points, values, fit_cfg);
    out.field = std::move(fitted.spline);
    out.fit = std::move(fitted.report);
    return out;
}

namespace {

#include "mc_tables.inl"

constexpr int kCorner[8][3] = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0},
                               {0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1}};
constexpr int kEdgeEnds[12][2] = {{0, 1}, {1, 2}, {2, 3}, {3, 0}, {4, 5}, {5, 6},
                                  {6, 7}, {7, 4}, {0, 4}, {1, 5}, {2, 6}, {3, 7}};

struct PosKey {
    std::uint64_t x, y, z;
    bool operator==(const PosKey&) const = default;
};

struct PosKeyHash {
    std::size_t operator()(const PosKey& k) const {
        std::uint64_t h = k.x * 0x9e3779b97f4a7c15ull;
        h ^= k.y + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
        h ^= k.z + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
        return static_cast<std::size_t>(h);
    }
};

PosKey pos_key(const std::array<double, 3>& p) {
    PosKey k;
    std::memcpy(&k.x, &p[0], 8);
    std::memcpy(&k.y, &p[1], 8);
    std::memcpy(&k.z, &p[2], 8);
    return k;
}

} // namespace

TriMesh marching_cubes(const FieldFn& field, double iso, int resolution) {
    if (resolution < 8) throw validation_error("marching_cubes: resolution must be >= 8");
    const std::int64_t n = resolution;
    const std::int64_t nodes = n + 1;

    // Node samples of field - iso; solid where the value is <= 0.
    std::vector<double> w(nodes * nodes * nodes);
    par::parallel_chunks(static_cast<std::int64_t>(w.size()), 4096,
                         [&](std::int64_t b, std::int64_t e, int) {
                             for (std::int64_t t = b; t < e; ++t) {
                                 std::int64_t i = t % nodes;
                                 std::int64_t j = (t / nodes) % nodes;
                                 std::int64_t k = t / (nodes * nodes);
                                 w[t] = field(double(i) / double(n), double(j) / double(n),
                                              double(k) / double(n)) -
                                        iso;
                             }
                         });

    double max_abs = 0.0;
    for (double v : w) {
        if (!std::isfinite(v)) throw numeric_error("marching_cubes: non-finite field value");
        max_abs = std::max(max_abs, std::abs(v));
    }
    // Values within a hair of the level set are pushed to a minimum
    // magnitude (zeros count as solid). Crossings then sit strictly inside
    // grid edges, and surface slivers where the solid pinches to measure
    // zero keep enough width to stay valid triangles instead of exactly
    // degenerate ones that would leave holes when skipped.
    const double tiny = 1e-9 * std::max(1.0, max_abs);
    for (double& v : w) {
        if (v == 0.0)
            v = -tiny;
        else if (v > 0.0 && v < tiny)
            v = tiny;
        else if (v < 0.0 && v > -tiny)
            v = -tiny;
    }
    const double outside = 2.0 * std::max(1.0, max_abs) + 1.0; // virtual void layer

    auto value_at = [&](std::int64_t i, std::int64_t j, std::int64_t k) -> double {
        if (i < 0 || i > n || j < 0 || j > n || k < 0 || k > n) return outside;
        return w[i + nodes * (j + nodes * k)];
    };
    auto coord = [&](std::int64_t i) { return double(std::clamp<std::int64_t>(i, 0, n)) / double(n); };
    const std::int64_t padded = n + 3; // node ids shifted by 1 for the virtual layer
    auto node_id = [&](std::int64_t i, std::int64_t j, std::int64_t k) {
        return (i + 1) + padded * ((j + 1) + padded * (k + 1));
    };

    TriMesh mesh;
    std::unordered_map<std::int64_t, std::int64_t> edge_vertex;
    std::unordered_map<PosKey, std::int64_t, PosKeyHash> pos_vertex;
    const std::int64_t node_total = padded * padded * padded;

    double corner_val[8];
    std::int64_t corner_node[8][3];
    for (std::int64_t ck = -1; ck <= n; ++ck)
        for (std::int64_t cj = -1; cj <= n; ++cj)
            for (std::int64_t ci = -1; ci <= n; ++ci) {
                int mask = 0;
                for (int c = 0; c < 8; ++c) {
                    corner_node[c][0] = ci + kCorner[c][0];
                    corner_node[c][1] = cj + kCorner[c][1];
                    corner_node[c][2] = ck + kCorner[c][2];
                    corner_val[c] = value_at(corner_node[c][0], corner_node[c][1],
                                             corner_node[c][2]);
                    if (corner_val[c] <= 0.0) mask |= 1 << c;
                }
                if (kEdgeMask[mask] == 0) continue;

                auto vertex_on_edge = [&](int e) -> std::int64_t {
                    const int a = kEdgeEnds[e][0], b = kEdgeEnds[e][1];
                    const std::int64_t ida =
                        node_id(corner_node[a][0], corner_node[a][1], corner_node[a][2]);
                    const std::int64_t idb =
                        node_id(corner_node[b][0], corner_node[b][1], corner_node[b][2]);
                    const std::int64_t key =
                        std::min(ida, idb) * node_total + std::max(ida, idb);
                    auto it = edge_vertex.find(key);
                    if (it != edge_vertex.end()) return it->second;

                    const double va = corner_val[a], vb = corner_val[b];
                    const double t = va / (va - vb);
                    std::array<double, 3> p;
                    for (int d = 0; d < 3; ++d) {
                        double pa = coord(corner_node[a][d]);
                        double pb = coord(corner_node[b][d]);
                        p[d] = pa + t * (pb - pa);
                    }
                    // Boundary caps pin several grid edges to one point;
                    // welding by position keeps the surface closed there.
                    auto [pit, fresh] =
                        pos_vertex.try_emplace(pos_key(p), std::int64_t(mesh.vertices.size()));
                    if (fresh) mesh.vertices.push_back(p);
                    edge_vertex.emplace(key, pit->second);
                    return pit->second;
                };

                for (const std::int8_t* tr = kTriangles[mask]; *tr >= 0; tr += 3) {
                    std::int64_t v0 = vertex_on_edge(tr[0]);
                    std::int64_t v1 = vertex_on_edge(tr[1]);
                    std::int64_t v2 = vertex_on_edge(tr[2]);
                    if (v0 == v1 || v1 == v2 || v0 == v2) continue;
                    const auto &a = mesh.vertices[v0], &b = mesh.vertices[v1],
                               &c = mesh.vertices[v2];
                    const double ux = b[0] - a[0], uy = b[1] - a[1], uz = b[2] - a[2];
                    const double vx = c[0] - a[0], vy = c[1] - a[1], vz = c[2] - a[2];
                    const double nx = uy * vz - uz * vy;
                    const double ny = uz * vx - ux * vz;
                    const double nz = ux * vy - uy * vx;
                    if (nx == 0.0 && ny == 0.0 && nz == 0.0) continue;
                    mesh.triangles.push_back({v0, v1, v2});
                }
            }
    return mesh;
}

TriMesh mesh_structure(const LatticeSpec& spec, int resolution) {
    spec.validate();
    return marching_cubes(
        [&](double u, double v, double w) {
            return eval_structure(spec, u, v, w) - spec.threshold_at(u, v, w);
        },
        0.0, resolution);
}

void scale_mesh(TriMesh& mesh, std::array<double, 3> size_mm) {
    for (int d = 0; d < 3; ++d)
        if (!(size_mm[d] > 0.0)) throw validation_error("mesh: physical size must be positive");
    for (auto& v : mesh.vertices)
        for (int d = 0; d < 3; ++d) v[d] *= size_mm[d];
}

namespace {

std::array<double, 3> facet_normal(const TriMesh& mesh, std::int64_t t) {
    const auto& a = mesh.vertices[mesh.triangles[t][0]];
    const auto& b = mesh.vertices[mesh.triangles[t][1]];
    const auto& c = mesh.vertices[mesh.triangles[t][2]];
    const double ux = b[0] - a[0], uy = b[1] - a[1], uz = b[2] - a[2];
    const double vx = c[0] - a[0], vy = c[1] - a[1], vz = c[2] - a[2];
    std::array<double, 3> n = {uy * vz - uz * vy, uz * vx - ux * vz, ux * vy - uy * vx};
    const double len = std::sqrt(n[0] * n[0] + n[1] * n[1] + n[2] * n[2]);
    for (double& x : n) x /= len;
    return n;
}

void append_f32(std::vector<std::uint8_t>& out, double v) {
    float f = static_cast<float>(v);
    std::uint32_t bits;
    std::memcpy(&bits, &f, 4);
    for (int b = 0; b < 4; ++b) out.push_back(std::uint8_t(bits >> (8 * b)));
}

} // namespace

std::vector<std::uint8_t> export_stl(const TriMesh& mesh) {
    if (mesh.triangles.empty()) throw validation_error("export: empty mesh");
    std::vector<std::uint8_t> out;
    out.reserve(84 + 50 * mesh.triangles.size());
    const char header[] = "binary stl mesh";
    out.resize(80, 0);
    std::memcpy(out.data(), header, sizeof(header) - 1);
    const std::uint32_t count = static_cast<std::uint32_t>(mesh.triangles.size());
    for (int b = 0; b < 4; ++b) out.push_back(std::uint8_t(count >> (8 * b)));
    for (std::int64_t t = 0; t < std::int64_t(mesh.triangles.size()); ++t) {
        auto nrm = facet_normal(mesh, t);
        for (double x : nrm) append_f32(out, x);
        for (int v = 0; v < 3; ++v)
            for (int d = 0; d < 3; ++d) append_f32(out, mesh.vertices[mesh.triangles[t][v]][d]);
        out.push_back(0);
        out.push_back(0);
    }
    return out;
}

std::string export_obj(const TriMesh& mesh) {
    if (mesh.triangles.empty()) throw validation_error("export: empty mesh");
    std::string out;
    char line[128];
    for (const auto& v : mesh.vertices) {
        std::snprintf(line, sizeof(line), "v %.9g %.9g %.9g\n", v[0], v[1], v[2]);
        out += line;
    }
    for (const auto& t : mesh.triangles) {
        std::snprintf(line, sizeof(line), "f %lld %lld %lld\n", (long long)(t[0] + 1),
                      (long long)(t[1] + 1), (long long)(t[2] + 1));
        out += line;
    }
    return out;
}

void save_mesh_file(const TriMesh& mesh, const std::string& path) {
    auto dot = path.rfind('.');
    std::string ext = dot == std::string::npos ? "" : path.substr(dot);
    for (char& c : ext) c = char(std::tolower(static_cast<unsigned char>(c)));
    if (ext == ".stl")
        write_file_atomic(path, export_stl(mesh));
    else if (ext == ".obj")
        write_file_atomic(path, export_obj(mesh));
    else
        throw validation_error("mesh: unknown output extension, expected .stl or .obj");
}

} // namespace punit
