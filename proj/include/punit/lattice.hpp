#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "punit/bspline.hpp"
#include "punit/fit.hpp"

namespace punit {

// Wrap transform: fractional part of u * cells, so [0,1] covers `cells`
// copies of the unit domain. psi(cells, 1) folds to 0.
double psi(int cells, double u);

// A porous structure: one unit tiled cells[a] times per axis, solid where
// the wrapped field value is at or below the threshold. A threshold field,
// when present, replaces the constant.
struct LatticeSpec {
    std::array<int, 3> cells = {1, 1, 1};
    PeriodicBSpline unit;
    double threshold = 0.0;
    std::optional<PeriodicBSpline> threshold_field;

    void validate() const;
    double threshold_at(double u, double v, double w) const;
};

// Wrapped field value at a point of the tiled domain [0,1]^3.
double eval_structure(const LatticeSpec& spec, double u, double v, double w);

// Solid test: eval_structure <= threshold_at.
bool structure_solid(const LatticeSpec& spec, double u, double v, double w);

// Fraction of resolution^3 cell-center samples with phi <= c.
double relative_density(const PeriodicBSpline& phi, double c, int resolution);

// Empirical rho-quantile of the sampled field: the smallest sampled value c
// with relative_density(phi, c) >= rho.
double threshold_for_density(const PeriodicBSpline& phi, double rho, int resolution);

struct ThresholdFieldResult {
    PeriodicBSpline field;
    int clamped_cells = 0; // cells whose density target left the open unit interval
    FitReport fit;
};

// Per-cell quantile inversion against the unit's sample distribution, then a
// smooth unconstrained fit through the cell-center thresholds.
ThresholdFieldResult threshold_field_from_density(const PeriodicBSpline& phi,
                                                  const PeriodicBSpline& density_field,
                                                  std::array<int, 3> cells,
                                                  const FitConfig& cfg, int resolution);

struct TriMesh {
    std::vector<std::array<double, 3>> vertices;
    std::vector<std::array<std::int64_t, 3>> triangles;
    std::vector<std::array<double, 3>> normals; // optional, per vertex
};

using FieldFn = std::function<double(double, double, double)>;

// 256-case marching cubes over resolution^3 cells of [0,1]^3, solid where
// field <= iso, linear edge interpolation, vertices shared through grid-edge
// keys. A virtual void layer outside the domain caps solid regions touching
// the boundary, so the result is closed.
TriMesh marching_cubes(const FieldFn& field, double iso, int resolution);

// Mesh of the spliced structure's solid boundary.
TriMesh mesh_structure(const LatticeSpec& spec, int resolution);

// Scales [0,1]^3 mesh coordinates into a physical box (millimetres).
void scale_mesh(TriMesh& mesh, std::array<double, 3> size_mm);

// Binary STL: 80-byte header, u32 triangle count, 50 bytes per triangle.
std::vector<std::uint8_t> export_stl(const TriMesh& mesh);

// ASCII OBJ with 1-based face indices.
std::string export_obj(const TriMesh& mesh);

// Picks the format from the extension (.stl binary, .obj text).
void save_mesh_file(const TriMesh& mesh, const std::string& path);

} // namespace punit
