#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "punit/bspline.hpp"
#include "punit/voxel_grid.hpp"

namespace punit {

// 6x6 elasticity matrix, Voigt order xx, yy, zz, yz, xz, xy, engineering shear.
using Mat6 = std::array<std::array<double, 6>, 6>;

struct BaseMaterial {
    double youngs = 1.0;
    double poisson = 0.3;

    void validate() const;
    Mat6 elasticity() const;
};

// Periodic homogenization of one cubic cell, one trilinear hexahedral element
// per voxel. Void voxels carry void_scale times the base elasticity so the
// cell matrix stays positive definite; the result is exactly symmetric.
Mat6 homogenize(const VoxelGrid& cell, const BaseMaterial& mat, double void_scale = 0.05);

// Normalized stiffness vs density: value(rho) = a1 * exp(a2 * rho) - a1,
// zero at rho = 0 by construction.
struct GibsonAshbyCurve {
    double a1 = 0.0;
    double a2 = 1.0;
    double residual = 0.0;
    bool degenerate = false;   // all responses were zero
    bool sign_flipped = false; // fitted on magnitudes, dominant sign reapplied

    double eval(double rho) const;
    double derivative(double rho) const;
};

struct CurveSample {
    double rho = 0.0;
    double value = 0.0;
};

// Least squares over a2 by golden-section search with the closed-form a1.
GibsonAshbyCurve gibson_ashby_fit(const std::vector<CurveSample>& samples);

// Per-entry stiffness curves measured on a threshold ladder of one unit.
struct DensityCurves {
    BaseMaterial material;
    std::array<std::array<GibsonAshbyCurve, 6>, 6> entry;
    std::vector<double> ladder;
    std::vector<Mat6> tensors; // homogenized tensor per ladder point, for audit
    int nonzero_entries = 0;   // upper-triangle entries with a measurable response

    Mat6 elasticity(double rho) const;
    Mat6 elasticity_derivative(double rho) const;
};

DensityCurves build_density_curves(const PeriodicBSpline& unit, const BaseMaterial& mat,
                                   const std::vector<double>& ladder, int voxel_res,
                                   double void_scale = 0.05);

std::string curves_to_json(const DensityCurves& curves);
DensityCurves curves_from_json(const std::string& text);
void save_curves_file(const DensityCurves& curves, const std::string& path);
DensityCurves load_curves_file(const std::string& path);

// Boundary conditions on the structured node grid (elems + 1 nodes per axis).
struct LoadCase {
    std::string name;
    std::function<bool(std::array<std::int64_t, 3>)> fixed;
    std::function<std::array<double, 3>(std::array<std::int64_t, 3>)> load;
};

LoadCase three_point_bending(std::array<int, 3> elems);
LoadCase compression(std::array<int, 3> elems);
LoadCase standard_case(const std::string& name, std::array<int, 3> elems);

struct FeSolution {
    std::vector<double> displacement; // 3 dofs per node, x fastest
    int cg_iterations = 0;
    double compliance = 0.0; // F . U
};

// Structured hexahedral grid with per-element elasticity; preconditioned
// conjugate gradients to the given relative residual.
FeSolution fe_solve(std::array<int, 3> elems, std::array<double, 3> cell_size,
                    const std::vector<Mat6>& element_elasticity, const LoadCase& bc,
                    double cg_tol = 1e-8);

struct TopOptConfig {
    std::array<int, 3> elems = {24, 8, 8};
    std::array<int, 3> n = {12, 4, 4}; // density spline control counts
    std::array<int, 3> p = {2, 2, 2};  // density spline degrees
    double volfrac = 0.4;
    double rho_min = 0.05;
    double rho_max = 0.95;
    double move = 0.2;
    double damping = 0.5;
    int max_iters = 60;
    double tol = 0.01; // max coefficient change for convergence
    double cg_tol = 1e-8;
    std::string bc = "three-point-bending";

    void validate() const;
};

struct ComplianceEval {
    double compliance = 0.0;
    std::vector<double> gradient; // d compliance / d coefficient
};

// Compliance of the density field given by coeffs (size n[0]*n[1]*n[2],
// x fastest) on the configured grid and load case.
ComplianceEval evaluate_compliance(const TopOptConfig& cfg, const DensityCurves& curves,
                                   const std::vector<double>& coeffs, bool with_gradient);

// Exact integral of the spline over the unit cube.
double spline_volume(const PeriodicBSpline& density);

struct TopOptResult {
    PeriodicBSpline density;
    std::vector<double> compliance_trace; // one entry per evaluated iterate
    std::vector<double> volume_trace;
    int iterations = 0;
    bool converged = false;
    int trace_violations = 0; // iterations where compliance rose by more than 1%
};

// Optimality-criteria minimum compliance over the density spline coefficients,
// volume constrained to volfrac exactly via bisection.
TopOptResult topopt(const TopOptConfig& cfg, const DensityCurves& curves);

} // namespace punit
