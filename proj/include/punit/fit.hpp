#pragma once

#include <array>
#include <vector>

#include "punit/bspline.hpp"
#include "punit/scalar_grid.hpp"

namespace punit {

struct FitConfig {
    std::array<int, 3> n = {6, 6, 6}; // control coefficients per axis
    std::array<int, 3> p = {3, 3, 3}; // degrees
    std::array<int, 3> r = {0, 0, 0}; // symmetric degrees
    int max_iters = 2000;
    double tol = 1e-8;            // stop when max |coefficient update| < tol
    double init_value = 0.0;      // starting value for all reduced coefficients
    std::vector<double> init_reduced; // optional explicit start, size l_u*l_v*l_w
    // Conjugate search along the same scaled-residual directions. Shares the
    // fixed point, freeze rule, and iterate subspace of the plain update but
    // converges in far fewer rounds on poorly conditioned fits.
    bool accelerate = false;
};

struct FitReport {
    int iterations = 0;
    double final_mse = 0.0;
    std::vector<double> mse_trace; // MSE entering each iteration
    bool converged = false;
    int frozen_updates = 0; // coefficient updates skipped on tiny denominators
};

struct FitResult {
    PeriodicBSpline spline;
    FitReport report;
};

// Progressive-iterative least-squares fit under mirror constraints: each
// round distributes residuals onto the n_a - r_a free coefficients through
// the merged bases, then re-expands the mirrored array, so every iterate is
// symmetric bit for bit. The fixed point satisfies the constrained normal
// equations of the merged-basis collocation matrix.
FitResult con_lspia(const std::vector<std::array<double, 3>>& points,
                    const std::vector<double>& values, const FitConfig& cfg);

// Grid overload: data value at cell (i,j,k) sits at parameter
// ((i+0.5)/nx, (j+0.5)/ny, (k+0.5)/nz).
FitResult con_lspia(const ScalarGrid& data, const FitConfig& cfg);

// Mean squared error of the spline against grid data at cell centers.
double mse(const PeriodicBSpline& s, const ScalarGrid& data);

} // namespace punit
