#pragma once

#include <cstdint>
#include <vector>

#include "punit/bspline.hpp"
#include "punit/scalar_grid.hpp"

namespace punit {

// Connected component of sublevel sets {f <= t}: born at its minimum,
// dying where it merges into an older component. The essential component
// never dies (death = +inf, merge_vertex = -1).
struct PersistencePair {
    double birth = 0.0;
    double death = 0.0;
    std::int64_t birth_vertex = -1;
    std::int64_t merge_vertex = -1;
    std::array<double, 3> birth_param = {0, 0, 0};
    std::array<double, 3> merge_param = {-1, -1, -1};
};

// 0-dimensional persistence of the 6-connected vertex filtration, vertices
// entering in increasing (value, index) order. An edge joins two components
// at the value of its later endpoint; the younger component (larger birth,
// ties by birth vertex) dies there. Pairs come back sorted by death
// descending (the essential pair first), then birth and birth vertex.
std::vector<PersistencePair> persistence_0d(const ScalarGrid& f);

// Number of components of {f <= t} read off the diagram: pairs alive at t.
std::int64_t components_at(const std::vector<PersistencePair>& pairs, double t);

struct ConnectivityConfig {
    int grid = 64;        // filtration sampling resolution per axis
    double step = 0.05;   // gradient descent step
    int max_iters = 500;
    void validate() const;
};

struct LossResult {
    double loss = 0.0;          // d_1, the largest finite death; -inf if none
    ReducedCoefficients grad;   // d(loss)/d(reduced coefficient)
    bool tie_warning = false;   // two largest finite deaths within 1e-12
    std::array<double, 3> merge_param = {-1, -1, -1};
};

// L = d_1 of the sampled field plus its gradient: the merged-basis values
// at the merge vertex of the d_1 pair, since the field value there is
// linear in the coefficients.
LossResult loss_and_grad(const PeriodicBSpline& s, const ConnectivityConfig& cfg);

struct ConnectivityTraceRow {
    int iter = 0;
    double loss = 0.0;
    double density = 0.0; // fraction of samples with value <= 0
};

struct ConnectivityResult {
    PeriodicBSpline spline;
    std::vector<ConnectivityTraceRow> trace;
    bool converged = false; // reached loss < 0
    int iterations = 0;
};

// Gradient descent on the reduced coefficients until every secondary
// component of {phi <= 0} is gone (loss < 0) or max_iters. The step is
// halved whenever the loss rises. Mirrored coefficients stay mirrored bit
// for bit because updates land on the reduced array and are re-expanded.
ConnectivityResult optimize_connectivity(const PeriodicBSpline& s, const ConnectivityConfig& cfg);

} // namespace punit
