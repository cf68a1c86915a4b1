#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <vector>

#include "punit/mech.hpp"

namespace punit::detail {

// 24x24 element matrix, row major; dof order is node-major (3 per corner).
using Mat24 = std::array<double, 576>;

// Corner order of the trilinear hexahedron, shared by every element loop.
constexpr int kHexCorner[8][3] = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0},
                                  {0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1}};

inline int upper_index(int p, int q) {
    // index of (p,q), p <= q, in row-major upper-triangle order
    return p * 6 - p * (p + 1) / 2 + q;
}

// S_pq = integral of B_p^T B_q + (p != q) B_q^T B_p over one hexahedron of the
// given size; element stiffness is sum over p <= q of C[p][q] * S_pq.
std::array<Mat24, 21> hex_strain_tables(std::array<double, 3> size);

void add_element_stiffness(Mat24& k, const Mat6& c, const std::array<Mat24, 21>& tables);

// Jacobi-preconditioned conjugate gradients on a matrix-free operator.
// Returns the iteration count; throws numeric_error when max_iters is reached
// before the relative residual drops to rel_tol.
int pcg(const std::function<void(const std::vector<double>&, std::vector<double>&)>& apply,
        const std::vector<double>& diag, const std::vector<double>& rhs, std::vector<double>& x,
        double rel_tol, int max_iters);

} // namespace punit::detail
