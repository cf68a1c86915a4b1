#pragma once

#include <array>
#include <string>
#include <vector>

#include "punit/scalar_grid.hpp"

namespace punit {

// Clamped B-spline basis: first/last p+1 knots pinned to 0/1.
struct KnotVector {
    int degree = 0;
    std::vector<double> knots;

    int basis_count() const { return static_cast<int>(knots.size()) - degree - 1; }
    void validate() const;
};

// Uniform clamped knot vector for n bases of degree p. Its knot intervals
// are mirror-symmetric, which is what coefficient mirroring relies on.
KnotVector make_clamped_uniform_knots(int n, int p);
KnotVector make_symmetric_knots(int n, int p, int r);

// Interval symmetry t_{i+1}-t_i == t_{m-i-1}-t_{m-i-2} for all i < r+p.
bool knot_intervals_symmetric(const KnotVector& kv, int r, double tol = 1e-12);

// Span index s with t_s <= u < t_{s+1}; u >= 1 maps to the last span so the
// right end evaluates as a left limit.
int find_span(const KnotVector& kv, double u);

// The p+1 nonzero basis values N_{span-p..span}(u), Cox–de Boor recursion.
void basis_funs(const KnotVector& kv, int span, double u, double* out);

double basis_eval(const KnotVector& kv, int i, double u);

// N_i + N_{n-1-i} for i < r, plain N_i otherwise; i ranges over the n - r
// free (reduced) indices.
double merged_basis_eval(const KnotVector& kv, int r, int i, double u);

// Free coefficients of a mirrored spline, shape l_a = n_a - r_a per axis.
struct ReducedCoefficients {
    std::array<int, 3> l = {0, 0, 0};
    std::vector<double> values; // row-major, first axis fastest

    std::int64_t index(int i, int j, int k) const {
        return i + std::int64_t(l[0]) * (j + std::int64_t(l[1]) * k);
    }
};

// Trivariate tensor-product spline whose leading r_a coefficient layers per
// axis mirror the trailing ones, making opposite faces of the unit cube
// match so tiles join smoothly.
struct PeriodicBSpline {
    std::array<KnotVector, 3> kv;
    std::array<int, 3> sym_degree = {0, 0, 0};
    std::vector<double> coeffs; // n_u*n_v*n_w, row-major u-fastest

    std::array<int, 3> basis_counts() const {
        return {kv[0].basis_count(), kv[1].basis_count(), kv[2].basis_count()};
    }
    std::int64_t coeff_index(int i, int j, int k) const {
        auto n = basis_counts();
        return i + std::int64_t(n[0]) * (j + std::int64_t(n[1]) * k);
    }

    double eval(double u, double v, double w) const;
    void validate() const;
};

// Writes mirrored copies at paired indices, axis by axis; never recomputes
// a mirror, so the symmetry holds bit for bit.
std::vector<double> expand_coefficients(const ReducedCoefficients& reduced,
                                        std::array<int, 3> n, std::array<int, 3> r);
ReducedCoefficients reduce_coefficients(const std::vector<double>& full,
                                        std::array<int, 3> n, std::array<int, 3> r);

// Full index -> reduced index on one axis.
inline int reduced_index(int f, int n, int r) { return f < n - r ? f : n - 1 - f; }

PeriodicBSpline make_symmetric_spline(std::array<int, 3> n, std::array<int, 3> p,
                                      std::array<int, 3> r, const ReducedCoefficients& reduced);

// Max |s(x) - s(mirror_a(x))| per axis, sampled where the mirror identity is
// guaranteed: the full cube when r_a = floor(n_a/2), u in [0, t_{r_a}) plus
// the u=0 face otherwise.
std::array<double, 3> check_symmetry(const PeriodicBSpline& s, int samples);

// Dense evaluation at the cell centers of a grid.
ScalarGrid sample_spline(const PeriodicBSpline& s, std::array<std::int64_t, 3> dims);

std::string spline_to_json(const PeriodicBSpline& s);
PeriodicBSpline spline_from_json(const std::string& text);
void save_spline_file(const PeriodicBSpline& s, const std::string& path);
PeriodicBSpline load_spline_file(const std::string& path);

} // namespace punit
