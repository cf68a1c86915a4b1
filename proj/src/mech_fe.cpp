#include "punit/mech.hpp"

#include <cmath>
#include <cstring>

#include "mech_detail.hpp"
#include "punit/errors.hpp"

namespace punit {

void BaseMaterial::validate() const {
    if (!(youngs > 0.0)) throw validation_error("material: Young's modulus must be positive");
    if (!(poisson > -1.0 && poisson < 0.5))
        throw validation_error("material: Poisson ratio must lie in (-1, 0.5)");
}

Mat6 BaseMaterial::elasticity() const {
    validate();
    const double lambda = youngs * poisson / ((1.0 + poisson) * (1.0 - 2.0 * poisson));
    const double mu = youngs / (2.0 * (1.0 + poisson));
    Mat6 c = {};
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) c[i][j] = lambda;
        c[i][i] = lambda + 2.0 * mu;
        c[i + 3][i + 3] = mu;
    }
    return c;
}

namespace detail {

namespace {

// Rows of the strain-displacement matrix at one quadrature point.
struct StrainRows {
    // six rows, 24 columns each
    std::array<std::array<double, 24>, 6> b = {};
};

StrainRows strain_rows(std::array<double, 3> size, std::array<double, 3> at) {
    StrainRows rows;
    for (int c = 0; c < 8; ++c) {
        double val[3], grad[3];
        for (int a = 0; a < 3; ++a) {
            const double t = at[a] / size[a];
            val[a] = kHexCorner[c][a] ? t : 1.0 - t;
            grad[a] = (kHexCorner[c][a] ? 1.0 : -1.0) / size[a];
        }
        const double dx = grad[0] * val[1] * val[2];
        const double dy = val[0] * grad[1] * val[2];
        const double dz = val[0] * val[1] * grad[2];
        const int col = 3 * c;
        rows.b[0][col + 0] = dx;
        rows.b[1][col + 1] = dy;
        rows.b[2][col + 2] = dz;
        rows.b[3][col + 1] = dz;
        rows.b[3][col + 2] = dy;
        rows.b[4][col + 0] = dz;
        rows.b[4][col + 2] = dx;
        rows.b[5][col + 0] = dy;
        rows.b[5][col + 1] = dx;
    }
    return rows;
}

} // namespace

std::array<Mat24, 21> hex_strain_tables(std::array<double, 3> size) {
    std::array<Mat24, 21> tables = {};
    const double g = 0.5 / std::sqrt(3.0);
    for (int gp = 0; gp < 8; ++gp) {
        std::array<double, 3> at;
        double weight = 1.0;
        for (int a = 0; a < 3; ++a) {
            at[a] = size[a] * (0.5 + ((gp >> a) & 1 ? g : -g));
            weight *= size[a] / 2.0;
        }
        const auto rows = strain_rows(size, at);
        for (int p = 0; p < 6; ++p)
            for (int q = p; q < 6; ++q) {
                Mat24& s = tables[upper_index(p, q)];
                for (int r = 0; r < 24; ++r)
                    for (int c = 0; c < 24; ++c) {
                        double v = rows.b[p][r] * rows.b[q][c];
                        if (p != q) v += rows.b[q][r] * rows.b[p][c];
                        s[r * 24 + c] += weight * v;
                    }
            }
    }
    return tables;
}

void add_element_stiffness(Mat24& k, const Mat6& c, const std::array<Mat24, 21>& tables) {
    for (int p = 0; p < 6; ++p)
        for (int q = p; q < 6; ++q) {
            const double w = c[p][q];
            if (w == 0.0) continue;
            const Mat24& s = tables[upper_index(p, q)];
            for (int e = 0; e < 576; ++e) k[e] += w * s[e];
        }
}

int pcg(const std::function<void(const std::vector<double>&, std::vector<double>&)>& apply,
        const std::vector<double>& diag, const std::vector<double>& rhs, std::vector<double>& x,
        double rel_tol, int max_iters) {
    const std::size_t n = rhs.size();
    x.assign(n, 0.0);
    double b_norm2 = 0.0;
    for (double v : rhs) b_norm2 += v * v;
    if (b_norm2 == 0.0) return 0;

    std::vector<double> r = rhs, z(n), p(n), q(n);
    for (std::size_t i = 0; i < n; ++i) z[i] = r[i] / diag[i];
    p = z;
    double rz = 0.0;
    for (std::size_t i = 0; i < n; ++i) rz += r[i] * z[i];

    const double target2 = rel_tol * rel_tol * b_norm2;
    for (int it = 1; it <= max_iters; ++it) {
        apply(p, q);
        double pq = 0.0;
        for (std::size_t i = 0; i < n; ++i) pq += p[i] * q[i];
        if (!(pq > 0.0))
            throw numeric_error("fe: system is not positive definite (missing constraints?)");
        const double alpha = rz / pq;
        double r_norm2 = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            x[i] += alpha * p[i];
            r[i] -= alpha * q[i];
            r_norm2 += r[i] * r[i];
        }
        if (r_norm2 <= target2) return it;
        double rz_next = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            z[i] = r[i] / diag[i];
            rz_next += r[i] * z[i];
        }
        const double beta = rz_next / rz;
        rz = rz_next;
        for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
    }
    throw numeric_error("fe: conjugate gradients did not converge (insufficient constraints?)");
}

} // namespace detail

LoadCase three_point_bending(std::array<int, 3> elems) {
    LoadCase bc;
    bc.name = "three-point-bending";
    const std::int64_t ex = elems[0], ey = elems[1], ez = elems[2];
    // bottom edges at both x extremes are pinned
    bc.fixed = [ex](std::array<std::int64_t, 3> node) {
        return node[2] == 0 && (node[0] == 0 || node[0] == ex);
    };
    // unit force down, spread over the top strip at mid span
    const double per_node = 1.0 / double(ey + 1);
    bc.load = [ex, ey, ez, per_node](std::array<std::int64_t, 3> node) -> std::array<double, 3> {
        if (node[2] == ez && node[0] == ex / 2) return {0.0, 0.0, -per_node};
        return {0.0, 0.0, 0.0};
    };
    return bc;
}

LoadCase compression(std::array<int, 3> elems) {
    LoadCase bc;
    bc.name = "compression";
    const std::int64_t ex = elems[0], ey = elems[1], ez = elems[2];
    bc.fixed = [](std::array<std::int64_t, 3> node) { return node[2] == 0; };
    const double per_node = 1.0 / (double(ex + 1) * double(ey + 1));
    bc.load = [ez, per_node](std::array<std::int64_t, 3> node) -> std::array<double, 3> {
        if (node[2] == ez) return {0.0, 0.0, -per_node};
        return {0.0, 0.0, 0.0};
    };
    return bc;
}

LoadCase standard_case(const std::string& name, std::array<int, 3> elems) {
    if (name == "three-point-bending") return three_point_bending(elems);
    if (name == "compression") return compression(elems);
    throw validation_error("fe: unknown load case \"" + name +
                           "\", expected three-point-bending or compression");
}

FeSolution fe_solve(std::array<int, 3> elems, std::array<double, 3> cell_size,
                    const std::vector<Mat6>& element_elasticity, const LoadCase& bc,
                    double cg_tol) {
    for (int a = 0; a < 3; ++a) {
        if (elems[a] < 1) throw validation_error("fe: element counts must be >= 1");
        if (!(cell_size[a] > 0.0)) throw validation_error("fe: cell size must be positive");
    }
    if (!(cg_tol > 0.0 && cg_tol < 1.0)) throw validation_error("fe: solver tolerance out of range");
    const std::int64_t ex = elems[0], ey = elems[1], ez = elems[2];
    const std::int64_t ne = ex * ey * ez;
    if (std::int64_t(element_elasticity.size()) != ne)
        throw validation_error("fe: one elasticity matrix per element required");

    const std::int64_t nxn = ex + 1, nyn = ey + 1, nzn = ez + 1;
    const std::int64_t ndof = 3 * nxn * nyn * nzn;
    auto node_id = [&](std::int64_t i, std::int64_t j, std::int64_t k) {
        return i + nxn * (j + nyn * k);
    };

    const auto tables = detail::hex_strain_tables(cell_size);
    std::vector<detail::Mat24> ke(ne);
    for (std::int64_t e = 0; e < ne; ++e) {
        ke[e] = {};
        detail::add_element_stiffness(ke[e], element_elasticity[e], tables);
    }

    // per-element global dof lists, fixed-dof mask, loads, diagonal
    std::vector<std::int32_t> edof(ne * 24);
    for (std::int64_t e = 0; e < ne; ++e) {
        const std::int64_t i = e % ex, j = (e / ex) % ey, k = e / (ex * ey);
        for (int c = 0; c < 8; ++c) {
            const std::int64_t nid = node_id(i + detail::kHexCorner[c][0],
                                             j + detail::kHexCorner[c][1],
                                             k + detail::kHexCorner[c][2]);
            for (int d = 0; d < 3; ++d) edof[e * 24 + 3 * c + d] = std::int32_t(3 * nid + d);
        }
    }

    std::vector<char> is_fixed(ndof, 0);
    std::vector<double> rhs(ndof, 0.0);
    std::int64_t fixed_nodes = 0;
    for (std::int64_t k = 0; k < nzn; ++k)
        for (std::int64_t j = 0; j < nyn; ++j)
            for (std::int64_t i = 0; i < nxn; ++i) {
                const std::array<std::int64_t, 3> node = {i, j, k};
                const std::int64_t base = 3 * node_id(i, j, k);
                if (bc.fixed(node)) {
                    ++fixed_nodes;
                    for (int d = 0; d < 3; ++d) is_fixed[base + d] = 1;
                }
                const auto f = bc.load(node);
                for (int d = 0; d < 3; ++d) {
                    if (!std::isfinite(f[d])) throw validation_error("fe: load is not finite");
                    rhs[base + d] += f[d];
                }
            }
    if (fixed_nodes == 0) throw validation_error("fe: load case fixes no nodes");
    for (std::int64_t d = 0; d < ndof; ++d)
        if (is_fixed[d]) rhs[d] = 0.0;

    std::vector<double> diag(ndof, 0.0);
    for (std::int64_t e = 0; e < ne; ++e)
        for (int a = 0; a < 24; ++a) diag[edof[e * 24 + a]] += ke[e][a * 24 + a];
    for (std::int64_t d = 0; d < ndof; ++d)
        if (is_fixed[d] || diag[d] == 0.0) diag[d] = 1.0;

    auto apply = [&](const std::vector<double>& x, std::vector<double>& y) {
        std::fill(y.begin(), y.end(), 0.0);
        double xe[24], ye[24];
        for (std::int64_t e = 0; e < ne; ++e) {
            const std::int32_t* ids = &edof[e * 24];
            for (int a = 0; a < 24; ++a) xe[a] = is_fixed[ids[a]] ? 0.0 : x[ids[a]];
            const double* k = ke[e].data();
            for (int r = 0; r < 24; ++r) {
                double sum = 0.0;
                for (int c = 0; c < 24; ++c) sum += k[r * 24 + c] * xe[c];
                ye[r] = sum;
            }
            for (int a = 0; a < 24; ++a)
                if (!is_fixed[ids[a]]) y[ids[a]] += ye[a];
        }
        for (std::int64_t d = 0; d < ndof; ++d)
            if (is_fixed[d]) y[d] = x[d];
    };

    FeSolution sol;
    const int max_iters = std::max<std::int64_t>(4000, 30 * ndof);
    sol.cg_iterations =
        detail::pcg(apply, diag, rhs, sol.displacement, cg_tol, int(max_iters));
    for (std::int64_t d = 0; d < ndof; ++d) sol.compliance += rhs[d] * sol.displacement[d];
    return sol;
}

} // namespace punit
