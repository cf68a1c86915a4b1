#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>

#include "mech_detail.hpp"
#include "punit/errors.hpp"
#include "punit/io_util.hpp"
#include "punit/lattice.hpp"
#include "punit/mech.hpp"

namespace punit {

namespace {

// Nodal displacements of one element under a unit macroscopic strain, built
// from element-local corner offsets; the dropped affine part is a rigid
// translation that element matrices annihilate.
std::array<double, 24> unit_strain_motion(int p, std::array<double, 3> h) {
    double eps[3][3] = {};
    if (p < 3) {
        eps[p][p] = 1.0;
    } else {
        const int a = p == 3 ? 1 : 0;
        const int b = p == 3 ? 2 : (p == 4 ? 2 : 1);
        eps[a][b] = eps[b][a] = 0.5; // engineering shear of 1
    }
    std::array<double, 24> u = {};
    for (int c = 0; c < 8; ++c) {
        const double x[3] = {detail::kHexCorner[c][0] * h[0], detail::kHexCorner[c][1] * h[1],
                             detail::kHexCorner[c][2] * h[2]};
        for (int r = 0; r < 3; ++r)
            u[3 * c + r] = eps[r][0] * x[0] + eps[r][1] * x[1] + eps[r][2] * x[2];
    }
    return u;
}

void mat24_mul(const detail::Mat24& k, const double* x, double* y) {
    for (int r = 0; r < 24; ++r) {
        double sum = 0.0;
        for (int c = 0; c < 24; ++c) sum += k[r * 24 + c] * x[c];
        y[r] = sum;
    }
}

} // namespace

Mat6 homogenize(const VoxelGrid& cell, const BaseMaterial& mat, double void_scale) {
    mat.validate();
    if (!(void_scale >= 0.0 && void_scale <= 1.0))
        throw validation_error("homogenize: void scale must lie in [0, 1]");
    const std::int64_t nx = cell.nx(), ny = cell.ny(), nz = cell.nz();
    if (nx < 8 || ny < 8 || nz < 8)
        throw validation_error("homogenize: cell resolution must be >= 8 per axis");
    std::int64_t solid = 0;
    for (std::int64_t t = 0; t < cell.size(); ++t) solid += cell.data()[t] != 0;
    if (void_scale == 0.0 && solid == 0)
        throw validation_error("homogenize: fully void cell has no stiffness");

    const std::array<double, 3> h = {1.0 / double(nx), 1.0 / double(ny), 1.0 / double(nz)};
    const auto tables = detail::hex_strain_tables(h);
    detail::Mat24 k0 = {};
    detail::add_element_stiffness(k0, mat.elasticity(), tables);

    std::array<std::array<double, 24>, 6> u0;
    std::array<std::array<double, 24>, 6> f0;
    for (int p = 0; p < 6; ++p) {
        u0[p] = unit_strain_motion(p, h);
        mat24_mul(k0, u0[p].data(), f0[p].data());
    }

    // periodic node grid: nodes wrap, so there are exactly nx*ny*nz of them
    const std::int64_t ne = nx * ny * nz;
    const std::int64_t ndof = 3 * ne;
    auto node_id = [&](std::int64_t i, std::int64_t j, std::int64_t k) {
        return (i % nx) + nx * ((j % ny) + ny * (k % nz));
    };
    std::vector<std::int32_t> edof(ne * 24);
    std::vector<double> scale(ne);
    for (std::int64_t e = 0; e < ne; ++e) {
        const std::int64_t i = e % nx, j = (e / nx) % ny, k = e / (nx * ny);
        scale[e] = cell.data()[e] != 0 ? 1.0 : void_scale;
        for (int c = 0; c < 8; ++c) {
            const std::int64_t nid = node_id(i + detail::kHexCorner[c][0],
                                             j + detail::kHexCorner[c][1],
                                             k + detail::kHexCorner[c][2]);
            for (int d = 0; d < 3; ++d) edof[e * 24 + 3 * c + d] = std::int32_t(3 * nid + d);
        }
    }

    // pin one node to remove the translation modes left by periodicity
    auto pinned = [](std::int32_t dof) { return dof < 3; };

    std::vector<double> diag(ndof, 0.0);
    for (std::int64_t e = 0; e < ne; ++e)
        for (int a = 0; a < 24; ++a) diag[edof[e * 24 + a]] += scale[e] * k0[a * 24 + a];
    for (std::int64_t d = 0; d < ndof; ++d)
        if (d < 3 || diag[d] == 0.0) diag[d] = 1.0;

    auto apply = [&](const std::vector<double>& x, std::vector<double>& y) {
        std::fill(y.begin(), y.end(), 0.0);
        double xe[24], ye[24];
        for (std::int64_t e = 0; e < ne; ++e) {
            const std::int32_t* ids = &edof[e * 24];
            for (int a = 0; a < 24; ++a) xe[a] = pinned(ids[a]) ? 0.0 : x[ids[a]];
            mat24_mul(k0, xe, ye);
            const double s = scale[e];
            for (int a = 0; a < 24; ++a)
                if (!pinned(ids[a])) y[ids[a]] += s * ye[a];
        }
        for (int d = 0; d < 3; ++d) y[d] = x[d];
    };

    std::array<std::vector<double>, 6> chi;
    std::vector<double> rhs(ndof);
    const int max_iters = int(std::max<std::int64_t>(4000, 40 * ndof));
    for (int p = 0; p < 6; ++p) {
        std::fill(rhs.begin(), rhs.end(), 0.0);
        for (std::int64_t e = 0; e < ne; ++e) {
            const std::int32_t* ids = &edof[e * 24];
            for (int a = 0; a < 24; ++a)
                if (!pinned(ids[a])) rhs[ids[a]] += scale[e] * f0[p][a];
        }
        detail::pcg(apply, diag, rhs, chi[p], 1e-8, max_iters);
    }

    // mutual energies of the corrected strain fields
    Mat6 c = {};
    double du[6][24], kdu[6][24];
    for (std::int64_t e = 0; e < ne; ++e) {
        const std::int32_t* ids = &edof[e * 24];
        for (int p = 0; p < 6; ++p) {
            for (int a = 0; a < 24; ++a)
                du[p][a] = u0[p][a] - (pinned(ids[a]) ? 0.0 : chi[p][ids[a]]);
            mat24_mul(k0, du[p], kdu[p]);
        }
        for (int p = 0; p < 6; ++p)
            for (int q = p; q < 6; ++q) {
                double energy = 0.0;
                for (int a = 0; a < 24; ++a) energy += du[p][a] * kdu[q][a];
                c[p][q] += scale[e] * energy;
            }
    }
    for (int p = 0; p < 6; ++p)
        for (int q = p + 1; q < 6; ++q) c[q][p] = c[p][q];
    return c;
}

double GibsonAshbyCurve::eval(double rho) const { return a1 * std::exp(a2 * rho) - a1; }

double GibsonAshbyCurve::derivative(double rho) const { return a1 * a2 * std::exp(a2 * rho); }

namespace {

// Closed-form least-squares amplitude for a fixed exponent, and its error.
struct AmplitudeFit {
    double a1 = 0.0;
    double sse = 0.0;
};

AmplitudeFit fit_amplitude(const std::vector<CurveSample>& samples, double a2) {
    double gy = 0.0, gg = 0.0;
    for (const auto& s : samples) {
        const double g = std::exp(a2 * s.rho) - 1.0;
        gy += g * s.value;
        gg += g * g;
    }
    AmplitudeFit fit;
    fit.a1 = gg > 0.0 ? gy / gg : 0.0;
    for (const auto& s : samples) {
        const double r = fit.a1 * (std::exp(a2 * s.rho) - 1.0) - s.value;
        fit.sse += r * r;
    }
    return fit;
}

} // namespace

GibsonAshbyCurve gibson_ashby_fit(const std::vector<CurveSample>& samples) {
    if (samples.size() < 3)
        throw validation_error("curve fit: at least 3 samples required");
    std::vector<double> rhos;
    for (const auto& s : samples) {
        if (!(s.rho > 0.0 && s.rho <= 1.0))
            throw validation_error("curve fit: densities must lie in (0, 1]");
        if (!std::isfinite(s.value)) throw validation_error("curve fit: sample is not finite");
        rhos.push_back(s.rho);
    }
    std::sort(rhos.begin(), rhos.end());
    if (std::unique(rhos.begin(), rhos.end()) - rhos.begin() < 3)
        throw validation_error("curve fit: at least 3 distinct densities required");

    GibsonAshbyCurve curve;
    double peak = 0.0;
    for (const auto& s : samples) peak = std::max(peak, std::abs(s.value));
    if (peak == 0.0) {
        curve.degenerate = true;
        return curve;
    }

    // mixed signs: fit the magnitudes, reapply the dominant sign
    bool has_pos = false, has_neg = false;
    double dominant = 0.0, dominant_mag = -1.0;
    for (const auto& s : samples) {
        has_pos = has_pos || s.value > 0.0;
        has_neg = has_neg || s.value < 0.0;
        if (std::abs(s.value) > dominant_mag) {
            dominant_mag = std::abs(s.value);
            dominant = s.value < 0.0 ? -1.0 : 1.0;
        }
    }
    std::vector<CurveSample> work = samples;
    if (has_pos && has_neg) {
        curve.sign_flipped = true;
        for (auto& s : work) s.value = std::abs(s.value);
    }

    double lo = 0.1, hi = 20.0;
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double m1 = hi - inv_phi * (hi - lo), m2 = lo + inv_phi * (hi - lo);
    double f1 = fit_amplitude(work, m1).sse, f2 = fit_amplitude(work, m2).sse;
    while (hi - lo > 1e-10) {
        if (f1 <= f2) {
            hi = m2;
            m2 = m1;
            f2 = f1;
            m1 = hi - inv_phi * (hi - lo);
            f1 = fit_amplitude(work, m1).sse;
        } else {
            lo = m1;
            m1 = m2;
            f1 = f2;
            m2 = lo + inv_phi * (hi - lo);
            f2 = fit_amplitude(work, m2).sse;
        }
    }
    curve.a2 = (lo + hi) / 2.0;
    const auto best = fit_amplitude(work, curve.a2);
    curve.a1 = best.a1;
    curve.residual = best.sse;
    if (curve.sign_flipped) curve.a1 *= dominant;
    return curve;
}

Mat6 DensityCurves::elasticity(double rho) const {
    const Mat6 base = material.elasticity();
    Mat6 c = {};
    for (int p = 0; p < 6; ++p)
        for (int q = 0; q < 6; ++q)
            if (base[p][q] != 0.0) c[p][q] = base[p][q] * entry[p][q].eval(rho);
    return c;
}

Mat6 DensityCurves::elasticity_derivative(double rho) const {
    const Mat6 base = material.elasticity();
    Mat6 c = {};
    for (int p = 0; p < 6; ++p)
        for (int q = 0; q < 6; ++q)
            if (base[p][q] != 0.0) c[p][q] = base[p][q] * entry[p][q].derivative(rho);
    return c;
}

DensityCurves build_density_curves(const PeriodicBSpline& unit, const BaseMaterial& mat,
                                   const std::vector<double>& ladder, int voxel_res,
                                   double void_scale) {
    unit.validate();
    mat.validate();
    if (voxel_res < 8) throw validation_error("curves: voxel resolution must be >= 8");
    if (ladder.size() < 3) throw validation_error("curves: ladder needs at least 3 densities");
    for (double rho : ladder)
        if (!(rho > 0.0 && rho < 1.0))
            throw validation_error("curves: ladder densities must lie in (0, 1)");

    DensityCurves out;
    out.material = mat;
    out.ladder = ladder;

    const int quantile_res = std::max(voxel_res, 32);
    const auto samples = sample_spline(unit, {voxel_res, voxel_res, voxel_res});
    for (double rho : ladder) {
        const double c = threshold_for_density(unit, rho, quantile_res);
        VoxelGrid vg({voxel_res, voxel_res, voxel_res}, 0);
        for (std::int64_t t = 0; t < samples.size(); ++t)
            vg.data()[t] = samples.data()[t] <= c ? 1 : 0;
        out.tensors.push_back(homogenize(vg, mat, void_scale));
    }

    const Mat6 base = mat.elasticity();
    double base_max = 0.0, measured_max = 0.0;
    for (int p = 0; p < 6; ++p)
        for (int q = 0; q < 6; ++q) {
            base_max = std::max(base_max, std::abs(base[p][q]));
            for (const auto& t : out.tensors) measured_max = std::max(measured_max, std::abs(t[p][q]));
        }

    for (int p = 0; p < 6; ++p)
        for (int q = p; q < 6; ++q) {
            double response = 0.0;
            for (const auto& t : out.tensors) response = std::max(response, std::abs(t[p][q]));
            if (response > 1e-9 * measured_max) ++out.nonzero_entries;

            GibsonAshbyCurve curve;
            if (std::abs(base[p][q]) > 1e-12 * base_max) {
                std::vector<CurveSample> pts(ladder.size());
                for (std::size_t s = 0; s < ladder.size(); ++s)
                    pts[s] = {ladder[s], out.tensors[s][p][q] / base[p][q]};
                curve = gibson_ashby_fit(pts);
            } else {
                curve.degenerate = true;
            }
            out.entry[p][q] = curve;
            out.entry[q][p] = curve;
        }
    return out;
}

std::string curves_to_json(const DensityCurves& curves) {
    nlohmann::json doc;
    doc["material"] = {{"youngs", curves.material.youngs}, {"poisson", curves.material.poisson}};
    doc["ladder"] = curves.ladder;
    doc["nonzero_entries"] = curves.nonzero_entries;
    auto tensors = nlohmann::json::array();
    for (const auto& t : curves.tensors) {
        auto rows = nlohmann::json::array();
        for (const auto& row : t) rows.push_back(row);
        tensors.push_back(rows);
    }
    doc["tensors"] = tensors;
    auto entries = nlohmann::json::array();
    for (int p = 0; p < 6; ++p)
        for (int q = p; q < 6; ++q) {
            const auto& e = curves.entry[p][q];
            entries.push_back({{"row", p},
                               {"col", q},
                               {"a1", e.a1},
                               {"a2", e.a2},
                               {"residual", e.residual},
                               {"degenerate", e.degenerate},
                               {"sign_flipped", e.sign_flipped}});
        }
    doc["entries"] = entries;
    return doc.dump();
}

DensityCurves curves_from_json(const std::string& text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw validation_error(std::string("curves document is not valid JSON: ") + e.what());
    }
    DensityCurves out;
    try {
        out.material.youngs = doc.at("material").at("youngs").get<double>();
        out.material.poisson = doc.at("material").at("poisson").get<double>();
        out.ladder = doc.at("ladder").get<std::vector<double>>();
        out.nonzero_entries = doc.at("nonzero_entries").get<int>();
        for (const auto& t : doc.at("tensors")) {
            Mat6 m;
            for (int p = 0; p < 6; ++p)
                for (int q = 0; q < 6; ++q) m[p][q] = t.at(p).at(q).get<double>();
            out.tensors.push_back(m);
        }
        for (const auto& e : doc.at("entries")) {
            GibsonAshbyCurve curve;
            const int p = e.at("row").get<int>();
            const int q = e.at("col").get<int>();
            if (p < 0 || q < 0 || p > 5 || q > 5)
                throw validation_error("curves document: entry index out of range");
            curve.a1 = e.at("a1").get<double>();
            curve.a2 = e.at("a2").get<double>();
            curve.residual = e.at("residual").get<double>();
            curve.degenerate = e.at("degenerate").get<bool>();
            curve.sign_flipped = e.at("sign_flipped").get<bool>();
            out.entry[p][q] = curve;
            out.entry[q][p] = curve;
        }
    } catch (const nlohmann::json::exception& e) {
        throw validation_error(std::string("curves document missing field: ") + e.what());
    }
    out.material.validate();
    return out;
}

void save_curves_file(const DensityCurves& curves, const std::string& path) {
    write_file_atomic(path, curves_to_json(curves));
}

DensityCurves load_curves_file(const std::string& path) {
    return curves_from_json(read_file_text(path));
}

} // namespace punit
