#include <algorithm>
#include <cmath>

#include "mech_detail.hpp"
#include "punit/errors.hpp"
#include "punit/mech.hpp"

namespace punit {

namespace {

PeriodicBSpline density_spline(const TopOptConfig& cfg, const std::vector<double>& coeffs) {
    PeriodicBSpline s;
    for (int a = 0; a < 3; ++a) s.kv[a] = make_clamped_uniform_knots(cfg.n[a], cfg.p[a]);
    s.sym_degree = {0, 0, 0};
    s.coeffs = coeffs;
    s.validate();
    return s;
}

// Per-coefficient integrals of the basis functions; they sum to 1 per axis.
std::vector<double> volume_weights(const PeriodicBSpline& s) {
    std::array<std::vector<double>, 3> axis;
    for (int a = 0; a < 3; ++a) {
        const auto& kv = s.kv[a];
        const int n = kv.basis_count();
        axis[a].resize(n);
        for (int i = 0; i < n; ++i)
            axis[a][i] = (kv.knots[i + kv.degree + 1] - kv.knots[i]) / double(kv.degree + 1);
    }
    const auto n = s.basis_counts();
    std::vector<double> w(std::int64_t(n[0]) * n[1] * n[2]);
    std::int64_t t = 0;
    for (int k = 0; k < n[2]; ++k)
        for (int j = 0; j < n[1]; ++j)
            for (int i = 0; i < n[0]; ++i) w[t++] = axis[0][i] * axis[1][j] * axis[2][k];
    return w;
}

} // namespace

double spline_volume(const PeriodicBSpline& density) {
    density.validate();
    const auto w = volume_weights(density);
    double vol = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) vol += w[i] * density.coeffs[i];
    return vol;
}

void TopOptConfig::validate() const {
    for (int a = 0; a < 3; ++a) {
        if (elems[a] < 2) throw validation_error("topopt: element counts must be >= 2");
        if (n[a] < 2) throw validation_error("topopt: density control counts must be >= 2");
        if (p[a] < 1 || p[a] >= n[a])
            throw validation_error("topopt: density degrees must satisfy 1 <= p < n");
    }
    if (!(rho_min > 0.0 && rho_min < rho_max && rho_max < 1.0))
        throw validation_error("topopt: density bounds must satisfy 0 < min < max < 1");
    if (!(volfrac > rho_min && volfrac < rho_max))
        throw validation_error("topopt: volume fraction must lie between the density bounds");
    if (!(move > 0.0 && move < 1.0)) throw validation_error("topopt: move limit out of range");
    if (!(damping > 0.0 && damping <= 1.0)) throw validation_error("topopt: damping out of range");
    if (max_iters < 1) throw validation_error("topopt: at least one iteration required");
    if (!(tol >= 0.0)) throw validation_error("topopt: tolerance must be nonnegative");
    if (!(cg_tol > 0.0 && cg_tol < 1.0)) throw validation_error("topopt: solver tolerance out of range");
    standard_case(bc, elems);
}

ComplianceEval evaluate_compliance(const TopOptConfig& cfg, const DensityCurves& curves,
                                   const std::vector<double>& coeffs, bool with_gradient) {
    cfg.validate();
    const std::int64_t ncoef = std::int64_t(cfg.n[0]) * cfg.n[1] * cfg.n[2];
    if (std::int64_t(coeffs.size()) != ncoef)
        throw validation_error("topopt: coefficient count does not match the density shape");

    const auto density = density_spline(cfg, coeffs);
    const auto rho = sample_spline(density, {cfg.elems[0], cfg.elems[1], cfg.elems[2]});

    const std::int64_t ne = rho.size();
    std::vector<Mat6> elasticity(ne);
    for (std::int64_t e = 0; e < ne; ++e) elasticity[e] = curves.elasticity(rho.data()[e]);

    const auto bc = standard_case(cfg.bc, cfg.elems);
    const auto sol = fe_solve(cfg.elems, {1.0, 1.0, 1.0}, elasticity, bc, cfg.cg_tol);

    ComplianceEval out;
    out.compliance = sol.compliance;
    if (!with_gradient) return out;
    out.gradient.assign(ncoef, 0.0);

    const auto tables = detail::hex_strain_tables({1.0, 1.0, 1.0});
    const std::int64_t ex = cfg.elems[0], ey = cfg.elems[1], ez = cfg.elems[2];
    const std::int64_t nxn = ex + 1, nyn = ey + 1;

    // per-axis basis values of the density spline at element centers
    std::array<std::vector<int>, 3> spans;
    std::array<std::vector<double>, 3> basis;
    for (int a = 0; a < 3; ++a) {
        const int deg = cfg.p[a];
        spans[a].resize(cfg.elems[a]);
        basis[a].resize(std::int64_t(cfg.elems[a]) * (deg + 1));
        for (int i = 0; i < cfg.elems[a]; ++i) {
            const double x = (i + 0.5) / double(cfg.elems[a]);
            spans[a][i] = find_span(density.kv[a], x);
            basis_funs(density.kv[a], spans[a][i], x, &basis[a][std::int64_t(i) * (deg + 1)]);
        }
    }

    double ue[24], su[24];
    for (std::int64_t e = 0; e < ne; ++e) {
        const std::int64_t i = e % ex, j = (e / ex) % ey, k = e / (ex * ey);
        for (int c = 0; c < 8; ++c) {
            const std::int64_t nid = (i + detail::kHexCorner[c][0]) +
                                     nxn * ((j + detail::kHexCorner[c][1]) +
                                            nyn * (k + detail::kHexCorner[c][2]));
            for (int d = 0; d < 3; ++d) ue[3 * c + d] = sol.displacement[3 * nid + d];
        }

        // element compliance sensitivity: -u^T (dK/drho) u
        const Mat6 dc = curves.elasticity_derivative(rho.data()[e]);
        double sens = 0.0;
        for (int p = 0; p < 6; ++p)
            for (int q = p; q < 6; ++q) {
                if (dc[p][q] == 0.0) continue;
                const auto& s = tables[detail::upper_index(p, q)];
                for (int r = 0; r < 24; ++r) {
                    double sum = 0.0;
                    for (int c = 0; c < 24; ++c) sum += s[r * 24 + c] * ue[c];
                    su[r] = sum;
                }
                double energy = 0.0;
                for (int r = 0; r < 24; ++r) energy += ue[r] * su[r];
                sens += dc[p][q] * energy;
            }
        sens = -sens;

        const int pu = cfg.p[0], pv = cfg.p[1], pw = cfg.p[2];
        for (int c = 0; c <= pw; ++c) {
            const std::int64_t kk = spans[2][k] - pw + c;
            for (int b = 0; b <= pv; ++b) {
                const std::int64_t jj = spans[1][j] - pv + b;
                const double pvw = basis[1][std::int64_t(j) * (pv + 1) + b] *
                                   basis[2][std::int64_t(k) * (pw + 1) + c];
                for (int a = 0; a <= pu; ++a) {
                    const std::int64_t ii = spans[0][i] - pu + a;
                    out.gradient[ii + std::int64_t(cfg.n[0]) * (jj + std::int64_t(cfg.n[1]) * kk)] +=
                        sens * pvw * basis[0][std::int64_t(i) * (pu + 1) + a];
                }
            }
        }
    }
    return out;
}

namespace {

// Move-limited, damped multiplicative update; monotone decreasing in lambda.
std::vector<double> oc_candidate(const TopOptConfig& cfg, const std::vector<double>& coeffs,
                                 const std::vector<double>& gain, double lambda) {
    std::vector<double> next(coeffs.size());
    for (std::size_t i = 0; i < coeffs.size(); ++i) {
        const double b = gain[i] / lambda;
        double v = coeffs[i] * std::pow(std::max(b, 0.0), cfg.damping);
        v = std::clamp(v, coeffs[i] - cfg.move, coeffs[i] + cfg.move);
        next[i] = std::clamp(v, cfg.rho_min, cfg.rho_max);
    }
    return next;
}

} // namespace

TopOptResult topopt(const TopOptConfig& cfg, const DensityCurves& curves) {
    cfg.validate();
    bool has_stiffness = false;
    for (int d = 0; d < 6; ++d)
        if (!curves.entry[d][d].degenerate && curves.entry[d][d].a1 != 0.0) has_stiffness = true;
    if (!has_stiffness) throw validation_error("topopt: curves carry no stiffness");

    const std::int64_t ncoef = std::int64_t(cfg.n[0]) * cfg.n[1] * cfg.n[2];
    std::vector<double> coeffs(ncoef, cfg.volfrac);
    const auto weights = volume_weights(density_spline(cfg, coeffs));

    auto volume_of = [&](const std::vector<double>& c) {
        double v = 0.0;
        for (std::int64_t i = 0; i < ncoef; ++i) v += weights[i] * c[i];
        return v;
    };

    TopOptResult result;
    for (int iter = 0; iter < cfg.max_iters; ++iter) {
        const auto eval = evaluate_compliance(cfg, curves, coeffs, true);
        result.compliance_trace.push_back(eval.compliance);
        result.volume_trace.push_back(volume_of(coeffs));

        // normalized OC gains: positive where adding material helps
        double mean = 0.0;
        for (double g : eval.gradient) mean += std::abs(g);
        mean = std::max(mean / double(ncoef), 1e-300);
        std::vector<double> gain(ncoef);
        for (std::int64_t i = 0; i < ncoef; ++i)
            gain[i] = std::max(0.0, -eval.gradient[i]) / mean / (weights[i] * double(ncoef));

        double lo = 1e-9, hi = 1e9;
        if (volume_of(oc_candidate(cfg, coeffs, gain, lo)) < cfg.volfrac ||
            volume_of(oc_candidate(cfg, coeffs, gain, hi)) > cfg.volfrac)
            throw validation_error("topopt: volume target is outside the bisection bracket");
        while (hi - lo > 1e-13 * hi) {
            const double mid = 0.5 * (lo + hi);
            if (volume_of(oc_candidate(cfg, coeffs, gain, mid)) > cfg.volfrac)
                lo = mid;
            else
                hi = mid;
        }
        auto next = oc_candidate(cfg, coeffs, gain, 0.5 * (lo + hi));

        double change = 0.0;
        for (std::int64_t i = 0; i < ncoef; ++i)
            change = std::max(change, std::abs(next[i] - coeffs[i]));
        coeffs = std::move(next);
        result.iterations = iter + 1;
        if (change < cfg.tol) {
            result.converged = true;
            break;
        }
    }

    const auto final_eval = evaluate_compliance(cfg, curves, coeffs, false);
    result.compliance_trace.push_back(final_eval.compliance);
    result.volume_trace.push_back(volume_of(coeffs));
    result.density = density_spline(cfg, coeffs);
    for (std::size_t t = 1; t < result.compliance_trace.size(); ++t)
        if (result.compliance_trace[t] > 1.01 * result.compliance_trace[t - 1])
            ++result.trace_violations;
    return result;
}

} // namespace punit
