#include "punit/fit.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "punit/errors.hpp"
#include "punit/parallel.hpp"

namespace punit {

namespace {

constexpr int kMaxDegree = 10;
constexpr double kDenominatorFloor = 1e-14;

struct PointBasis {
    std::array<int, 3> span;
    // (p_a+1) basis values per axis, stored back to back.
    std::array<std::array<double, kMaxDegree + 1>, 3> vals;
};

struct FitWorkspace {
    std::array<KnotVector, 3> kv;
    std::array<int, 3> n, p, r, l;
    std::int64_t reduced_size = 0;
    std::vector<PointBasis> basis;   // per data point
    std::vector<double> denominator; // reduced layout
    std::int64_t chunk = 4096;
    int chunks = 0;

    std::int64_t ridx(int i, int j, int k) const {
        return i + std::int64_t(l[0]) * (j + std::int64_t(l[1]) * k);
    }
};

void validate_config(const FitConfig& cfg) {
    for (int a = 0; a < 3; ++a) {
        if (cfg.p[a] < 0 || cfg.p[a] > kMaxDegree)
            throw validation_error("fit: degree out of range");
        if (cfg.n[a] <= cfg.p[a])
            throw validation_error("fit: control count must exceed degree");
        if (cfg.r[a] < 0 || cfg.r[a] > cfg.n[a] / 2)
            throw validation_error("fit: symmetric degree must lie in [0, n/2]");
    }
    if (cfg.tol <= 0) throw validation_error("fit: tolerance must be positive");
    if (cfg.max_iters < 1) throw validation_error("fit: max_iters must be >= 1");
}

FitWorkspace prepare(const std::vector<std::array<double, 3>>& points, const FitConfig& cfg) {
    FitWorkspace ws;
    ws.n = cfg.n;
    ws.p = cfg.p;
    ws.r = cfg.r;
    for (int a = 0; a < 3; ++a) {
        ws.kv[a] = make_symmetric_knots(cfg.n[a], cfg.p[a], cfg.r[a]);
        ws.l[a] = cfg.n[a] - cfg.r[a];
    }
    ws.reduced_size = std::int64_t(ws.l[0]) * ws.l[1] * ws.l[2];

    const std::int64_t s_count = static_cast<std::int64_t>(points.size());
    ws.basis.resize(s_count);
    ws.chunks = par::chunk_count(s_count, ws.chunk);
    par::parallel_chunks(s_count, ws.chunk, [&](std::int64_t begin, std::int64_t end, int) {
        for (std::int64_t s = begin; s < end; ++s) {
            for (int a = 0; a < 3; ++a) {
                double x = points[s][a];
                if (!(x >= 0.0 && x <= 1.0))
                    throw validation_error("fit: data parameter outside [0,1]");
                ws.basis[s].span[a] = find_span(ws.kv[a], x);
                basis_funs(ws.kv[a], ws.basis[s].span[a], x, ws.basis[s].vals[a].data());
            }
        }
    });

    // Denominators: per-coefficient sums of merged-basis weights. Full-basis
    // products scattered onto reduced indices add up exactly to the merged
    // products because multiplication distributes over the pair sums.
    std::vector<std::vector<double>> partial(ws.chunks);
    par::parallel_chunks(s_count, ws.chunk, [&](std::int64_t begin, std::int64_t end, int ci) {
        auto& acc = partial[ci];
        acc.assign(ws.reduced_size, 0.0);
        for (std::int64_t s = begin; s < end; ++s) {
            const auto& pb = ws.basis[s];
            for (int c = 0; c <= ws.p[2]; ++c) {
                int gk = reduced_index(pb.span[2] - ws.p[2] + c, ws.n[2], ws.r[2]);
                for (int b = 0; b <= ws.p[1]; ++b) {
                    int gj = reduced_index(pb.span[1] - ws.p[1] + b, ws.n[1], ws.r[1]);
                    double pvw = pb.vals[1][b] * pb.vals[2][c];
                    for (int a = 0; a <= ws.p[0]; ++a) {
                        int gi = reduced_index(pb.span[0] - ws.p[0] + a, ws.n[0], ws.r[0]);
                        acc[ws.ridx(gi, gj, gk)] += pb.vals[0][a] * pvw;
                    }
                }
            }
        }
    });
    ws.denominator.assign(ws.reduced_size, 0.0);
    for (int ci = 0; ci < ws.chunks; ++ci)
        for (std::int64_t t = 0; t < ws.reduced_size; ++t) ws.denominator[t] += partial[ci][t];

    for (int k = 0; k < ws.l[2]; ++k)
        for (int j = 0; j < ws.l[1]; ++j)
            for (int i = 0; i < ws.l[0]; ++i)
                if (ws.denominator[ws.ridx(i, j, k)] == 0.0)
                    throw validation_error("fit: no data points support coefficient (" +
                                           std::to_string(i) + "," + std::to_string(j) + "," +
                                           std::to_string(k) + "); reduce n or supply more data");
    return ws;
}

double eval_cached(const PointBasis& pb, const std::array<int, 3>& n,
                   const std::array<int, 3>& p, const std::vector<double>& coeffs) {
    double sum = 0.0;
    for (int c = 0; c <= p[2]; ++c) {
        const int kk = pb.span[2] - p[2] + c;
        for (int b = 0; b <= p[1]; ++b) {
            const int jj = pb.span[1] - p[1] + b;
            const double pvw = pb.vals[1][b] * pb.vals[2][c];
            const double* row = &coeffs[std::int64_t(n[0]) * (jj + std::int64_t(n[1]) * kk)];
            double inner = 0.0;
            for (int a = 0; a <= p[0]; ++a) inner += pb.vals[0][a] * row[pb.span[0] - p[0] + a];
            sum += pvw * inner;
        }
    }
    return sum;
}

} // namespace

FitResult con_lspia(const std::vector<std::array<double, 3>>& points,
                    const std::vector<double>& values, const FitConfig& cfg) {
    validate_config(cfg);
    if (points.size() != values.size())
        throw validation_error("fit: point and value counts differ");
    if (points.empty()) throw validation_error("fit: no data points");
    for (double v : values)
        if (!std::isfinite(v)) throw validation_error("fit: non-finite data value");

    FitWorkspace ws = prepare(points, cfg);
    const std::int64_t s_count = static_cast<std::int64_t>(points.size());

    ReducedCoefficients red;
    red.l = ws.l;
    if (!cfg.init_reduced.empty()) {
        if (static_cast<std::int64_t>(cfg.init_reduced.size()) != ws.reduced_size)
            throw validation_error("fit: initial coefficient count mismatch");
        red.values = cfg.init_reduced;
    } else {
        red.values.assign(ws.reduced_size, cfg.init_value);
    }
    std::vector<double> full = expand_coefficients(red, ws.n, ws.r);

    FitReport report;
    std::vector<std::vector<double>> partial_num(ws.chunks);
    std::vector<double> partial_sq(ws.chunks, 0.0);
    std::vector<double> numerator(ws.reduced_size);

    // One fused pass: residuals against the current surface, their squared
    // sum, and the weighted scatter onto reduced coefficients. Partials merge
    // by chunk index so the result is independent of the thread count.
    auto residual_pass = [&]() {
        par::parallel_chunks(s_count, ws.chunk, [&](std::int64_t begin, std::int64_t end, int ci) {
            auto& acc = partial_num[ci];
            acc.assign(ws.reduced_size, 0.0);
            double sq = 0.0;
            for (std::int64_t s = begin; s < end; ++s) {
                const auto& pb = ws.basis[s];
                const double delta = values[s] - eval_cached(pb, ws.n, ws.p, full);
                sq += delta * delta;
                for (int c = 0; c <= ws.p[2]; ++c) {
                    int gk = reduced_index(pb.span[2] - ws.p[2] + c, ws.n[2], ws.r[2]);
                    for (int b = 0; b <= ws.p[1]; ++b) {
                        int gj = reduced_index(pb.span[1] - ws.p[1] + b, ws.n[1], ws.r[1]);
                        double pvw = pb.vals[1][b] * pb.vals[2][c] * delta;
                        for (int a = 0; a <= ws.p[0]; ++a) {
                            int gi = reduced_index(pb.span[0] - ws.p[0] + a, ws.n[0], ws.r[0]);
                            acc[ws.ridx(gi, gj, gk)] += pb.vals[0][a] * pvw;
                        }
                    }
                }
            }
            partial_sq[ci] = sq;
        });
        std::fill(numerator.begin(), numerator.end(), 0.0);
        double sq_total = 0.0;
        for (int ci = 0; ci < ws.chunks; ++ci) {
            sq_total += partial_sq[ci];
            for (std::int64_t t = 0; t < ws.reduced_size; ++t) numerator[t] += partial_num[ci][t];
        }
        return sq_total;
    };

    // Squared collocation response along a candidate direction.
    auto direction_energy = [&](const std::vector<double>& full_dir) {
        par::parallel_chunks(s_count, ws.chunk, [&](std::int64_t begin, std::int64_t end, int ci) {
            double sq = 0.0;
            for (std::int64_t s = begin; s < end; ++s) {
                const double ad = eval_cached(ws.basis[s], ws.n, ws.p, full_dir);
                sq += ad * ad;
            }
            partial_sq[ci] = sq;
        });
        double total = 0.0;
        for (int ci = 0; ci < ws.chunks; ++ci) total += partial_sq[ci];
        return total;
    };

    if (cfg.accelerate) {
        // Conjugate directions assembled from the same scaled-residual
        // updates the plain loop applies directly. Frozen coefficients never
        // enter a direction, so the iterates stay in the same subspace and
        // the limit satisfies the same normal equations; the exact line
        // search makes the recorded MSE nonincreasing.
        ReducedCoefficients dir;
        dir.l = ws.l;
        dir.values.assign(ws.reduced_size, 0.0);
        std::vector<double> scaled(ws.reduced_size);
        double gz_prev = 0.0;
        for (int q = 1; q <= cfg.max_iters; ++q) {
            const double sq_total = residual_pass();
            report.mse_trace.push_back(sq_total / double(s_count));
            report.iterations = q;

            double gz = 0.0;
            for (std::int64_t t = 0; t < ws.reduced_size; ++t) {
                if (ws.denominator[t] < kDenominatorFloor) {
                    ++report.frozen_updates;
                    scaled[t] = 0.0;
                    continue;
                }
                scaled[t] = numerator[t] / ws.denominator[t];
                gz += numerator[t] * scaled[t];
            }
            if (gz <= 0.0) { // residual orthogonal to every live coefficient
                report.converged = true;
                break;
            }

            // Periodic restarts guard against conjugacy drift in long runs.
            double beta = (q == 1 || q % 256 == 0 || gz_prev <= 0.0) ? 0.0 : gz / gz_prev;
            for (std::int64_t t = 0; t < ws.reduced_size; ++t)
                dir.values[t] = scaled[t] + beta * dir.values[t];
            double dgd = direction_energy(expand_coefficients(dir, ws.n, ws.r));
            if (dgd <= 0.0 && beta != 0.0) { // stale direction, fall back to steepest
                dir.values = scaled;
                dgd = direction_energy(expand_coefficients(dir, ws.n, ws.r));
            }
            if (dgd <= 0.0) { // direction outside the data span
                report.converged = true;
                break;
            }

            const double alpha = gz / dgd;
            double max_step = 0.0;
            for (std::int64_t t = 0; t < ws.reduced_size; ++t) {
                const double step = alpha * dir.values[t];
                red.values[t] += step;
                max_step = std::max(max_step, std::abs(step));
            }
            full = expand_coefficients(red, ws.n, ws.r);
            if (max_step < cfg.tol) {
                report.converged = true;
                break;
            }
            gz_prev = gz;
        }
    } else {
        for (int q = 1; q <= cfg.max_iters; ++q) {
            const double sq_total = residual_pass();
            report.mse_trace.push_back(sq_total / double(s_count));

            double max_step = 0.0;
            for (std::int64_t t = 0; t < ws.reduced_size; ++t) {
                if (ws.denominator[t] < kDenominatorFloor) {
                    ++report.frozen_updates;
                    continue;
                }
                const double step = numerator[t] / ws.denominator[t];
                red.values[t] += step;
                max_step = std::max(max_step, std::abs(step));
            }
            full = expand_coefficients(red, ws.n, ws.r);
            report.iterations = q;
            if (max_step < cfg.tol) {
                report.converged = true;
                break;
            }
        }
    }

    // Final error at the converged coefficients.
    par::parallel_chunks(s_count, ws.chunk, [&](std::int64_t begin, std::int64_t end, int ci) {
        double sq = 0.0;
        for (std::int64_t s = begin; s < end; ++s) {
            const double delta = values[s] - eval_cached(ws.basis[s], ws.n, ws.p, full);
            sq += delta * delta;
        }
        partial_sq[ci] = sq;
    });
    double sq_total = 0.0;
    for (int ci = 0; ci < ws.chunks; ++ci) sq_total += partial_sq[ci];
    report.final_mse = sq_total / double(s_count);

    FitResult result;
    result.spline.kv = ws.kv;
    result.spline.sym_degree = ws.r;
    result.spline.coeffs = std::move(full);
    result.spline.validate();
    result.report = std::move(report);
    return result;
}

FitResult con_lspia(const ScalarGrid& data, const FitConfig& cfg) {
    std::vector<std::array<double, 3>> points;
    points.reserve(data.size());
    for (std::int64_t k = 0; k < data.nz(); ++k)
        for (std::int64_t j = 0; j < data.ny(); ++j)
            for (std::int64_t i = 0; i < data.nx(); ++i)
                points.push_back({(i + 0.5) / double(data.nx()), (j + 0.5) / double(data.ny()),
                                  (k + 0.5) / double(data.nz())});
    return con_lspia(points, data.data(), cfg);
}

double mse(const PeriodicBSpline& s, const ScalarGrid& data) {
    if (data.size() == 0) throw validation_error("mse: empty data grid");
    ScalarGrid fitted = sample_spline(s, data.dims());
    double sq = 0.0;
    for (std::int64_t i = 0; i < data.size(); ++i) {
        const double d = fitted.data()[i] - data.data()[i];
        sq += d * d;
    }
    return sq / double(data.size());
}

} // namespace punit
