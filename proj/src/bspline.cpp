#include "punit/bspline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "punit/errors.hpp"
#include "punit/io_util.hpp"
#include "punit/parallel.hpp"
#include <nlohmann/json.hpp>

namespace punit {

namespace {
constexpr int kMaxDegree = 10;
} // namespace

void KnotVector::validate() const {
    if (degree < 0 || degree > kMaxDegree) throw validation_error("knot vector: degree out of range");
    const int n = basis_count();
    if (n < degree + 1) throw validation_error("knot vector: need at least degree+1 bases");
    for (double t : knots)
        if (!std::isfinite(t)) throw validation_error("knot vector: non-finite knot");
    for (std::size_t i = 1; i < knots.size(); ++i)
        if (knots[i] < knots[i - 1]) throw validation_error("knot vector: knots must be nondecreasing");
    for (int i = 0; i <= degree; ++i) {
        if (knots[i] != 0.0) throw validation_error("knot vector: first degree+1 knots must be 0");
        if (knots[knots.size() - 1 - i] != 1.0)
            throw validation_error("knot vector: last degree+1 knots must be 1");
    }
    int run = 1;
    for (int i = degree + 1; i < n; ++i) {
        run = (knots[i] == knots[i - 1]) ? run + 1 : 1;
        if (run > degree) throw validation_error("knot vector: interior knot multiplicity exceeds degree");
    }
}

KnotVector make_clamped_uniform_knots(int n, int p) {
    if (p < 0 || p > kMaxDegree) throw validation_error("degree out of range");
    if (n <= p) throw validation_error("basis count must exceed degree");
    KnotVector kv;
    kv.degree = p;
    kv.knots.resize(n + p + 1);
    const int segments = n - p;
    for (int i = 0; i <= p; ++i) kv.knots[i] = 0.0;
    for (int i = 1; i < segments; ++i) kv.knots[p + i] = double(i) / double(segments);
    for (int i = 0; i <= p; ++i) kv.knots[n + i] = 1.0;
    return kv;
}

KnotVector make_symmetric_knots(int n, int p, int r) {
    if (r < 0 || r > n / 2) throw validation_error("symmetric degree must lie in [0, n/2]");
    return make_clamped_uniform_knots(n, p);
}

bool knot_intervals_symmetric(const KnotVector& kv, int r, double tol) {
    const int m = static_cast<int>(kv.knots.size());
    for (int i = 0; i < r + kv.degree && i + 1 < m && m - i - 2 >= 1; ++i) {
        double a = kv.knots[i + 1] - kv.knots[i];
        double b = kv.knots[m - i - 1] - kv.knots[m - i - 2];
        if (std::abs(a - b) > tol) return false;
    }
    return true;
}

int find_span(const KnotVector& kv, double u) {
    const int n = kv.basis_count();
    const int p = kv.degree;
    if (u >= kv.knots[n]) return n - 1; // right end: left-limit convention
    int low = p, high = n;
    int mid = (low + high) / 2;
    while (u < kv.knots[mid] || u >= kv.knots[mid + 1]) {
        if (u < kv.knots[mid]) high = mid;
        else low = mid;
        mid = (low + high) / 2;
    }
    return mid;
}

void basis_funs(const KnotVector& kv, int span, double u, double* out) {
    const int p = kv.degree;
    double left[kMaxDegree + 1], right[kMaxDegree + 1];
    out[0] = 1.0;
    for (int j = 1; j <= p; ++j) {
        left[j] = u - kv.knots[span + 1 - j];
        right[j] = kv.knots[span + j] - u;
        double saved = 0.0;
        for (int t = 0; t < j; ++t) {
            double temp = out[t] / (right[t + 1] + left[j - t]);
            out[t] = saved + right[t + 1] * temp;
            saved = left[j - t] * temp;
        }
        out[j] = saved;
    }
}

double basis_eval(const KnotVector& kv, int i, double u) {
    const int n = kv.basis_count();
    if (i < 0 || i >= n) throw validation_error("basis index out of range");
    if (u < 0.0 || u > 1.0) throw validation_error("parameter outside [0,1]");
    const int p = kv.degree;
    const int span = find_span(kv, u);
    if (i < span - p || i > span) return 0.0;
    double vals[kMaxDegree + 1];
    basis_funs(kv, span, u, vals);
    return vals[i - (span - p)];
}

double merged_basis_eval(const KnotVector& kv, int r, int i, double u) {
    const int n = kv.basis_count();
    if (r < 0 || r > n / 2) throw validation_error("symmetric degree must lie in [0, n/2]");
    if (i < 0 || i >= n - r) throw validation_error("merged basis index out of range");
    double v = basis_eval(kv, i, u);
    if (i < r) v += basis_eval(kv, n - 1 - i, u);
    return v;
}

double PeriodicBSpline::eval(double u, double v, double w) const {
    const double x[3] = {u, v, w};
    for (double c : x)
        if (!(c >= 0.0 && c <= 1.0)) throw validation_error("parameter outside [0,1]");
    int span[3];
    double basis[3][kMaxDegree + 1];
    for (int a = 0; a < 3; ++a) {
        span[a] = find_span(kv[a], x[a]);
        basis_funs(kv[a], span[a], x[a], basis[a]);
    }
    const auto n = basis_counts();
    const int pu = kv[0].degree, pv = kv[1].degree, pw = kv[2].degree;
    double sum = 0.0;
    for (int c = 0; c <= pw; ++c) {
        const int k = span[2] - pw + c;
        for (int b = 0; b <= pv; ++b) {
            const int j = span[1] - pv + b;
            const double pvw = basis[1][b] * basis[2][c];
            const double* row = &coeffs[std::int64_t(n[0]) * (j + std::int64_t(n[1]) * k)];
            double inner = 0.0;
            for (int a = 0; a <= pu; ++a) inner += basis[0][a] * row[span[0] - pu + a];
            sum += pvw * inner;
        }
    }
    return sum;
}

void PeriodicBSpline::validate() const {
    const char* axis_name[3] = {"u", "v", "w"};
    for (int a = 0; a < 3; ++a) {
        try {
            kv[a].validate();
        } catch (const Error& e) {
            throw validation_error(std::string("axis ") + axis_name[a] + ": " + e.what());
        }
        const int n = kv[a].basis_count();
        if (sym_degree[a] < 0 || sym_degree[a] > n / 2)
            throw validation_error(std::string("axis ") + axis_name[a] +
                                   ": symmetric degree must lie in [0, n/2]");
        if (!knot_intervals_symmetric(kv[a], sym_degree[a]))
            throw validation_error(std::string("axis ") + axis_name[a] +
                                   ": knot intervals are not mirror-symmetric");
    }
    const auto n = basis_counts();
    const std::int64_t expect = std::int64_t(n[0]) * n[1] * n[2];
    if (static_cast<std::int64_t>(coeffs.size()) != expect)
        throw validation_error("coefficient count does not match basis counts");
    for (double c : coeffs)
        if (!std::isfinite(c)) throw validation_error("non-finite coefficient");
    for (int k = 0; k < n[2]; ++k)
        for (int j = 0; j < n[1]; ++j)
            for (int i = 0; i < n[0]; ++i) {
                if (i < sym_degree[0] && coeffs[coeff_index(i, j, k)] !=
                                             coeffs[coeff_index(n[0] - 1 - i, j, k)])
                    throw validation_error("coefficient symmetry violated on axis u at index " +
                                           std::to_string(i));
                if (j < sym_degree[1] && coeffs[coeff_index(i, j, k)] !=
                                             coeffs[coeff_index(i, n[1] - 1 - j, k)])
                    throw validation_error("coefficient symmetry violated on axis v at index " +
                                           std::to_string(j));
                if (k < sym_degree[2] && coeffs[coeff_index(i, j, k)] !=
                                             coeffs[coeff_index(i, j, n[2] - 1 - k)])
                    throw validation_error("coefficient symmetry violated on axis w at index " +
                                           std::to_string(k));
            }
}

std::vector<double> expand_coefficients(const ReducedCoefficients& reduced,
                                        std::array<int, 3> n, std::array<int, 3> r) {
    for (int a = 0; a < 3; ++a) {
        if (r[a] < 0 || r[a] > n[a] / 2)
            throw validation_error("symmetric degree must lie in [0, n/2]");
        if (reduced.l[a] != n[a] - r[a])
            throw validation_error("reduced coefficient shape mismatch");
    }
    const std::int64_t want = std::int64_t(reduced.l[0]) * reduced.l[1] * reduced.l[2];
    if (static_cast<std::int64_t>(reduced.values.size()) != want)
        throw validation_error("reduced coefficient count mismatch");

    std::vector<double> full(std::int64_t(n[0]) * n[1] * n[2]);
    for (int k = 0; k < n[2]; ++k) {
        const int gk = reduced_index(k, n[2], r[2]);
        for (int j = 0; j < n[1]; ++j) {
            const int gj = reduced_index(j, n[1], r[1]);
            for (int i = 0; i < n[0]; ++i) {
                const int gi = reduced_index(i, n[0], r[0]);
                full[i + std::int64_t(n[0]) * (j + std::int64_t(n[1]) * k)] =
                    reduced.values[reduced.index(gi, gj, gk)];
            }
        }
    }
    return full;
}

ReducedCoefficients reduce_coefficients(const std::vector<double>& full,
                                        std::array<int, 3> n, std::array<int, 3> r) {
    for (int a = 0; a < 3; ++a)
        if (r[a] < 0 || r[a] > n[a] / 2)
            throw validation_error("symmetric degree must lie in [0, n/2]");
    if (static_cast<std::int64_t>(full.size()) != std::int64_t(n[0]) * n[1] * n[2])
        throw validation_error("full coefficient count mismatch");
    ReducedCoefficients red;
    red.l = {n[0] - r[0], n[1] - r[1], n[2] - r[2]};
    red.values.resize(std::int64_t(red.l[0]) * red.l[1] * red.l[2]);
    for (int k = 0; k < red.l[2]; ++k)
        for (int j = 0; j < red.l[1]; ++j)
            for (int i = 0; i < red.l[0]; ++i)
                red.values[red.index(i, j, k)] =
                    full[i + std::int64_t(n[0]) * (j + std::int64_t(n[1]) * k)];
    return red;
}

PeriodicBSpline make_symmetric_spline(std::array<int, 3> n, std::array<int, 3> p,
                                      std::array<int, 3> r, const ReducedCoefficients& reduced) {
    PeriodicBSpline s;
    for (int a = 0; a < 3; ++a) s.kv[a] = make_symmetric_knots(n[a], p[a], r[a]);
    s.sym_degree = r;
    s.coeffs = expand_coefficients(reduced, n, r);
    s.validate();
    return s;
}

std::array<double, 3> check_symmetry(const PeriodicBSpline& s, int samples) {
    if (samples < 1) throw validation_error("check_symmetry: samples must be >= 1");
    // Deterministic low-discrepancy coverage of the two free parameters.
    constexpr double g1 = 0.7548776662466927;
    constexpr double g2 = 0.5698402909980532;
    std::array<double, 3> worst = {0.0, 0.0, 0.0};
    for (int a = 0; a < 3; ++a) {
        const int n = s.kv[a].basis_count();
        const int r = s.sym_degree[a];
        if (r == 0) continue; // no mirror identity to check on this axis
        const bool full_range = r == n / 2;
        const double t_r = s.kv[a].knots[r];
        for (int q = 0; q < samples; ++q) {
            double ua;
            if (full_range)
                ua = samples == 1 ? 0.0 : double(q) / double(samples - 1);
            else if (t_r > 0.0)
                ua = t_r * double(q) / double(samples);
            else
                ua = 0.0;
            double b = std::fmod(0.5 + g1 * (q + 1), 1.0);
            double c = std::fmod(0.5 + g2 * (q + 1), 1.0);
            double x[3], y[3];
            x[a] = ua;
            y[a] = 1.0 - ua;
            x[(a + 1) % 3] = y[(a + 1) % 3] = b;
            x[(a + 2) % 3] = y[(a + 2) % 3] = c;
            double d = std::abs(s.eval(x[0], x[1], x[2]) - s.eval(y[0], y[1], y[2]));
            worst[a] = std::max(worst[a], d);
        }
    }
    return worst;
}

ScalarGrid sample_spline(const PeriodicBSpline& s, std::array<std::int64_t, 3> dims) {
    ScalarGrid out(dims, 0.0);
    // Per-axis tables: span plus the p+1 local basis values at each center.
    std::array<std::vector<int>, 3> spans;
    std::array<std::vector<double>, 3> table;
    for (int a = 0; a < 3; ++a) {
        const int p = s.kv[a].degree;
        spans[a].resize(dims[a]);
        table[a].resize(dims[a] * (p + 1));
        for (std::int64_t i = 0; i < dims[a]; ++i) {
            double x = (double(i) + 0.5) / double(dims[a]);
            spans[a][i] = find_span(s.kv[a], x);
            basis_funs(s.kv[a], spans[a][i], x, &table[a][i * (p + 1)]);
        }
    }
    const auto n = s.basis_counts();
    const int pu = s.kv[0].degree, pv = s.kv[1].degree, pw = s.kv[2].degree;
    const std::int64_t nx = dims[0], ny = dims[1];
    par::parallel_chunks(out.size(), 4096, [&](std::int64_t begin, std::int64_t end, int) {
        for (std::int64_t idx = begin; idx < end; ++idx) {
            const std::int64_t i = idx % nx;
            const std::int64_t j = (idx / nx) % ny;
            const std::int64_t k = idx / (nx * ny);
            const double* bu = &table[0][i * (pu + 1)];
            const double* bv = &table[1][j * (pv + 1)];
            const double* bw = &table[2][k * (pw + 1)];
            double sum = 0.0;
            for (int c = 0; c <= pw; ++c) {
                const int kk = spans[2][k] - pw + c;
                for (int b = 0; b <= pv; ++b) {
                    const int jj = spans[1][j] - pv + b;
                    const double pvw = bv[b] * bw[c];
                    const double* row =
                        &s.coeffs[std::int64_t(n[0]) * (jj + std::int64_t(n[1]) * kk)];
                    double inner = 0.0;
                    for (int a = 0; a <= pu; ++a) inner += bu[a] * row[spans[0][i] - pu + a];
                    sum += pvw * inner;
                }
            }
            out.data()[idx] = sum;
        }
    });
    return out;
}

std::string spline_to_json(const PeriodicBSpline& s) {
    nlohmann::json doc;
    doc["degrees"] = {s.kv[0].degree, s.kv[1].degree, s.kv[2].degree};
    doc["knots_u"] = s.kv[0].knots;
    doc["knots_v"] = s.kv[1].knots;
    doc["knots_w"] = s.kv[2].knots;
    doc["sym_degree"] = s.sym_degree;
    doc["coeffs"] = s.coeffs;
    return doc.dump();
}

PeriodicBSpline spline_from_json(const std::string& text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw validation_error(std::string("spline document is not valid JSON: ") + e.what());
    }
    PeriodicBSpline s;
    try {
        auto degrees = doc.at("degrees");
        const char* keys[3] = {"knots_u", "knots_v", "knots_w"};
        for (int a = 0; a < 3; ++a) {
            s.kv[a].degree = degrees.at(a).get<int>();
            s.kv[a].knots = doc.at(keys[a]).get<std::vector<double>>();
            s.sym_degree[a] = doc.at("sym_degree").at(a).get<int>();
        }
        s.coeffs = doc.at("coeffs").get<std::vector<double>>();
    } catch (const nlohmann::json::exception& e) {
        throw validation_error(std::string("spline document missing field: ") + e.what());
    }
    s.validate();
    return s;
}

void save_spline_file(const PeriodicBSpline& s, const std::string& path) {
    write_file_atomic(path, spline_to_json(s));
}

PeriodicBSpline load_spline_file(const std::string& path) {
    return spline_from_json(read_file_text(path));
}

} // namespace punit
