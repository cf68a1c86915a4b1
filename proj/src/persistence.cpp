#include "punit/persistence.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "punit/errors.hpp"

namespace punit {

namespace {

struct UnionFind {
    std::vector<std::int64_t> parent;

    explicit UnionFind(std::int64_t n) : parent(n, -1) {}

    bool active(std::int64_t v) const { return parent[v] >= 0; }

    std::int64_t find(std::int64_t v) {
        std::int64_t root = v;
        while (parent[root] != root) root = parent[root];
        while (parent[v] != root) {
            std::int64_t next = parent[v];
            parent[v] = root;
            v = next;
        }
        return root;
    }
};

std::array<double, 3> param_of(std::int64_t idx, const ScalarGrid& f) {
    const std::int64_t i = idx % f.nx();
    const std::int64_t j = (idx / f.nx()) % f.ny();
    const std::int64_t k = idx / (f.nx() * f.ny());
    return {(i + 0.5) / double(f.nx()), (j + 0.5) / double(f.ny()), (k + 0.5) / double(f.nz())};
}

} // namespace

std::vector<PersistencePair> persistence_0d(const ScalarGrid& f) {
    const std::int64_t n = f.size();
    if (n == 0) throw validation_error("persistence: empty field");
    const auto& val = f.data();
    for (double v : val)
        if (!std::isfinite(v)) throw validation_error("persistence: non-finite value");

    std::vector<std::int64_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::int64_t a, std::int64_t b) {
        return val[a] != val[b] ? val[a] < val[b] : a < b;
    });

    UnionFind uf(n);
    // Birth record per component root.
    std::vector<double> birth_val(n);
    std::vector<std::int64_t> birth_vtx(n);
    std::vector<PersistencePair> pairs;

    const std::int64_t nx = f.nx(), ny = f.ny(), nz = f.nz();
    std::int64_t nbrs[6];
    for (std::int64_t v : order) {
        const std::int64_t i = v % nx, j = (v / nx) % ny, k = v / (nx * ny);
        int count = 0;
        if (i > 0) nbrs[count++] = v - 1;
        if (i + 1 < nx) nbrs[count++] = v + 1;
        if (j > 0) nbrs[count++] = v - nx;
        if (j + 1 < ny) nbrs[count++] = v + nx;
        if (k > 0) nbrs[count++] = v - nx * ny;
        if (k + 1 < nz) nbrs[count++] = v + nx * ny;

        std::int64_t host = -1; // oldest adjacent component
        for (int t = 0; t < count; ++t) {
            if (!uf.active(nbrs[t])) continue;
            std::int64_t root = uf.find(nbrs[t]);
            if (host < 0) {
                host = root;
                continue;
            }
            if (root == host) continue;
            // Elder rule: larger (birth value, birth vertex) dies here.
            std::int64_t younger = root, elder = host;
            if (std::pair(birth_val[root], birth_vtx[root]) <
                std::pair(birth_val[host], birth_vtx[host]))
                std::swap(younger, elder);
            PersistencePair p;
            p.birth = birth_val[younger];
            p.death = val[v];
            p.birth_vertex = birth_vtx[younger];
            p.merge_vertex = v;
            p.birth_param = param_of(p.birth_vertex, f);
            p.merge_param = param_of(v, f);
            pairs.push_back(p);
            uf.parent[younger] = elder;
            host = elder;
        }
        if (host < 0) {
            uf.parent[v] = v;
            birth_val[v] = val[v];
            birth_vtx[v] = v;
        } else {
            uf.parent[v] = host;
        }
    }

    // The grid is one box, so exactly one component survives.
    PersistencePair essential;
    std::int64_t root = uf.find(order[0]);
    essential.birth = birth_val[root];
    essential.death = std::numeric_limits<double>::infinity();
    essential.birth_vertex = birth_vtx[root];
    essential.birth_param = param_of(essential.birth_vertex, f);
    pairs.push_back(essential);

    std::sort(pairs.begin(), pairs.end(), [](const PersistencePair& a, const PersistencePair& b) {
        if (a.death != b.death) return a.death > b.death;
        if (a.birth != b.birth) return a.birth < b.birth;
        return a.birth_vertex < b.birth_vertex;
    });
    return pairs;
}

std::int64_t components_at(const std::vector<PersistencePair>& pairs, double t) {
    std::int64_t count = 0;
    for (const auto& p : pairs)
        if (p.birth <= t && t < p.death) ++count;
    return count;
}

void ConnectivityConfig::validate() const {
    if (grid < 8) throw validation_error("connectivity: grid resolution must be >= 8");
    if (!(step > 0)) throw validation_error("connectivity: step must be positive");
    if (max_iters < 0) throw validation_error("connectivity: max_iters must be >= 0");
}

namespace {

LossResult loss_from_samples(const PeriodicBSpline& s, const ScalarGrid& samples) {
    auto pairs = persistence_0d(samples);
    const auto n = s.basis_counts();
    const auto r = s.sym_degree;

    LossResult res;
    res.grad.l = {n[0] - r[0], n[1] - r[1], n[2] - r[2]};
    res.grad.values.assign(std::int64_t(res.grad.l[0]) * res.grad.l[1] * res.grad.l[2], 0.0);
    if (pairs.size() < 2) {
        res.loss = -std::numeric_limits<double>::infinity();
        return res;
    }
    res.loss = pairs[1].death;
    res.merge_param = pairs[1].merge_param;
    res.tie_warning = pairs.size() >= 3 && pairs[1].death - pairs[2].death <= 1e-12;

    // The loss is the field value at the merge vertex, which is linear in
    // the coefficients, so the gradient is the local basis products
    // scattered onto the reduced (mirror-free) indices.
    const auto& mp = pairs[1].merge_param;
    int span[3];
    double basis[3][11];
    for (int a = 0; a < 3; ++a) {
        span[a] = find_span(s.kv[a], mp[a]);
        basis_funs(s.kv[a], span[a], mp[a], basis[a]);
    }
    for (int c = 0; c <= s.kv[2].degree; ++c) {
        int gk = reduced_index(span[2] - s.kv[2].degree + c, n[2], r[2]);
        for (int b = 0; b <= s.kv[1].degree; ++b) {
            int gj = reduced_index(span[1] - s.kv[1].degree + b, n[1], r[1]);
            double pvw = basis[1][b] * basis[2][c];
            for (int a = 0; a <= s.kv[0].degree; ++a) {
                int gi = reduced_index(span[0] - s.kv[0].degree + a, n[0], r[0]);
                res.grad.values[res.grad.index(gi, gj, gk)] += basis[0][a] * pvw;
            }
        }
    }
    return res;
}

double solid_fraction(const ScalarGrid& samples) {
    std::int64_t solid = 0;
    for (double v : samples.data())
        if (v <= 0.0) ++solid;
    return double(solid) / double(samples.size());
}

} // namespace

LossResult loss_and_grad(const PeriodicBSpline& s, const ConnectivityConfig& cfg) {
    cfg.validate();
    s.validate();
    auto samples = sample_spline(s, {cfg.grid, cfg.grid, cfg.grid});
    return loss_from_samples(s, samples);
}

ConnectivityResult optimize_connectivity(const PeriodicBSpline& s, const ConnectivityConfig& cfg) {
    cfg.validate();
    s.validate();
    const auto n = s.basis_counts();
    const auto r = s.sym_degree;

    ConnectivityResult out;
    out.spline = s;
    ReducedCoefficients red = reduce_coefficients(s.coeffs, n, r);

    double step = cfg.step;
    double prev_loss = std::numeric_limits<double>::infinity();
    for (int iter = 0;; ++iter) {
        auto samples = sample_spline(out.spline, {cfg.grid, cfg.grid, cfg.grid});
        LossResult lr = loss_from_samples(out.spline, samples);
        out.trace.push_back({iter, lr.loss, solid_fraction(samples)});
        if (lr.loss < 0.0) {
            out.converged = true;
            out.iterations = iter;
            return out;
        }
        if (iter >= cfg.max_iters) {
            out.converged = false;
            out.iterations = iter;
            return out;
        }
        if (lr.loss > prev_loss) step *= 0.5;
        prev_loss = lr.loss;
        for (std::size_t t = 0; t < red.values.size(); ++t)
            red.values[t] -= step * lr.grad.values[t];
        out.spline.coeffs = expand_coefficients(red, n, r);
    }
}

} // namespace punit
