#include "punit/dtm.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "punit/errors.hpp"
#include "punit/parallel.hpp"

namespace punit {

namespace {

struct Candidate {
    std::int64_t d2;
    std::int64_t index;
    bool operator<(const Candidate& o) const {
        return d2 != o.d2 ? d2 < o.d2 : index < o.index;
    }
};

// Collects solid voxels on the Chebyshev shell of radius r around (qi,qj,qk).
void scan_shell(const VoxelGrid& g, std::int64_t qi, std::int64_t qj, std::int64_t qk,
                std::int64_t r, std::vector<Candidate>& out) {
    const std::int64_t nx = g.nx(), ny = g.ny(), nz = g.nz();
    auto visit = [&](std::int64_t i, std::int64_t j, std::int64_t k) {
        if (i < 0 || i >= nx || j < 0 || j >= ny || k < 0 || k >= nz) return;
        if (!g.at(i, j, k)) return;
        std::int64_t di = i - qi, dj = j - qj, dk = k - qk;
        out.push_back({di * di + dj * dj + dk * dk, g.index(i, j, k)});
    };
    if (r == 0) {
        visit(qi, qj, qk);
        return;
    }
    for (std::int64_t dj = -r; dj <= r; ++dj)
        for (std::int64_t dk = -r; dk <= r; ++dk) {
            visit(qi - r, qj + dj, qk + dk);
            visit(qi + r, qj + dj, qk + dk);
        }
    for (std::int64_t di = -r + 1; di <= r - 1; ++di)
        for (std::int64_t dk = -r; dk <= r; ++dk) {
            visit(qi + di, qj - r, qk + dk);
            visit(qi + di, qj + r, qk + dk);
        }
    for (std::int64_t di = -r + 1; di <= r - 1; ++di)
        for (std::int64_t dj = -r + 1; dj <= r - 1; ++dj) {
            visit(qi + di, qj + dj, qk - r);
            visit(qi + di, qj + dj, qk + r);
        }
}

} // namespace

ScalarGrid dtm_field(const VoxelGrid& g, double m) {
    if (!(m > 0)) throw validation_error("dtm: m must be positive");
    const std::int64_t k = static_cast<std::int64_t>(std::ceil(m));
    if (g.solid_count() < k)
        throw validation_error("dtm: grid has fewer solid voxels than ceil(m)");

    const std::int64_t rmax = std::max({g.nx(), g.ny(), g.nz()});
    ScalarGrid out(g.dims(), 0.0);
    const std::int64_t nx = g.nx(), ny = g.ny();

    par::parallel_chunks(g.size(), 4096, [&](std::int64_t begin, std::int64_t end, int) {
        std::vector<Candidate> cands;
        for (std::int64_t idx = begin; idx < end; ++idx) {
            std::int64_t qi = idx % nx;
            std::int64_t qj = (idx / nx) % ny;
            std::int64_t qk = idx / (nx * ny);
            cands.clear();
            // Expand shells until the k-th best squared distance beats
            // anything a farther shell could contain: a voxel at Chebyshev
            // radius > r has squared Euclidean distance >= (r+1)^2, and ties
            // resolve by index, so strict inequality is required.
            for (std::int64_t r = 0; r <= rmax; ++r) {
                scan_shell(g, qi, qj, qk, r, cands);
                if (static_cast<std::int64_t>(cands.size()) >= k) {
                    std::nth_element(cands.begin(), cands.begin() + (k - 1), cands.end());
                    if (cands[k - 1].d2 < (r + 1) * (r + 1)) break;
                }
            }
            std::sort(cands.begin(), cands.begin() + k);
            std::int64_t head = 0;
            for (std::int64_t j = 0; j < k - 1; ++j) head += cands[j].d2;
            double sum = double(head) + (m - double(k) + 1.0) * double(cands[k - 1].d2);
            out.data()[idx] = std::sqrt(sum / m);
        }
    });
    return out;
}

ScalarGrid manhattan_field(const VoxelGrid& g) {
    if (g.solid_count() == 0) throw validation_error("manhattan field: grid has no solid voxels");
    const std::int64_t n = g.size();
    const std::int64_t nx = g.nx(), ny = g.ny(), nz = g.nz();
    std::vector<std::int64_t> dist(n, -1);
    std::vector<std::int64_t> frontier, next;
    for (std::int64_t i = 0; i < n; ++i)
        if (g.data()[i]) {
            dist[i] = 0;
            frontier.push_back(i);
        }
    std::int64_t level = 0;
    while (!frontier.empty()) {
        ++level;
        next.clear();
        for (std::int64_t idx : frontier) {
            std::int64_t i = idx % nx, j = (idx / nx) % ny, k = idx / (nx * ny);
            auto relax = [&](std::int64_t ii, std::int64_t jj, std::int64_t kk) {
                if (ii < 0 || ii >= nx || jj < 0 || jj >= ny || kk < 0 || kk >= nz) return;
                std::int64_t t = ii + nx * (jj + ny * kk);
                if (dist[t] < 0) {
                    dist[t] = level;
                    next.push_back(t);
                }
            };
            relax(i - 1, j, k);
            relax(i + 1, j, k);
            relax(i, j - 1, k);
            relax(i, j + 1, k);
            relax(i, j, k - 1);
            relax(i, j, k + 1);
        }
        frontier.swap(next);
    }
    ScalarGrid out(g.dims(), 0.0);
    for (std::int64_t i = 0; i < n; ++i) out.data()[i] = double(dist[i]);
    return out;
}

} // namespace punit
