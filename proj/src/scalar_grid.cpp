#include "punit/scalar_grid.hpp"

#include <cstring>
#include <limits>

#include "punit/errors.hpp"
#include "punit/io_util.hpp"

namespace punit {

ScalarGrid::ScalarGrid(std::array<std::int64_t, 3> dims, double fill) : dims_(dims) {
    for (auto d : dims)
        if (d < 1) throw validation_error("scalar grid dimension must be >= 1");
    const std::int64_t limit = std::numeric_limits<std::int64_t>::max();
    if (dims[0] > limit / dims[1] || dims[0] * dims[1] > limit / dims[2])
        throw validation_error("scalar grid size overflows");
    data_.assign(dims[0] * dims[1] * dims[2], fill);
}

namespace {

constexpr std::array<std::uint8_t, 8> kSgridMagic = {'S', 'G', 'R', 'I', 'D', 0, 0, 1};

void push_u32_le(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(v & 0xff);
    out.push_back((v >> 8) & 0xff);
    out.push_back((v >> 16) & 0xff);
    out.push_back((v >> 24) & 0xff);
}

std::uint32_t read_u32_le(const std::uint8_t* p) {
    return std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) | (std::uint32_t(p[2]) << 16) |
           (std::uint32_t(p[3]) << 24);
}

} // namespace

std::vector<std::uint8_t> write_sgrid(const ScalarGrid& g) {
    std::vector<std::uint8_t> out(kSgridMagic.begin(), kSgridMagic.end());
    push_u32_le(out, static_cast<std::uint32_t>(g.nx()));
    push_u32_le(out, static_cast<std::uint32_t>(g.ny()));
    push_u32_le(out, static_cast<std::uint32_t>(g.nz()));
    std::size_t base = out.size();
    out.resize(base + 8 * g.size());
    for (std::int64_t i = 0; i < g.size(); ++i) {
        std::uint64_t bits;
        std::memcpy(&bits, &g.data()[i], 8);
        for (int b = 0; b < 8; ++b)
            out[base + 8 * i + b] = static_cast<std::uint8_t>((bits >> (8 * b)) & 0xff);
    }
    return out;
}

ScalarGrid read_sgrid(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < 20 || !std::equal(kSgridMagic.begin(), kSgridMagic.end(), bytes.begin()))
        throw io_error(".sgrid: bad magic");
    std::array<std::int64_t, 3> dims = {read_u32_le(&bytes[8]), read_u32_le(&bytes[12]),
                                        read_u32_le(&bytes[16])};
    for (auto d : dims)
        if (d < 1) throw io_error(".sgrid: zero dimension");
    const std::int64_t n = dims[0] * dims[1] * dims[2];
    if (static_cast<std::int64_t>(bytes.size()) != 20 + 8 * n)
        throw io_error(".sgrid: payload size mismatch (truncated or trailing bytes)");
    ScalarGrid g(dims, 0.0);
    for (std::int64_t i = 0; i < n; ++i) {
        std::uint64_t bits = 0;
        for (int b = 0; b < 8; ++b)
            bits |= std::uint64_t(bytes[20 + 8 * i + b]) << (8 * b);
        std::memcpy(&g.data()[i], &bits, 8);
    }
    return g;
}

void save_scalar_file(const ScalarGrid& g, const std::string& path) {
    write_file_atomic(path, write_sgrid(g));
}

ScalarGrid load_scalar_file(const std::string& path) {
    return read_sgrid(read_file_bytes(path));
}

} // namespace punit
