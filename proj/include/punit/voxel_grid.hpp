#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace punit {

// Binary occupancy grid. Layout is row-major with x fastest:
// index(i,j,k) = i + nx*(j + ny*k). All modules share this layout.
class VoxelGrid {
public:
    VoxelGrid() = default;
    VoxelGrid(std::array<std::int64_t, 3> dims, std::uint8_t fill);

    std::int64_t nx() const { return dims_[0]; }
    std::int64_t ny() const { return dims_[1]; }
    std::int64_t nz() const { return dims_[2]; }
    std::array<std::int64_t, 3> dims() const { return dims_; }
    std::int64_t size() const { return dims_[0] * dims_[1] * dims_[2]; }

    std::int64_t index(std::int64_t i, std::int64_t j, std::int64_t k) const {
        return i + dims_[0] * (j + dims_[1] * k);
    }

    std::uint8_t at(std::int64_t i, std::int64_t j, std::int64_t k) const {
        return data_[index(i, j, k)];
    }
    void set(std::int64_t i, std::int64_t j, std::int64_t k, std::uint8_t v) {
        data_[index(i, j, k)] = v;
    }

    const std::vector<std::uint8_t>& data() const { return data_; }
    std::vector<std::uint8_t>& data() { return data_; }

    std::int64_t solid_count() const;

    bool operator==(const VoxelGrid& other) const {
        return dims_ == other.dims_ && data_ == other.data_;
    }

private:
    std::array<std::int64_t, 3> dims_{0, 0, 0};
    std::vector<std::uint8_t> data_;
};

enum class BoolOp { unite, intersect, subtract };

VoxelGrid boolean(const VoxelGrid& a, const VoxelGrid& b, BoolOp op);

// CSG primitives in normalized [0,1]^3 coordinates.
struct Primitive {
    enum class Kind { box, bar, sphere };
    Kind kind = Kind::box;
    // box: lo/hi corners. bar: axis (0..2), center = cross-section center in the
    // two remaining axes (stored in lo[0], lo[1]), radius. sphere: center (lo), radius.
    std::array<double, 3> lo{0, 0, 0};
    std::array<double, 3> hi{1, 1, 1};
    int axis = 0;
    double radius = 0;

    static Primitive box(std::array<double, 3> lo, std::array<double, 3> hi);
    static Primitive bar(int axis, double c1, double c2, double radius);
    static Primitive sphere(std::array<double, 3> center, double radius);

    bool contains(double x, double y, double z) const;
    void validate() const;
};

// A voxel is solid iff its cell center ((i+0.5)/nx, ...) lies inside the primitive.
VoxelGrid rasterize(const Primitive& p, std::array<std::int64_t, 3> dims);

struct CsgStep {
    Primitive primitive;
    BoolOp op = BoolOp::unite;
};

// Applies steps left to right starting from an all-void grid.
VoxelGrid run_csg(const std::vector<CsgStep>& steps, std::array<std::int64_t, 3> dims);

std::vector<CsgStep> parse_csg_script(const std::string& json_text);

// .vgrid binary format: 8-byte magic "VGRID\0\0\1", nx/ny/nz as u32 LE,
// then ceil(n/8) payload bytes, bits packed x-fastest, LSB-first.
std::vector<std::uint8_t> write_vgrid(const VoxelGrid& g);
VoxelGrid read_vgrid(const std::vector<std::uint8_t>& bytes);

// Plain-text alternative: "nx ny nz" on the first line, then 0/1 tokens.
std::string write_vgrid_text(const VoxelGrid& g);
VoxelGrid read_vgrid_text(const std::string& text);

void save_voxel_file(const VoxelGrid& g, const std::string& path);
VoxelGrid load_voxel_file(const std::string& path);

} // namespace punit
