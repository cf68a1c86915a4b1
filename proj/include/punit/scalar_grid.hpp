#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace punit {

// Dense double field on a voxel grid, row-major with x fastest.
class ScalarGrid {
  public:
    ScalarGrid() = default;
    ScalarGrid(std::array<std::int64_t, 3> dims, double fill);

    std::int64_t nx() const { return dims_[0]; }
    std::int64_t ny() const { return dims_[1]; }
    std::int64_t nz() const { return dims_[2]; }
    std::array<std::int64_t, 3> dims() const { return dims_; }
    std::int64_t size() const { return static_cast<std::int64_t>(data_.size()); }

    std::int64_t index(std::int64_t i, std::int64_t j, std::int64_t k) const {
        return i + dims_[0] * (j + dims_[1] * k);
    }
    double at(std::int64_t i, std::int64_t j, std::int64_t k) const {
        return data_[index(i, j, k)];
    }
    void set(std::int64_t i, std::int64_t j, std::int64_t k, double v) {
        data_[index(i, j, k)] = v;
    }

    const std::vector<double>& data() const { return data_; }
    std::vector<double>& data() { return data_; }

    bool operator==(const ScalarGrid& o) const = default;

  private:
    std::array<std::int64_t, 3> dims_ = {0, 0, 0};
    std::vector<double> data_;
};

std::vector<std::uint8_t> write_sgrid(const ScalarGrid& g);
ScalarGrid read_sgrid(const std::vector<std::uint8_t>& bytes);
void save_scalar_file(const ScalarGrid& g, const std::string& path);
ScalarGrid load_scalar_file(const std::string& path);

} // namespace punit
