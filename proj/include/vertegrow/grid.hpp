#pragma once

#include "vertegrow/error.hpp"

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace vertegrow {

// ---------------------------------------------------------------------------
// Dims / VoxelIndex
// ---------------------------------------------------------------------------

/// Grid extent: rows (i), cols (j), slices (z). Storage order is z outermost,
/// then i, then j innermost.
struct Dims {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::size_t slices = 0;

    [[nodiscard]] constexpr std::size_t size() const noexcept { return rows * cols * slices; }
    [[nodiscard]] constexpr std::size_t slice_size() const noexcept { return rows * cols; }
    [[nodiscard]] constexpr bool valid() const noexcept { return rows > 0 && cols > 0 && slices > 0; }

    friend constexpr bool operator==(const Dims&, const Dims&) = default;
};

inline std::string to_string(const Dims& d) {
    return std::to_string(d.rows) + "x" + std::to_string(d.cols) + "x" + std::to_string(d.slices);
}

struct VoxelIndex {
    std::size_t i = 0;
    std::size_t j = 0;
    std::size_t z = 0;

    friend constexpr bool operator==(const VoxelIndex&, const VoxelIndex&) = default;
};

[[nodiscard]] constexpr bool contains(const Dims& d, const VoxelIndex& v) noexcept {
    return v.i < d.rows && v.j < d.cols && v.z < d.slices;
}

[[nodiscard]] constexpr std::size_t linear_index(const Dims& d, std::size_t i, std::size_t j,
                                                 std::size_t z) noexcept {
    return (z * d.rows + i) * d.cols + j;
}

[[nodiscard]] constexpr VoxelIndex voxel_index(const Dims& d, std::size_t linear) noexcept {
    const std::size_t j = linear % d.cols;
    const std::size_t rest = linear / d.cols;
    return {rest % d.rows, j, rest / d.rows};
}

inline void require_same_dims(const Dims& a, const Dims& b, const char* what) {
    if (!(a == b)) {
        throw DimensionError(std::string(what) + ": dimension mismatch (" + to_string(a) + " vs " +
                             to_string(b) + ")");
    }
}

// ---------------------------------------------------------------------------
// Grid
// ---------------------------------------------------------------------------

/// Dense 3D array with the library's canonical storage order.
template <class T>
class Grid {
public:
    using value_type = T;

    Grid() = default;

    explicit Grid(Dims dims, T fill = T{}) : dims_(dims), data_(dims.size(), fill) {
        if (!dims.valid()) {
            throw DimensionError("grid dimensions must all be >= 1, got " + to_string(dims));
        }
    }

    Grid(Dims dims, std::vector<T> data) : dims_(dims), data_(std::move(data)) {
        if (!dims.valid()) {
            throw DimensionError("grid dimensions must all be >= 1, got " + to_string(dims));
        }
        if (data_.size() != dims.size()) {
            throw DimensionError("grid data length " + std::to_string(data_.size()) +
                                 " does not match " + to_string(dims));
        }
    }

    [[nodiscard]] const Dims& dims() const noexcept { return dims_; }
    [[nodiscard]] std::size_t size() const noexcept { return data_.size(); }
    [[nodiscard]] bool empty() const noexcept { return data_.empty(); }

    [[nodiscard]] T& at(std::size_t i, std::size_t j, std::size_t z) noexcept {
        return data_[linear_index(dims_, i, j, z)];
    }
    [[nodiscard]] const T& at(std::size_t i, std::size_t j, std::size_t z) const noexcept {
        return data_[linear_index(dims_, i, j, z)];
    }
    [[nodiscard]] T& at(const VoxelIndex& v) noexcept { return at(v.i, v.j, v.z); }
    [[nodiscard]] const T& at(const VoxelIndex& v) const noexcept { return at(v.i, v.j, v.z); }

    [[nodiscard]] T& operator[](std::size_t n) noexcept { return data_[n]; }
    [[nodiscard]] const T& operator[](std::size_t n) const noexcept { return data_[n]; }

    [[nodiscard]] std::span<T> values() noexcept { return data_; }
    [[nodiscard]] std::span<const T> values() const noexcept { return data_; }

    /// One z-slice, row-major.
    [[nodiscard]] std::span<const T> slice(std::size_t z) const noexcept {
        return std::span<const T>(data_).subspan(z * dims_.slice_size(), dims_.slice_size());
    }

    void fill(T value) { std::fill(data_.begin(), data_.end(), value); }

    friend bool operator==(const Grid&, const Grid&) = default;

private:
    Dims dims_{};
    std::vector<T> data_;
};

using Label = std::int32_t;

/// Per-voxel labels: -1 background, 0 unlabeled, 1..K foreground classes.
using LabelField = Grid<Label>;
using WeightField = Grid<double>;
/// Binary volume; nonzero means "in the set".
using Mask = Grid<std::uint8_t>;

inline constexpr Label kBackground = -1;
inline constexpr Label kUnlabeled = 0;
inline constexpr Label kForeground = 1;

[[nodiscard]] inline std::size_t count(const Mask& m) {
    return static_cast<std::size_t>(
        std::count_if(m.values().begin(), m.values().end(), [](std::uint8_t v) { return v != 0; }));
}

} // namespace vertegrow
