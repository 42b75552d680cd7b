#include "parcelforge/grid.hpp"

#include <cmath>
#include <string>

#include "parcelforge/error.hpp"

namespace parcelforge {

VolumeGrid::VolumeGrid(Coord dims, std::vector<std::uint8_t> mask) : dims_(dims), mask_(std::move(mask)) {
    for (int d : dims_)
        if (d <= 0) throw ParameterError("grid dimensions must be positive");
    const std::size_t cells = static_cast<std::size_t>(dims_[0]) * dims_[1] * dims_[2];
    if (mask_.size() != cells)
        throw ShapeError("mask has " + std::to_string(mask_.size()) + " cells, grid has " + std::to_string(cells));
    row_of_cell_.assign(cells, -1);
    for (std::size_t c = 0; c < cells; ++c) {
        if (!mask_[c]) continue;
        row_of_cell_[c] = static_cast<std::int64_t>(cell_of_row_.size());
        cell_of_row_.push_back(c);
    }
}

VolumeGrid VolumeGrid::full(Coord dims) {
    for (int d : dims)
        if (d <= 0) throw ParameterError("grid dimensions must be positive");
    return VolumeGrid(dims, std::vector<std::uint8_t>(static_cast<std::size_t>(dims[0]) * dims[1] * dims[2], 1));
}

Coord VolumeGrid::coord_of_cell(std::size_t cell) const noexcept {
    const auto nx = static_cast<std::size_t>(dims_[0]);
    const auto ny = static_cast<std::size_t>(dims_[1]);
    return {static_cast<int>(cell % nx), static_cast<int>((cell / nx) % ny), static_cast<int>(cell / (nx * ny))};
}

bool VolumeGrid::in_bounds(const Coord& c) const noexcept {
    for (int a = 0; a < 3; ++a)
        if (c[a] < 0 || c[a] >= dims_[a]) return false;
    return true;
}

std::vector<std::size_t> VolumeGrid::neighbours(std::size_t row) const {
    static constexpr int offsets[6][3] = {{-1, 0, 0}, {1, 0, 0}, {0, -1, 0}, {0, 1, 0}, {0, 0, -1}, {0, 0, 1}};
    const Coord c = coord_of_row(row);
    std::vector<std::size_t> out;
    for (const auto& o : offsets) {
        const std::int64_t r = row_at({c[0] + o[0], c[1] + o[1], c[2] + o[2]});
        if (r >= 0) out.push_back(static_cast<std::size_t>(r));
    }
    return out;
}

double grid_distance(const Coord& a, const Coord& b) noexcept {
    double s = 0.0;
    for (int k = 0; k < 3; ++k) {
        const double d = static_cast<double>(a[k] - b[k]);
        s += d * d;
    }
    return std::sqrt(s);
}

}  // namespace parcelforge
