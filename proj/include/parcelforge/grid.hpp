#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

namespace parcelforge {

using Coord = std::array<int, 3>;

/// 3-D voxel grid with a brain mask.
///
/// Masked cells are numbered 0..V-1 in ascending column-major linear index
/// order (x fastest). That numbering is the row order of every V-row matrix
/// in the library.
class VolumeGrid {
public:
    VolumeGrid() = default;
    VolumeGrid(Coord dims, std::vector<std::uint8_t> mask);

    static VolumeGrid full(Coord dims);

    const Coord& dims() const noexcept { return dims_; }
    std::size_t n_cells() const noexcept { return mask_.size(); }
    std::size_t n_voxels() const noexcept { return cell_of_row_.size(); }
    const std::vector<std::uint8_t>& mask() const noexcept { return mask_; }

    std::size_t linear_index(const Coord& c) const noexcept {
        return static_cast<std::size_t>(c[0]) +
               static_cast<std::size_t>(dims_[0]) *
                   (static_cast<std::size_t>(c[1]) + static_cast<std::size_t>(dims_[1]) * c[2]);
    }
    Coord coord_of_cell(std::size_t cell) const noexcept;
    bool in_bounds(const Coord& c) const noexcept;

    std::size_t cell_of_row(std::size_t row) const { return cell_of_row_.at(row); }
    Coord coord_of_row(std::size_t row) const { return coord_of_cell(cell_of_row(row)); }

    /// Row of a masked cell, or -1 when the cell is outside the mask.
    std::int64_t row_of_cell(std::size_t cell) const { return row_of_cell_.at(cell); }
    std::int64_t row_at(const Coord& c) const {
        return in_bounds(c) ? row_of_cell_[linear_index(c)] : -1;
    }

    /// Face neighbours (6-connectivity) of a row, restricted to the mask.
    std::vector<std::size_t> neighbours(std::size_t row) const;

    bool operator==(const VolumeGrid& o) const { return dims_ == o.dims_ && mask_ == o.mask_; }

private:
    Coord dims_{0, 0, 0};
    std::vector<std::uint8_t> mask_;
    std::vector<std::int64_t> row_of_cell_;
    std::vector<std::size_t> cell_of_row_;
};

double grid_distance(const Coord& a, const Coord& b) noexcept;

}  // namespace parcelforge
