#pragma once

#include <Eigen/Dense>
#include <array>
#include <string>
#include <vector>

#include "parcelforge/grid.hpp"

namespace parcelforge {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Dense 4-D array, x fastest and t slowest (NIfTI order).
struct Volume4D {
    std::array<int, 4> dims{0, 0, 0, 0};
    std::array<double, 3> voxel_size{1.0, 1.0, 1.0};
    double tr_seconds = 1.0;
    std::vector<double> data;

    std::size_t cells_per_frame() const noexcept {
        return static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
    }
    double at(std::size_t cell, int t) const { return data[cell + cells_per_frame() * t]; }
    double& at(std::size_t cell, int t) { return data[cell + cells_per_frame() * t]; }
};

/// Masked voxel-by-time matrix X (V x T) with its grid geometry.
class BoldDataset {
public:
    BoldDataset(VolumeGrid grid, Matrix X, double tr_seconds);

    const VolumeGrid& grid() const noexcept { return grid_; }
    const Matrix& X() const noexcept { return X_; }
    double tr_seconds() const noexcept { return tr_; }
    Eigen::Index n_voxels() const noexcept { return X_.rows(); }
    Eigen::Index n_timepoints() const noexcept { return X_.cols(); }

private:
    VolumeGrid grid_;
    Matrix X_;
    double tr_;
};

/// Task design Y (T x N_r), one named column per regressor.
struct DesignMatrix {
    Matrix Y;
    std::vector<std::string> names;

    DesignMatrix() = default;
    DesignMatrix(Matrix y, std::vector<std::string> regressor_names);
    Eigen::Index n_regressors() const noexcept { return Y.cols(); }
};

enum class MaskRule { nonzero_variance, explicit_mask };

/// Flatten a 4-D volume into a dataset. With MaskRule::explicit_mask the
/// `mask` argument selects cells; otherwise cells whose time series is not
/// constant are kept.
BoldDataset mask_and_flatten(const Volume4D& volume, MaskRule rule = MaskRule::nonzero_variance,
                             const std::vector<std::uint8_t>& mask = {});

/// Inverse of mask_and_flatten: masked cells get the dataset values, others 0.
Volume4D scatter_to_volume(const BoldDataset& data);

Matrix center_rows(const Matrix& X);

struct NormalizedRows {
    Matrix X0;
    std::vector<std::size_t> zero_rows;
};

/// Scale every row to unit Euclidean norm; all-zero rows stay zero and are listed.
NormalizedRows unit_normalize_rows(const Matrix& Xc);

}  // namespace parcelforge
