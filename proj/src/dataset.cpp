#include "parcelforge/dataset.hpp"

#include <cmath>

#include "parcelforge/error.hpp"

namespace parcelforge {

BoldDataset::BoldDataset(VolumeGrid grid, Matrix X, double tr_seconds)
    : grid_(std::move(grid)), X_(std::move(X)), tr_(tr_seconds) {
    if (static_cast<std::size_t>(X_.rows()) != grid_.n_voxels())
        throw ShapeError("dataset has " + std::to_string(X_.rows()) + " rows but the mask has " +
                         std::to_string(grid_.n_voxels()) + " voxels");
    if (X_.cols() < 3) throw ShapeError("dataset needs at least 3 time points, got " + std::to_string(X_.cols()));
    if (!(tr_seconds > 0.0)) throw ParameterError("tr_seconds must be positive");
    if (!X_.allFinite()) throw FormatError("dataset contains non-finite values");
}

DesignMatrix::DesignMatrix(Matrix y, std::vector<std::string> regressor_names)
    : Y(std::move(y)), names(std::move(regressor_names)) {
    if (static_cast<Eigen::Index>(names.size()) != Y.cols())
        throw ShapeError("design has " + std::to_string(Y.cols()) + " columns but " + std::to_string(names.size()) +
                         " names");
    for (Eigen::Index k = 0; k < Y.cols(); ++k) {
        if (Y.col(k).maxCoeff() == Y.col(k).minCoeff())
            throw DegenerateError("design regressor '" + names[static_cast<std::size_t>(k)] + "' is constant");
    }
}

BoldDataset mask_and_flatten(const Volume4D& volume, MaskRule rule, const std::vector<std::uint8_t>& mask) {
    const int T = volume.dims[3];
    if (T < 3) throw ShapeError("volume needs at least 3 frames, got " + std::to_string(T));
    const std::size_t cells = volume.cells_per_frame();
    if (volume.data.size() != cells * static_cast<std::size_t>(T)) throw ShapeError("volume data size mismatch");

    std::vector<std::uint8_t> keep(cells, 0);
    if (rule == MaskRule::explicit_mask) {
        if (mask.size() != cells) throw ShapeError("explicit mask size does not match the volume");
        keep = mask;
    } else {
        for (std::size_t c = 0; c < cells; ++c) {
            const double first = volume.at(c, 0);
            for (int t = 1; t < T; ++t) {
                if (volume.at(c, t) != first) {
                    keep[c] = 1;
                    break;
                }
            }
        }
    }
    VolumeGrid grid({volume.dims[0], volume.dims[1], volume.dims[2]}, keep);
    if (grid.n_voxels() == 0) throw DegenerateError("empty mask: no voxels selected");

    Matrix X(static_cast<Eigen::Index>(grid.n_voxels()), T);
    for (std::size_t r = 0; r < grid.n_voxels(); ++r) {
        const std::size_t c = grid.cell_of_row(r);
        for (int t = 0; t < T; ++t) X(static_cast<Eigen::Index>(r), t) = volume.at(c, t);
    }
    return BoldDataset(std::move(grid), std::move(X), volume.tr_seconds);
}

Volume4D scatter_to_volume(const BoldDataset& data) {
    Volume4D v;
    const auto& d = data.grid().dims();
    v.dims = {d[0], d[1], d[2], static_cast<int>(data.n_timepoints())};
    v.tr_seconds = data.tr_seconds();
    v.data.assign(v.cells_per_frame() * static_cast<std::size_t>(v.dims[3]), 0.0);
    for (std::size_t r = 0; r < data.grid().n_voxels(); ++r) {
        const std::size_t c = data.grid().cell_of_row(r);
        for (int t = 0; t < v.dims[3]; ++t) v.at(c, t) = data.X()(static_cast<Eigen::Index>(r), t);
    }
    return v;
}

Matrix center_rows(const Matrix& X) {
    Matrix out(X.rows(), X.cols());
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        if (X.row(i).maxCoeff() == X.row(i).minCoeff()) {
            out.row(i).setZero();
            continue;
        }
        out.row(i) = X.row(i).array() - X.row(i).mean();
    }
    return out;
}

NormalizedRows unit_normalize_rows(const Matrix& Xc) {
    NormalizedRows out{Matrix(Xc.rows(), Xc.cols()), {}};
    for (Eigen::Index i = 0; i < Xc.rows(); ++i) {
        const double n = Xc.row(i).norm();
        if (n == 0.0) {
            out.X0.row(i).setZero();
            out.zero_rows.push_back(static_cast<std::size_t>(i));
        } else {
            out.X0.row(i) = Xc.row(i) / n;
        }
    }
    return out;
}

}  // namespace parcelforge
