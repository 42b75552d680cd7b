#pragma once

#include <vector>

#include "parcelforge/error.hpp"
#include "parcelforge/kernels.hpp"
#include "parcelforge/seeds.hpp"

namespace parcelforge {

/// Principal components of row-centred data: Xc = loadings * scores.
struct PCAModel {
    Matrix loadings;  // V x C, orthonormal columns
    Matrix scores;    // C x T, rows are component time courses
    Vector variances; // C, non-increasing
};

/// Thin SVD of the centred matrix; variances are sigma^2 / (T - 1) and each
/// score row is flipped so its largest-magnitude entry is positive.
PCAModel pca_decompose(const Matrix& Xc);

/// Which principal components are discarded as noise.
struct TruncationPolicy {
    int drop_leading = 2;
    int drop_trailing = 0;
    double variance_floor_fraction = 1e-4;
    bool operator==(const TruncationPolicy&) const = default;
};

struct TruncatedScores {
    Matrix scores;            // C' x T
    std::vector<int> kept;    // original component indices, ascending
};

TruncatedScores truncate(const PCAModel& model, const TruncationPolicy& policy);

struct PLSModel {
    Matrix latents;    // T x K, orthonormal columns t_i
    Matrix x_weights;  // C x K, unit columns w_i
    Vector regression; // K diagonal of B
    Matrix y_weights;  // N_dep x K, unit columns
    std::vector<int> power_iterations;

    Eigen::Index n_latents() const noexcept { return latents.cols(); }
};

/// Thrown when deflation runs out of rank; carries the latents completed so far.
struct PartialPlsError : RankError {
    PartialPlsError(const std::string& what, PLSModel done) : RankError(what), partial(std::move(done)) {}
    PLSModel partial;
};

/// PLS between the PCA score time courses (C x T) and seed signals D (T x N_dep).
///
/// Each step takes the dominant singular pair of the current cross-covariance
/// E'D (power iteration), sets t = E w / |E w|, and deflates both E and D
/// against t, so the latents come out orthonormal.
PLSModel pls_fit(const Matrix& scores, const Matrix& D, int n_latents);

struct FeatureField {
    Matrix R;  // V x K, column i = X0 * t_i
    Eigen::Index n_latents() const noexcept { return R.cols(); }
};

FeatureField covariance_features(const Matrix& X0, const PLSModel& model,
                                 kernels::Exec exec = kernels::Exec::parallel);

struct SeedMatrix {
    Matrix D;                       // T x N_dep, centred seed time series
    std::vector<std::size_t> rows;  // dataset row of each column
    int duplicates = 0;
};

SeedMatrix build_seed_matrix(const BoldDataset& data, const std::vector<SeedSet>& seeds);

}  // namespace parcelforge
