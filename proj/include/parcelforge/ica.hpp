#pragma once

#include <cstdint>
#include <filesystem>

#include "parcelforge/dataset.hpp"

namespace parcelforge {

/// Independent components of one subject: time courses (T x N, one IC per
/// column) and spatial maps (N x V).
struct ICDecomposition {
    int subject_id = 0;
    Matrix timecourses;
    Matrix maps;

    Eigen::Index n_components() const noexcept { return timecourses.cols(); }
    /// Throws if shapes disagree, N > min(T, V) or a time course is constant.
    void validate() const;
};

struct FastIcaOptions {
    int max_iterations = 500;
    double tolerance = 1e-6;
    bool operator==(const FastIcaOptions&) const = default;
};

/// Temporal FastICA: the centred data are reduced to `n_components`
/// whitened principal time courses and rotated to maximise the log-cosh
/// negentropy contrast with symmetric decorrelation.
///
/// Time courses have unit variance and are sign-flipped so their largest
/// magnitude sample is positive; components are ordered by decreasing map
/// energy. Maps are the least-squares spatial weights of each time course.
ICDecomposition fastica(const BoldDataset& data, int n_components, std::uint64_t rng_seed,
                        const FastIcaOptions& options = {}, int subject_id = 0);

/// Number of principal components covering 95% of the variance, clamped
/// to [2, min(60, T-1, V)].
int default_ic_count(const BoldDataset& data);

/// Load externally computed components: a CSV of time courses (header row,
/// one column per IC) and a row-major float64 N x V map file.
ICDecomposition import_ics(const std::filesystem::path& timecourses_csv, const std::filesystem::path& maps_f64,
                           int subject_id, Eigen::Index n_voxels);
void export_ics(const ICDecomposition& ics, const std::filesystem::path& timecourses_csv,
                const std::filesystem::path& maps_f64);

}  // namespace parcelforge
