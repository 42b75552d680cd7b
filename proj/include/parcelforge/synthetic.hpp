#pragma once

#include <cstdint>
#include <vector>

#include "parcelforge/dataset.hpp"

namespace parcelforge {

/// Parameters of a synthetic block-design cohort.
///
/// The first `n_task_parcels` ground-truth parcels respond to the task:
/// parcel p follows condition p mod n_conditions with a latency of
/// p * parcel_latency_step_seconds plus the subject's jitter. The remaining
/// parcels carry a parcel-specific mix of a slow drift and one shared
/// physiological sinusoid. Every voxel gets white noise of sd noise_sigma.
struct SyntheticCohortSpec {
    int n_subjects = 1;
    Coord dims{16, 16, 4};
    int n_true_parcels = 8;
    int n_task_parcels = -1;  // -1: half of the parcels, rounded up
    int n_conditions = 2;
    int n_timepoints = 120;
    double tr_seconds = 3.0;
    double task_period_seconds = 28.8;
    double parcel_latency_step_seconds = 1.5;
    /// Subject latency offsets are drawn uniformly from [-jitter, jitter].
    double hrf_latency_jitter_seconds = 0.0;
    double noise_sigma = 0.5;
    double task_amplitude = 1.0;
    double drift_amplitude = 3.0;
    double physio_amplitude = 2.0;
    double physio_period_seconds = 7.7;
    std::uint64_t rng_seed = 0;

    bool operator==(const SyntheticCohortSpec&) const = default;
    int task_parcels() const noexcept { return n_task_parcels < 0 ? (n_true_parcels + 1) / 2 : n_task_parcels; }
};

struct SyntheticCohort {
    std::vector<BoldDataset> datasets;
    std::vector<int> truth_labels;  // per voxel of the shared full grid
    DesignMatrix design;
    std::vector<double> per_subject_latency;
    Eigen::VectorXd drift;   // nuisance time courses, for inspection
    Eigen::VectorXd physio;
};

SyntheticCohort generate_synthetic_cohort(const SyntheticCohortSpec& spec);

/// Split the full grid into `n_parcels` 6-connected blocks.
std::vector<int> block_parcels(const Coord& dims, int n_parcels, std::uint64_t seed);

}  // namespace parcelforge
