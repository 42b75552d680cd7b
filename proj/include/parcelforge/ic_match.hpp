#pragma once

#include <utility>
#include <vector>

#include "parcelforge/ica.hpp"
#include "parcelforge/kernels.hpp"

namespace parcelforge {

enum class CorrelationMode { signed_corr, absolute };

/// Pooled cross-subject similarity of IC time courses.
struct ICSimilarity {
    Matrix S;                      // M x M, zero on same-subject blocks
    std::vector<int> owner;        // subject id per pooled IC
    std::vector<int> local_index;  // column within that subject's decomposition
};

struct ICClustering {
    std::vector<int> labels;  // cluster id per pooled IC
    int n_clusters = 0;
    Matrix cluster_task_scores;  // n_clusters x N_r, filled by select_task_clusters
};

/// Pearson correlation of two time courses.
double ic_correlation(const Eigen::Ref<const Vector>& a, const Eigen::Ref<const Vector>& b);

/// z-scores of the correlations of one IC against every IC of another
/// subject, using the sample standard deviation (divisor N_b - 1).
Vector normalized_correlation(const Eigen::Ref<const Vector>& rho);
Vector normalized_correlation(const Eigen::Ref<const Vector>& ic, const Matrix& other_timecourses,
                              CorrelationMode mode = CorrelationMode::absolute);

/// S[i,j] = min of the two directed normalised correlations for ICs of
/// different subjects, 0 within a subject.
ICSimilarity similarity_matrix(const std::vector<ICDecomposition>& cohort,
                               CorrelationMode mode = CorrelationMode::absolute,
                               kernels::Exec exec = kernels::Exec::parallel);

/// Ward agglomeration (Lance-Williams update) of d = S_max - S. Equal merge
/// costs go to the pair with the smallest pooled indices. Cluster ids are
/// numbered by their smallest member.
ICClustering ward_cluster(const ICSimilarity& sim, int n_clusters);

/// Scores each cluster by its best regressor's mean |correlation| with the
/// member time courses and returns the n_select best clusters (ties: lower id).
std::vector<int> select_task_clusters(ICClustering& clustering, const std::vector<ICDecomposition>& cohort,
                                      const DesignMatrix& design, int n_select);

struct ClusterPick {
    int cluster;
    int pooled_index;
    bool fallback;  // subject had no member in the cluster
};

/// One IC per selected cluster for a subject: its most central member, or
/// its IC closest (highest mean S) to the cluster when it has none.
std::vector<ClusterPick> ics_for_subject(int subject_id, const ICClustering& clustering, const ICSimilarity& sim,
                                         const std::vector<int>& selected_clusters);

}  // namespace parcelforge
