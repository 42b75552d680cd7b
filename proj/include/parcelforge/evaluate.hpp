#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "parcelforge/dataset.hpp"
#include "parcelforge/kernels.hpp"
#include "parcelforge/parcellate.hpp"

namespace parcelforge {

enum class StatKind { glm, pls };

inline const char* to_string(StatKind k) { return k == StatKind::glm ? "glm" : "pls"; }

/// Per-voxel t-values, one column per regressor.
struct StatMap {
    Matrix t;  // V x N_r
    StatKind kind = StatKind::glm;
    int dof = 0;
    std::size_t saturated = 0;  // entries clipped to +-1e12 (or |r| clipped below 1)
    std::vector<std::string> regressors;
};

/// OLS per voxel against the design plus an intercept; dof = T - N_r - 1.
StatMap glm_tvalues(const Matrix& X, const DesignMatrix& design, kernels::Exec exec = kernels::Exec::parallel);

enum class Eq6Form {
    standard,  // r sqrt(T-2) / sqrt(1 - r^2)
    literal    // r sqrt(T-2) / (1 - r^2)
};

inline constexpr double kMaxAbsCorrelation = 1.0 - 1e-12;

/// Correlation-to-t transform with T - 2 degrees of freedom. |r| must be < 1.
double pls_tvalue(double r, int n_timepoints, Eq6Form form = Eq6Form::standard);

/// For each regressor: fit a one-latent PLS of the regressor on an
/// orthonormal basis of the PCA score rows, correlate every normalised voxel with that latent, and map the
/// correlation through pls_tvalue.
StatMap pls_tmap(const Matrix& X0, const DesignMatrix& design, const Matrix& scores, Eq6Form form = Eq6Form::standard,
                 kernels::Exec exec = kernels::Exec::parallel);

struct ParcelVarianceReport {
    std::vector<double> v;  // per parcel
    double mean = 0.0;
    double q1 = 0.0;
    double median = 0.0;
    double q3 = 0.0;
    int singletons = 0;
    std::string method;
};

/// v(p) = sqrt(sum_k std_{i in p}(t_ik)^2) with the n-1 standard deviation;
/// singleton parcels score 0.
ParcelVarianceReport intra_parcel_variance(const StatMap& stat, const Parcellation& parc,
                                           const std::string& method = "");

/// Fills mean and quartiles from v.
void summarize(ParcelVarianceReport& report);

double adjusted_rand(const std::vector<int>& a, const std::vector<int>& b);

struct MethodSummary {
    std::string method;
    double mean;
    double q1;
    double q3;
};

std::vector<MethodSummary> compare_methods(const std::vector<ParcelVarianceReport>& reports);

/// Parcels whose mean t for `regressor` exceeds `threshold`.
std::vector<int> active_parcels(const StatMap& stat, const Parcellation& parc, Eigen::Index regressor,
                                double threshold);

inline constexpr double kGlmReportThreshold = 2.0;
inline constexpr double kPlsReportThreshold = 3.0;

void write_statmap(const std::filesystem::path& dir, const StatMap& stat);
void write_variance_report_csv(const std::filesystem::path& path, const std::vector<ParcelVarianceReport>& reports);
/// One report per method, in file order.
std::vector<ParcelVarianceReport> read_variance_report_csv(const std::filesystem::path& path);
void write_comparison_csv(const std::filesystem::path& path, const std::vector<MethodSummary>& rows);

}  // namespace parcelforge
