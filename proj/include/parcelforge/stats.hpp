#pragma once

#include <Eigen/Dense>
#include <span>
#include <vector>

namespace parcelforge {

double mean(std::span<const double> x);
/// Sample standard deviation (divisor n-1); 0 for fewer than two values.
double sample_std(std::span<const double> x);
/// Quantile by linear interpolation between order statistics (q in [0,1]).
double quantile_linear(std::vector<double> x, double q);

/// Pearson correlation; throws DegenerateError when either input is constant.
double pearson(const Eigen::Ref<const Eigen::VectorXd>& a, const Eigen::Ref<const Eigen::VectorXd>& b);

}  // namespace parcelforge
