#pragma once

#include <Eigen/Dense>
#include <functional>

namespace parcelforge {

/// Canonical double-gamma haemodynamic response (shape 6 peak, shape 16
/// undershoot, undershoot ratio 1/6, unit scale) at time t seconds.
double canonical_hrf(double t);

/// Stimulus function of time in seconds, 1 while active.
using Stimulus = std::function<double(double)>;

/// Block design with `n_conditions` alternating conditions: each cycle of
/// `period` seconds is on for its first half, and cycle k belongs to
/// condition k mod n_conditions.
Stimulus block_condition(double period, int n_conditions, int condition);

/// Stimulus convolved with the canonical HRF (kernel normalised to unit
/// area), sampled at n*tr - latency for n = 0..n_samples-1.
Eigen::VectorXd hrf_regressor(const Stimulus& stimulus, int n_samples, double tr, double latency = 0.0);

}  // namespace parcelforge
