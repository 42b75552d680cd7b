#include "parcelforge/hrf.hpp"

#include <cmath>

namespace parcelforge {
namespace {

double gamma_pdf(double t, double shape) {
    if (t <= 0.0) return 0.0;
    return std::exp((shape - 1.0) * std::log(t) - t - std::lgamma(shape));
}

constexpr double kKernelSeconds = 32.0;
constexpr double kStep = 0.05;

}  // namespace

double canonical_hrf(double t) { return gamma_pdf(t, 6.0) - gamma_pdf(t, 16.0) / 6.0; }

Stimulus block_condition(double period, int n_conditions, int condition) {
    return [=](double s) {
        if (s < 0.0) return 0.0;
        const double cycle = std::floor(s / period);
        const double phase = s - cycle * period;
        const bool on = phase < 0.5 * period;
        return (on && static_cast<long long>(cycle) % n_conditions == condition) ? 1.0 : 0.0;
    };
}

Eigen::VectorXd hrf_regressor(const Stimulus& stimulus, int n_samples, double tr, double latency) {
    const int taps = static_cast<int>(kKernelSeconds / kStep);
    Eigen::VectorXd kernel(taps);
    for (int k = 0; k < taps; ++k) kernel[k] = canonical_hrf((k + 0.5) * kStep);
    kernel /= kernel.sum();  // a sustained stimulus plateaus at 1

    Eigen::VectorXd out(n_samples);
    for (int n = 0; n < n_samples; ++n) {
        const double t = n * tr - latency;
        double acc = 0.0;
        for (int k = 0; k < taps; ++k) acc += stimulus(t - (k + 0.5) * kStep) * kernel[k];
        out[n] = acc;
    }
    return out;
}

}  // namespace parcelforge
