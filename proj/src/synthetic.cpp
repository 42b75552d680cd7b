#include "parcelforge/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "parcelforge/error.hpp"
#include "parcelforge/hrf.hpp"

namespace parcelforge {
namespace {

struct Box {
    Coord lo;
    Coord hi;  // exclusive
    int extent(int a) const { return hi[a] - lo[a]; }
    long long cells() const { return 1LL * extent(0) * extent(1) * extent(2); }
};

// Boustrophedon walk through a box; consecutive cells are face neighbours.
std::vector<Coord> snake_order(const Box& b) {
    std::vector<Coord> out;
    int row = 0;
    for (int z = b.lo[2]; z < b.hi[2]; ++z) {
        const int layer = z - b.lo[2];
        for (int yi = 0; yi < b.extent(1); ++yi, ++row) {
            const int y = (layer % 2 == 0) ? b.lo[1] + yi : b.hi[1] - 1 - yi;
            for (int xi = 0; xi < b.extent(0); ++xi) {
                const int x = (row % 2 == 0) ? b.lo[0] + xi : b.hi[0] - 1 - xi;
                out.push_back({x, y, z});
            }
        }
    }
    return out;
}

void split_box(const Box& box, int n, int& next_label, std::vector<int>& labels, const Coord& dims,
               std::mt19937_64& rng) {
    auto lin = [&](const Coord& c) {
        return static_cast<std::size_t>(c[0]) + static_cast<std::size_t>(dims[0]) * (c[1] + static_cast<std::size_t>(dims[1]) * c[2]);
    };
    if (n == 1) {
        for (int z = box.lo[2]; z < box.hi[2]; ++z)
            for (int y = box.lo[1]; y < box.hi[1]; ++y)
                for (int x = box.lo[0]; x < box.hi[0]; ++x) labels[lin({x, y, z})] = next_label;
        ++next_label;
        return;
    }
    const int n1 = n / 2;
    const int n2 = n - n1;
    std::uniform_real_distribution<double> wobble(0.7, 1.3);
    const double w = wobble(rng);

    std::array<int, 3> axes{0, 1, 2};
    std::stable_sort(axes.begin(), axes.end(), [&](int a, int b) { return box.extent(a) > box.extent(b); });
    for (int axis : axes) {
        const int len = box.extent(axis);
        if (len < 2) continue;
        const long long area = box.cells() / len;
        const int lo = static_cast<int>((n1 + area - 1) / area);
        const int hi = len - static_cast<int>((n2 + area - 1) / area);
        if (lo > hi) continue;
        const int target = static_cast<int>(std::lround(w * len * n1 / static_cast<double>(n)));
        const int cut = std::clamp(target, std::max(lo, 1), std::min(hi, len - 1));
        Box a = box, b = box;
        a.hi[axis] = box.lo[axis] + cut;
        b.lo[axis] = box.lo[axis] + cut;
        split_box(a, n1, next_label, labels, dims, rng);
        split_box(b, n2, next_label, labels, dims, rng);
        return;
    }
    // No axis admits a straight cut: cut the snake walk into contiguous runs.
    const auto order = snake_order(box);
    const std::size_t per = order.size() / static_cast<std::size_t>(n);
    for (int k = 0; k < n; ++k) {
        const std::size_t begin = per * static_cast<std::size_t>(k);
        const std::size_t end = (k == n - 1) ? order.size() : begin + per;
        for (std::size_t i = begin; i < end; ++i) labels[lin(order[i])] = next_label;
        ++next_label;
    }
}

Eigen::VectorXd slow_drift(int T) {
    Eigen::VectorXd d(T);
    for (int t = 0; t < T; ++t) {
        const double u = T > 1 ? 2.0 * t / (T - 1) - 1.0 : 0.0;
        d[t] = u + 0.3 * (u * u - 1.0 / 3.0);
    }
    return d;
}

}  // namespace

std::vector<int> block_parcels(const Coord& dims, int n_parcels, std::uint64_t seed) {
    const long long cells = 1LL * dims[0] * dims[1] * dims[2];
    if (n_parcels < 1) throw ParameterError("n_true_parcels must be positive");
    if (n_parcels > cells)
        throw ParameterError("n_true_parcels (" + std::to_string(n_parcels) + ") exceeds voxel count (" +
                             std::to_string(cells) + ")");
    std::vector<int> labels(static_cast<std::size_t>(cells), -1);
    std::mt19937_64 rng(seed);
    int next = 0;
    split_box(Box{{0, 0, 0}, dims}, n_parcels, next, labels, dims, rng);
    return labels;
}

SyntheticCohort generate_synthetic_cohort(const SyntheticCohortSpec& spec) {
    for (int d : spec.dims)
        if (d <= 0) throw ParameterError("grid dims must be positive");
    if (spec.n_subjects < 1) throw ParameterError("n_subjects must be positive");
    if (spec.n_timepoints < 3) throw ParameterError("n_timepoints must be at least 3");
    if (spec.n_conditions < 1) throw ParameterError("n_conditions must be positive");
    if (!(spec.tr_seconds > 0.0) || !(spec.task_period_seconds > 0.0)) throw ParameterError("tr and period must be positive");
    if (spec.noise_sigma < 0.0 || spec.hrf_latency_jitter_seconds < 0.0)
        throw ParameterError("noise_sigma and jitter must be nonnegative");
    const int n_task = spec.task_parcels();
    if (n_task < 0 || n_task > spec.n_true_parcels) throw ParameterError("n_task_parcels out of range");

    const int T = spec.n_timepoints;
    const VolumeGrid grid = VolumeGrid::full(spec.dims);
    const std::size_t V = grid.n_voxels();

    SyntheticCohort out;
    out.truth_labels = block_parcels(spec.dims, spec.n_true_parcels, spec.rng_seed ^ 0x9e3779b97f4a7c15ULL);

    Matrix Y(T, spec.n_conditions);
    std::vector<std::string> names;
    for (int c = 0; c < spec.n_conditions; ++c) {
        Y.col(c) = hrf_regressor(block_condition(spec.task_period_seconds, spec.n_conditions, c), T, spec.tr_seconds);
        names.push_back("cond" + std::to_string(c + 1));
    }
    out.design = DesignMatrix(std::move(Y), std::move(names));
    out.drift = slow_drift(T);
    out.physio.resize(T);
    for (int t = 0; t < T; ++t)
        out.physio[t] = std::sin(2.0 * std::numbers::pi * t * spec.tr_seconds / spec.physio_period_seconds);

    const int n_nuisance = spec.n_true_parcels - n_task;
    for (int s = 0; s < spec.n_subjects; ++s) {
        std::seed_seq seq{static_cast<std::uint32_t>(spec.rng_seed), static_cast<std::uint32_t>(spec.rng_seed >> 32),
                          static_cast<std::uint32_t>(s)};
        std::mt19937_64 rng(seq);
        std::uniform_real_distribution<double> jitter(-spec.hrf_latency_jitter_seconds, spec.hrf_latency_jitter_seconds);
        const double subject_latency = spec.hrf_latency_jitter_seconds > 0.0 ? jitter(rng) : 0.0;
        out.per_subject_latency.push_back(subject_latency);

        std::vector<Eigen::VectorXd> parcel_signal(static_cast<std::size_t>(spec.n_true_parcels));
        for (int p = 0; p < spec.n_true_parcels; ++p) {
            if (p < n_task) {
                const double latency = p * spec.parcel_latency_step_seconds + subject_latency;
                parcel_signal[static_cast<std::size_t>(p)] =
                    spec.task_amplitude *
                    hrf_regressor(block_condition(spec.task_period_seconds, spec.n_conditions, p % spec.n_conditions),
                                  T, spec.tr_seconds, latency);
            } else {
                const int q = p - n_task;
                const double a = (q + 1.0) / n_nuisance;
                const double b = (n_nuisance - q) / static_cast<double>(n_nuisance);
                parcel_signal[static_cast<std::size_t>(p)] =
                    spec.drift_amplitude * a * out.drift + spec.physio_amplitude * b * out.physio;
            }
        }

        std::normal_distribution<double> noise(0.0, 1.0);
        Matrix X(static_cast<Eigen::Index>(V), T);
        for (std::size_t r = 0; r < V; ++r) {
            const int label = out.truth_labels[grid.cell_of_row(r)];
            X.row(static_cast<Eigen::Index>(r)) = parcel_signal[static_cast<std::size_t>(label)].transpose();
            if (spec.noise_sigma > 0.0)
                for (int t = 0; t < T; ++t) X(static_cast<Eigen::Index>(r), t) += spec.noise_sigma * noise(rng);
        }
        out.datasets.emplace_back(grid, std::move(X), spec.tr_seconds);
    }
    return out;
}

}  // namespace parcelforge
