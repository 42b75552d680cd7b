#include "parcelforge/ica.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "parcelforge/error.hpp"
#include "parcelforge/io.hpp"

namespace parcelforge {
namespace {

// (W W')^(-1/2) W
Matrix symmetric_decorrelation(const Matrix& W) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(W * W.transpose());
    const Vector inv_sqrt = es.eigenvalues().cwiseMax(1e-300).cwiseSqrt().cwiseInverse();
    return es.eigenvectors() * inv_sqrt.asDiagonal() * es.eigenvectors().transpose() * W;
}

struct TemporalPca {
    Matrix eigvecs;  // T x T, columns sorted by decreasing eigenvalue
    Vector eigvals;
};

TemporalPca temporal_pca(const Matrix& Xc) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(Xc.transpose() * Xc);
    const Eigen::Index T = Xc.cols();
    TemporalPca p{Matrix(T, T), Vector(T)};
    for (Eigen::Index k = 0; k < T; ++k) {
        p.eigvecs.col(k) = es.eigenvectors().col(T - 1 - k);
        p.eigvals[k] = std::max(0.0, es.eigenvalues()[T - 1 - k]);
    }
    return p;
}

}  // namespace

void ICDecomposition::validate() const {
    const Eigen::Index T = timecourses.rows();
    const Eigen::Index N = timecourses.cols();
    if (maps.rows() != N)
        throw FormatError("IC shape mismatch: " + std::to_string(N) + " time courses but " +
                          std::to_string(maps.rows()) + " maps");
    if (N > std::min<Eigen::Index>(T, maps.cols()))
        throw FormatError("IC count " + std::to_string(N) + " exceeds min(T, V)");
    for (Eigen::Index j = 0; j < N; ++j)
        if (timecourses.col(j).maxCoeff() == timecourses.col(j).minCoeff())
            throw DegenerateError("IC " + std::to_string(j) + " of subject " + std::to_string(subject_id) +
                                  " has a constant time course");
}

int default_ic_count(const BoldDataset& data) {
    const Matrix Xc = center_rows(data.X());
    const TemporalPca p = temporal_pca(Xc);
    const double total = p.eigvals.sum();
    const int cap = static_cast<int>(std::min<Eigen::Index>({60, data.n_timepoints() - 1, data.n_voxels()}));
    int n = 0;
    double acc = 0.0;
    while (n < p.eigvals.size() && acc < 0.95 * total) acc += p.eigvals[n++];
    return std::clamp(n, 2, std::max(2, cap));
}

ICDecomposition fastica(const BoldDataset& data, int n_components, std::uint64_t rng_seed,
                        const FastIcaOptions& options, int subject_id) {
    const Eigen::Index T = data.n_timepoints();
    const Eigen::Index V = data.n_voxels();
    if (n_components < 2 || n_components > std::min(T - 1, V))
        throw ParameterError("n_components must lie in [2, min(T-1, V)] = [2, " +
                             std::to_string(std::min(T - 1, V)) + "], got " + std::to_string(n_components));
    const Eigen::Index n = n_components;

    const Matrix Xc = center_rows(data.X());
    const TemporalPca pca = temporal_pca(Xc);
    if (pca.eigvals[n - 1] <= 1e-12 * pca.eigvals[0])
        throw RankError("data rank is below the requested " + std::to_string(n_components) + " components");

    // Whitened principal time courses, n x T with identity covariance.
    const Matrix Z = std::sqrt(static_cast<double>(T - 1)) * pca.eigvecs.leftCols(n).transpose();

    std::mt19937_64 rng(rng_seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix W(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) W(i, j) = normal(rng);
    W = symmetric_decorrelation(W);

    const double inv_T = 1.0 / static_cast<double>(T);
    int iter = 0;
    for (;; ++iter) {
        if (iter >= options.max_iterations)
            throw ConvergenceError("FastICA did not converge after " + std::to_string(iter) + " iterations", iter);
        const Matrix Y = W * Z;
        const Matrix G = Y.array().tanh().matrix();
        const Vector gprime_mean = (1.0 - G.array().square()).rowwise().mean().matrix();
        Matrix W_new = G * Z.transpose() * inv_T - gprime_mean.asDiagonal() * W;
        W_new = symmetric_decorrelation(W_new);
        const double change = ((W_new * W.transpose()).diagonal().cwiseAbs().array() - 1.0).abs().maxCoeff();
        W = std::move(W_new);
        if (change < options.tolerance) break;
    }

    const Matrix S = W * Z;  // n x T
    const Matrix maps = (S * S.transpose()).ldlt().solve(S * Xc.transpose());

    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    const Vector energy = maps.rowwise().squaredNorm();
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return energy[a] > energy[b]; });

    ICDecomposition out{subject_id, Matrix(T, n), Matrix(n, V)};
    for (Eigen::Index k = 0; k < n; ++k) {
        const Eigen::Index src = order[static_cast<std::size_t>(k)];
        Eigen::Index peak;
        S.row(src).cwiseAbs().maxCoeff(&peak);
        const double sign = S(src, peak) < 0.0 ? -1.0 : 1.0;
        out.timecourses.col(k) = sign * S.row(src).transpose();
        out.maps.row(k) = sign * maps.row(src);
    }
    return out;
}

ICDecomposition import_ics(const std::filesystem::path& timecourses_csv, const std::filesystem::path& maps_f64,
                           int subject_id, Eigen::Index n_voxels) {
    auto table = io::read_csv(timecourses_csv);
    const auto N = static_cast<Eigen::Index>(table.header.size());
    ICDecomposition ics;
    ics.subject_id = subject_id;
    ics.timecourses = std::move(table.values);
    ics.maps = io::read_f64(maps_f64, n_voxels);
    if (ics.maps.rows() != N)
        throw FormatError("IC shape mismatch: " + std::to_string(N) + " time-course columns but " +
                          std::to_string(ics.maps.rows()) + " map rows");
    ics.validate();
    return ics;
}

void export_ics(const ICDecomposition& ics, const std::filesystem::path& timecourses_csv,
                const std::filesystem::path& maps_f64) {
    std::vector<std::string> header;
    for (Eigen::Index j = 0; j < ics.n_components(); ++j) header.push_back("ic" + std::to_string(j));
    io::write_csv(timecourses_csv, header, ics.timecourses);
    io::write_f64(maps_f64, ics.maps);
}

}  // namespace parcelforge
