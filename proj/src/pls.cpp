#include "parcelforge/pls.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace parcelforge {
namespace {

constexpr double kPowerTolerance = 1e-12;
constexpr int kPowerMaxIterations = 1000;

// Dominant left singular vector of M, by power iteration on M M'.
Vector dominant_left_singular(const Matrix& M, int& iterations) {
    Vector w = M.rowwise().sum();
    if (w.norm() == 0.0) {
        Eigen::Index j;
        M.colwise().norm().maxCoeff(&j);
        w = M.col(j);
    }
    w.normalize();
    const Matrix MMt = M * M.transpose();
    for (iterations = 1; iterations <= kPowerMaxIterations; ++iterations) {
        Vector next = MMt * w;
        const double n = next.norm();
        if (n == 0.0) break;
        next /= n;
        const double change = (next - w).norm();
        w = std::move(next);
        if (change < kPowerTolerance) break;
    }
    return w;
}

}  // namespace

PCAModel pca_decompose(const Matrix& Xc) {
    const Eigen::Index T = Xc.cols();
    Eigen::BDCSVD<Matrix> svd(Xc, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vector& sigma = svd.singularValues();
    if (sigma.size() == 0 || sigma[0] == 0.0) throw DegenerateError("PCA of a rank-0 matrix");

    PCAModel m;
    m.loadings = svd.matrixU();
    m.scores = sigma.asDiagonal() * svd.matrixV().transpose();
    m.variances = sigma.array().square() / static_cast<double>(std::max<Eigen::Index>(T - 1, 1));
    for (Eigen::Index k = 0; k < m.scores.rows(); ++k) {
        Eigen::Index peak;
        m.scores.row(k).cwiseAbs().maxCoeff(&peak);
        if (m.scores(k, peak) < 0.0) {
            m.scores.row(k) *= -1.0;
            m.loadings.col(k) *= -1.0;
        }
    }
    return m;
}

TruncatedScores truncate(const PCAModel& model, const TruncationPolicy& policy) {
    const auto C = static_cast<int>(model.scores.rows());
    if (policy.drop_leading < 0 || policy.drop_trailing < 0) throw ParameterError("drop counts must be nonnegative");
    if (policy.variance_floor_fraction < 0.0 || policy.variance_floor_fraction >= 1.0)
        throw ParameterError("variance_floor_fraction must lie in [0, 1)");
    const double floor = policy.variance_floor_fraction * model.variances.sum();
    TruncatedScores out;
    for (int k = policy.drop_leading; k < C - policy.drop_trailing; ++k)
        if (model.variances[k] >= floor && model.variances[k] > 0.0) out.kept.push_back(k);
    if (out.kept.empty()) throw ParameterError("truncation policy removes every principal component");
    out.scores.resize(static_cast<Eigen::Index>(out.kept.size()), model.scores.cols());
    for (std::size_t i = 0; i < out.kept.size(); ++i)
        out.scores.row(static_cast<Eigen::Index>(i)) = model.scores.row(out.kept[i]);
    return out;
}

PLSModel pls_fit(const Matrix& scores, const Matrix& D_in, int n_latents) {
    const Eigen::Index C = scores.rows();
    const Eigen::Index T = scores.cols();
    if (D_in.rows() != T)
        throw ShapeError("seed matrix has " + std::to_string(D_in.rows()) + " rows, expected " + std::to_string(T));
    if (n_latents < 1 || n_latents > std::min(C, T - 1))
        throw ParameterError("latent count must lie in [1, min(C, T-1)] = [1, " + std::to_string(std::min(C, T - 1)) +
                             "], got " + std::to_string(n_latents));
    const Eigen::Index N = D_in.cols();

    Matrix E = scores.transpose();
    Matrix D = D_in.rowwise() - D_in.colwise().mean();
    const double e_scale = E.norm();

    PLSModel m;
    m.latents.resize(T, n_latents);
    m.x_weights.resize(C, n_latents);
    m.regression.resize(n_latents);
    m.y_weights.resize(N, n_latents);

    auto partial = [&](int done, const std::string& why) {
        PLSModel p;
        p.latents = m.latents.leftCols(done);
        p.x_weights = m.x_weights.leftCols(done);
        p.regression = m.regression.head(done);
        p.y_weights = m.y_weights.leftCols(done);
        p.power_iterations = m.power_iterations;
        return PartialPlsError("PLS rank exhausted at latent " + std::to_string(done + 1) + ": " + why, std::move(p));
    };

    for (int i = 0; i < n_latents; ++i) {
        const Matrix cross = E.transpose() * D;
        if (cross.norm() <= 1e-12 * std::max(1.0, e_scale * D_in.norm())) throw partial(i, "zero cross-covariance");
        int iters = 0;
        Vector w = dominant_left_singular(cross, iters);
        m.power_iterations.push_back(iters);
        Vector t = E * w;
        const double tn = t.norm();
        if (tn <= 1e-10 * e_scale) throw partial(i, "score matrix is exhausted");
        t /= tn;
        Vector c = D.transpose() * t;
        Eigen::Index peak;
        c.cwiseAbs().maxCoeff(&peak);
        if (c[peak] < 0.0) {
            w = -w;
            t = -t;
            c = -c;
        }
        const double b = c.norm();
        m.x_weights.col(i) = w;
        m.latents.col(i) = t;
        m.regression[i] = b;
        m.y_weights.col(i) = b > 0.0 ? Vector(c / b) : Vector::Zero(N);

        E -= t * (t.transpose() * E);
        D -= t * (t.transpose() * D);
    }
    return m;
}

FeatureField covariance_features(const Matrix& X0, const PLSModel& model, kernels::Exec exec) {
    if (X0.cols() != model.latents.rows())
        throw ShapeError("normalised data has " + std::to_string(X0.cols()) + " time points, latents have " +
                         std::to_string(model.latents.rows()));
    return {exec == kernels::Exec::parallel ? kernels::row_products(X0, model.latents)
                                            : kernels::serial::row_products(X0, model.latents)};
}

SeedMatrix build_seed_matrix(const BoldDataset& data, const std::vector<SeedSet>& seeds) {
    SeedMatrix out;
    std::set<std::size_t> seen;
    for (const auto& set : seeds)
        for (std::size_t row : set.voxel_rows) {
            if (row >= static_cast<std::size_t>(data.n_voxels()))
                throw ShapeError("seed row index " + std::to_string(row) + " out of range (V = " +
                                 std::to_string(data.n_voxels()) + ")");
            if (!seen.insert(row).second) {
                ++out.duplicates;
                continue;
            }
            out.rows.push_back(row);
        }
    out.D.resize(data.n_timepoints(), static_cast<Eigen::Index>(out.rows.size()));
    for (std::size_t j = 0; j < out.rows.size(); ++j) {
        const Vector x = data.X().row(static_cast<Eigen::Index>(out.rows[j])).transpose();
        out.D.col(static_cast<Eigen::Index>(j)) = x.array() - x.mean();
    }
    return out;
}

}  // namespace parcelforge
