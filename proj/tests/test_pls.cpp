#include <cmath>
#include <random>

#include "doctest.h"
#include "parcelforge/error.hpp"
#include "parcelforge/pls.hpp"
#include "parcelforge/stats.hpp"
#include "parcelforge/synthetic.hpp"
#include "test_util.hpp"

using namespace parcelforge;

namespace {

double cosine(const Vector& a, const Vector& b) { return std::abs(a.dot(b)) / (a.norm() * b.norm()); }

Matrix orthogonal(Eigen::Index n, std::uint64_t seed) {
    Eigen::HouseholderQR<Matrix> qr(testutil::gaussian(n, n, seed));
    return qr.householderQ() * Matrix::Identity(n, n);
}

}  // namespace

TEST_CASE("pca_decompose") {
    const Matrix Xc = center_rows(testutil::gaussian(30, 50, 1));
    const auto m = pca_decompose(Xc);
    CHECK((m.loadings * m.scores - Xc).cwiseAbs().maxCoeff() <= 1e-9);
    CHECK((m.loadings.transpose() * m.loadings - Matrix::Identity(m.loadings.cols(), m.loadings.cols()))
              .cwiseAbs()
              .maxCoeff() <= 1e-10);
    for (Eigen::Index k = 1; k < m.variances.size(); ++k) CHECK(m.variances[k] <= m.variances[k - 1]);
    for (Eigen::Index k = 0; k < m.scores.rows(); ++k) {
        Eigen::Index peak;
        m.scores.row(k).cwiseAbs().maxCoeff(&peak);
        CHECK(m.scores(k, peak) > 0.0);
    }
    // variances are sigma^2 / (T - 1), i.e. the time-course variances of centred rows
    CHECK(m.variances[0] == doctest::Approx(m.scores.row(0).squaredNorm() / 49.0));

    const Matrix rank1 = testutil::gaussian(20, 1, 2) * testutil::gaussian(1, 15, 3);
    const auto r = pca_decompose(rank1);
    int above = 0;
    for (Eigen::Index k = 0; k < r.variances.size(); ++k) above += r.variances[k] > 1e-10 * r.variances[0];
    CHECK(above == 1);

    CHECK_THROWS_AS(pca_decompose(Matrix::Zero(5, 4)), DegenerateError);
}

TEST_CASE("truncate") {
    PCAModel m;
    m.scores = testutil::gaussian(5, 10, 4);
    m.variances = (Vector(5) << 5, 4, 3, 2, 1).finished();
    m.loadings = Matrix::Identity(5, 5);

    auto all = truncate(m, {0, 0, 0.0});
    CHECK(all.scores == m.scores);
    CHECK(all.kept == std::vector<int>{0, 1, 2, 3, 4});

    auto mid = truncate(m, {1, 2, 0.0});
    CHECK(mid.kept == std::vector<int>{1, 2});
    CHECK(mid.scores.row(0) == m.scores.row(1));

    auto floor = truncate(m, {0, 0, 0.1});  // total 15, floor 1.5
    CHECK(floor.kept == std::vector<int>{0, 1, 2, 3});

    CHECK_THROWS_AS(truncate(m, {3, 2, 0.0}), ParameterError);
    CHECK_THROWS_AS(truncate(m, {0, 0, 1.0}), ParameterError);
    CHECK_THROWS_AS(truncate(m, {-1, 0, 0.0}), ParameterError);
}

TEST_CASE("dropping the leading component removes the injected drift") {
    SyntheticCohortSpec spec;
    spec.drift_amplitude = 8.0;
    spec.rng_seed = 3;
    const auto c = generate_synthetic_cohort(spec);
    const auto m = pca_decompose(center_rows(c.datasets[0].X()));
    const auto kept = truncate(m, {1, 0, 0.0});
    CHECK(kept.kept.front() == 1);
    CHECK(std::abs(pearson(m.scores.row(0).transpose(), c.drift)) > 0.9);
}

TEST_CASE("pls_fit first latent") {
    const Eigen::Index T = 40;
    const Matrix scores = pca_decompose(center_rows(testutil::gaussian(60, T, 5))).scores.topRows(10);

    SUBCASE("dependent variable equal to PC1") {
        const auto m = pls_fit(scores, scores.row(0).transpose(), 1);
        CHECK(cosine(m.latents.col(0), scores.row(0).transpose()) >= 1.0 - 1e-8);
    }

    SUBCASE("orthonormal score rows: t1 is the normalised projection of D") {
        const Matrix Q = orthogonal(T, 6).leftCols(8).transpose();  // 8 x T, orthonormal rows
        const Vector d = testutil::gaussian(T, 1, 7);
        const auto m = pls_fit(Q, d, 1);
        const Vector dc = d.array() - d.mean();
        const Vector proj = Q.transpose() * (Q * dc);
        CHECK(cosine(m.latents.col(0), proj) >= 1.0 - 1e-8);
        CHECK(m.latents.col(0).dot(dc) > 0.0);
    }

    SUBCASE("weights match the SVD of the cross-covariance") {
        const Matrix D = testutil::gaussian(T, 3, 8);
        const Matrix Dc = D.rowwise() - D.colwise().mean();
        const auto m = pls_fit(scores, D, 1);
        Eigen::JacobiSVD<Matrix> svd(scores * Dc, Eigen::ComputeThinU | Eigen::ComputeThinV);
        CHECK(cosine(m.x_weights.col(0), svd.matrixU().col(0)) >= 1.0 - 1e-8);
        CHECK(cosine(m.y_weights.col(0), svd.matrixV().col(0)) >= 1.0 - 1e-8);
        CHECK(m.x_weights.col(0).norm() == doctest::Approx(1.0));

        // no unit probe pair beats the fitted one
        const Matrix E = scores.transpose();
        const double best = (E * m.x_weights.col(0)).dot(Dc * m.y_weights.col(0));
        std::mt19937_64 rng(9);
        std::normal_distribution<double> n;
        int beaten = 0;
        for (int trial = 0; trial < 200; ++trial) {
            Vector w(scores.rows()), c(3);
            for (auto& x : w) x = n(rng);
            for (auto& x : c) x = n(rng);
            w.normalize();
            c.normalize();
            beaten += (E * w).dot(Dc * c) > best + 1e-12;
        }
        CHECK(beaten == 0);

        // largest-magnitude entry of c is positive
        Eigen::Index peak;
        m.y_weights.col(0).cwiseAbs().maxCoeff(&peak);
        CHECK(m.y_weights(peak, 0) > 0.0);
    }
}

TEST_CASE("pls_fit deflation") {
    const Eigen::Index T = 50;
    const Matrix scores = testutil::gaussian(12, T, 10);
    const Matrix D = testutil::gaussian(T, 4, 11);
    const auto m = pls_fit(scores, D, 5);
    REQUIRE(m.n_latents() == 5);
    CHECK((m.latents.transpose() * m.latents - Matrix::Identity(5, 5)).cwiseAbs().maxCoeff() <= 1e-8);
    for (Eigen::Index k = 0; k < 5; ++k) CHECK(m.x_weights.col(k).norm() == doctest::Approx(1.0));

    // replay the deflation and check the pieces add back up
    const Matrix E1 = scores.transpose();
    Matrix E = E1, sum = Matrix::Zero(E1.rows(), E1.cols());
    for (Eigen::Index k = 0; k < 5; ++k) {
        const Vector t = m.latents.col(k);
        sum += t * (t.transpose() * E1);
        E -= t * (t.transpose() * E);
    }
    CHECK((sum + E - E1).cwiseAbs().maxCoeff() <= 1e-10);

    // rotating the component basis leaves the latents alone
    const Matrix R = orthogonal(12, 12);
    const auto r = pls_fit(R * scores, D, 5);
    CHECK((r.latents - m.latents).cwiseAbs().maxCoeff() <= 1e-8);

    CHECK_THROWS_AS(pls_fit(scores, D, 13), ParameterError);
    CHECK_THROWS_AS(pls_fit(scores, D.topRows(10), 1), ShapeError);
}

TEST_CASE("pls_fit reports partial results when rank runs out") {
    const Matrix scores = testutil::gaussian(2, 30, 13);
    Matrix lifted(3, 30);
    lifted << scores, scores.row(0) + scores.row(1);  // rank 2
    try {
        pls_fit(lifted, testutil::gaussian(30, 2, 14), 3);
        FAIL("expected a rank error");
    } catch (const PartialPlsError& e) {
        CHECK(e.partial.n_latents() == 2);
        CHECK(e.kind() == ErrorKind::numerical);
    }
}

TEST_CASE("covariance_features") {
    const Eigen::Index T = 30;
    const auto m = pls_fit(testutil::gaussian(6, T, 15), testutil::gaussian(T, 2, 16), 3);
    Matrix X0 = unit_normalize_rows(center_rows(testutil::gaussian(20, T, 17))).X0;
    X0.row(0) = m.latents.col(0).transpose();
    X0.row(1).setZero();
    const auto f = covariance_features(X0, m);
    CHECK(f.n_latents() == 3);
    CHECK(std::abs(f.R(0, 0) - 1.0) <= 1e-8);
    CHECK(std::abs(f.R(0, 1)) <= 1e-8);
    CHECK(std::abs(f.R(0, 2)) <= 1e-8);
    CHECK(f.R.row(1).isZero(0.0));
    CHECK(f.R.cwiseAbs().maxCoeff() <= 1.0 + 1e-12);
    CHECK(covariance_features(X0, m, kernels::Exec::serial).R == f.R);
    CHECK_THROWS_AS(covariance_features(X0.leftCols(10), m), ShapeError);
}

TEST_CASE("build_seed_matrix") {
    BoldDataset d(VolumeGrid::full({4, 1, 1}), testutil::gaussian(4, 6, 18), 1.0);
    SeedSet a, b;
    a.voxel_rows = {2, 0};
    b.voxel_rows = {0, 3};
    const auto s = build_seed_matrix(d, {a, b});
    CHECK(s.rows == std::vector<std::size_t>{2, 0, 3});
    CHECK(s.duplicates == 1);
    CHECK(s.D.cols() == 3);
    const Vector x = d.X().row(2).transpose();
    CHECK((s.D.col(0) - (x.array() - x.mean()).matrix()).cwiseAbs().maxCoeff() < 1e-15);
    CHECK(s.D.colwise().mean().cwiseAbs().maxCoeff() < 1e-12);

    SeedSet bad;
    bad.voxel_rows = {4};
    CHECK_THROWS_AS(build_seed_matrix(d, {bad}), ShapeError);
}
