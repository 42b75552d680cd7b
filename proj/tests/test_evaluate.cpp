#include <cmath>
#include <random>

#include "doctest.h"
#include "parcelforge/error.hpp"
#include "parcelforge/evaluate.hpp"
#include "parcelforge/pls.hpp"
#include "parcelforge/stats.hpp"
#include "parcelforge/synthetic.hpp"
#include "test_util.hpp"

using namespace parcelforge;

namespace {

DesignMatrix single(const Vector& y) { return DesignMatrix(y, {"task"}); }

StatMap stat_of(const Matrix& t) {
    StatMap s;
    s.t = t;
    return s;
}

Parcellation parc_of(std::vector<int> labels, int n) {
    Parcellation p;
    p.labels = std::move(labels);
    p.n_parcels = n;
    return p;
}

}  // namespace

TEST_CASE("glm_tvalues hand example") {
    const Vector y = (Vector(4) << 0, 1, 0, 1).finished();
    Matrix X(2, 4);
    X << 1, 3, 1, 2,  //
        1, 3, 1, 3;
    const auto s = glm_tvalues(X, single(y));
    CHECK(s.dof == 2);
    CHECK(s.kind == StatKind::glm);
    CHECK(s.t(0, 0) == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(s.t(1, 0) == kernels::kTCap);
    CHECK(s.saturated == 1);
    CHECK(glm_tvalues(X, single(y), kernels::Exec::serial).t == s.t);
}

TEST_CASE("glm_tvalues under the null stays small") {
    const Eigen::Index T = 200;
    const Matrix X = testutil::gaussian(1000, T, 1);
    const DesignMatrix design(testutil::gaussian(T, 2, 2), {"a", "b"});
    const auto s = glm_tvalues(X, design);
    const auto small = (s.t.array().abs() < 5.0).count();
    CHECK(static_cast<double>(small) >= 0.999 * static_cast<double>(s.t.size()));
}

TEST_CASE("glm_tvalues rejects bad designs") {
    Matrix y = testutil::gaussian(10, 2, 3);
    y.col(1) = 2.0 * y.col(0);
    CHECK_THROWS_AS(glm_tvalues(testutil::gaussian(3, 10, 4), DesignMatrix(y, {"a", "b"})), DegenerateError);
    CHECK_THROWS_AS(glm_tvalues(testutil::gaussian(3, 9, 4), DesignMatrix(y, {"a", "b"})), ShapeError);
    const Matrix short_y = testutil::gaussian(3, 2, 5);
    CHECK_THROWS_AS(glm_tvalues(testutil::gaussian(3, 3, 4), DesignMatrix(short_y, {"a", "b"})), ParameterError);
}

TEST_CASE("pls_tvalue") {
    CHECK(pls_tvalue(0.0, 10) == 0.0);
    CHECK(pls_tvalue(0.0, 1000) == 0.0);
    CHECK(pls_tvalue(0.5, 18) == doctest::Approx(2.3094).epsilon(1e-4));
    CHECK(pls_tvalue(0.5, 18, Eq6Form::literal) == doctest::Approx(0.5 * 4.0 / 0.75));
    double prev = -1e300;
    for (double r = -0.99; r < 1.0; r += 0.01) {
        const double t = pls_tvalue(r, 30);
        CHECK(t > prev);
        CHECK(pls_tvalue(-r, 30) == doctest::Approx(-t));
        prev = t;
    }
    CHECK_THROWS_AS(pls_tvalue(1.0, 10), DomainError);
    CHECK_THROWS_AS(pls_tvalue(-1.5, 10), DomainError);
    CHECK_THROWS_AS(pls_tvalue(0.2, 2), ParameterError);
}

TEST_CASE("single-regressor GLM t equals the correlation t") {
    std::mt19937_64 rng(6);
    for (int trial = 0; trial < 20; ++trial) {
        const Eigen::Index T = 20 + trial;
        const Vector y = testutil::gaussian(T, 1, 100 + static_cast<std::uint64_t>(trial));
        const Matrix X = testutil::gaussian(30, T, 200 + static_cast<std::uint64_t>(trial)) +
                         0.5 * Vector::Ones(30) * y.transpose();
        const auto glm = glm_tvalues(X, single(y));
        for (Eigen::Index v = 0; v < 30; ++v) {
            const double r = pearson(X.row(v).transpose(), y);
            CHECK(std::abs(glm.t(v, 0) - pls_tvalue(r, static_cast<int>(T))) <= 1e-8);
        }
    }
}

TEST_CASE("pls_tmap") {
    const Eigen::Index T = 40;
    const Matrix Xc = center_rows(testutil::gaussian(60, T, 7));
    const Matrix X0 = unit_normalize_rows(Xc).X0;
    const auto scores = pca_decompose(Xc).scores;
    const DesignMatrix design(testutil::gaussian(T, 3, 8), {"a", "b", "c"});
    const auto s = pls_tmap(X0, design, scores);
    CHECK(s.t.cols() == 3);
    CHECK(s.kind == StatKind::pls);
    CHECK(s.dof == T - 2);
    CHECK(s.regressors == design.names);
    CHECK(pls_tmap(X0, design, scores, Eq6Form::standard, kernels::Exec::serial).t == s.t);

    // a voxel equal to the latent sits on the |r| = 1 boundary
    const Vector y = design.Y.col(0);
    Matrix X1 = X0;
    X1.row(0) = ((y.array() - y.mean()) / (y.array() - y.mean()).matrix().norm()).transpose();
    const auto sat = pls_tmap(X1, DesignMatrix(y, {"a"}), scores);
    CHECK(sat.saturated == 1);
    CHECK(sat.t(0, 0) == doctest::Approx(pls_tvalue(kMaxAbsCorrelation, static_cast<int>(T))));

    CHECK_THROWS_AS(pls_tmap(X0.leftCols(30), design, scores), ShapeError);
}

TEST_CASE("pls_tmap separates task parcels on noiseless data") {
    SyntheticCohortSpec spec;
    spec.noise_sigma = 0.0;
    const auto c = generate_synthetic_cohort(spec);
    const Matrix Xc = center_rows(c.datasets[0].X());
    const auto kept = truncate(pca_decompose(Xc), {0, 0, 1e-10});
    const auto s = pls_tmap(unit_normalize_rows(Xc).X0, c.design, kept.scores);
    const int n_task = spec.task_parcels();
    for (Eigen::Index k = 0; k < c.design.n_regressors(); ++k) {
        double task_min = 1e300, other_max = -1e300;
        for (std::size_t v = 0; v < c.truth_labels.size(); ++v) {
            const int p = c.truth_labels[v];
            const double t = s.t(static_cast<Eigen::Index>(v), k);
            if (p < n_task && p % spec.n_conditions == k)
                task_min = std::min(task_min, t);
            else if (p >= n_task)
                other_max = std::max(other_max, t);
        }
        CHECK(task_min > other_max);
    }
}

TEST_CASE("intra_parcel_variance") {
    Matrix t(2, 2);
    t << 0, 0, 2, 0;
    const auto two = intra_parcel_variance(stat_of(t), parc_of({0, 0}, 1));
    CHECK(two.v[0] == doctest::Approx(std::sqrt(2.0)));

    Matrix same(3, 2);
    same << 1, 2, 1, 2, 1, 2;
    CHECK(intra_parcel_variance(stat_of(same), parc_of({0, 0, 0}, 1)).v[0] == 0.0);

    const auto single = intra_parcel_variance(stat_of(testutil::gaussian(4, 3, 9)), parc_of({0, 1, 2, 3}, 4));
    CHECK(single.v == std::vector<double>(4, 0.0));
    CHECK(single.singletons == 4);

    ParcelVarianceReport q;
    q.v = {1, 2, 3, 4};
    summarize(q);
    CHECK(q.q1 == doctest::Approx(1.75));
    CHECK(q.median == doctest::Approx(2.5));
    CHECK(q.q3 == doctest::Approx(3.25));
    CHECK(q.mean == doctest::Approx(2.5));

    CHECK_THROWS_AS(intra_parcel_variance(stat_of(t), parc_of({0, 3}, 2)), ShapeError);
    CHECK_THROWS_AS(intra_parcel_variance(stat_of(t), parc_of({0}, 1)), ShapeError);
}

TEST_CASE("merging parcels never lowers the within-parcel sum of squares") {
    std::mt19937_64 rng(10);
    const Matrix t = testutil::gaussian(50, 3, 11);
    auto ss = [&](const std::vector<int>& labels, int n) {
        // sum over parcels and features of (n_p - 1) * var = squared deviations
        const auto rep = intra_parcel_variance(stat_of(t), parc_of(labels, n));
        std::vector<int> sizes(static_cast<std::size_t>(n), 0);
        for (int l : labels) ++sizes[static_cast<std::size_t>(l)];
        double total = 0;
        for (int p = 0; p < n; ++p)
            total += (sizes[static_cast<std::size_t>(p)] - 1.0) * rep.v[static_cast<std::size_t>(p)] *
                     rep.v[static_cast<std::size_t>(p)];
        return total;
    };
    for (int trial = 0; trial < 50; ++trial) {
        std::uniform_int_distribution<int> pick(0, 5);
        std::vector<int> labels(50);
        for (int i = 0; i < 6; ++i) labels[static_cast<std::size_t>(i)] = i;  // all parcels used
        for (std::size_t i = 6; i < 50; ++i) labels[i] = pick(rng);
        const double before = ss(labels, 6);
        std::vector<int> merged = labels;
        for (auto& l : merged)
            if (l == 5) l = 4;
        CHECK(ss(merged, 5) >= before - 1e-9);
    }
}

TEST_CASE("adjusted_rand") {
    const std::vector<int> a{0, 0, 1, 1, 2, 2};
    CHECK(adjusted_rand(a, a) == doctest::Approx(1.0));
    CHECK(adjusted_rand(a, {5, 5, 3, 3, 9, 9}) == doctest::Approx(1.0));
    CHECK(adjusted_rand({0, 0, 1, 1}, {0, 1, 0, 1}) == doctest::Approx(-0.5));
    CHECK_THROWS_AS(adjusted_rand({0, 1}, {0}), ShapeError);
}

TEST_CASE("compare_methods and active_parcels") {
    ParcelVarianceReport zero, one;
    zero.v = {0, 0, 0};
    zero.method = "zero";
    one.v = {1, 1, 1};
    one.method = "one";
    summarize(zero);
    summarize(one);
    const auto rows = compare_methods({zero, one, zero});
    REQUIRE(rows.size() == 3);
    CHECK(rows[0].mean == 0.0);
    CHECK(rows[1].mean == 1.0);
    CHECK(rows[2].method == rows[0].method);
    CHECK(rows[2].q3 == rows[0].q3);
    CHECK_THROWS_AS(compare_methods({zero}), ParameterError);

    Matrix t(4, 1);
    t << 3, 2, 0, 1;
    CHECK(active_parcels(stat_of(t), parc_of({0, 0, 1, 1}, 2), 0, 2.0) == std::vector<int>{0});
    CHECK(active_parcels(stat_of(t), parc_of({0, 0, 1, 1}, 2), 0, 0.0) == std::vector<int>{0, 1});
    CHECK_THROWS_AS(active_parcels(stat_of(t), parc_of({0, 0, 1, 1}, 2), 1, 0.0), ParameterError);
}

TEST_CASE("variance report CSV round trip") {
    const auto dir = testutil::workdir("reports");
    ParcelVarianceReport a, b;
    a.method = "glm_t/PLS1";
    a.v = {0.1, 1.0 / 3.0, 2.5};
    b.method = "glm_t/GLM";
    b.v = {4.0, 5.0};
    summarize(a);
    summarize(b);
    write_variance_report_csv(dir / "v.csv", {a, b});
    const auto back = read_variance_report_csv(dir / "v.csv");
    REQUIRE(back.size() == 2);
    CHECK(back[0].method == a.method);
    CHECK(back[0].v == a.v);
    CHECK(back[1].v == b.v);
    CHECK(back[0].q3 == a.q3);
}

TEST_CASE("basic statistics") {
    const std::vector<double> x{2, 4, 4, 4, 5, 5, 7, 9};
    CHECK(mean(x) == 5.0);
    CHECK(sample_std(x) == doctest::Approx(std::sqrt(32.0 / 7.0)));
    CHECK(sample_std(std::vector<double>{3.0}) == 0.0);
    CHECK(quantile_linear(x, 0.0) == 2.0);
    CHECK(quantile_linear(x, 1.0) == 9.0);
}
