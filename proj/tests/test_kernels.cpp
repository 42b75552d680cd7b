// Every parallel kernel must reproduce its serial twin bit for bit.

#include <omp.h>

#include "doctest.h"
#include "parcelforge/error.hpp"
#include "parcelforge/kernels.hpp"
#include "parcelforge/parcellate.hpp"
#include "test_util.hpp"

using namespace parcelforge;
namespace k = parcelforge::kernels;

namespace {

struct Threads {
    int saved = omp_get_max_threads();
    explicit Threads(int n) { omp_set_num_threads(n); }
    ~Threads() { omp_set_num_threads(saved); }
};

}  // namespace

TEST_CASE("parallel kernels equal their serial references") {
    for (int threads : {1, 3, 4}) {
        Threads guard(threads);
        CAPTURE(threads);
        const auto grid = VolumeGrid::full({7, 6, 3});
        const auto graph = build_graph(grid, testutil::gaussian(126, 2, 1));
        CHECK(k::all_pairs_shortest_paths(graph.csr) == k::serial::all_pairs_shortest_paths(graph.csr));

        const Matrix A = testutil::gaussian(50, 37, 2);
        CHECK(k::column_correlations(A) == k::serial::column_correlations(A));

        const Matrix X = testutil::gaussian(200, 50, 3);
        Matrix design(50, 3);
        design.col(0).setOnes();
        design.rightCols(2) = testutil::gaussian(50, 2, 4);
        const auto a = k::ols_tvalues(X, design), b = k::serial::ols_tvalues(X, design);
        CHECK(a.t == b.t);
        CHECK(a.saturated == b.saturated);

        const Matrix L = testutil::gaussian(50, 4, 5);
        CHECK(k::row_products(X, L) == k::serial::row_products(X, L));
    }
}

TEST_CASE("kernel results") {
    const Matrix A = testutil::gaussian(30, 4, 6);
    const Matrix C = k::column_correlations(A);
    CHECK(C.diagonal().isOnes(1e-12));
    CHECK(C == C.transpose());
    Matrix flat = A;
    flat.col(2).setConstant(1.0);
    CHECK_THROWS_AS(k::column_correlations(flat), DegenerateError);

    const Matrix X = testutil::gaussian(5, 8, 7), L = testutil::gaussian(8, 2, 8);
    CHECK((k::row_products(X, L) - X * L).cwiseAbs().maxCoeff() < 1e-12);
    CHECK_THROWS_AS(k::row_products(X, L.topRows(7)), ShapeError);

    kernels::CsrGraph g;  // two isolated vertices
    g.offsets = {0, 0, 0};
    const Matrix d = k::all_pairs_shortest_paths(g);
    CHECK(d(0, 0) == 0.0);
    CHECK(std::isinf(d(0, 1)));
}
