// Serial vs OpenMP timings for the hot kernels. Also checks that both
// versions agree bit for bit, since the parallel ones are only allowed to
// split work, never to reorder arithmetic.

#include <omp.h>

#include <chrono>
#include <cstdio>
#include <functional>
#include <random>
#include <string>

#include "parcelforge/kernels.hpp"
#include "parcelforge/parcellate.hpp"

using namespace parcelforge;
namespace k = parcelforge::kernels;

namespace {

double seconds(const std::function<void()>& f, int reps) {
    double best = 1e300;
    for (int r = 0; r < reps; ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        f();
        best = std::min(best, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    }
    return best;
}

Matrix random_matrix(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    Matrix m(r, c);
    for (Eigen::Index j = 0; j < c; ++j)
        for (Eigen::Index i = 0; i < r; ++i) m(i, j) = n(rng);
    return m;
}

void report(const char* name, double serial, double parallel, bool identical) {
    std::printf("%-28s serial %9.4f s  parallel %9.4f s  speedup %5.2fx  %s\n", name, serial, parallel,
                serial / parallel, identical ? "identical" : "MISMATCH");
}

}  // namespace

int main(int argc, char** argv) {
    const int side = argc > 1 ? std::stoi(argv[1]) : 16;
    const int reps = argc > 2 ? std::stoi(argv[2]) : 3;
    std::printf("threads %d, grid %dx%dx4\n", omp_get_max_threads(), side, side);

    std::mt19937_64 rng(1);
    const VolumeGrid grid = VolumeGrid::full({side, side, 4});
    const auto V = static_cast<Eigen::Index>(grid.n_voxels());
    const Eigen::Index T = 120;

    const Matrix features = random_matrix(V, 3, rng);
    const auto graph = build_graph(grid, features);
    Matrix a, b;
    double ts = seconds([&] { a = k::serial::all_pairs_shortest_paths(graph.csr); }, reps);
    double tp = seconds([&] { b = k::all_pairs_shortest_paths(graph.csr); }, reps);
    report("all_pairs_shortest_paths", ts, tp, a == b);

    const Matrix tcs = random_matrix(T, 600, rng);
    ts = seconds([&] { a = k::serial::column_correlations(tcs); }, reps);
    tp = seconds([&] { b = k::column_correlations(tcs); }, reps);
    report("column_correlations", ts, tp, a == b);

    const Matrix X = random_matrix(V, T, rng);
    Matrix design(T, 3);
    design.col(0).setOnes();
    design.rightCols(2) = random_matrix(T, 2, rng);
    k::OlsResult ra, rb;
    ts = seconds([&] { ra = k::serial::ols_tvalues(X, design); }, reps);
    tp = seconds([&] { rb = k::ols_tvalues(X, design); }, reps);
    report("ols_tvalues", ts, tp, ra.t == rb.t);

    const Matrix lat = random_matrix(T, 5, rng);
    ts = seconds([&] { a = k::serial::row_products(X, lat); }, reps);
    tp = seconds([&] { b = k::row_products(X, lat); }, reps);
    report("row_products", ts, tp, a == b);
    return 0;
}
