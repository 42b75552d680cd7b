#pragma once

#include <cstddef>
#include <vector>

#include "parcelforge/dataset.hpp"

namespace parcelforge::kernels {

/// Selects the OpenMP kernel or its serial reference twin.
enum class Exec { parallel, serial };

/// Compressed adjacency: neighbours of v are targets[offsets[v] .. offsets[v+1]).
struct CsrGraph {
    std::vector<std::size_t> offsets{0};
    std::vector<std::size_t> targets;
    std::vector<double> weights;

    std::size_t n_vertices() const noexcept { return offsets.size() - 1; }
    std::size_t n_arcs() const noexcept { return targets.size(); }
};

/// Shortest-path distances from every vertex (Dijkstra per source, one source
/// per OpenMP iteration). Unreachable pairs are +inf.
Matrix all_pairs_shortest_paths(const CsrGraph& g);

/// Pearson correlation between every pair of columns of A (T x M).
/// Columns must not be constant.
Matrix column_correlations(const Matrix& A);

struct OlsResult {
    Matrix t;                    // V x (p - 1): t-values of every column but the intercept
    std::size_t saturated = 0;   // count of entries clipped to +-kTCap
};
inline constexpr double kTCap = 1e12;

/// Voxelwise OLS t-values. `design` is T x p with the intercept in column 0.
OlsResult ols_tvalues(const Matrix& X, const Matrix& design);

/// A * B evaluated one output row at a time.
Matrix row_products(const Matrix& A, const Matrix& B);

/// Single-threaded reference versions; results are bit-identical to the
/// parallel kernels above.
namespace serial {
Matrix all_pairs_shortest_paths(const CsrGraph& g);
Matrix column_correlations(const Matrix& A);
OlsResult ols_tvalues(const Matrix& X, const Matrix& design);
Matrix row_products(const Matrix& A, const Matrix& B);
}  // namespace serial

}  // namespace parcelforge::kernels
