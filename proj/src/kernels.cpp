#include "parcelforge/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>

#include "parcelforge/error.hpp"

namespace parcelforge::kernels {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void dijkstra_from(const CsrGraph& g, std::size_t source, double* dist) {
    using Item = std::pair<double, std::size_t>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
    const std::size_t n = g.n_vertices();
    for (std::size_t v = 0; v < n; ++v) dist[v] = kInf;
    dist[source] = 0.0;
    heap.emplace(0.0, source);
    while (!heap.empty()) {
        const auto [d, u] = heap.top();
        heap.pop();
        if (d > dist[u]) continue;
        for (std::size_t a = g.offsets[u]; a < g.offsets[u + 1]; ++a) {
            const std::size_t v = g.targets[a];
            const double nd = d + g.weights[a];
            if (nd < dist[v]) {
                dist[v] = nd;
                heap.emplace(nd, v);
            }
        }
    }
}

Matrix standardized_columns(const Matrix& A) {
    Matrix Z(A.rows(), A.cols());
    for (Eigen::Index j = 0; j < A.cols(); ++j) {
        Z.col(j) = A.col(j).array() - A.col(j).mean();
        const double n = Z.col(j).norm();
        if (n == 0.0) throw DegenerateError("column " + std::to_string(j) + " has zero variance");
        Z.col(j) /= n;
    }
    return Z;
}

double clipped_dot(const Matrix& Z, Eigen::Index i, Eigen::Index j) {
    double s = 0.0;
    for (Eigen::Index t = 0; t < Z.rows(); ++t) s += Z(t, i) * Z(t, j);
    return std::clamp(s, -1.0, 1.0);
}

struct OlsSetup {
    Matrix hat;   // p x T: (Y'Y)^-1 Y'
    Vector gdiag; // diag((Y'Y)^-1)
    Eigen::Index dof;
};

OlsSetup ols_setup(const Matrix& design) {
    const Eigen::Index T = design.rows();
    const Eigen::Index p = design.cols();
    if (T <= p) throw ParameterError("GLM needs more time points than design columns");
    const Matrix gram = design.transpose() * design;
    Eigen::FullPivLU<Matrix> lu(gram);
    if (lu.rank() < p) throw DegenerateError("design matrix is rank deficient");
    const Matrix ginv = lu.inverse();
    return {ginv * design.transpose(), ginv.diagonal(), T - p};
}

// Shared per-voxel body so the serial and parallel loops agree bit for bit.
std::size_t ols_row(const Matrix& X, const Matrix& design, const OlsSetup& s, Eigen::Index v, Matrix& out) {
    const Eigen::Index T = design.rows();
    const Eigen::Index p = design.cols();
    Vector beta = Vector::Zero(p);
    for (Eigen::Index k = 0; k < p; ++k) {
        double acc = 0.0;
        for (Eigen::Index t = 0; t < T; ++t) acc += s.hat(k, t) * X(v, t);
        beta[k] = acc;
    }
    double rss = 0.0;
    for (Eigen::Index t = 0; t < T; ++t) {
        double fit = 0.0;
        for (Eigen::Index k = 0; k < p; ++k) fit += design(t, k) * beta[k];
        const double r = X(v, t) - fit;
        rss += r * r;
    }
    const double sigma2 = rss / static_cast<double>(s.dof);
    std::size_t saturated = 0;
    for (Eigen::Index k = 1; k < p; ++k) {
        double t = beta[k] / std::sqrt(sigma2 * s.gdiag[k]);
        if (std::isnan(t)) {
            t = 0.0;
            ++saturated;
        } else if (!std::isfinite(t) || std::abs(t) > kTCap) {
            t = std::copysign(kTCap, t);
            ++saturated;
        }
        out(v, k - 1) = t;
    }
    return saturated;
}

void product_row(const Matrix& A, const Matrix& B, Eigen::Index i, Matrix& out) {
    for (Eigen::Index k = 0; k < B.cols(); ++k) {
        double acc = 0.0;
        for (Eigen::Index t = 0; t < A.cols(); ++t) acc += A(i, t) * B(t, k);
        out(i, k) = acc;
    }
}

void check_product(const Matrix& A, const Matrix& B) {
    if (A.cols() != B.rows())
        throw ShapeError("product shape mismatch: " + std::to_string(A.cols()) + " vs " + std::to_string(B.rows()));
}

}  // namespace

Matrix all_pairs_shortest_paths(const CsrGraph& g) {
    const auto n = static_cast<Eigen::Index>(g.n_vertices());
    Matrix D(n, n);  // column s holds distances from source s
#pragma omp parallel for schedule(dynamic, 8)
    for (Eigen::Index s = 0; s < n; ++s) dijkstra_from(g, static_cast<std::size_t>(s), D.col(s).data());
    return D;
}

Matrix column_correlations(const Matrix& A) {
    const Matrix Z = standardized_columns(A);
    const Eigen::Index m = A.cols();
    Matrix C(m, m);
#pragma omp parallel for schedule(dynamic, 4)
    for (Eigen::Index i = 0; i < m; ++i)
        for (Eigen::Index j = 0; j < m; ++j) C(i, j) = i == j ? 1.0 : clipped_dot(Z, std::min(i, j), std::max(i, j));
    return C;
}

OlsResult ols_tvalues(const Matrix& X, const Matrix& design) {
    if (X.cols() != design.rows()) throw ShapeError("design rows must equal the number of time points");
    const OlsSetup s = ols_setup(design);
    OlsResult r{Matrix(X.rows(), design.cols() - 1), 0};
    std::size_t saturated = 0;
#pragma omp parallel for reduction(+ : saturated)
    for (Eigen::Index v = 0; v < X.rows(); ++v) saturated += ols_row(X, design, s, v, r.t);
    r.saturated = saturated;
    return r;
}

Matrix row_products(const Matrix& A, const Matrix& B) {
    check_product(A, B);
    Matrix out(A.rows(), B.cols());
#pragma omp parallel for
    for (Eigen::Index i = 0; i < A.rows(); ++i) product_row(A, B, i, out);
    return out;
}

namespace serial {

Matrix all_pairs_shortest_paths(const CsrGraph& g) {
    const auto n = static_cast<Eigen::Index>(g.n_vertices());
    Matrix D(n, n);
    for (Eigen::Index s = 0; s < n; ++s) dijkstra_from(g, static_cast<std::size_t>(s), D.col(s).data());
    return D;
}

Matrix column_correlations(const Matrix& A) {
    const Matrix Z = standardized_columns(A);
    const Eigen::Index m = A.cols();
    Matrix C(m, m);
    for (Eigen::Index i = 0; i < m; ++i)
        for (Eigen::Index j = 0; j < m; ++j) C(i, j) = i == j ? 1.0 : clipped_dot(Z, std::min(i, j), std::max(i, j));
    return C;
}

OlsResult ols_tvalues(const Matrix& X, const Matrix& design) {
    if (X.cols() != design.rows()) throw ShapeError("design rows must equal the number of time points");
    const OlsSetup s = ols_setup(design);
    OlsResult r{Matrix(X.rows(), design.cols() - 1), 0};
    for (Eigen::Index v = 0; v < X.rows(); ++v) r.saturated += ols_row(X, design, s, v, r.t);
    return r;
}

Matrix row_products(const Matrix& A, const Matrix& B) {
    check_product(A, B);
    Matrix out(A.rows(), B.cols());
    for (Eigen::Index i = 0; i < A.rows(); ++i) product_row(A, B, i, out);
    return out;
}

}  // namespace serial
}  // namespace parcelforge::kernels
