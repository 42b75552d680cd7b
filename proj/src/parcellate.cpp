#include "parcelforge/parcellate.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <queue>
#include <random>

#include "parcelforge/error.hpp"
#include "parcelforge/io.hpp"

namespace parcelforge {

double local_distance(const Eigen::Ref<const Vector>& fv, const Eigen::Ref<const Vector>& fw) {
    if (fv.size() != fw.size()) throw ShapeError("feature vectors differ in length");
    return (fv - fw).norm();
}

VoxelGraph build_graph(const VolumeGrid& grid, const Matrix& features) {
    if (static_cast<std::size_t>(features.rows()) != grid.n_voxels())
        throw ShapeError("feature rows (" + std::to_string(features.rows()) + ") do not match voxels (" +
                         std::to_string(grid.n_voxels()) + ")");
    VoxelGraph g;
    auto& csr = g.csr;
    for (std::size_t v = 0; v < grid.n_voxels(); ++v) {
        for (std::size_t w : grid.neighbours(v)) {
            csr.targets.push_back(w);
            csr.weights.push_back(local_distance(features.row(static_cast<Eigen::Index>(v)).transpose(),
                                                 features.row(static_cast<Eigen::Index>(w)).transpose()));
        }
        csr.offsets.push_back(csr.targets.size());
    }
    return g;
}

GeodesicMatrix geodesics(const VoxelGraph& graph, kernels::Exec exec) {
    const auto& csr = graph.csr;
    const std::size_t n = csr.n_vertices();
    if (n == 0) throw ParameterError("geodesics of an empty graph");

    GeodesicMatrix out;
    out.distances = exec == kernels::Exec::parallel ? kernels::all_pairs_shortest_paths(csr)
                                                    : kernels::serial::all_pairs_shortest_paths(csr);

    // Dijkstra from either end can differ in the last bit; keep the shorter.
    for (Eigen::Index j = 0; j < out.distances.cols(); ++j)
        for (Eigen::Index i = 0; i < j; ++i)
            out.distances(i, j) = out.distances(j, i) = std::min(out.distances(i, j), out.distances(j, i));

    out.component.assign(n, -1);
    int n_comp = 0;
    for (std::size_t s = 0; s < n; ++s) {
        if (out.component[s] >= 0) continue;
        std::queue<std::size_t> q;
        q.push(s);
        out.component[s] = n_comp;
        while (!q.empty()) {
            const auto u = q.front();
            q.pop();
            for (std::size_t a = csr.offsets[u]; a < csr.offsets[u + 1]; ++a)
                if (out.component[csr.targets[a]] < 0) {
                    out.component[csr.targets[a]] = n_comp;
                    q.push(csr.targets[a]);
                }
        }
        ++n_comp;
    }
    out.connected = n_comp == 1;
    if (!out.connected) {
        double largest = 0.0;
        for (Eigen::Index j = 0; j < out.distances.cols(); ++j)
            for (Eigen::Index i = 0; i < out.distances.rows(); ++i)
                if (std::isfinite(out.distances(i, j))) largest = std::max(largest, out.distances(i, j));
        out.surrogate = largest > 0.0 ? 10.0 * largest : 1.0;
        for (Eigen::Index j = 0; j < out.distances.cols(); ++j)
            for (Eigen::Index i = 0; i < out.distances.rows(); ++i)
                if (!std::isfinite(out.distances(i, j))) out.distances(i, j) = out.surrogate;
    }
    return out;
}

Matrix spectral_embed(const Matrix& distances, int dims) {
    const Eigen::Index V = distances.rows();
    if (distances.cols() != V) throw ShapeError("distance matrix must be square");
    if (dims < 1 || dims > V - 1)
        throw ParameterError("embedding dims must lie in [1, V-1] = [1, " + std::to_string(V - 1) + "], got " +
                             std::to_string(dims));
    Matrix B = distances.array().square().matrix();
    const Vector row_mean = B.rowwise().mean();
    const Vector col_mean = B.colwise().mean().transpose();
    const double grand = B.mean();
    for (Eigen::Index j = 0; j < V; ++j)
        for (Eigen::Index i = 0; i < V; ++i) B(i, j) = -0.5 * (B(i, j) - row_mean[i] - col_mean[j] + grand);
    B = 0.5 * (B + B.transpose());

    // B is symmetric, so its singular pairs are eigenpairs ranked by |eigenvalue|.
    Eigen::SelfAdjointEigenSolver<Matrix> es(B);
    std::vector<Eigen::Index> order(static_cast<std::size_t>(V));
    std::iota(order.begin(), order.end(), 0);
    const Vector& lambda = es.eigenvalues();
    std::stable_sort(order.begin(), order.end(),
                     [&](auto a, auto b) { return std::abs(lambda[a]) > std::abs(lambda[b]); });

    Matrix coords(V, dims);
    for (int k = 0; k < dims; ++k) {
        const Eigen::Index src = order[static_cast<std::size_t>(k)];
        coords.col(k) = es.eigenvectors().col(src) * std::sqrt(std::abs(lambda[src]));
        Eigen::Index peak;
        coords.col(k).cwiseAbs().maxCoeff(&peak);
        if (coords(peak, k) < 0.0) coords.col(k) *= -1.0;
    }
    return coords;
}

namespace {

struct KMeansRun {
    std::vector<int> labels;
    double wcss = std::numeric_limits<double>::infinity();
};

double sq_dist(const Matrix& X, Eigen::Index i, const Matrix& centers, Eigen::Index k) {
    return (X.row(i) - centers.row(k)).squaredNorm();
}

KMeansRun kmeans_once(const Matrix& X, int K, std::mt19937_64& rng, const KMeansOptions& opt) {
    const Eigen::Index n = X.rows();
    Matrix centers(K, X.cols());
    std::vector<char> taken(static_cast<std::size_t>(n), 0);

    // k-means++ seeding
    std::uniform_int_distribution<Eigen::Index> first(0, n - 1);
    Eigen::Index pick = first(rng);
    centers.row(0) = X.row(pick);
    taken[static_cast<std::size_t>(pick)] = 1;
    std::vector<double> d2(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) d2[static_cast<std::size_t>(i)] = sq_dist(X, i, centers, 0);
    for (int k = 1; k < K; ++k) {
        const double total = std::accumulate(d2.begin(), d2.end(), 0.0);
        if (total > 0.0) {
            std::uniform_real_distribution<double> u(0.0, total);
            double r = u(rng);
            pick = n - 1;
            for (Eigen::Index i = 0; i < n; ++i) {
                r -= d2[static_cast<std::size_t>(i)];
                if (r < 0.0 && d2[static_cast<std::size_t>(i)] > 0.0) {
                    pick = i;
                    break;
                }
            }
            while (d2[static_cast<std::size_t>(pick)] == 0.0 && pick > 0) --pick;
        } else {
            pick = 0;
            while (taken[static_cast<std::size_t>(pick)]) ++pick;
        }
        taken[static_cast<std::size_t>(pick)] = 1;
        centers.row(k) = X.row(pick);
        for (Eigen::Index i = 0; i < n; ++i)
            d2[static_cast<std::size_t>(i)] = std::min(d2[static_cast<std::size_t>(i)], sq_dist(X, i, centers, k));
    }

    KMeansRun run;
    run.labels.assign(static_cast<std::size_t>(n), 0);
    std::vector<double> own(static_cast<std::size_t>(n));
    for (int iter = 0; iter < opt.max_iterations; ++iter) {
        for (Eigen::Index i = 0; i < n; ++i) {
            int best = 0;
            double bd = sq_dist(X, i, centers, 0);
            for (int k = 1; k < K; ++k) {
                const double d = sq_dist(X, i, centers, k);
                if (d < bd) {
                    bd = d;
                    best = k;
                }
            }
            run.labels[static_cast<std::size_t>(i)] = best;
            own[static_cast<std::size_t>(i)] = bd;
        }
        // Repair empty clusters with the point farthest from its centroid.
        std::vector<int> counts(static_cast<std::size_t>(K), 0);
        for (int l : run.labels) ++counts[static_cast<std::size_t>(l)];
        for (int k = 0; k < K; ++k) {
            if (counts[static_cast<std::size_t>(k)] > 0) continue;
            Eigen::Index far = -1;
            for (Eigen::Index i = 0; i < n; ++i) {
                if (counts[static_cast<std::size_t>(run.labels[static_cast<std::size_t>(i)])] < 2) continue;
                if (far < 0 || own[static_cast<std::size_t>(i)] > own[static_cast<std::size_t>(far)]) far = i;
            }
            --counts[static_cast<std::size_t>(run.labels[static_cast<std::size_t>(far)])];
            run.labels[static_cast<std::size_t>(far)] = k;
            own[static_cast<std::size_t>(far)] = 0.0;
            counts[static_cast<std::size_t>(k)] = 1;
        }
        Matrix next = Matrix::Zero(K, X.cols());
        for (Eigen::Index i = 0; i < n; ++i) next.row(run.labels[static_cast<std::size_t>(i)]) += X.row(i);
        for (int k = 0; k < K; ++k) next.row(k) /= counts[static_cast<std::size_t>(k)];
        const double movement = (next - centers).rowwise().norm().maxCoeff();
        centers = std::move(next);
        if (movement < opt.tolerance) break;
    }
    run.wcss = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) run.wcss += sq_dist(X, i, centers, run.labels[static_cast<std::size_t>(i)]);
    return run;
}

std::vector<int> relabel_by_first_occurrence(const std::vector<int>& labels, int K) {
    std::vector<int> map(static_cast<std::size_t>(K), -1);
    int next = 0;
    std::vector<int> out(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
        auto& m = map[static_cast<std::size_t>(labels[i])];
        if (m < 0) m = next++;
        out[i] = m;
    }
    return out;
}

}  // namespace

Parcellation cmeans(const Matrix& coords, int n_parcels, std::uint64_t rng_seed, const KMeansOptions& options) {
    const Eigen::Index n = coords.rows();
    if (n_parcels < 1 || n_parcels > n)
        throw ParameterError("parcel count must lie in [1, V] = [1, " + std::to_string(n) + "], got " +
                             std::to_string(n_parcels));
    if (options.restarts < 1) throw ParameterError("k-means restarts must be positive");

    std::vector<KMeansRun> runs(static_cast<std::size_t>(options.restarts));
#pragma omp parallel for schedule(dynamic, 1)
    for (int r = 0; r < options.restarts; ++r) {
        std::seed_seq seq{static_cast<std::uint32_t>(rng_seed), static_cast<std::uint32_t>(rng_seed >> 32),
                          static_cast<std::uint32_t>(r)};
        std::mt19937_64 rng(seq);
        runs[static_cast<std::size_t>(r)] = kmeans_once(coords, n_parcels, rng, options);
    }
    std::size_t best = 0;
    for (std::size_t r = 1; r < runs.size(); ++r)
        if (runs[r].wcss < runs[best].wcss) best = r;

    Parcellation p;
    p.labels = relabel_by_first_occurrence(runs[best].labels, n_parcels);
    p.n_parcels = n_parcels;
    p.rng_seed = rng_seed;
    p.wcss = runs[best].wcss;
    return p;
}

Parcellation parcellate_pipeline(const Matrix& features, const VolumeGrid& grid, const ParcellateOptions& options,
                                 const std::string& provenance) {
    const VoxelGraph graph = build_graph(grid, features);
    Parcellation p;
    if (options.n_parcels == 1) {
        p.labels.assign(grid.n_voxels(), 0);
        p.n_parcels = 1;
        p.rng_seed = options.rng_seed;
    } else {
        const GeodesicMatrix geo = geodesics(graph, options.exec);
        const int dims = std::min<int>(options.embed_dims, static_cast<int>(grid.n_voxels()) - 1);
        const Matrix coords = spectral_embed(geo.distances, dims);
        p = cmeans(coords, options.n_parcels, options.rng_seed, options.kmeans);
        if (!geo.connected) {
            p.mask_components = *std::max_element(geo.component.begin(), geo.component.end()) + 1;
            p.surrogate = geo.surrogate;
        }
    }
    p.provenance = provenance;
    return p;
}

Parcellation spatial_baseline(const VolumeGrid& grid, int n_parcels, std::uint64_t rng_seed,
                              const KMeansOptions& options) {
    Matrix coords(static_cast<Eigen::Index>(grid.n_voxels()), 3);
    for (std::size_t r = 0; r < grid.n_voxels(); ++r) {
        const Coord c = grid.coord_of_row(r);
        for (int a = 0; a < 3; ++a) coords(static_cast<Eigen::Index>(r), a) = c[static_cast<std::size_t>(a)];
    }
    Parcellation p = cmeans(coords, n_parcels, rng_seed, options);
    p.provenance = "SC";
    return p;
}

void write_labels_csv(const std::filesystem::path& path, const Parcellation& parc, const VolumeGrid& grid) {
    std::ofstream out(path);
    if (!out) throw FormatError("cannot write " + path.string());
    out << "x,y,z,row,label\n";
    for (std::size_t r = 0; r < parc.labels.size(); ++r) {
        const Coord c = grid.coord_of_row(r);
        out << c[0] << ',' << c[1] << ',' << c[2] << ',' << r << ',' << parc.labels[r] << '\n';
    }
}

Parcellation read_labels_csv(const std::filesystem::path& path) {
    const auto t = io::read_csv(path);
    if (t.header != std::vector<std::string>{"x", "y", "z", "row", "label"})
        throw FormatError(path.string() + ": unexpected label CSV header");
    Parcellation p;
    p.labels.resize(static_cast<std::size_t>(t.values.rows()));
    int max_label = -1;
    for (Eigen::Index i = 0; i < t.values.rows(); ++i) {
        const auto row = static_cast<std::size_t>(t.values(i, 3));
        if (row >= p.labels.size()) throw FormatError(path.string() + ": row index out of range");
        p.labels[row] = static_cast<int>(t.values(i, 4));
        max_label = std::max(max_label, p.labels[row]);
    }
    p.n_parcels = max_label + 1;
    return p;
}

}  // namespace parcelforge
