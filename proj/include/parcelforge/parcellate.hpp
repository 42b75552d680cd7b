#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "parcelforge/dataset.hpp"
#include "parcelforge/kernels.hpp"

namespace parcelforge {

/// Euclidean distance between two feature vectors.
double local_distance(const Eigen::Ref<const Vector>& fv, const Eigen::Ref<const Vector>& fw);

/// Face-adjacency graph of the mask, weighted by feature distance.
struct VoxelGraph {
    kernels::CsrGraph csr;
    std::size_t n_edges() const noexcept { return csr.n_arcs() / 2; }
};

VoxelGraph build_graph(const VolumeGrid& grid, const Matrix& features);

struct GeodesicMatrix {
    Matrix distances;             // V x V
    bool connected = true;
    std::vector<int> component;   // connected-component id per voxel
    double surrogate = 0.0;       // value used for unreachable pairs (0 when connected)
};

/// All-pairs shortest paths over the voxel graph. Pairs in different
/// components get 10x the largest finite distance.
GeodesicMatrix geodesics(const VoxelGraph& graph, kernels::Exec exec = kernels::Exec::parallel);

/// Classical scaling of a distance matrix: B = -1/2 J D^2 J, coordinates
/// from the `dims` leading singular vectors scaled by sqrt(singular value).
Matrix spectral_embed(const Matrix& distances, int dims);

struct Parcellation {
    std::vector<int> labels;  // 0..n_parcels-1, numbered by first occurrence
    int n_parcels = 0;
    std::string provenance;
    std::uint64_t rng_seed = 0;
    double wcss = 0.0;
    int mask_components = 1;     // > 1: unreachable pairs used the geodesic surrogate
    double surrogate = 0.0;
};

struct KMeansOptions {
    int restarts = 10;
    int max_iterations = 300;
    double tolerance = 1e-9;
    bool operator==(const KMeansOptions&) const = default;
};

/// k-means++ / Lloyd, best of several restarts by within-cluster sum of squares.
Parcellation cmeans(const Matrix& coords, int n_parcels, std::uint64_t rng_seed, const KMeansOptions& options = {});

struct ParcellateOptions {
    int n_parcels = 600;
    int embed_dims = 20;
    std::uint64_t rng_seed = 0;
    KMeansOptions kmeans;
    kernels::Exec exec = kernels::Exec::parallel;
};

/// Graph -> geodesics -> spectral embedding -> C-means. `features` may be
/// PLS covariance features or any other per-voxel feature matrix (e.g. GLM
/// t-values for the baseline).
Parcellation parcellate_pipeline(const Matrix& features, const VolumeGrid& grid, const ParcellateOptions& options,
                                 const std::string& provenance);

/// Baseline that clusters voxel coordinates alone.
Parcellation spatial_baseline(const VolumeGrid& grid, int n_parcels, std::uint64_t rng_seed,
                              const KMeansOptions& options = {});

void write_labels_csv(const std::filesystem::path& path, const Parcellation& parc, const VolumeGrid& grid);
Parcellation read_labels_csv(const std::filesystem::path& path);

}  // namespace parcelforge
