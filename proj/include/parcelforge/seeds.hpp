#pragma once

#include <filesystem>
#include <vector>

#include "parcelforge/dataset.hpp"

namespace parcelforge {

struct SeedSet {
    std::vector<std::size_t> voxel_rows;  // decreasing |map value|
    std::vector<double> map_values;       // signed values at the seeds
    int source_map = 0;
    double radius = 6.0;
    bool exhausted = false;  // fewer admissible voxels than requested
};

inline constexpr double kDefaultSeedRadius = 6.0;
inline constexpr int kSeedsPerMapMultiSubject = 15;
inline constexpr int kSeedsPerMapSingleSubject = 30;

/// Greedy peak picking on |map|: each seed is the largest remaining voxel at
/// Euclidean grid distance >= radius from all earlier seeds. Ties go to the
/// lower linear grid index.
SeedSet select_seeds(const Eigen::Ref<const Vector>& ic_map, const VolumeGrid& grid, double radius, int n_seeds,
                     int source_map = 0);

void write_seeds_csv(const std::filesystem::path& path, const std::vector<SeedSet>& sets, const VolumeGrid& grid);
std::vector<SeedSet> read_seeds_csv(const std::filesystem::path& path);

}  // namespace parcelforge
