#include "parcelforge/seeds.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>

#include "parcelforge/error.hpp"
#include "parcelforge/io.hpp"

namespace parcelforge {

SeedSet select_seeds(const Eigen::Ref<const Vector>& ic_map, const VolumeGrid& grid, double radius, int n_seeds,
                     int source_map) {
    if (n_seeds < 1) throw ParameterError("n_seeds must be at least 1");
    if (!(radius > 0.0)) throw ParameterError("seed radius must be positive");
    if (static_cast<std::size_t>(ic_map.size()) != grid.n_voxels())
        throw ShapeError("IC map length does not match the voxel count");

    std::vector<std::size_t> order(grid.n_voxels());
    std::iota(order.begin(), order.end(), 0);
    // Rows follow linear grid order, so the row index breaks ties.
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return std::abs(ic_map[static_cast<Eigen::Index>(a)]) > std::abs(ic_map[static_cast<Eigen::Index>(b)]);
    });

    SeedSet out;
    out.source_map = source_map;
    out.radius = radius;
    std::vector<Coord> chosen;
    for (std::size_t row : order) {
        if (static_cast<int>(chosen.size()) == n_seeds) break;
        const Coord c = grid.coord_of_row(row);
        const bool admissible =
            std::all_of(chosen.begin(), chosen.end(), [&](const Coord& s) { return grid_distance(c, s) >= radius; });
        if (!admissible) continue;
        chosen.push_back(c);
        out.voxel_rows.push_back(row);
        out.map_values.push_back(ic_map[static_cast<Eigen::Index>(row)]);
    }
    out.exhausted = static_cast<int>(chosen.size()) < n_seeds;
    return out;
}

void write_seeds_csv(const std::filesystem::path& path, const std::vector<SeedSet>& sets, const VolumeGrid& grid) {
    std::ofstream out(path);
    if (!out) throw FormatError("cannot write " + path.string());
    out << "map_id,rank,x,y,z,row,map_value\n";
    for (const auto& s : sets)
        for (std::size_t k = 0; k < s.voxel_rows.size(); ++k) {
            const Coord c = grid.coord_of_row(s.voxel_rows[k]);
            out << s.source_map << ',' << k << ',' << c[0] << ',' << c[1] << ',' << c[2] << ',' << s.voxel_rows[k]
                << ',' << std::setprecision(17) << s.map_values[k] << '\n';
        }
}

std::vector<SeedSet> read_seeds_csv(const std::filesystem::path& path) {
    const auto t = io::read_csv(path);
    const std::vector<std::string> expected{"map_id", "rank", "x", "y", "z", "row", "map_value"};
    if (t.header != expected) throw FormatError(path.string() + ": unexpected seed CSV header");
    std::vector<SeedSet> sets;
    std::map<int, std::size_t> index_of;
    for (Eigen::Index i = 0; i < t.values.rows(); ++i) {
        const int map_id = static_cast<int>(t.values(i, 0));
        auto [it, inserted] = index_of.emplace(map_id, sets.size());
        if (inserted) {
            sets.emplace_back();
            sets.back().source_map = map_id;
        }
        auto& s = sets[it->second];
        const double row = t.values(i, 5);
        if (row < 0) throw FormatError(path.string() + ": negative seed row");
        s.voxel_rows.push_back(static_cast<std::size_t>(row));
        s.map_values.push_back(t.values(i, 6));
    }
    return sets;
}

}  // namespace parcelforge
