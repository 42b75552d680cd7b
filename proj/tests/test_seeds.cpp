#include <cmath>
#include <random>

#include "doctest.h"
#include "parcelforge/error.hpp"
#include "parcelforge/seeds.hpp"
#include "test_util.hpp"

using namespace parcelforge;

TEST_CASE("select_seeds on a 1-D map") {
    const auto grid = VolumeGrid::full({5, 1, 1});
    const Vector map = (Vector(5) << 5, 1, 4, 0, 3).finished();
    const auto s = select_seeds(map, grid, 2.0, 2);
    CHECK(s.voxel_rows == std::vector<std::size_t>{0, 2});
    CHECK_FALSE(s.exhausted);

    // brute force over ordered admissible pairs, greedy on the first pick
    std::size_t first = 0;
    for (std::size_t i = 1; i < 5; ++i)
        if (map[static_cast<Eigen::Index>(i)] > map[static_cast<Eigen::Index>(first)]) first = i;
    std::size_t second = 5;
    for (std::size_t j = 0; j < 5; ++j) {
        if (std::abs(static_cast<double>(j) - static_cast<double>(first)) < 2.0) continue;
        if (second == 5 || map[static_cast<Eigen::Index>(j)] > map[static_cast<Eigen::Index>(second)]) second = j;
    }
    CHECK(s.voxel_rows == std::vector<std::size_t>{first, second});

    const auto three = select_seeds(map, grid, 2.0, 5);
    CHECK(three.voxel_rows == std::vector<std::size_t>{0, 2, 4});
    CHECK(three.exhausted);
}

TEST_CASE("select_seeds ranks by magnitude and breaks ties by grid order") {
    const auto grid = VolumeGrid::full({4, 1, 1});
    const Vector map = (Vector(4) << 1, -7, 2, 7).finished();
    const auto one = select_seeds(map, grid, 1.0, 1);
    CHECK(one.voxel_rows == std::vector<std::size_t>{1});
    CHECK(one.map_values == std::vector<double>{-7});
    CHECK(select_seeds(-map, grid, 1.0, 4).voxel_rows == select_seeds(map, grid, 1.0, 4).voxel_rows);
    CHECK(select_seeds(3.5 * map, grid, 2.0, 4).voxel_rows == select_seeds(map, grid, 2.0, 4).voxel_rows);
}

TEST_CASE("select_seeds with a radius beyond the grid") {
    const auto grid = VolumeGrid::full({3, 3, 3});
    const Vector map = testutil::gaussian(27, 1, 1);
    const auto s = select_seeds(map, grid, 10.0, 2);
    CHECK(s.voxel_rows.size() == 1);
    CHECK(s.exhausted);
}

TEST_CASE("seed spacing on a masked 3-D grid") {
    std::mt19937_64 rng(2);
    std::bernoulli_distribution keep(0.7);
    std::vector<std::uint8_t> mask(6 * 5 * 4);
    for (auto& m : mask) m = keep(rng);
    const VolumeGrid grid({6, 5, 4}, mask);
    const Vector map = testutil::gaussian(static_cast<Eigen::Index>(grid.n_voxels()), 1, 3);
    for (double R : {1.0, 1.5, 2.0, 3.0}) {
        const auto s = select_seeds(map, grid, R, 12);
        for (std::size_t i = 0; i < s.voxel_rows.size(); ++i) {
            for (std::size_t j = i + 1; j < s.voxel_rows.size(); ++j)
                CHECK(grid_distance(grid.coord_of_row(s.voxel_rows[i]), grid.coord_of_row(s.voxel_rows[j])) >= R);
            if (i > 0) CHECK(std::abs(s.map_values[i]) <= std::abs(s.map_values[i - 1]));
        }
    }
}

TEST_CASE("select_seeds argument checks") {
    const auto grid = VolumeGrid::full({3, 1, 1});
    const Vector map = Vector::Ones(3);
    CHECK_THROWS_AS(select_seeds(map, grid, 1.0, 0), ParameterError);
    CHECK_THROWS_AS(select_seeds(map, grid, 0.0, 1), ParameterError);
    CHECK_THROWS_AS(select_seeds(Vector::Ones(4), grid, 1.0, 1), ShapeError);
}

TEST_CASE("seed CSV round trip") {
    const auto dir = testutil::workdir("seeds");
    const auto grid = VolumeGrid::full({4, 4, 2});
    const Vector m0 = testutil::gaussian(32, 1, 4), m1 = testutil::gaussian(32, 1, 5);
    const std::vector<SeedSet> sets{select_seeds(m0, grid, 2.0, 3, 0), select_seeds(m1, grid, 2.0, 4, 5)};
    write_seeds_csv(dir / "s.csv", sets, grid);
    const auto back = read_seeds_csv(dir / "s.csv");
    REQUIRE(back.size() == 2);
    for (std::size_t i = 0; i < 2; ++i) {
        CHECK(back[i].source_map == sets[i].source_map);
        CHECK(back[i].voxel_rows == sets[i].voxel_rows);
        CHECK(back[i].map_values == sets[i].map_values);
    }
}
