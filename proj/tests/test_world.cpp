#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <random>

#include "contextnav/grid.hpp"
#include "contextnav/map_io.hpp"
#include "contextnav/world_gen.hpp"
#include "oracles.hpp"

using namespace contextnav;

namespace {
std::filesystem::path tmp_dir() {
  auto p = std::filesystem::temp_directory_path() / "contextnav_test_world";
  std::filesystem::create_directories(p);
  return p;
}
}  // namespace

TEST_CASE("open room is all free except a one-cell boundary wall") {
  WorldSpec spec;
  spec.kind = WorldKind::open_room;
  spec.width_m = 10.0;
  spec.height_m = 10.0;
  spec.resolution = 0.1;
  const OccupancyGrid g = generate_map(spec);
  REQUIRE(g.width == 100);
  REQUIRE(g.height == 100);
  for (int r = 0; r < g.height; ++r) {
    for (int c = 0; c < g.width; ++c) {
      const bool boundary = r == 0 || c == 0 || r == g.height - 1 || c == g.width - 1;
      REQUIRE(g.at(c, r) == (boundary ? 0 : 1));
    }
  }
}

TEST_CASE("hidden-gap corridor has exactly one 10-cell opening at the stated offset") {
  WorldSpec spec;
  spec.kind = WorldKind::hidden_gap_corridor;
  spec.width_m = 10.0;
  spec.height_m = 10.0;
  spec.resolution = 0.1;
  spec.gap_width_m = 1.0;
  spec.gap_offset_m = 3.0;
  const OccupancyGrid g = generate_map(spec);
  // wall rows are the ones whose center y falls inside the wall band
  int wall_rows = 0;
  for (int r = 1; r < g.height - 1; ++r) {
    const double cy = (r + 0.5) * spec.resolution;
    if (cy < 5.0 - 0.1 || cy >= 5.0 + 0.1) continue;
    ++wall_rows;
    int free_cells = 0;
    for (int c = 1; c < g.width - 1; ++c) {
      if (g.at(c, r) == 1) {
        ++free_cells;
        const double cx = (c + 0.5) * spec.resolution;
        CHECK(cx >= 2.5);
        CHECK(cx < 3.5);
      }
    }
    CHECK(free_cells == 10);
  }
  CHECK(wall_rows == 2);
}

TEST_CASE("generation is deterministic in the seed and varies across seeds") {
  WorldSpec spec;
  spec.kind = WorldKind::maze;
  spec.width_m = 12.0;
  spec.height_m = 12.0;
  spec.seed = 7;
  const OccupancyGrid a = generate_map(spec);
  const OccupancyGrid b = generate_map(spec);
  CHECK(a == b);
  spec.seed = 8;
  const OccupancyGrid c = generate_map(spec);
  CHECK(a.cells != c.cells);
}

TEST_CASE("every generator yields a 4 m^2 free component and is seed-stable") {
  for (WorldKind kind : {WorldKind::open_room, WorldKind::rooms_and_corridors, WorldKind::maze,
                         WorldKind::hidden_gap_corridor, WorldKind::scatter_obstacles}) {
    WorldSpec spec;
    spec.kind = kind;
    spec.width_m = 14.0;
    spec.height_m = 12.0;
    spec.seed = 123;
    const OccupancyGrid g = generate_map(spec);
    CHECK(largest_free_component_area(g) >= 4.0);
    CHECK(generate_map(spec) == g);
  }
}

TEST_CASE("unsatisfiable world specs are rejected with a reason") {
  WorldSpec spec;
  spec.kind = WorldKind::hidden_gap_corridor;
  spec.width_m = 3.0;
  spec.height_m = 10.0;
  spec.gap_width_m = 5.0;
  CHECK_THROWS_AS(generate_map(spec), std::invalid_argument);
  WorldSpec bad;
  bad.width_m = -1.0;
  CHECK_THROWS_AS(generate_map(bad), std::invalid_argument);
}

TEST_CASE("inflation with radius zero is the identity") {
  WorldSpec spec;
  spec.kind = WorldKind::scatter_obstacles;
  spec.width_m = 8.0;
  spec.height_m = 8.0;
  spec.seed = 5;
  const OccupancyGrid g = generate_map(spec);
  CHECK(inflate_obstacles(g, 0.0) == g);
}

TEST_CASE("single obstacle cell inflates to a disk, checked against brute force") {
  OccupancyGrid g(41, 41, 0.1);
  g.at(20, 20) = 0;
  const OccupancyGrid fast = inflate_obstacles(g, 0.425);
  const OccupancyGrid brute = oracle::inflate_brute_force(g, 0.425);
  CHECK(fast == brute);
  // disk radius 4-5 cells: cells 4 cells out are blocked, 5 cells out free
  CHECK(fast.at(20 + 4, 20) == 0);
  CHECK(fast.at(20 + 5, 20) == 1);
}

TEST_CASE("inflation matches brute force on random grids") {
  std::mt19937 rng(42);
  for (int trial = 0; trial < 5; ++trial) {
    OccupancyGrid g(24, 18, 0.1);
    for (auto& cell : g.cells) cell = std::uniform_real_distribution<>(0, 1)(rng) < 0.12 ? 0 : 1;
    const double radius = std::uniform_real_distribution<>(0.05, 0.6)(rng);
    CHECK(inflate_obstacles(g, radius) == oracle::inflate_brute_force(g, radius));
  }
}

TEST_CASE("a 0.8 m corridor is fully blocked by 0.425 m inflation") {
  OccupancyGrid g(30, 30, 0.1, {0, 0}, 0);
  // free corridor 8 cells wide (0.8 m)
  for (int r = 11; r < 19; ++r)
    for (int c = 0; c < 30; ++c) g.at(c, r) = 1;
  const OccupancyGrid inflated = inflate_obstacles(g, 0.425);
  CHECK(inflated.count_free() == 0);
}

TEST_CASE("inflation free sets are nested in the radius") {
  WorldSpec spec;
  spec.kind = WorldKind::rooms_and_corridors;
  spec.width_m = 12.0;
  spec.height_m = 10.0;
  spec.seed = 3;
  const OccupancyGrid g = generate_map(spec);
  const OccupancyGrid a = inflate_obstacles(g, 0.2);
  const OccupancyGrid b = inflate_obstacles(g, 0.45);
  for (size_t i = 0; i < g.cells.size(); ++i)
    if (b.cells[i] == 1) CHECK(a.cells[i] == 1);
}

TEST_CASE("map io: all-white PGM loads as all-free") {
  const auto dir = tmp_dir();
  const auto map = (dir / "white.pgm").string();
  {
    std::ofstream out(map, std::ios::binary);
    out << "P5\n3 3\n255\n";
    for (int i = 0; i < 9; ++i) out.put(static_cast<char>(255));
  }
  {
    std::ofstream side(sidecar_path(map));
    side << R"({"resolution_m": 0.1, "origin_xy_m": [0.0, 0.0]})";
  }
  const OccupancyGrid g = load_map(map);
  CHECK(g.width == 3);
  CHECK(g.height == 3);
  CHECK(g.count_free() == 9);
  CHECK(g.resolution == doctest::Approx(0.1));
}

TEST_CASE("map io: threshold boundary at pixel 127/128") {
  const auto dir = tmp_dir();
  const auto map = (dir / "threshold.pgm").string();
  {
    std::ofstream out(map, std::ios::binary);
    out << "P5\n2 1\n255\n";
    out.put(static_cast<char>(127));
    out.put(static_cast<char>(128));
  }
  {
    std::ofstream side(sidecar_path(map));
    side << R"({"resolution_m": 0.05, "origin_xy_m": [0.0, 0.0]})";
  }
  const OccupancyGrid g = load_map(map);
  CHECK(g.at(0, 0) == 0);
  CHECK(g.at(1, 0) == 1);
}

TEST_CASE("map io: save/load round-trips cells for PGM and PNG") {
  const auto dir = tmp_dir();
  std::mt19937 rng(9);
  OccupancyGrid g(17, 13, 0.25, {-1.5, 2.0});
  for (auto& cell : g.cells) cell = rng() & 1u;
  for (const char* name : {"rt.pgm", "rt.png"}) {
    const auto path = (dir / name).string();
    save_map(g, path);
    const OccupancyGrid back = load_map(path);
    CHECK(back == g);
  }
}

TEST_CASE("map io failures are distinct") {
  const auto dir = tmp_dir();
  CHECK_THROWS_AS(load_map((dir / "missing.pgm").string()), MapFileError);

  const auto bad = (dir / "bad.pgm").string();
  {
    std::ofstream out(bad, std::ios::binary);
    out << "P6\n1 1\n255\n";
    out.put(0);
  }
  CHECK_THROWS_AS(load_map(bad), MapFormatError);

  // valid map but no sidecar
  const auto lonely = (dir / "lonely.pgm").string();
  {
    std::ofstream out(lonely, std::ios::binary);
    out << "P5\n1 1\n255\n";
    out.put(static_cast<char>(255));
  }
  CHECK_THROWS_AS(load_map(lonely), MapSidecarError);
}

TEST_CASE("world/cell transforms round-trip within one cell") {
  OccupancyGrid g(40, 30, 0.1, {-2.0, 1.0});
  std::mt19937 rng(11);
  for (int i = 0; i < 200; ++i) {
    const Vec2 p{std::uniform_real_distribution<>(-2.0, 2.0)(rng),
                 std::uniform_real_distribution<>(1.0, 4.0)(rng)};
    int c, r;
    g.world_to_cell(p, c, r);
    REQUIRE(g.in_bounds(c, r));
    const Vec2 back = g.cell_center(c, r);
    CHECK(std::abs(back.x - p.x) <= g.resolution);
    CHECK(std::abs(back.y - p.y) <= g.resolution);
  }
}
