#include "contextnav/world_gen.hpp"

#include <algorithm>
#include <random>
#include <stdexcept>

namespace contextnav {

WorldKind world_kind_from_string(const std::string& s) {
  if (s == "open-room") return WorldKind::open_room;
  if (s == "rooms-and-corridors") return WorldKind::rooms_and_corridors;
  if (s == "maze") return WorldKind::maze;
  if (s == "hidden-gap-corridor") return WorldKind::hidden_gap_corridor;
  if (s == "scatter-obstacles") return WorldKind::scatter_obstacles;
  throw std::invalid_argument("unknown world kind: " + s);
}

std::string to_string(WorldKind k) {
  switch (k) {
    case WorldKind::open_room: return "open-room";
    case WorldKind::rooms_and_corridors: return "rooms-and-corridors";
    case WorldKind::maze: return "maze";
    case WorldKind::hidden_gap_corridor: return "hidden-gap-corridor";
    case WorldKind::scatter_obstacles: return "scatter-obstacles";
  }
  return "?";
}

namespace {

void fill_rect(OccupancyGrid& g, int c0, int r0, int c1, int r1, uint8_t value) {
  c0 = std::max(c0, 0);
  r0 = std::max(r0, 0);
  c1 = std::min(c1, g.width);
  r1 = std::min(r1, g.height);
  for (int r = r0; r < r1; ++r)
    for (int c = c0; c < c1; ++c) g.at(c, r) = value;
}

void add_boundary(OccupancyGrid& g) {
  fill_rect(g, 0, 0, g.width, 1, 0);
  fill_rect(g, 0, g.height - 1, g.width, g.height, 0);
  fill_rect(g, 0, 0, 1, g.height, 0);
  fill_rect(g, g.width - 1, 0, g.width, g.height, 0);
}

OccupancyGrid gen_open_room(const WorldSpec& s) {
  OccupancyGrid g(static_cast<int>(std::lround(s.width_m / s.resolution)),
                  static_cast<int>(std::lround(s.height_m / s.resolution)), s.resolution);
  add_boundary(g);
  return g;
}

OccupancyGrid gen_hidden_gap(const WorldSpec& s, std::mt19937& rng) {
  OccupancyGrid g = gen_open_room(s);
  const double half_gap = s.gap_width_m / 2.0;
  double offset = s.gap_offset_m;
  if (offset < 0.0) {
    const double lo = 1.0 + half_gap + 0.5;
    const double hi = s.width_m - 1.0 - half_gap - 0.5;
    if (hi <= lo) throw std::invalid_argument("hidden-gap-corridor: world too narrow for gap");
    offset = std::uniform_real_distribution<double>(lo, hi)(rng);
  }
  const double wall_lo = s.height_m / 2.0 - s.wall_thickness_m / 2.0;
  const double wall_hi = s.height_m / 2.0 + s.wall_thickness_m / 2.0;
  for (int r = 0; r < g.height; ++r) {
    const double cy = (r + 0.5) * s.resolution;
    if (cy < wall_lo || cy >= wall_hi) continue;
    for (int c = 0; c < g.width; ++c) {
      const double cx = (c + 0.5) * s.resolution;
      const bool in_gap = cx >= offset - half_gap && cx < offset + half_gap;
      if (!in_gap) g.at(c, r) = 0;
    }
  }
  return g;
}

// Depth-first backtracker on a coarse lattice; lattice cells become rooms of
// (pitch - wall) cells connected by carved doorways.
OccupancyGrid gen_maze(const WorldSpec& s, std::mt19937& rng) {
  OccupancyGrid g(static_cast<int>(std::lround(s.width_m / s.resolution)),
                  static_cast<int>(std::lround(s.height_m / s.resolution)), s.resolution, {0, 0}, 0);
  const int pitch = std::max(2, static_cast<int>(std::lround(s.cell_size_m / s.resolution)));
  const int wall = std::max(1, static_cast<int>(std::lround(s.wall_thickness_m / s.resolution)));
  const int mx = (g.width - 2 - wall) / pitch;
  const int my = (g.height - 2 - wall) / pitch;
  if (mx < 2 || my < 2) throw std::invalid_argument("maze: world too small for cell size");

  auto cell_rect = [&](int i, int j, int& c0, int& r0, int& c1, int& r1) {
    c0 = 1 + wall + i * pitch;
    r0 = 1 + wall + j * pitch;
    c1 = c0 + pitch - wall;
    r1 = r0 + pitch - wall;
  };

  std::vector<uint8_t> visited(static_cast<size_t>(mx) * my, 0);
  std::vector<std::pair<int, int>> stack;
  stack.emplace_back(0, 0);
  visited[0] = 1;
  {
    int c0, r0, c1, r1;
    cell_rect(0, 0, c0, r0, c1, r1);
    fill_rect(g, c0, r0, c1, r1, 1);
  }
  const int dcs[4] = {1, -1, 0, 0};
  const int drs[4] = {0, 0, 1, -1};
  while (!stack.empty()) {
    auto [i, j] = stack.back();
    int order[4] = {0, 1, 2, 3};
    std::shuffle(order, order + 4, rng);
    bool advanced = false;
    for (int t = 0; t < 4 && !advanced; ++t) {
      const int k = order[t];
      const int ni = i + dcs[k], nj = j + drs[k];
      if (ni < 0 || nj < 0 || ni >= mx || nj >= my) continue;
      if (visited[static_cast<size_t>(nj) * mx + ni]) continue;
      visited[static_cast<size_t>(nj) * mx + ni] = 1;
      int c0, r0, c1, r1;
      cell_rect(ni, nj, c0, r0, c1, r1);
      fill_rect(g, c0, r0, c1, r1, 1);
      // carve the doorway between (i,j) and (ni,nj)
      int ac0, ar0, ac1, ar1;
      cell_rect(i, j, ac0, ar0, ac1, ar1);
      fill_rect(g, std::min(ac0, c0), std::min(ar0, r0), std::max(ac1, c1), std::max(ar1, r1), 1);
      stack.emplace_back(ni, nj);
      advanced = true;
    }
    if (!advanced) stack.pop_back();
  }
  return g;
}

// Recursive division: split free regions with thin walls pierced by doorways
// at least gap_width wide.
void divide_region(OccupancyGrid& g, int c0, int r0, int c1, int r1, int wall, int door,
                   int min_side, std::mt19937& rng) {
  const int w = c1 - c0, h = r1 - r0;
  if (w < 2 * min_side + wall && h < 2 * min_side + wall) return;
  const bool split_vertical = w == h ? (rng() & 1u) : w > h;
  if (split_vertical && w >= 2 * min_side + wall) {
    const int sc = std::uniform_int_distribution<int>(c0 + min_side, c1 - min_side - wall)(rng);
    const int dr = std::uniform_int_distribution<int>(r0, r1 - door)(rng);
    fill_rect(g, sc, r0, sc + wall, r1, 0);
    fill_rect(g, sc, dr, sc + wall, dr + door, 1);
    divide_region(g, c0, r0, sc, r1, wall, door, min_side, rng);
    divide_region(g, sc + wall, r0, c1, r1, wall, door, min_side, rng);
  } else if (!split_vertical && h >= 2 * min_side + wall) {
    const int sr = std::uniform_int_distribution<int>(r0 + min_side, r1 - min_side - wall)(rng);
    const int dc = std::uniform_int_distribution<int>(c0, c1 - door)(rng);
    fill_rect(g, c0, sr, c1, sr + wall, 0);
    fill_rect(g, dc, sr, dc + door, sr + wall, 1);
    divide_region(g, c0, r0, c1, sr, wall, door, min_side, rng);
    divide_region(g, c0, sr + wall, c1, r1, wall, door, min_side, rng);
  }
}

OccupancyGrid gen_rooms(const WorldSpec& s, std::mt19937& rng) {
  OccupancyGrid g = gen_open_room(s);
  const int wall = std::max(1, static_cast<int>(std::lround(s.wall_thickness_m / s.resolution)));
  const int door = std::max(wall + 1, static_cast<int>(std::lround(s.gap_width_m / s.resolution)) + 2);
  const int min_side = std::max(door + 2, static_cast<int>(std::lround(s.cell_size_m / s.resolution)));
  if (g.width - 2 < 2 * min_side + wall && g.height - 2 < 2 * min_side + wall)
    throw std::invalid_argument("rooms-and-corridors: world too small");
  divide_region(g, 1, 1, g.width - 1, g.height - 1, wall, door, min_side, rng);
  return g;
}

OccupancyGrid gen_scatter(const WorldSpec& s, std::mt19937& rng) {
  if (s.obstacle_density < 0.0 || s.obstacle_density > 0.6)
    throw std::invalid_argument("scatter-obstacles: density must be in [0, 0.6]");
  for (int attempt = 0; attempt < 10; ++attempt) {
    OccupancyGrid g = gen_open_room(s);
    const size_t total = g.cells.size();
    const size_t target = static_cast<size_t>(s.obstacle_density * static_cast<double>(total));
    size_t blocked = 0;
    int guard = 0;
    while (blocked + g.width * 2 + g.height * 2 < target && ++guard < 10000) {
      const double side_w = std::uniform_real_distribution<double>(0.4, 2.0)(rng);
      const double side_h = std::uniform_real_distribution<double>(0.4, 2.0)(rng);
      const int cw = std::max(1, static_cast<int>(std::lround(side_w / s.resolution)));
      const int ch = std::max(1, static_cast<int>(std::lround(side_h / s.resolution)));
      const int c0 = std::uniform_int_distribution<int>(1, std::max(1, g.width - 1 - cw))(rng);
      const int r0 = std::uniform_int_distribution<int>(1, std::max(1, g.height - 1 - ch))(rng);
      fill_rect(g, c0, r0, c0 + cw, r0 + ch, 0);
      blocked += static_cast<size_t>(cw) * ch;  // overlaps overcount; guard bounds the loop
    }
    if (largest_free_component_area(g) >= 4.0) return g;
  }
  throw std::invalid_argument("scatter-obstacles: could not keep a 4 m^2 free component");
}

}  // namespace

OccupancyGrid generate_map(const WorldSpec& spec) {
  if (spec.resolution <= 0.0 || spec.width_m <= 0.0 || spec.height_m <= 0.0)
    throw std::invalid_argument("world spec: dimensions and resolution must be positive");
  if (spec.width_m / spec.resolution < 8 || spec.height_m / spec.resolution < 8)
    throw std::invalid_argument("world spec: world smaller than 8 cells per side");
  if (spec.kind == WorldKind::hidden_gap_corridor && spec.gap_width_m + 2.0 > spec.width_m)
    throw std::invalid_argument("world spec: gap width does not fit in the world");

  std::mt19937 rng(spec.seed);
  OccupancyGrid g;
  switch (spec.kind) {
    case WorldKind::open_room: g = gen_open_room(spec); break;
    case WorldKind::hidden_gap_corridor: g = gen_hidden_gap(spec, rng); break;
    case WorldKind::maze: g = gen_maze(spec, rng); break;
    case WorldKind::rooms_and_corridors: g = gen_rooms(spec, rng); break;
    case WorldKind::scatter_obstacles: g = gen_scatter(spec, rng); break;
  }
  if (largest_free_component_area(g) < 4.0)
    throw std::invalid_argument("generated world has no 4 m^2 free component");
  return g;
}

}  // namespace contextnav
