#pragma once

#include <optional>
#include <vector>

#include "contextnav/grid.hpp"

namespace contextnav {

struct Path {
  std::vector<Vec2> points;
  double length = 0.0;
};

double polyline_length(const std::vector<Vec2>& points);
Path make_path(std::vector<Vec2> points);

// Geodesic distance (meters) to a fixed goal for every cell; unreachable
// cells hold +inf.
struct DistanceField {
  int width = 0;
  int height = 0;
  std::vector<float> d;
  float at(int col, int row) const { return d[static_cast<size_t>(row) * width + col]; }
  float at_world(const OccupancyGrid& grid, Vec2 p) const {
    int c, r;
    grid.world_to_cell(p, c, r);
    if (c < 0 || r < 0 || c >= width || r >= height)
      return std::numeric_limits<float>::infinity();
    return at(c, r);
  }
};

// 8-connected Dijkstra on the given (already inflated) planning grid.
// Straight edges cost `resolution`, diagonals resolution*sqrt(2); diagonal
// moves require both adjacent orthogonal cells free (no corner cutting).
// Throws std::invalid_argument if the goal cell is not free.
DistanceField dijkstra_field(const OccupancyGrid& grid, Vec2 goal);

// 8-connected A* with the octile heuristic; ties broken by smaller heading
// change then lexicographic cell order. Returns nullopt when unreachable.
std::optional<Path> astar_path(const OccupancyGrid& grid, Vec2 start, Vec2 goal);

struct PathValidation {
  bool valid = true;
  Vec2 first_violation{};
};

// Samples the path at spacing <= resolution/2 and checks freeness on `grid`.
PathValidation validate_path(const OccupancyGrid& grid, const Path& path);

// Arc-length resampling at `spacing` meters; always includes the final point.
std::vector<Vec2> extract_waypoints(const Path& path, double spacing);

}  // namespace contextnav
