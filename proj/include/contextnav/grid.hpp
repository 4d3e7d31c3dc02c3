#pragma once

#include <cstdint>
#include <vector>

#include "contextnav/geometry.hpp"

namespace contextnav {

// Binary occupancy raster: 0 = obstacle, 1 = freespace.
// Row-major, row 0 at the bottom of the world (y grows with row index).
// `origin` is the world position of the lower-left corner of cell (0,0).
struct OccupancyGrid {
  int width = 0;
  int height = 0;
  double resolution = 0.1;  // meters per cell
  Vec2 origin{0.0, 0.0};
  std::vector<uint8_t> cells;

  OccupancyGrid() = default;
  OccupancyGrid(int w, int h, double res, Vec2 org = {0.0, 0.0}, uint8_t fill = 1)
      : width(w), height(h), resolution(res), origin(org),
        cells(static_cast<size_t>(w) * h, fill) {}

  size_t index(int col, int row) const { return static_cast<size_t>(row) * width + col; }
  uint8_t at(int col, int row) const { return cells[index(col, row)]; }
  uint8_t& at(int col, int row) { return cells[index(col, row)]; }

  bool in_bounds(int col, int row) const {
    return col >= 0 && row >= 0 && col < width && row < height;
  }
  // Out-of-bounds counts as obstacle.
  bool free_at(int col, int row) const { return in_bounds(col, row) && at(col, row) == 1; }

  Vec2 cell_center(int col, int row) const {
    return {origin.x + (col + 0.5) * resolution, origin.y + (row + 0.5) * resolution};
  }
  void world_to_cell(Vec2 p, int& col, int& row) const {
    col = static_cast<int>(std::floor((p.x - origin.x) / resolution));
    row = static_cast<int>(std::floor((p.y - origin.y) / resolution));
  }
  bool free_at_world(Vec2 p) const {
    int c, r;
    world_to_cell(p, c, r);
    return free_at(c, r);
  }

  double width_m() const { return width * resolution; }
  double height_m() const { return height * resolution; }
  size_t count_free() const;

  bool operator==(const OccupancyGrid&) const = default;
};

// Grows obstacles by `radius_m`: a cell stays free iff it was free and its
// center is at least radius_m away from every obstacle-cell center.
OccupancyGrid inflate_obstacles(const OccupancyGrid& grid, double radius_m);

// Area (m^2) of the largest 4-connected freespace component.
double largest_free_component_area(const OccupancyGrid& grid);

}  // namespace contextnav
