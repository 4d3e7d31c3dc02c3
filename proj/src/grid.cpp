#include "contextnav/grid.hpp"

#include <algorithm>
#include <vector>

namespace contextnav {

size_t OccupancyGrid::count_free() const {
  return static_cast<size_t>(std::count(cells.begin(), cells.end(), uint8_t{1}));
}

namespace {

// 1D squared-distance transform (Felzenszwalb & Huttenlocher). Values in f
// must be finite; "no source" is encoded as a large sentinel by the caller.
void dt_1d(const float* f, float* d, int n, int* v, float* z) {
  int k = 0;
  v[0] = 0;
  z[0] = -1e30f;
  z[1] = 1e30f;
  for (int q = 1; q < n; ++q) {
    float s = ((f[q] + q * q) - (f[v[k]] + v[k] * v[k])) / (2.0f * q - 2.0f * v[k]);
    while (s <= z[k]) {
      --k;
      s = ((f[q] + q * q) - (f[v[k]] + v[k] * v[k])) / (2.0f * q - 2.0f * v[k]);
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = 1e30f;
  }
  k = 0;
  for (int q = 0; q < n; ++q) {
    while (z[k + 1] < q) ++k;
    d[q] = (q - v[k]) * (q - v[k]) + f[v[k]];
  }
}

// Squared distance (cell units) from every cell center to the nearest
// obstacle-cell center. Cells farther than any obstacle get >= big.
std::vector<float> obstacle_distance_sq(const OccupancyGrid& g) {
  const int w = g.width, h = g.height;
  const float big = 4.0f * (static_cast<float>(w) * w + static_cast<float>(h) * h + 1.0f);
  std::vector<float> dist(static_cast<size_t>(w) * h);
  for (size_t i = 0; i < dist.size(); ++i) dist[i] = g.cells[i] == 0 ? 0.0f : big;

  const int n = std::max(w, h);
  std::vector<float> f(n), d(n), z(n + 1);
  std::vector<int> v(n);
  for (int c = 0; c < w; ++c) {
    for (int r = 0; r < h; ++r) f[r] = dist[g.index(c, r)];
    dt_1d(f.data(), d.data(), h, v.data(), z.data());
    for (int r = 0; r < h; ++r) dist[g.index(c, r)] = d[r];
  }
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) f[c] = dist[g.index(c, r)];
    dt_1d(f.data(), d.data(), w, v.data(), z.data());
    for (int c = 0; c < w; ++c) dist[g.index(c, r)] = d[c];
  }
  return dist;
}

}  // namespace

OccupancyGrid inflate_obstacles(const OccupancyGrid& grid, double radius_m) {
  OccupancyGrid out = grid;
  if (radius_m <= 0.0) return out;
  const std::vector<float> dist_sq = obstacle_distance_sq(grid);
  const double r_cells_sq = (radius_m / grid.resolution) * (radius_m / grid.resolution);
  for (size_t i = 0; i < out.cells.size(); ++i) {
    if (grid.cells[i] == 1 && static_cast<double>(dist_sq[i]) < r_cells_sq) out.cells[i] = 0;
  }
  return out;
}

double largest_free_component_area(const OccupancyGrid& grid) {
  std::vector<uint8_t> seen(grid.cells.size(), 0);
  std::vector<size_t> stack;
  size_t best = 0;
  for (int r = 0; r < grid.height; ++r) {
    for (int c = 0; c < grid.width; ++c) {
      const size_t start = grid.index(c, r);
      if (seen[start] || grid.cells[start] != 1) continue;
      size_t count = 0;
      stack.push_back(start);
      seen[start] = 1;
      while (!stack.empty()) {
        const size_t i = stack.back();
        stack.pop_back();
        ++count;
        const int cc = static_cast<int>(i % grid.width);
        const int rr = static_cast<int>(i / grid.width);
        const int dc[4] = {1, -1, 0, 0};
        const int dr[4] = {0, 0, 1, -1};
        for (int k = 0; k < 4; ++k) {
          const int nc = cc + dc[k], nr = rr + dr[k];
          if (!grid.free_at(nc, nr)) continue;
          const size_t ni = grid.index(nc, nr);
          if (!seen[ni]) {
            seen[ni] = 1;
            stack.push_back(ni);
          }
        }
      }
      best = std::max(best, count);
    }
  }
  return static_cast<double>(best) * grid.resolution * grid.resolution;
}

}  // namespace contextnav
