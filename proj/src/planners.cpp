#include "contextnav/planners.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <stdexcept>

namespace contextnav {

namespace {

constexpr float kInf = std::numeric_limits<float>::infinity();
constexpr double kSqrt2 = 1.4142135623730951;

struct Neighbor {
  int dc, dr;
  double cost;  // in cells
};
constexpr Neighbor kNeighbors[8] = {
    {1, 0, 1.0}, {-1, 0, 1.0}, {0, 1, 1.0}, {0, -1, 1.0},
    {1, 1, kSqrt2}, {1, -1, kSqrt2}, {-1, 1, kSqrt2}, {-1, -1, kSqrt2},
};

// Diagonal moves must not cut corners: both orthogonal cells must be free.
bool move_allowed(const OccupancyGrid& g, int c, int r, const Neighbor& n) {
  if (!g.free_at(c + n.dc, r + n.dr)) return false;
  if (n.dc != 0 && n.dr != 0)
    return g.free_at(c + n.dc, r) && g.free_at(c, r + n.dr);
  return true;
}

int cell_of(const OccupancyGrid& g, Vec2 p, const char* what) {
  int c, r;
  g.world_to_cell(p, c, r);
  if (!g.free_at(c, r))
    throw std::invalid_argument(std::string(what) + " is not on a free cell of the planning grid");
  return static_cast<int>(g.index(c, r));
}

}  // namespace

double polyline_length(const std::vector<Vec2>& points) {
  double len = 0.0;
  for (size_t i = 1; i < points.size(); ++i) len += distance(points[i - 1], points[i]);
  return len;
}

Path make_path(std::vector<Vec2> points) {
  Path p;
  p.length = polyline_length(points);
  p.points = std::move(points);
  return p;
}

DistanceField dijkstra_field(const OccupancyGrid& grid, Vec2 goal) {
  const int goal_idx = cell_of(grid, goal, "goal");
  DistanceField field;
  field.width = grid.width;
  field.height = grid.height;
  field.d.assign(grid.cells.size(), kInf);

  using Entry = std::pair<double, int>;  // (distance cells, cell index)
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> open;
  std::vector<double> dist(grid.cells.size(), std::numeric_limits<double>::infinity());
  dist[goal_idx] = 0.0;
  open.emplace(0.0, goal_idx);
  while (!open.empty()) {
    const auto [d, idx] = open.top();
    open.pop();
    if (d > dist[idx]) continue;
    const int c = idx % grid.width, r = idx / grid.width;
    for (const auto& n : kNeighbors) {
      if (!move_allowed(grid, c, r, n)) continue;
      const int nidx = idx + n.dr * grid.width + n.dc;
      const double nd = d + n.cost;
      if (nd < dist[nidx]) {
        dist[nidx] = nd;
        open.emplace(nd, nidx);
      }
    }
  }
  for (size_t i = 0; i < dist.size(); ++i)
    field.d[i] = std::isinf(dist[i]) ? kInf : static_cast<float>(dist[i] * grid.resolution);
  return field;
}

std::optional<Path> astar_path(const OccupancyGrid& grid, Vec2 start, Vec2 goal) {
  const int start_idx = cell_of(grid, start, "start");
  const int goal_idx = cell_of(grid, goal, "goal");
  if (start_idx == goal_idx) {
    const int c = start_idx % grid.width, r = start_idx / grid.width;
    return make_path({grid.cell_center(c, r)});
  }
  const int gc = goal_idx % grid.width, gr = goal_idx / grid.width;

  auto octile = [&](int idx) {
    const int c = idx % grid.width, r = idx / grid.width;
    const int dx = std::abs(c - gc), dy = std::abs(r - gr);
    return kSqrt2 * std::min(dx, dy) + std::abs(dx - dy);
  };

  struct Entry {
    double f;
    double turn;  // |heading change| at this expansion, for deterministic ties
    int idx;
    bool operator>(const Entry& o) const {
      if (f != o.f) return f > o.f;
      if (turn != o.turn) return turn > o.turn;
      return idx > o.idx;
    }
  };
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> open;
  std::vector<double> g_cost(grid.cells.size(), std::numeric_limits<double>::infinity());
  std::vector<int> parent(grid.cells.size(), -1);
  std::vector<int8_t> arrival_dir(grid.cells.size(), -1);

  g_cost[start_idx] = 0.0;
  open.push({octile(start_idx), 0.0, start_idx});
  while (!open.empty()) {
    const Entry e = open.top();
    open.pop();
    const int idx = e.idx;
    if (e.f > g_cost[idx] + octile(idx) + 1e-12) continue;  // stale
    if (idx == goal_idx) break;
    const int c = idx % grid.width, r = idx / grid.width;
    for (int k = 0; k < 8; ++k) {
      const auto& n = kNeighbors[k];
      if (!move_allowed(grid, c, r, n)) continue;
      const int nidx = idx + n.dr * grid.width + n.dc;
      const double ng = g_cost[idx] + n.cost;
      if (ng < g_cost[nidx] - 1e-12) {
        g_cost[nidx] = ng;
        parent[nidx] = idx;
        const double heading_new = std::atan2(n.dr, n.dc);
        double turn = 0.0;
        if (arrival_dir[idx] >= 0) {
          const auto& pn = kNeighbors[arrival_dir[idx]];
          turn = std::abs(normalize_angle(heading_new - std::atan2(pn.dr, pn.dc)));
        }
        arrival_dir[nidx] = static_cast<int8_t>(k);
        open.push({ng + octile(nidx), turn, nidx});
      }
    }
  }
  if (std::isinf(g_cost[goal_idx])) return std::nullopt;

  std::vector<Vec2> points;
  for (int idx = goal_idx; idx != -1; idx = parent[idx])
    points.push_back(grid.cell_center(idx % grid.width, idx / grid.width));
  std::reverse(points.begin(), points.end());
  return make_path(std::move(points));
}

PathValidation validate_path(const OccupancyGrid& grid, const Path& path) {
  if (path.points.empty()) throw std::invalid_argument("validate_path: empty path");
  auto check = [&](Vec2 p) { return grid.free_at_world(p); };
  if (!check(path.points.front())) return {false, path.points.front()};
  const double max_step = grid.resolution / 2.0;
  for (size_t i = 1; i < path.points.size(); ++i) {
    const Vec2 a = path.points[i - 1], b = path.points[i];
    const double seg = distance(a, b);
    const int steps = std::max(1, static_cast<int>(std::ceil(seg / max_step)));
    for (int s = 1; s <= steps; ++s) {
      const double t = static_cast<double>(s) / steps;
      const Vec2 p = a + (b - a) * t;
      if (!check(p)) return {false, p};
    }
  }
  return {true, {}};
}

std::vector<Vec2> extract_waypoints(const Path& path, double spacing) {
  if (spacing <= 0.0) throw std::invalid_argument("extract_waypoints: spacing must be positive");
  if (path.points.empty()) return {};
  std::vector<Vec2> out;
  out.push_back(path.points.front());
  if (path.points.size() == 1) return out;

  double target = spacing;
  double walked = 0.0;
  for (size_t i = 1; i < path.points.size(); ++i) {
    const Vec2 a = path.points[i - 1], b = path.points[i];
    const double seg = distance(a, b);
    while (seg > 0.0 && walked + seg >= target - 1e-12) {
      const double t = (target - walked) / seg;
      out.push_back(a + (b - a) * t);
      target += spacing;
    }
    walked += seg;
  }
  const Vec2 end = path.points.back();
  if (distance(out.back(), end) > 1e-9) {
    out.push_back(end);
  } else {
    out.back() = end;
  }
  return out;
}

}  // namespace contextnav
