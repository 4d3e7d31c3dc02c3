#include "contextnav/depth_sensor.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace contextnav {

namespace {

// Amanatides-Woo traversal: distance along the ray to the boundary of the
// first obstacle cell, capped at max_range.
double trace_ray(const OccupancyGrid& g, Vec2 p, double bearing, double max_range) {
  int cx, cy;
  g.world_to_cell(p, cx, cy);
  if (g.in_bounds(cx, cy) && g.at(cx, cy) == 0) return 0.0;

  const double dx = std::cos(bearing), dy = std::sin(bearing);
  const int step_x = dx > 0 ? 1 : -1;
  const int step_y = dy > 0 ? 1 : -1;
  const double inf = std::numeric_limits<double>::infinity();
  const double t_delta_x = dx != 0.0 ? g.resolution / std::abs(dx) : inf;
  const double t_delta_y = dy != 0.0 ? g.resolution / std::abs(dy) : inf;

  auto boundary = [&](double coord, double origin, int cell, int step) {
    const double edge = origin + (cell + (step > 0 ? 1 : 0)) * g.resolution;
    return edge - coord;
  };
  double t_max_x = dx != 0.0 ? boundary(p.x, g.origin.x, cx, step_x) / dx : inf;
  double t_max_y = dy != 0.0 ? boundary(p.y, g.origin.y, cy, step_y) / dy : inf;

  double t = 0.0;
  while (t <= max_range) {
    if (t_max_x < t_max_y) {
      t = t_max_x;
      t_max_x += t_delta_x;
      cx += step_x;
    } else {
      t = t_max_y;
      t_max_y += t_delta_y;
      cy += step_y;
    }
    if (t > max_range) break;
    if (g.in_bounds(cx, cy) && g.at(cx, cy) == 0) return t;
  }
  return max_range;
}

}  // namespace

DepthScan raycast_depth(const OccupancyGrid& world, const Pose& pose, const SensorConfig& cfg) {
  if (cfg.rays < 2) throw std::invalid_argument("raycast_depth: need at least 2 rays");
  DepthScan scan;
  scan.fov = cfg.fov;
  scan.max_range = cfg.max_range;
  scan.rays.resize(cfg.rays);
  const double start = pose.heading - cfg.fov / 2.0;
  const double step = cfg.fov / (cfg.rays - 1);
  for (int i = 0; i < cfg.rays; ++i) {
    const double d = trace_ray(world, pose.position(), start + i * step, cfg.max_range);
    scan.rays[i] = static_cast<float>(std::min(1.0, d / cfg.max_range));
  }
  return scan;
}

DepthScan random_erase_depth(const DepthScan& scan, double fraction, std::mt19937& rng) {
  if (fraction < 0.0 || fraction > 0.5)
    throw std::invalid_argument("random_erase_depth: fraction must be in [0, 0.5]");
  DepthScan out = scan;
  const int n = static_cast<int>(out.rays.size());
  int remaining = static_cast<int>(fraction * n);
  while (remaining > 0) {
    const int len = std::uniform_int_distribution<int>(1, remaining)(rng);
    const int start = std::uniform_int_distribution<int>(0, n - 1)(rng);
    for (int i = start; i < std::min(n, start + len); ++i) out.rays[i] = 1.0f;
    remaining -= len;
  }
  return out;
}

}  // namespace contextnav
