#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "contextnav/kinematics.hpp"
#include "contextnav/planners.hpp"

namespace contextnav {

struct PolarGoal {
  double r = 0.0;      // m
  double theta = 0.0;  // radians, robot-relative, (-pi, pi]
};

struct GoalEncoding {
  double log_r = 0.0;  // ln(1 + r)
  double cos_t = 1.0;
  double sin_t = 0.0;
};

// The 2 x N x N context tensor. Channel 0 holds occupancy (or a rasterized
// trajectory); channel 1 holds the agent cell and the goal disk. Both rotated
// by -heading about the raster center.
struct ContextObservation {
  int n = 0;
  double m_per_cell = 0.0;
  std::vector<uint8_t> ch0;  // n*n, row-major, row 0 bottom
  std::vector<uint8_t> ch1;
};

struct NoiseSpec {
  enum class Kind { none, shift, cutout, blank, waypoint_shift };
  Kind kind = Kind::none;
  double magnitude = 0.0;  // shift/cutout: fraction; waypoint_shift: meters
  uint32_t seed = 0;
};

NoiseSpec parse_noise_spec(const std::string& text);  // "none", "blank", "shift:0.1", ...
std::string to_string(const NoiseSpec& spec);

// Downsamples a world grid to an n x n raster covering its full extent
// (nearest neighbor; cells beyond the world are obstacles).
OccupancyGrid make_context_raster(const OccupancyGrid& world, int n);

// Applies shift / cutout / blank corruption. Deterministic in spec.seed.
OccupancyGrid corrupt_map(const OccupancyGrid& context_map, const NoiseSpec& spec);

ContextObservation build_context_map(const OccupancyGrid& context_map, const Pose& pose,
                                     Vec2 goal, int n = 100);

ContextObservation build_context_trajectory(const OccupancyGrid& context_map, const Path& path,
                                            const Pose& pose, Vec2 goal, int n = 100);

// Projects the pose onto the path and returns the point 1 m further along the
// arc length (or the final point), in robot-relative polar coordinates.
PolarGoal next_waypoint(const Path& path, const Pose& pose, double lookahead_m = 1.0);

// Cartesian uniform noise in [-magnitude, +magnitude] per axis.
PolarGoal corrupt_waypoint(const PolarGoal& wp, double magnitude, std::mt19937& rng);

GoalEncoding encode_goal(const Pose& pose, Vec2 goal);

}  // namespace contextnav
