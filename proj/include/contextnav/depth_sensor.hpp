#pragma once

#include <random>
#include <vector>

#include "contextnav/kinematics.hpp"

namespace contextnav {

struct SensorConfig {
  int rays = 128;
  double fov = 2.094;      // radians (~120 deg)
  double max_range = 3.5;  // m
};

// 1-D depth fan: `rays` normalized depths in [0,1], 1.0 = at/beyond max range.
struct DepthScan {
  std::vector<float> rays;
  double fov = 2.094;
  double max_range = 3.5;
};

// Casts rays i at bearing heading - fov/2 + i*fov/(R-1); depth is the distance
// to the first obstacle-cell boundary, normalized by max_range and clamped to
// 1.0. Cells outside the grid count as free.
DepthScan raycast_depth(const OccupancyGrid& world, const Pose& pose, const SensorConfig& cfg);

// Blanks contiguous ray segments (fill 1.0) totaling at most fraction*R rays.
DepthScan random_erase_depth(const DepthScan& scan, double fraction, std::mt19937& rng);

}  // namespace contextnav
