#pragma once

#include <cstdint>
#include <optional>

#include "contextnav/planners.hpp"

namespace contextnav {

struct RrtParams {
  int max_iters = 5000;
  double steer_step = 0.5;   // m
  double goal_bias = 0.05;
  uint32_t seed = 0;
};

// Asymptotically-optimal RRT* on the given (already inflated) planning grid.
// Deterministic in the seed; returns nullopt if no connection to the goal is
// found within the iteration budget.
std::optional<Path> rrt_star(const OccupancyGrid& grid, Vec2 start, Vec2 goal,
                             const RrtParams& params);

}  // namespace contextnav
