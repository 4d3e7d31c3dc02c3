#pragma once

#include "contextnav/grid.hpp"

namespace contextnav {

// Task constants: Spot-sized robot under 2 Hz velocity control.
constexpr double kMaxLinearVel = 0.5;    // m/s
constexpr double kMaxAngularVel = 0.3;   // rad/s
constexpr double kRobotRadius = 0.425;   // m (half the robot width)
constexpr double kControlDt = 0.5;       // s
constexpr double kSuccessRadius = 0.425; // m

struct Pose {
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;  // radians in (-pi, pi]
  Vec2 position() const { return {x, y}; }
};

struct VelocityAction {
  double linear = 0.0;   // m/s
  double angular = 0.0;  // rad/s
};

VelocityAction clip_action(VelocityAction a);

// Explicit Euler step: position advances along the pre-step heading.
Pose integrate_unicycle(const Pose& pose, const VelocityAction& action, double dt);

struct StepResult {
  Pose pose;
  bool collided = false;
};

// Advances the pose on a robot-radius-inflated grid. A colliding candidate
// freezes the position (the heading still updates). Throws std::logic_error
// if the input pose is already in collision.
StepResult step_kinematic(const OccupancyGrid& inflated_world, const Pose& pose,
                          const VelocityAction& action, double dt = kControlDt);

}  // namespace contextnav
