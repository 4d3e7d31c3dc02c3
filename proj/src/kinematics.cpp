#include "contextnav/kinematics.hpp"

#include <algorithm>
#include <stdexcept>

namespace contextnav {

VelocityAction clip_action(VelocityAction a) {
  a.linear = std::clamp(a.linear, -kMaxLinearVel, kMaxLinearVel);
  a.angular = std::clamp(a.angular, -kMaxAngularVel, kMaxAngularVel);
  return a;
}

Pose integrate_unicycle(const Pose& pose, const VelocityAction& action, double dt) {
  Pose next;
  next.x = pose.x + action.linear * std::cos(pose.heading) * dt;
  next.y = pose.y + action.linear * std::sin(pose.heading) * dt;
  next.heading = normalize_angle(pose.heading + action.angular * dt);
  return next;
}

StepResult step_kinematic(const OccupancyGrid& inflated_world, const Pose& pose,
                          const VelocityAction& action, double dt) {
  if (!inflated_world.free_at_world(pose.position()))
    throw std::logic_error("step_kinematic: starting pose is already in collision");
  const Pose candidate = integrate_unicycle(pose, action, dt);
  if (inflated_world.free_at_world(candidate.position())) return {candidate, false};
  Pose frozen = pose;
  frozen.heading = candidate.heading;
  return {frozen, true};
}

}  // namespace contextnav
