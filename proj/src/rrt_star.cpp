#include "contextnav/rrt_star.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

namespace contextnav {

namespace {

bool segment_free(const OccupancyGrid& g, Vec2 a, Vec2 b) {
  const double seg = distance(a, b);
  const int steps = std::max(1, static_cast<int>(std::ceil(seg / (g.resolution / 2.0))));
  for (int s = 0; s <= steps; ++s) {
    const double t = static_cast<double>(s) / steps;
    if (!g.free_at_world(a + (b - a) * t)) return false;
  }
  return true;
}

struct TreeNode {
  Vec2 p;
  int parent = -1;
  double cost = 0.0;
  std::vector<int> children;
};

void propagate_cost(std::vector<TreeNode>& nodes, int root) {
  std::vector<int> stack{root};
  while (!stack.empty()) {
    const int i = stack.back();
    stack.pop_back();
    for (int ch : nodes[i].children) {
      nodes[ch].cost = nodes[i].cost + distance(nodes[i].p, nodes[ch].p);
      stack.push_back(ch);
    }
  }
}

void reparent(std::vector<TreeNode>& nodes, int child, int new_parent) {
  const int old = nodes[child].parent;
  if (old >= 0) {
    auto& ch = nodes[old].children;
    ch.erase(std::find(ch.begin(), ch.end(), child));
  }
  nodes[child].parent = new_parent;
  nodes[new_parent].children.push_back(child);
  nodes[child].cost = nodes[new_parent].cost + distance(nodes[new_parent].p, nodes[child].p);
  propagate_cost(nodes, child);
}

}  // namespace

std::optional<Path> rrt_star(const OccupancyGrid& grid, Vec2 start, Vec2 goal,
                             const RrtParams& params) {
  if (params.max_iters <= 0 || params.steer_step <= 0.0 || params.goal_bias < 0.0 ||
      params.goal_bias >= 1.0)
    throw std::invalid_argument("rrt_star: invalid parameters");
  if (!grid.free_at_world(start) || !grid.free_at_world(goal))
    throw std::invalid_argument("rrt_star: endpoints must be free on the planning grid");

  std::mt19937 rng(params.seed);
  std::uniform_real_distribution<double> ux(grid.origin.x, grid.origin.x + grid.width_m());
  std::uniform_real_distribution<double> uy(grid.origin.y, grid.origin.y + grid.height_m());
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  std::vector<TreeNode> nodes;
  nodes.push_back({start, -1, 0.0, {}});
  const double max_radius = params.steer_step * 4.0;
  const double gamma = 2.0 * max_radius;

  // Nodes with a checked collision-free edge to the goal. Costs are resolved
  // at extraction time so later rewiring is reflected.
  std::vector<int> goal_candidates;

  for (int iter = 0; iter < params.max_iters; ++iter) {
    Vec2 sample;
    if (unit(rng) < params.goal_bias) {
      sample = goal;
    } else {
      sample = {ux(rng), uy(rng)};
    }

    // nearest node
    int nearest = 0;
    double best_d = distance(nodes[0].p, sample);
    for (size_t i = 1; i < nodes.size(); ++i) {
      const double d = distance(nodes[i].p, sample);
      if (d < best_d) {
        best_d = d;
        nearest = static_cast<int>(i);
      }
    }
    if (best_d < 1e-9) continue;

    Vec2 p_new = sample;
    if (best_d > params.steer_step)
      p_new = nodes[nearest].p + (sample - nodes[nearest].p) * (params.steer_step / best_d);
    if (!grid.free_at_world(p_new) || !segment_free(grid, nodes[nearest].p, p_new)) continue;

    const double n = static_cast<double>(nodes.size());
    const double radius = std::min(max_radius, gamma * std::sqrt(std::log(n + 1.0) / (n + 1.0)));

    // choose best parent among neighbors
    int parent = nearest;
    double cost = nodes[nearest].cost + distance(nodes[nearest].p, p_new);
    std::vector<int> neighbors;
    for (size_t i = 0; i < nodes.size(); ++i) {
      if (distance(nodes[i].p, p_new) <= radius) neighbors.push_back(static_cast<int>(i));
    }
    for (int i : neighbors) {
      const double c = nodes[i].cost + distance(nodes[i].p, p_new);
      if (c < cost - 1e-12 && segment_free(grid, nodes[i].p, p_new)) {
        parent = i;
        cost = c;
      }
    }
    const int idx = static_cast<int>(nodes.size());
    nodes.push_back({p_new, parent, cost, {}});
    nodes[parent].children.push_back(idx);

    // rewire neighbors through the new node
    for (int i : neighbors) {
      const double c = cost + distance(nodes[idx].p, nodes[i].p);
      if (c < nodes[i].cost - 1e-12 && segment_free(grid, nodes[idx].p, nodes[i].p))
        reparent(nodes, i, idx);
    }

    // goal connection
    const double dg = distance(p_new, goal);
    if (dg <= params.steer_step && segment_free(grid, p_new, goal))
      goal_candidates.push_back(idx);
  }

  int goal_parent = -1;
  double goal_cost = std::numeric_limits<double>::infinity();
  for (int i : goal_candidates) {
    const double c = nodes[i].cost + distance(nodes[i].p, goal);
    if (c < goal_cost) {
      goal_cost = c;
      goal_parent = i;
    }
  }
  if (goal_parent < 0) return std::nullopt;
  std::vector<Vec2> points{goal};
  for (int i = goal_parent; i != -1; i = nodes[i].parent) points.push_back(nodes[i].p);
  std::reverse(points.begin(), points.end());
  return make_path(std::move(points));
}

}  // namespace contextnav
