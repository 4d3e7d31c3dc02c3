#include "contextnav/context.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace contextnav {

NoiseSpec parse_noise_spec(const std::string& text) {
  NoiseSpec spec;
  if (text.empty() || text == "none") return spec;
  const auto colon = text.find(':');
  const std::string kind = text.substr(0, colon);
  const std::string arg = colon == std::string::npos ? "" : text.substr(colon + 1);
  if (kind == "blank") {
    spec.kind = NoiseSpec::Kind::blank;
    return spec;
  }
  if (arg.empty()) throw std::invalid_argument("noise spec needs a magnitude: " + text);
  spec.magnitude = std::stod(arg);
  if (kind == "shift") {
    spec.kind = NoiseSpec::Kind::shift;
  } else if (kind == "cutout") {
    spec.kind = NoiseSpec::Kind::cutout;
  } else if (kind == "waypoint") {
    spec.kind = NoiseSpec::Kind::waypoint_shift;
  } else {
    throw std::invalid_argument("unknown noise kind: " + text);
  }
  if (spec.kind != NoiseSpec::Kind::waypoint_shift &&
      (spec.magnitude < 0.0 || spec.magnitude > 1.0))
    throw std::invalid_argument("noise fraction must be in [0,1]: " + text);
  if (spec.magnitude < 0.0) throw std::invalid_argument("noise magnitude must be >= 0: " + text);
  return spec;
}

std::string to_string(const NoiseSpec& spec) {
  switch (spec.kind) {
    case NoiseSpec::Kind::none: return "none";
    case NoiseSpec::Kind::blank: return "blank";
    case NoiseSpec::Kind::shift: return "shift:" + std::to_string(spec.magnitude);
    case NoiseSpec::Kind::cutout: return "cutout:" + std::to_string(spec.magnitude);
    case NoiseSpec::Kind::waypoint_shift: return "waypoint:" + std::to_string(spec.magnitude);
  }
  return "?";
}

OccupancyGrid make_context_raster(const OccupancyGrid& world, int n) {
  if (n < 2) throw std::invalid_argument("context raster needs n >= 2");
  const double extent = std::max(world.width_m(), world.height_m());
  OccupancyGrid ctx(n, n, extent / n, world.origin, 0);
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) {
      const Vec2 p = ctx.cell_center(c, r);
      int wc, wr;
      world.world_to_cell(p, wc, wr);
      ctx.at(c, r) = world.free_at(wc, wr) ? 1 : 0;
    }
  }
  return ctx;
}

OccupancyGrid corrupt_map(const OccupancyGrid& context_map, const NoiseSpec& spec) {
  std::mt19937 rng(spec.seed);
  OccupancyGrid out = context_map;
  const int n = context_map.width;
  switch (spec.kind) {
    case NoiseSpec::Kind::none:
    case NoiseSpec::Kind::waypoint_shift:
      return out;
    case NoiseSpec::Kind::blank: {
      std::fill(out.cells.begin(), out.cells.end(), uint8_t{1});
      return out;
    }
    case NoiseSpec::Kind::shift: {
      const int max_off = static_cast<int>(std::lround(spec.magnitude * n));
      std::uniform_int_distribution<int> off(-max_off, max_off);
      const int dx = off(rng), dy = off(rng);
      for (int r = 0; r < context_map.height; ++r) {
        for (int c = 0; c < context_map.width; ++c) {
          const int sc = c - dx, sr = r - dy;
          out.at(c, r) = context_map.in_bounds(sc, sr) ? context_map.at(sc, sr) : 1;
        }
      }
      return out;
    }
    case NoiseSpec::Kind::cutout: {
      if (spec.magnitude >= 1.0) {  // 100% cutout == blank map
        std::fill(out.cells.begin(), out.cells.end(), uint8_t{1});
        return out;
      }
      const size_t target =
          static_cast<size_t>(spec.magnitude * static_cast<double>(out.cells.size()));
      const int side_lo = std::max(1, n / 20);
      const int side_hi = std::max(side_lo, n / 4);
      const double mean_area = 0.25 * (side_lo + side_hi) * (side_lo + side_hi);
      // a patch's final value matches the original half the time, so roughly
      // 2*target/mean_area patches are expected before the diff target is met
      const int max_patches =
          10 * std::max<int>(1, static_cast<int>(std::ceil(2.0 * target / mean_area)));
      std::uniform_int_distribution<int> side(side_lo, side_hi);
      std::uniform_int_distribution<int> value(0, 1);
      auto diff_count = [&]() {
        size_t diff = 0;
        for (size_t i = 0; i < out.cells.size(); ++i)
          if (out.cells[i] != context_map.cells[i]) ++diff;
        return diff;
      };
      for (int p = 0; p < max_patches; ++p) {
        if (diff_count() >= target) break;
        const int w = side(rng), h = side(rng);
        const int c0 = std::uniform_int_distribution<int>(0, std::max(0, n - w))(rng);
        const int r0 = std::uniform_int_distribution<int>(0, std::max(0, context_map.height - h))(rng);
        const uint8_t v = static_cast<uint8_t>(value(rng));
        for (int r = r0; r < std::min(context_map.height, r0 + h); ++r)
          for (int c = c0; c < std::min(n, c0 + w); ++c) out.at(c, r) = v;
      }
      return out;
    }
  }
  return out;
}

namespace {

// Rotates a binary plane by -heading about the raster center with nearest
// neighbor sampling; cells drawn from outside the frame get `fill`.
std::vector<uint8_t> rotate_plane(const std::vector<uint8_t>& in, int n, double heading,
                                  uint8_t fill) {
  std::vector<uint8_t> out(in.size(), fill);
  const double c = std::cos(heading), s = std::sin(heading);
  const double center = (n - 1) / 2.0;
  for (int r = 0; r < n; ++r) {
    for (int col = 0; col < n; ++col) {
      const double dx = col - center, dy = r - center;
      // inverse map: source = R(+heading) * offset
      const double sx = c * dx - s * dy + center;
      const double sy = s * dx + c * dy + center;
      const int sc = static_cast<int>(std::lround(sx));
      const int sr = static_cast<int>(std::lround(sy));
      if (sc >= 0 && sr >= 0 && sc < n && sr < n)
        out[static_cast<size_t>(r) * n + col] = in[static_cast<size_t>(sr) * n + sc];
    }
  }
  return out;
}

// Agent cell + goal disk on an unrotated n x n raster.
std::vector<uint8_t> agent_goal_plane(const OccupancyGrid& raster, const Pose& pose, Vec2 goal) {
  std::vector<uint8_t> plane(raster.cells.size(), 0);
  const int n = raster.width;
  int ac, ar;
  raster.world_to_cell(pose.position(), ac, ar);
  if (!raster.in_bounds(ac, ar))
    throw std::invalid_argument("build_context: agent outside the context raster");
  plane[static_cast<size_t>(ar) * n + ac] = 1;
  int gc, gr;
  raster.world_to_cell(goal, gc, gr);
  constexpr int kDiskRadius = 2;
  for (int dr = -kDiskRadius; dr <= kDiskRadius; ++dr) {
    for (int dc = -kDiskRadius; dc <= kDiskRadius; ++dc) {
      if (dc * dc + dr * dr > kDiskRadius * kDiskRadius) continue;
      const int c = gc + dc, r = gr + dr;
      if (raster.in_bounds(c, r)) plane[static_cast<size_t>(r) * n + c] = 1;
    }
  }
  return plane;
}

OccupancyGrid resample_if_needed(const OccupancyGrid& map, int n) {
  if (map.width == n && map.height == n) return map;
  return make_context_raster(map, n);
}

}  // namespace

ContextObservation build_context_map(const OccupancyGrid& context_map, const Pose& pose,
                                     Vec2 goal, int n) {
  const OccupancyGrid raster = resample_if_needed(context_map, n);
  ContextObservation obs;
  obs.n = n;
  obs.m_per_cell = raster.resolution;
  obs.ch0 = rotate_plane(raster.cells, n, pose.heading, 0);
  obs.ch1 = rotate_plane(agent_goal_plane(raster, pose, goal), n, pose.heading, 0);
  return obs;
}

ContextObservation build_context_trajectory(const OccupancyGrid& context_map, const Path& path,
                                            const Pose& pose, Vec2 goal, int n) {
  if (path.points.empty()) throw std::invalid_argument("build_context_trajectory: empty path");
  const OccupancyGrid raster = resample_if_needed(context_map, n);
  std::vector<uint8_t> plane(raster.cells.size(), 0);
  // rasterize with dense sampling; consecutive cells stay 8-connected
  const double step = raster.resolution / 2.0;
  auto mark = [&](Vec2 p) {
    int c, r;
    raster.world_to_cell(p, c, r);
    if (raster.in_bounds(c, r)) plane[static_cast<size_t>(r) * n + c] = 1;
  };
  mark(path.points.front());
  for (size_t i = 1; i < path.points.size(); ++i) {
    const Vec2 a = path.points[i - 1], b = path.points[i];
    const int steps = std::max(1, static_cast<int>(std::ceil(distance(a, b) / step)));
    for (int s = 1; s <= steps; ++s) mark(a + (b - a) * (static_cast<double>(s) / steps));
  }
  ContextObservation obs;
  obs.n = n;
  obs.m_per_cell = raster.resolution;
  obs.ch0 = rotate_plane(plane, n, pose.heading, 0);
  obs.ch1 = rotate_plane(agent_goal_plane(raster, pose, goal), n, pose.heading, 0);
  return obs;
}

PolarGoal next_waypoint(const Path& path, const Pose& pose, double lookahead_m) {
  if (path.points.empty()) throw std::invalid_argument("next_waypoint: empty path");
  // closest point on the polyline, as arc length
  double best_d = std::numeric_limits<double>::infinity();
  double best_s = 0.0;
  double walked = 0.0;
  const Vec2 p = pose.position();
  if (path.points.size() == 1) {
    best_s = 0.0;
  } else {
    for (size_t i = 1; i < path.points.size(); ++i) {
      const Vec2 a = path.points[i - 1], b = path.points[i];
      const Vec2 ab = b - a;
      const double len2 = ab.x * ab.x + ab.y * ab.y;
      double t = 0.0;
      if (len2 > 0.0)
        t = std::clamp(((p.x - a.x) * ab.x + (p.y - a.y) * ab.y) / len2, 0.0, 1.0);
      const Vec2 proj = a + ab * t;
      const double d = distance(p, proj);
      if (d < best_d) {
        best_d = d;
        best_s = walked + t * std::sqrt(len2);
      }
      walked += std::sqrt(len2);
    }
  }

  // target = point lookahead_m further along the arc
  double target_s = best_s + lookahead_m;
  Vec2 target = path.points.back();
  double s = 0.0;
  for (size_t i = 1; i < path.points.size(); ++i) {
    const Vec2 a = path.points[i - 1], b = path.points[i];
    const double seg = distance(a, b);
    if (s + seg >= target_s && seg > 0.0) {
      target = a + (b - a) * ((target_s - s) / seg);
      break;
    }
    s += seg;
  }

  PolarGoal wp;
  wp.r = distance(p, target);
  wp.theta = wp.r < 1e-12 ? 0.0
                          : normalize_angle(std::atan2(target.y - p.y, target.x - p.x) -
                                            pose.heading);
  return wp;
}

PolarGoal corrupt_waypoint(const PolarGoal& wp, double magnitude, std::mt19937& rng) {
  if (magnitude < 0.0) throw std::invalid_argument("corrupt_waypoint: magnitude must be >= 0");
  if (magnitude == 0.0) return wp;
  std::uniform_real_distribution<double> u(-magnitude, magnitude);
  const double x = wp.r * std::cos(wp.theta) + u(rng);
  const double y = wp.r * std::sin(wp.theta) + u(rng);
  PolarGoal out;
  out.r = std::hypot(x, y);
  out.theta = out.r < 1e-12 ? 0.0 : normalize_angle(std::atan2(y, x));
  return out;
}

GoalEncoding encode_goal(const Pose& pose, Vec2 goal) {
  const double r = distance(pose.position(), goal);
  const double theta =
      r < 1e-12 ? 0.0 : normalize_angle(std::atan2(goal.y - pose.y, goal.x - pose.x) - pose.heading);
  return {std::log1p(r), std::cos(theta), std::sin(theta)};
}

}  // namespace contextnav
