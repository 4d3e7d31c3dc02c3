#include "doctest.h"

#include <random>
#include <stdexcept>

#include "contextnav/context.hpp"
#include "contextnav/world_gen.hpp"

using namespace contextnav;

namespace {

OccupancyGrid asymmetric_l_map(int n) {
  OccupancyGrid g(n, n, 0.1);
  for (int r = 0; r < n / 2; ++r)
    for (int c = 0; c < n / 4; ++c) g.at(c, r) = 0;
  for (int c = 0; c < n; ++c) g.at(c, 0) = 0;
  return g;
}

}  // namespace

TEST_CASE("heading zero leaves the resampled map unrotated") {
  const OccupancyGrid map = asymmetric_l_map(40);
  const int n = 40;
  const ContextObservation obs = build_context_map(map, {2.0, 2.0, 0.0}, {3.0, 3.0}, n);
  CHECK(obs.ch0 == map.cells);
  CHECK(obs.n == n);
  CHECK(obs.m_per_cell == doctest::Approx(0.1));
}

TEST_CASE("axis-aligned headings are exact cell permutations") {
  const int n = 40;
  const OccupancyGrid map = asymmetric_l_map(n);
  const Pose pose{2.0, 2.0, M_PI / 2};
  const ContextObservation obs = build_context_map(map, pose, {3.0, 3.0}, n);
  // rotation by -pi/2: source = R(+pi/2) * offset => (dx,dy) -> (-dy, dx)
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) {
      const double center = (n - 1) / 2.0;
      const int sc = static_cast<int>(std::lround(center - (r - center)));
      const int sr = static_cast<int>(std::lround(center + (c - center)));
      REQUIRE(sc >= 0);
      REQUIRE(sr >= 0);
      CHECK(obs.ch0[static_cast<size_t>(r) * n + c] ==
            map.cells[static_cast<size_t>(sr) * n + sc]);
    }
  }

  const ContextObservation flipped = build_context_map(map, {2.0, 2.0, M_PI}, {3.0, 3.0}, n);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c)
      CHECK(flipped.ch0[static_cast<size_t>(r) * n + c] ==
            map.cells[static_cast<size_t>(n - 1 - r) * n + (n - 1 - c)]);
}

TEST_CASE("rotation preserves the cell multiset for axis-aligned angles") {
  const int n = 32;
  const OccupancyGrid map = asymmetric_l_map(n);
  const size_t free_before = map.count_free();
  for (double heading : {M_PI / 2, M_PI, -M_PI / 2}) {
    const ContextObservation obs = build_context_map(map, {1.6, 1.6, heading}, {2.0, 2.0}, n);
    size_t free_after = 0;
    for (uint8_t v : obs.ch0) free_after += v;
    CHECK(free_after == free_before);
  }
}

TEST_CASE("channel 1 marks the agent cell and a goal disk") {
  WorldSpec spec;
  spec.kind = WorldKind::open_room;
  spec.width_m = 25.0;
  spec.height_m = 25.0;
  const OccupancyGrid world = generate_map(spec);
  const OccupancyGrid raster = make_context_raster(world, 100);
  CHECK(raster.resolution == doctest::Approx(0.25));

  // agent at the center, goal 5 m north, heading 0
  const Pose pose{12.5, 12.5, 0.0};
  const Vec2 goal{12.5, 17.5};
  const ContextObservation obs = build_context_map(raster, pose, goal, 100);
  int agent_c, agent_r, goal_c, goal_r;
  raster.world_to_cell(pose.position(), agent_c, agent_r);
  raster.world_to_cell(goal, goal_c, goal_r);
  CHECK(obs.ch1[static_cast<size_t>(agent_r) * 100 + agent_c] == 1);
  CHECK(goal_r - agent_r == 20);  // 5 m at 0.25 m/cell
  CHECK(obs.ch1[static_cast<size_t>(goal_r) * 100 + goal_c] == 1);
  // disk radius 2 cells
  CHECK(obs.ch1[static_cast<size_t>(goal_r + 2) * 100 + goal_c] == 1);
  CHECK(obs.ch1[static_cast<size_t>(goal_r + 3) * 100 + goal_c] == 0);
  size_t marked = 0;
  for (uint8_t v : obs.ch1) marked += v;
  CHECK(marked == 14);  // 13-cell disk + agent cell
}

TEST_CASE("channels stay binary after rotation and corruption") {
  WorldSpec spec;
  spec.kind = WorldKind::maze;
  spec.width_m = 20.0;
  spec.height_m = 20.0;
  spec.seed = 4;
  const OccupancyGrid world = generate_map(spec);
  const OccupancyGrid raster = make_context_raster(world, 64);
  std::mt19937 rng(1);
  for (int i = 0; i < 5; ++i) {
    NoiseSpec noise;
    noise.kind = NoiseSpec::Kind::cutout;
    noise.magnitude = 0.3;
    noise.seed = rng();
    const OccupancyGrid bad = corrupt_map(raster, noise);
    const Pose pose{10.0, 10.0, std::uniform_real_distribution<double>(-M_PI, M_PI)(rng)};
    const ContextObservation obs = build_context_map(bad, pose, {15.0, 15.0}, 64);
    for (uint8_t v : obs.ch0) CHECK((v == 0 || v == 1));
    for (uint8_t v : obs.ch1) CHECK((v == 0 || v == 1));
    size_t ones = 0;
    for (uint8_t v : obs.ch1) ones += v;
    CHECK(ones >= 2);  // agent + goal visible
  }
}

TEST_CASE("trajectory channel rasterizes exactly the path cells") {
  OccupancyGrid raster(40, 40, 0.1);
  // straight 10-cell horizontal path through cell centers
  const Path path = make_path({raster.cell_center(5, 20), raster.cell_center(14, 20)});
  const ContextObservation obs =
      build_context_trajectory(raster, path, {2.0, 2.0, 0.0}, {3.0, 3.9}, 40);
  size_t ones = 0;
  for (uint8_t v : obs.ch0) ones += v;
  CHECK(ones == 10);
  for (int c = 5; c <= 14; ++c) CHECK(obs.ch0[20 * 40 + c] == 1);

  const Path dot = make_path({raster.cell_center(7, 9)});
  const ContextObservation single =
      build_context_trajectory(raster, dot, {2.0, 2.0, 0.0}, {3.0, 3.9}, 40);
  size_t dots = 0;
  for (uint8_t v : single.ch0) dots += v;
  CHECK(dots == 1);

  // heading pi: channel 0 equals the 180-degree rotation of the unrotated raster
  const ContextObservation rot =
      build_context_trajectory(raster, path, {2.0, 2.0, M_PI}, {3.0, 3.9}, 40);
  for (int r = 0; r < 40; ++r)
    for (int c = 0; c < 40; ++c)
      CHECK(rot.ch0[static_cast<size_t>(r) * 40 + c] ==
            obs.ch0[static_cast<size_t>(39 - r) * 40 + (39 - c)]);

  CHECK_THROWS_AS(build_context_trajectory(raster, Path{}, {2, 2, 0}, {3, 3}, 40),
                  std::invalid_argument);
}

TEST_CASE("next_waypoint looks 1 m ahead along the path") {
  const Path path = make_path({{0, 0}, {5.0, 0}});
  const PolarGoal wp = next_waypoint(path, {0.0, 0.0, 0.0});
  CHECK(wp.r == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(wp.theta == doctest::Approx(0.0).epsilon(1e-9));

  // at the goal end of the path
  const PolarGoal done = next_waypoint(path, {5.0, 0.0, 0.4});
  CHECK(done.r <= 1e-9);

  // 0.5 m left of the path: target is 1 m ahead of the projection
  const PolarGoal off = next_waypoint(path, {2.0, 0.5, 0.0});
  CHECK(off.r == doctest::Approx(std::sqrt(1.0 + 0.25)).epsilon(1e-9));
  CHECK(off.theta == doctest::Approx(std::atan2(-0.5, 1.0)).epsilon(1e-9));

  // the lookahead target always lies on the path
  const Path zig = make_path({{0, 0}, {2, 0}, {2, 3}});
  for (double x : {0.0, 0.7, 1.9, 2.3}) {
    const PolarGoal t = next_waypoint(zig, {x, -0.2, 0.0});
    const double tx = x + t.r * std::cos(t.theta);
    const double ty = -0.2 + t.r * std::sin(t.theta);
    const bool on_h = std::abs(ty - 0.0) < 1e-6 && tx >= -1e-9 && tx <= 2.0 + 1e-9;
    const bool on_v = std::abs(tx - 2.0) < 1e-6 && ty >= -1e-9 && ty <= 3.0 + 1e-9;
    CHECK((on_h || on_v));
  }
}

TEST_CASE("shift noise with zero magnitude is the identity") {
  const OccupancyGrid raster = asymmetric_l_map(50);
  NoiseSpec spec;
  spec.kind = NoiseSpec::Kind::shift;
  spec.magnitude = 0.0;
  spec.seed = 11;
  CHECK(corrupt_map(raster, spec) == raster);
}

TEST_CASE("blank noise turns every cell free") {
  const OccupancyGrid raster = asymmetric_l_map(50);
  NoiseSpec spec;
  spec.kind = NoiseSpec::Kind::blank;
  const OccupancyGrid blank = corrupt_map(raster, spec);
  CHECK(blank.count_free() == blank.cells.size());
  // cutout at 100% behaves the same way
  NoiseSpec full;
  full.kind = NoiseSpec::Kind::cutout;
  full.magnitude = 1.0;
  CHECK(corrupt_map(raster, full).count_free() == blank.cells.size());
}

TEST_CASE("cutout alters a controlled fraction of cells") {
  WorldSpec wspec;
  wspec.kind = WorldKind::rooms_and_corridors;
  wspec.width_m = 25.0;
  wspec.height_m = 25.0;
  wspec.seed = 8;
  const OccupancyGrid raster = make_context_raster(generate_map(wspec), 100);
  for (double f : {0.1, 0.25, 0.5}) {
    for (uint32_t seed = 0; seed < 10; ++seed) {
      NoiseSpec spec;
      spec.kind = NoiseSpec::Kind::cutout;
      spec.magnitude = f;
      spec.seed = seed;
      const OccupancyGrid bad = corrupt_map(raster, spec);
      size_t diff = 0;
      for (size_t i = 0; i < bad.cells.size(); ++i)
        if (bad.cells[i] != raster.cells[i]) ++diff;
      const double frac = static_cast<double>(diff) / static_cast<double>(bad.cells.size());
      CHECK(frac >= f);
      CHECK(frac <= f + 0.15);
    }
  }
}

TEST_CASE("corruption is reproducible per seed and varies across seeds") {
  const OccupancyGrid raster = asymmetric_l_map(60);
  NoiseSpec a;
  a.kind = NoiseSpec::Kind::shift;
  a.magnitude = 0.2;
  a.seed = 5;
  CHECK(corrupt_map(raster, a) == corrupt_map(raster, a));
  NoiseSpec b = a;
  b.seed = 6;
  CHECK(corrupt_map(raster, a).cells != corrupt_map(raster, b).cells);
}

TEST_CASE("shift exposes free cells at the trailing edge") {
  OccupancyGrid raster(20, 20, 0.1, {0, 0}, 0);  // all obstacle
  NoiseSpec spec;
  spec.kind = NoiseSpec::Kind::shift;
  spec.magnitude = 0.25;
  spec.seed = 3;
  const OccupancyGrid shifted = corrupt_map(raster, spec);
  // whatever the offset, exposed border cells must be free (value 1)
  size_t free_cells = shifted.count_free();
  CHECK(free_cells > 0);
  CHECK(free_cells < shifted.cells.size());
}

TEST_CASE("waypoint noise is bounded per axis with near-zero mean") {
  std::mt19937 rng(17);
  const PolarGoal wp{2.0, 0.7};
  const double wx = wp.r * std::cos(wp.theta), wy = wp.r * std::sin(wp.theta);
  double sum_dx = 0.0, sum_dy = 0.0;
  double max_abs = 0.0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    const PolarGoal noisy = corrupt_waypoint(wp, 0.5, rng);
    const double nx = noisy.r * std::cos(noisy.theta), ny = noisy.r * std::sin(noisy.theta);
    CHECK(noisy.r >= 0.0);
    max_abs = std::max({max_abs, std::abs(nx - wx), std::abs(ny - wy)});
    sum_dx += nx - wx;
    sum_dy += ny - wy;
  }
  CHECK(max_abs <= 0.5 + 1e-12);
  CHECK(std::abs(sum_dx / n) <= 0.02);
  CHECK(std::abs(sum_dy / n) <= 0.02);

  std::mt19937 rng2(18);
  const PolarGoal same = corrupt_waypoint(wp, 0.0, rng2);
  CHECK(same.r == wp.r);
  CHECK(same.theta == wp.theta);
}

TEST_CASE("goal encoding follows the log-polar form") {
  const GoalEncoding at_goal = encode_goal({1.0, 2.0, 0.5}, {1.0, 2.0});
  CHECK(at_goal.log_r == 0.0);
  CHECK(at_goal.cos_t == 1.0);
  CHECK(at_goal.sin_t == 0.0);

  const GoalEncoding ahead = encode_goal({0.0, 0.0, 0.0}, {1.0, 0.0});
  CHECK(ahead.log_r == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(ahead.cos_t == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(ahead.sin_t == doctest::Approx(0.0).epsilon(1e-12));

  // 2 m directly left of the robot
  const GoalEncoding left = encode_goal({0.0, 0.0, 0.0}, {0.0, 2.0});
  CHECK(left.log_r == doctest::Approx(std::log(3.0)).epsilon(1e-12));
  CHECK(left.cos_t == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(left.sin_t == doctest::Approx(1.0).epsilon(1e-12));

  std::mt19937 rng(4);
  std::uniform_real_distribution<double> u(-20.0, 20.0);
  for (int i = 0; i < 200; ++i) {
    const GoalEncoding e = encode_goal({u(rng), u(rng), normalize_angle(u(rng))}, {u(rng), u(rng)});
    CHECK(e.cos_t * e.cos_t + e.sin_t * e.sin_t == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("noise specs parse and print") {
  CHECK(parse_noise_spec("none").kind == NoiseSpec::Kind::none);
  CHECK(parse_noise_spec("blank").kind == NoiseSpec::Kind::blank);
  const NoiseSpec s = parse_noise_spec("shift:0.1");
  CHECK(s.kind == NoiseSpec::Kind::shift);
  CHECK(s.magnitude == doctest::Approx(0.1));
  const NoiseSpec w = parse_noise_spec("waypoint:0.5");
  CHECK(w.kind == NoiseSpec::Kind::waypoint_shift);
  CHECK_THROWS_AS(parse_noise_spec("gauss:1"), std::invalid_argument);
  CHECK_THROWS_AS(parse_noise_spec("cutout:1.5"), std::invalid_argument);
}
