#pragma once

#include <cstdint>
#include <string>

#include "contextnav/grid.hpp"

namespace contextnav {

enum class WorldKind {
  open_room,
  rooms_and_corridors,
  maze,
  hidden_gap_corridor,
  scatter_obstacles,
};

WorldKind world_kind_from_string(const std::string& s);
std::string to_string(WorldKind k);

struct WorldSpec {
  WorldKind kind = WorldKind::open_room;
  double width_m = 25.0;
  double height_m = 25.0;
  double resolution = 0.1;
  uint32_t seed = 0;

  double wall_thickness_m = 0.2;
  double gap_width_m = 1.0;
  double gap_offset_m = -1.0;    // hidden-gap-corridor: gap center x; <0 draws from seed
  double obstacle_density = 0.08;  // scatter-obstacles: target obstacle area fraction
  double cell_size_m = 2.0;        // maze / rooms: coarse lattice pitch
};

// Deterministic in (spec, seed). Throws std::invalid_argument when the spec
// cannot produce a usable world (e.g. gap wider than the world).
OccupancyGrid generate_map(const WorldSpec& spec);

}  // namespace contextnav
