#pragma once

#include <random>
#include <string>
#include <vector>

#include "contextnav/kinematics.hpp"
#include "contextnav/planners.hpp"

namespace contextnav {

struct Episode {
  int id = 0;
  std::string map;  // map filename relative to the dataset's map_ref
  Pose start;
  Vec2 goal;
  double geodesic = 0.0;   // shortest traversable distance at start, m
  double euclidean = 0.0;  // straight-line start->goal distance, m
  int budget = 0;          // step budget
};

struct EpisodeDataset {
  std::string version = "1";
  std::string split = "train";
  std::string map_ref;  // directory (or single file) the per-episode maps live in
  std::string config;   // generation config snapshot (JSON text)
  std::vector<Episode> episodes;
};

struct EpisodeConstraints {
  double min_geodesic = 1.5;   // m
  double max_geodesic = 30.0;  // m
  double min_ratio = 0.0;      // geodesic/euclidean; 0 disables ("complex paths" uses 1.1)
  int max_tries = 1000;
};

// Samples start/goal uniformly from the robot-radius-inflated free cells of
// `world`, subject to the constraints. Deterministic in the rng state.
// Throws std::runtime_error with diagnostics when unsatisfiable.
Episode generate_episode(const OccupancyGrid& world, std::mt19937& rng,
                         const EpisodeConstraints& constraints);

// 500 steps per started 50 m of initial geodesic distance.
int step_budget(double geodesic_m);

EpisodeDataset load_episodes(const std::string& path);
void save_episodes(const EpisodeDataset& dataset, const std::string& path);

}  // namespace contextnav
