#include "contextnav/episodes.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace contextnav {

int step_budget(double geodesic_m) {
  if (!std::isfinite(geodesic_m) || geodesic_m < 0.0)
    throw std::invalid_argument("step_budget: geodesic must be finite and non-negative");
  const int chunks = std::max(1, static_cast<int>(std::ceil(geodesic_m / 50.0)));
  return 500 * chunks;
}

Episode generate_episode(const OccupancyGrid& world, std::mt19937& rng,
                         const EpisodeConstraints& constraints) {
  const OccupancyGrid inflated = inflate_obstacles(world, kRobotRadius);
  std::vector<int> free_cells;
  for (size_t i = 0; i < inflated.cells.size(); ++i)
    if (inflated.cells[i] == 1) free_cells.push_back(static_cast<int>(i));
  if (free_cells.empty())
    throw std::runtime_error("generate_episode: no free cells after inflation");

  std::uniform_int_distribution<size_t> pick(0, free_cells.size() - 1);
  std::uniform_real_distribution<double> uh(-M_PI, M_PI);

  for (int attempt = 0; attempt < constraints.max_tries; ++attempt) {
    const int gidx = free_cells[pick(rng)];
    const Vec2 goal = inflated.cell_center(gidx % inflated.width, gidx / inflated.width);
    const DistanceField field = dijkstra_field(inflated, goal);

    // several start draws per goal before resampling the goal
    for (int inner = 0; inner < 20; ++inner) {
      const int sidx = free_cells[pick(rng)];
      const Vec2 start = inflated.cell_center(sidx % inflated.width, sidx / inflated.width);
      const double geo = field.at(sidx % inflated.width, sidx / inflated.width);
      if (!std::isfinite(geo)) continue;
      if (geo < constraints.min_geodesic || geo > constraints.max_geodesic) continue;
      const double euc = distance(start, goal);
      if (constraints.min_ratio > 0.0 && (euc < 1e-9 || geo / euc < constraints.min_ratio))
        continue;
      Episode ep;
      ep.start = {start.x, start.y, normalize_angle(uh(rng))};
      ep.goal = goal;
      ep.geodesic = geo;
      ep.euclidean = euc;
      ep.budget = step_budget(geo);
      return ep;
    }
  }
  throw std::runtime_error(
      "generate_episode: constraints unsatisfiable after " +
      std::to_string(constraints.max_tries) + " goal draws (min_d=" +
      std::to_string(constraints.min_geodesic) + ", max_d=" +
      std::to_string(constraints.max_geodesic) + ", ratio=" +
      std::to_string(constraints.min_ratio) + ")");
}

namespace {

void require_fields(const nlohmann::json& j, std::initializer_list<const char*> allowed,
                    const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (const char* k : allowed)
      if (it.key() == k) known = true;
    if (!known)
      throw std::runtime_error("episode file: unknown field '" + it.key() + "' in " + where);
  }
}

}  // namespace

EpisodeDataset load_episodes(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open episode file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("bad episode file " + path + ": " + e.what());
  }
  require_fields(j, {"version", "split", "map_ref", "config", "episodes"}, "root");
  EpisodeDataset ds;
  ds.version = j.at("version").get<std::string>();
  ds.split = j.value("split", "train");
  ds.map_ref = j.at("map_ref").get<std::string>();
  ds.config = j.value("config", "");

  std::vector<int> seen_ids;
  for (const auto& je : j.at("episodes")) {
    require_fields(je, {"id", "map", "start", "goal", "geodesic", "euclidean", "budget"},
                   "episode");
    Episode ep;
    ep.id = je.at("id").get<int>();
    ep.map = je.value("map", "");
    ep.start = {je.at("start").at("x").get<double>(), je.at("start").at("y").get<double>(),
                je.at("start").at("heading").get<double>()};
    ep.goal = {je.at("goal").at("x").get<double>(), je.at("goal").at("y").get<double>()};
    ep.geodesic = je.at("geodesic").get<double>();
    ep.euclidean = je.at("euclidean").get<double>();
    ep.budget = je.at("budget").get<int>();
    if (ep.geodesic < 0.0)
      throw std::runtime_error("episode file: episode " + std::to_string(ep.id) +
                               " has negative geodesic");
    if (ep.budget <= 0)
      throw std::runtime_error("episode file: episode " + std::to_string(ep.id) +
                               " has non-positive budget");
    seen_ids.push_back(ep.id);
    ds.episodes.push_back(std::move(ep));
  }
  std::sort(seen_ids.begin(), seen_ids.end());
  if (std::adjacent_find(seen_ids.begin(), seen_ids.end()) != seen_ids.end())
    throw std::runtime_error("episode file: duplicate episode ids");

  // referenced maps must exist
  const auto base = std::filesystem::path(ds.map_ref);
  for (const auto& ep : ds.episodes) {
    if (ep.map.empty()) continue;
    const auto map_path = base / ep.map;
    if (!std::filesystem::exists(map_path))
      throw std::runtime_error("episode file references missing map: " + map_path.string());
  }
  return ds;
}

void save_episodes(const EpisodeDataset& dataset, const std::string& path) {
  nlohmann::json j;
  j["version"] = dataset.version;
  j["split"] = dataset.split;
  j["map_ref"] = dataset.map_ref;
  j["config"] = dataset.config;
  j["episodes"] = nlohmann::json::array();
  for (const auto& ep : dataset.episodes) {
    nlohmann::json je;
    je["id"] = ep.id;
    je["map"] = ep.map;
    je["start"] = {{"x", ep.start.x}, {"y", ep.start.y}, {"heading", ep.start.heading}};
    je["goal"] = {{"x", ep.goal.x}, {"y", ep.goal.y}};
    je["geodesic"] = ep.geodesic;
    je["euclidean"] = ep.euclidean;
    je["budget"] = ep.budget;
    j["episodes"].push_back(std::move(je));
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write episode file: " + path);
  out << j.dump(2) << "\n";
}

}  // namespace contextnav
