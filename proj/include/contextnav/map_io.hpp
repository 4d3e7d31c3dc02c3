#pragma once

#include <stdexcept>
#include <string>

#include "contextnav/grid.hpp"

namespace contextnav {

struct MapFileError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct MapFormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct MapSidecarError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Loads an 8-bit grayscale PGM (P5) or PNG map plus its `<stem>.json` sidecar
// ({resolution_m, origin_xy_m}). Pixels < 128 become obstacles, >= 128 free.
OccupancyGrid load_map(const std::string& path);

// Writes the map (free=255, obstacle=0) and its sidecar next to it. Format
// picked from the extension (.pgm or .png).
void save_map(const OccupancyGrid& grid, const std::string& path);

std::string sidecar_path(const std::string& map_path);

}  // namespace contextnav
