#pragma once

#include <string>
#include <vector>

#include "osmda/geo.hpp"
#include "osmda/osm.hpp"

namespace osmda::test {

// Scenes whose rendered PNGs are frozen under tests/golden/<name>.png.
struct GoldenScene {
  std::string name;
  geo::ImageRecord rec;
  std::vector<osm::OsmObject> objects;
};

// An empty tile, a lone farmland polygon, and three fixture images run
// through filtering with deterministic stand-in labels.
std::vector<GoldenScene> golden_scenes();

// Set OSMDA_UPDATE_GOLDEN=1 to rewrite the frozen files instead of comparing.
bool update_golden_requested();

}  // namespace osmda::test
