#include <map>
#include <sstream>

#include "ikh/track.hpp"

namespace ikh::track {

namespace {

// Evaluation circuit, driven counter-clockwise from the long bottom straight.
// Sector letters follow the boundary points a..i; (c,d) and (i,a) are too
// short to spawn in.
constexpr const char* kRacetrack = R"(
name = racetrack
lane_width = 6
closed = true
segment.0.kind = straight   # (a,b) long bottom straight
segment.0.length = 100
segment.1.kind = arc        # (b,c)
segment.1.radius = 20
segment.1.sweep = 90deg
segment.1.direction = ccw
segment.2.kind = straight   # (c,d)
segment.2.length = 11
segment.3.kind = arc        # (d,e) tight corner
segment.3.radius = 15
segment.3.sweep = 90deg
segment.3.direction = ccw
segment.4.kind = straight   # (e,f)
segment.4.length = 30
segment.5.kind = arc        # (f,g) chicane, right then left
segment.5.radius = 12
segment.5.sweep = 90deg
segment.5.direction = cw
segment.6.kind = arc
segment.6.radius = 12
segment.6.sweep = 90deg
segment.6.direction = ccw
segment.7.kind = straight   # (g,h)
segment.7.length = 66
segment.8.kind = arc        # (h,i) big left curve
segment.8.radius = 35
segment.8.sweep = 180deg
segment.8.direction = ccw
segment.9.kind = straight   # (i,a)
segment.9.length = 15
sectors = 0, 100, 131.41592653589794, 142.41592653589794, 165.9778714378214, 195.9778714378214, 233.6769832808989, 299.67698328089887, 409.6327261565416
spawn_sectors = 0, 1, 3, 4, 5, 6, 7
)";

// Speedway-style oval.
constexpr const char* kIndiana = R"(
name = indiana
lane_width = 6
closed = true
segment.0.kind = straight
segment.0.length = 150
segment.1.kind = arc
segment.1.radius = 40
segment.1.sweep = 180deg
segment.1.direction = ccw
segment.2.kind = straight
segment.2.length = 150
segment.3.kind = arc
segment.3.radius = 40
segment.3.sweep = 180deg
segment.3.direction = ccw
sectors = 0, 150, 275.66370614359172, 425.66370614359172
)";

constexpr const char* kTurnLeft = R"(
name = turn_left
lane_width = 6
closed = true
segment.0.kind = arc
segment.0.radius = 30
segment.0.sweep = 360deg
segment.0.direction = ccw
)";

constexpr const char* kTurnRight = R"(
name = turn_right
lane_width = 6
closed = true
segment.0.kind = arc
segment.0.radius = 30
segment.0.sweep = 360deg
segment.0.direction = cw
)";

constexpr const char* kUturn = R"(
name = uturn
lane_width = 6
closed = false
segment.0.kind = straight
segment.0.length = 400
segment.1.kind = arc
segment.1.radius = 15
segment.1.sweep = 180deg
segment.1.direction = ccw
segment.2.kind = straight
segment.2.length = 400
spawn_sectors = 0
)";

constexpr const char* kMerge = R"(
name = merge
lane_width = 6
closed = false
segment.0.kind = straight
segment.0.length = 200
segment.1.kind = arc        # lane shift onto the main road
segment.1.radius = 100
segment.1.sweep = 10deg
segment.1.direction = cw
segment.2.kind = arc
segment.2.radius = 100
segment.2.sweep = 10deg
segment.2.direction = ccw
segment.3.kind = straight
segment.3.length = 600
)";

constexpr const char* kHighway = R"(
name = highway
lane_width = 6
closed = false
segment.0.kind = straight
segment.0.length = 1000
)";

constexpr const char* kRoundabout = R"(
name = roundabout
lane_width = 6
closed = false
segment.0.kind = straight
segment.0.length = 100
segment.1.kind = arc        # entry
segment.1.radius = 20
segment.1.sweep = 45deg
segment.1.direction = cw
segment.2.kind = arc        # ring
segment.2.radius = 25
segment.2.sweep = 270deg
segment.2.direction = ccw
segment.3.kind = arc        # exit
segment.3.radius = 20
segment.3.sweep = 45deg
segment.3.direction = cw
segment.4.kind = straight
segment.4.length = 500
)";

std::string lane_centering_source() {
  // Sinusoid approximated by a chain of alternating 30 degree arcs.
  std::ostringstream out;
  out << "name = lane_centering\nlane_width = 6\nclosed = false\n";
  const char* pattern[] = {"ccw", "cw", "cw", "ccw"};
  for (int k = 0; k < 32; ++k) {
    out << "segment." << k << ".kind = arc\n"
        << "segment." << k << ".radius = 60\n"
        << "segment." << k << ".sweep = 30deg\n"
        << "segment." << k << ".direction = " << pattern[k % 4] << "\n";
  }
  return out.str();
}

const std::map<std::string, std::string>& registry() {
  static const std::map<std::string, std::string> tracks = {
      {"racetrack", kRacetrack}, {"indiana", kIndiana},       {"lane_centering", lane_centering_source()},
      {"uturn", kUturn},         {"merge", kMerge},           {"highway", kHighway},
      {"roundabout", kRoundabout}, {"turn_left", kTurnLeft}, {"turn_right", kTurnRight},
  };
  return tracks;
}

}  // namespace

const std::vector<std::string>& bundled_track_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const auto& [name, text] : registry()) out.push_back(name);
    return out;
  }();
  return names;
}

std::optional<std::string> bundled_track_source(const std::string& name) {
  const auto it = registry().find(name);
  if (it == registry().end()) return std::nullopt;
  return it->second;
}

}  // namespace ikh::track
