#pragma once

// Piecewise track geometry: chains of straights and circular arcs with a
// lane width, sector boundaries measured in arc-length, and spawn sampling.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "ikh/config.hpp"

namespace ikh::track {

using Rng = std::mt19937_64;

inline constexpr double kPi = 3.14159265358979323846;

/// Wraps an angle into (-pi, pi].
double wrap_angle(double a);

struct Pose {
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;
};

enum class SegmentKind { Straight, Arc };
enum class Turn { CCW, CW };

/// Segment description as written in a track file, before chaining.
struct SegmentSpec {
  SegmentKind kind = SegmentKind::Straight;
  double length = 0.0;  // straight
  double radius = 0.0;  // arc
  double sweep = 0.0;   // arc, radians (> 0)
  Turn direction = Turn::CCW;
  std::optional<Pose> start;  // explicit start pose; otherwise chained
};

class Segment {
 public:
  Segment(const SegmentSpec& spec, const Pose& start, double s_start);

  SegmentKind kind() const { return kind_; }
  double length() const { return length_; }
  double radius() const { return radius_; }
  double sweep() const { return sweep_; }
  Turn direction() const { return direction_; }
  const Pose& start() const { return start_; }
  double s_start() const { return s_start_; }

  /// Signed curvature, positive for left (CCW) turns.
  double curvature() const;
  Pose pose_at(double u) const;  // u in [0, length]
  Pose end() const { return pose_at(length_); }

  /// Closest point on this segment. Returns (u, squared distance).
  std::pair<double, double> closest(double x, double y) const;

 private:
  SegmentKind kind_;
  double length_;
  double radius_ = 0.0;
  double sweep_ = 0.0;
  Turn direction_ = Turn::CCW;
  Pose start_;
  double s_start_;
  double cx_ = 0.0, cy_ = 0.0;  // arc center
};

struct TrackSpec {
  std::string name;
  std::vector<Segment> segments;
  double lane_width = 6.0;
  std::vector<double> sector_boundaries;
  std::vector<std::size_t> spawn_sectors;  // default spawnable set; empty = all
  bool closed = false;
  double total_length = 0.0;

  std::size_t sector_count() const { return sector_boundaries.size(); }
  std::size_t segment_index(double s) const;
  Pose pose_at(double s) const;
  double curvature_at(double s) const;
  /// Arc-length of b - a along the direction of travel (wraps on closed tracks).
  double forward_distance(double a, double b) const;
};

struct LaneFrame {
  double s = 0.0;
  double d_lat = 0.0;
  double d_ang = 0.0;
};

struct SpawnConfig {
  std::uint64_t seed = 0;
  int max_traffic = 5;
  std::vector<std::size_t> spawnable_sectors;
};

struct Spawn {
  Pose ego;
  double ego_s = 0.0;
  std::size_t ego_sector = 0;
  std::vector<Pose> traffic;
  std::vector<double> traffic_s;
};

inline constexpr double kMinSpawnSeparation = 8.0;
inline constexpr double kChainTolerance = 1e-6;

TrackSpec build_track(const std::vector<SegmentSpec>& segments, double lane_width,
                      std::vector<double> sector_boundaries, bool closed,
                      const Pose& origin = {}, std::string name = {},
                      std::vector<std::size_t> spawn_sectors = {});

/// Builds from a track file: segment.N.kind/length/radius/sweep/direction,
/// lane_width, closed, sectors, plus optional name/start_*/spawn_sectors.
TrackSpec build_track(const KeyValueConfig& source);

/// Track by bundled name, or by file path when no bundled track matches.
TrackSpec resolve_track(const std::string& name_or_path);

const std::vector<std::string>& bundled_track_names();
std::optional<std::string> bundled_track_source(const std::string& name);

LaneFrame project(const TrackSpec& track, const Pose& pose);

/// Left-closed, right-open sector membership, cyclic past the last boundary.
std::size_t sector_of(const TrackSpec& track, double s);

Spawn sample_spawn(const TrackSpec& track, const SpawnConfig& cfg, Rng& rng);

/// Counts sector boundaries crossed in the direction of travel. Backward
/// crossings lower the running tally; completed() reports its maximum.
class SectorProgress {
 public:
  SectorProgress() = default;
  SectorProgress(const TrackSpec& track, double s);

  void update(const TrackSpec& track, double s);
  int completed() const { return best_; }
  std::size_t sector() const { return sector_; }

 private:
  std::size_t sector_ = 0;
  int net_ = 0;
  int best_ = 0;
};

}  // namespace ikh::track
