#pragma once

// Single-lane driving simulator stepped at a fixed rate: kinematic bicycle
// ego vehicle, centerline-following traffic, 5x9 kinematics observation,
// normalized lane-keeping reward and episode termination.

#include <array>
#include <cstdint>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "ikh/config.hpp"
#include "ikh/track.hpp"

namespace ikh::sim {

using track::LaneFrame;
using track::Pose;
using track::Rng;

struct VehicleState {
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;
  double speed = 0.0;
  double length = 5.0;
  double width = 2.0;
};

struct ControlAction {
  double steer = 0.0;
  double accel = 0.0;
};

inline constexpr std::size_t kObservedVehicles = 5;
inline constexpr std::size_t kFeatures = 9;
inline constexpr std::size_t kObservationDim = kObservedVehicles * kFeatures;
inline constexpr std::size_t kActionDim = 2;

/// Row-major 5x9 matrix. Columns: presence, x, y, vx, vy, heading,
/// long_off, lat_off, ang_off. Row 0 is the ego vehicle in world
/// coordinates; rows 1-4 hold the nearest traffic relative to the ego.
struct Observation {
  std::array<double, kObservationDim> values{};

  double at(std::size_t row, std::size_t col) const { return values[row * kFeatures + col]; }
  double& at(std::size_t row, std::size_t col) { return values[row * kFeatures + col]; }
  friend bool operator==(const Observation&, const Observation&) = default;
};

enum class TerminationCause { None, Collision, OffTrack, MaxSteps };

std::string to_string(TerminationCause cause);

struct StepResult {
  Observation observation;
  double reward = 0.0;
  bool terminated = false;
  TerminationCause cause = TerminationCause::None;
  LaneFrame lane_frame;
};

/// Clip ranges used to scale observation features into [-1, 1].
struct ObservationRanges {
  double position = 100.0;      // m
  double velocity = 20.0;       // m/s
  double longitudinal = 100.0;  // m, relative arc-length of traffic
  double lateral = 5.0;         // m
  double angular = track::kPi / 2.0;
};

struct EnvConfig {
  std::shared_ptr<const track::TrackSpec> track;
  track::SpawnConfig spawn;
  double dt = 0.2;
  int max_steps = 300;
  double v_target = 10.0;
  double v_max = 15.0;
  double initial_speed = 0.0;
  double steer_max = 0.6;   // rad at |steer| = 1
  double accel_max = 5.0;   // m/s^2 at |accel| = 1
  double wheelbase = 2.5;
  double c_v = 0.4;
  double c_l = 0.6;
  double off_track_penalty = 1.0;
  double collision_penalty = 1.0;
  double traffic_speed_min = 5.0;
  double traffic_speed_max = 8.0;
  ObservationRanges ranges;

  void validate() const;
};

/// Defaults for a track, spawning in the track's default spawnable sectors.
EnvConfig make_env_config(std::shared_ptr<const track::TrackSpec> track, int max_traffic = 5);

/// Env config file keys: dt, max_steps, v_target, c_v, c_l, off_track_penalty,
/// collision_penalty, max_traffic, track (+ v_max, initial_speed, steer_max,
/// accel_max, wheelbase, traffic_speed_min, traffic_speed_max).
EnvConfig load_env_config(const KeyValueConfig& cfg, EnvConfig base);
const std::set<std::string>& env_config_keys();

double compute_reward(const EnvConfig& cfg, const LaneFrame& frame, double speed, TerminationCause cause);

/// Separating-axis test for two oriented vehicle rectangles.
bool overlap(const VehicleState& a, const VehicleState& b);

struct TrafficVehicle {
  VehicleState state;
  double s = 0.0;
  double cruise_speed = 0.0;
  bool active = true;
};

class Env {
 public:
  explicit Env(EnvConfig cfg);

  /// Reseeds the environment stream and starts a new episode.
  Observation reset(std::uint64_t seed);
  /// Starts a new episode continuing the current random stream.
  Observation reset();
  StepResult step(const ControlAction& action);

  Observation observe() const;

  const EnvConfig& config() const { return cfg_; }
  const track::TrackSpec& track() const { return *cfg_.track; }
  const VehicleState& ego() const { return ego_; }
  const std::vector<TrafficVehicle>& traffic() const { return traffic_; }
  const LaneFrame& lane_frame() const { return frame_; }
  std::size_t spawn_sector() const { return spawn_sector_; }
  const track::SectorProgress& progress() const { return progress_; }
  int steps() const { return steps_; }
  bool terminated() const { return terminated_; }

  // Test hooks for placing vehicles directly.
  void set_ego(const VehicleState& ego);
  void set_traffic(const std::vector<VehicleState>& vehicles);

 private:
  void spawn();
  void advance_traffic();
  TerminationCause check_termination() const;

  EnvConfig cfg_;
  Rng rng_;
  VehicleState ego_;
  LaneFrame frame_;
  std::vector<TrafficVehicle> traffic_;
  std::size_t spawn_sector_ = 0;
  track::SectorProgress progress_;
  int steps_ = 0;
  bool terminated_ = false;
  bool started_ = false;
};

}  // namespace ikh::sim
