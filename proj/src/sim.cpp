#include "ikh/sim.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ikh/error.hpp"

namespace ikh::sim {

std::string to_string(TerminationCause cause) {
  switch (cause) {
    case TerminationCause::None: return "none";
    case TerminationCause::Collision: return "collision";
    case TerminationCause::OffTrack: return "off_track";
    case TerminationCause::MaxSteps: return "max_steps";
  }
  return "unknown";
}

void EnvConfig::validate() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorCode::InvalidEnvConfig, msg); };
  if (!track) fail("no track");
  if (std::abs(dt - 0.2) > 1e-12) fail("dt must be 0.2 s (5 Hz control)");
  if (max_steps <= 0) fail("max_steps must be > 0");
  if (!(v_target > 0.0) || !(v_max >= v_target)) fail("need 0 < v_target <= v_max");
  if (initial_speed < 0.0 || initial_speed > v_max) fail("initial_speed outside [0, v_max]");
  if (std::abs(c_v + c_l - 1.0) > 1e-9 || c_v < 0.0 || c_l < 0.0) fail("c_v + c_l must equal 1");
  if (off_track_penalty < 0.0 || collision_penalty < 0.0) fail("penalties must be >= 0");
  if (!(steer_max > 0.0) || !(accel_max > 0.0) || !(wheelbase > 0.0)) fail("bad vehicle limits");
  if (spawn.max_traffic < 0) fail("max_traffic must be >= 0");
  if (traffic_speed_min < 0.0 || traffic_speed_max < traffic_speed_min) fail("bad traffic speeds");
  if (spawn.spawnable_sectors.empty()) fail("no spawnable sectors");
}

EnvConfig make_env_config(std::shared_ptr<const track::TrackSpec> track, int max_traffic) {
  EnvConfig cfg;
  cfg.spawn.max_traffic = max_traffic;
  if (track) {
    cfg.spawn.spawnable_sectors = track->spawn_sectors;
    if (cfg.spawn.spawnable_sectors.empty()) {
      cfg.spawn.spawnable_sectors.resize(track->sector_count());
      std::iota(cfg.spawn.spawnable_sectors.begin(), cfg.spawn.spawnable_sectors.end(), std::size_t{0});
    }
  }
  cfg.track = std::move(track);
  return cfg;
}

const std::set<std::string>& env_config_keys() {
  static const std::set<std::string> keys{"dt",          "max_steps",         "v_target",         "c_v",
                                          "c_l",         "off_track_penalty", "collision_penalty", "max_traffic",
                                          "track",       "v_max",             "initial_speed",    "steer_max",
                                          "accel_max",   "wheelbase",         "traffic_speed_min", "traffic_speed_max"};
  return keys;
}

EnvConfig load_env_config(const KeyValueConfig& file, EnvConfig base) {
  file.require_known(env_config_keys());
  if (file.has("track")) {
    const auto fresh = make_env_config(
        std::make_shared<const track::TrackSpec>(track::resolve_track(file.get_string("track"))),
        base.spawn.max_traffic);
    base.track = fresh.track;
    base.spawn.spawnable_sectors = fresh.spawn.spawnable_sectors;
  }
  if (auto v = file.find_double("dt")) base.dt = *v;
  if (auto v = file.find_int("max_steps")) base.max_steps = static_cast<int>(*v);
  if (auto v = file.find_double("v_target")) base.v_target = *v;
  if (auto v = file.find_double("c_v")) base.c_v = *v;
  if (auto v = file.find_double("c_l")) base.c_l = *v;
  if (auto v = file.find_double("off_track_penalty")) base.off_track_penalty = *v;
  if (auto v = file.find_double("collision_penalty")) base.collision_penalty = *v;
  if (auto v = file.find_int("max_traffic")) base.spawn.max_traffic = static_cast<int>(*v);
  if (auto v = file.find_double("v_max")) base.v_max = *v;
  if (auto v = file.find_double("initial_speed")) base.initial_speed = *v;
  if (auto v = file.find_double("steer_max")) base.steer_max = *v;
  if (auto v = file.find_double("accel_max")) base.accel_max = *v;
  if (auto v = file.find_double("wheelbase")) base.wheelbase = *v;
  if (auto v = file.find_double("traffic_speed_min")) base.traffic_speed_min = *v;
  if (auto v = file.find_double("traffic_speed_max")) base.traffic_speed_max = *v;
  base.validate();
  return base;
}

double compute_reward(const EnvConfig& cfg, const LaneFrame& frame, double speed, TerminationCause cause) {
  const double speed_term = std::clamp(speed / cfg.v_target, 0.0, 1.0);
  const double lat = 2.0 * frame.d_lat / cfg.track->lane_width;
  const double lane_term = std::max(0.0, 1.0 - lat * lat);
  double r = cfg.c_v * speed_term + cfg.c_l * lane_term;
  if (cause == TerminationCause::OffTrack) r -= cfg.off_track_penalty;
  if (cause == TerminationCause::Collision) r -= cfg.collision_penalty;
  return r;
}

namespace {

struct Corners {
  std::array<double, 4> x, y;
};

Corners corners(const VehicleState& v) {
  const double c = std::cos(v.heading), s = std::sin(v.heading);
  const double hl = v.length / 2.0, hw = v.width / 2.0;
  const double lx[4] = {hl, hl, -hl, -hl};
  const double ly[4] = {hw, -hw, -hw, hw};
  Corners out;
  for (int i = 0; i < 4; ++i) {
    out.x[i] = v.x + lx[i] * c - ly[i] * s;
    out.y[i] = v.y + lx[i] * s + ly[i] * c;
  }
  return out;
}

bool separated_on(double ax, double ay, const Corners& a, const Corners& b) {
  double amin = 1e300, amax = -1e300, bmin = 1e300, bmax = -1e300;
  for (int i = 0; i < 4; ++i) {
    const double pa = a.x[i] * ax + a.y[i] * ay;
    const double pb = b.x[i] * ax + b.y[i] * ay;
    amin = std::min(amin, pa);
    amax = std::max(amax, pa);
    bmin = std::min(bmin, pb);
    bmax = std::max(bmax, pb);
  }
  return amax < bmin || bmax < amin;
}

}  // namespace

bool overlap(const VehicleState& a, const VehicleState& b) {
  const auto ca = corners(a);
  const auto cb = corners(b);
  // Edge normals of both rectangles; any separating axis means no contact.
  const double axes[4][2] = {{std::cos(a.heading), std::sin(a.heading)},
                             {-std::sin(a.heading), std::cos(a.heading)},
                             {std::cos(b.heading), std::sin(b.heading)},
                             {-std::sin(b.heading), std::cos(b.heading)}};
  for (const auto& ax : axes) {
    if (separated_on(ax[0], ax[1], ca, cb)) return false;
  }
  return true;
}

Env::Env(EnvConfig cfg) : cfg_(std::move(cfg)), rng_(cfg_.spawn.seed) { cfg_.validate(); }

Observation Env::reset(std::uint64_t seed) {
  rng_.seed(seed);
  return reset();
}

Observation Env::reset() {
  spawn();
  return observe();
}

void Env::spawn() {
  const auto sp = track::sample_spawn(*cfg_.track, cfg_.spawn, rng_);
  ego_ = VehicleState{};
  ego_.x = sp.ego.x;
  ego_.y = sp.ego.y;
  ego_.heading = sp.ego.heading;
  ego_.speed = cfg_.initial_speed;
  traffic_.clear();
  std::uniform_real_distribution<double> cruise(cfg_.traffic_speed_min, cfg_.traffic_speed_max);
  for (std::size_t i = 0; i < sp.traffic.size(); ++i) {
    TrafficVehicle t;
    t.s = sp.traffic_s[i];
    t.cruise_speed = cruise(rng_);
    t.state.x = sp.traffic[i].x;
    t.state.y = sp.traffic[i].y;
    t.state.heading = sp.traffic[i].heading;
    t.state.speed = t.cruise_speed;
    traffic_.push_back(t);
  }
  frame_ = track::project(*cfg_.track, {ego_.x, ego_.y, ego_.heading});
  spawn_sector_ = sp.ego_sector;
  progress_ = track::SectorProgress(*cfg_.track, frame_.s);
  steps_ = 0;
  terminated_ = false;
  started_ = true;
}

void Env::set_ego(const VehicleState& ego) {
  ego_ = ego;
  frame_ = track::project(*cfg_.track, {ego_.x, ego_.y, ego_.heading});
  progress_ = track::SectorProgress(*cfg_.track, frame_.s);
  spawn_sector_ = progress_.sector();
  steps_ = 0;
  terminated_ = false;
  started_ = true;
}

void Env::set_traffic(const std::vector<VehicleState>& vehicles) {
  traffic_.clear();
  for (const auto& v : vehicles) {
    TrafficVehicle t;
    t.state = v;
    t.s = track::project(*cfg_.track, {v.x, v.y, v.heading}).s;
    t.cruise_speed = v.speed;
    traffic_.push_back(t);
  }
}

void Env::advance_traffic() {
  const auto& trk = *cfg_.track;
  const double dt = cfg_.dt;
  std::vector<double> next_speed(traffic_.size());
  for (std::size_t i = 0; i < traffic_.size(); ++i) {
    auto& t = traffic_[i];
    if (!t.active) continue;
    // Nearest vehicle ahead along the centerline, ego included.
    double gap = trk.forward_distance(t.s, frame_.s);
    if (!(gap > 0.0)) gap = 1e9;
    for (std::size_t j = 0; j < traffic_.size(); ++j) {
      if (j == i || !traffic_[j].active) continue;
      const double g = trk.forward_distance(t.s, traffic_[j].s);
      if (g > 0.0) gap = std::min(gap, g);
    }
    const double bumper = gap - t.state.length;
    const double desired = t.cruise_speed * std::clamp((bumper - 4.0) / 16.0, 0.0, 1.0);
    const double dv = std::clamp(desired - t.state.speed, -8.0 * dt, cfg_.accel_max * dt);
    next_speed[i] = std::max(0.0, t.state.speed + dv);
  }
  for (std::size_t i = 0; i < traffic_.size(); ++i) {
    auto& t = traffic_[i];
    if (!t.active) continue;
    const double v0 = t.state.speed;
    t.state.speed = next_speed[i];
    t.s += 0.5 * (v0 + t.state.speed) * dt;
    if (trk.closed) {
      t.s = std::fmod(t.s, trk.total_length);
    } else if (t.s >= trk.total_length) {
      t.active = false;  // left the road
      continue;
    }
    const auto p = trk.pose_at(t.s);
    t.state.x = p.x;
    t.state.y = p.y;
    t.state.heading = p.heading;
  }
}

TerminationCause Env::check_termination() const {
  for (const auto& t : traffic_) {
    if (t.active && overlap(ego_, t.state)) return TerminationCause::Collision;
  }
  if (std::abs(frame_.d_lat) > cfg_.track->lane_width / 2.0) return TerminationCause::OffTrack;
  if (steps_ >= cfg_.max_steps) return TerminationCause::MaxSteps;
  return TerminationCause::None;
}

StepResult Env::step(const ControlAction& action) {
  if (!started_ || terminated_) {
    throw Error(ErrorCode::SteppedAfterTermination, "step() called on a finished episode; reset first");
  }
  const double steer = std::clamp(std::isfinite(action.steer) ? action.steer : 0.0, -1.0, 1.0);
  const double accel = std::clamp(std::isfinite(action.accel) ? action.accel : 0.0, -1.0, 1.0);
  const double dt = cfg_.dt;

  const double v0 = ego_.speed;
  const double v1 = std::clamp(v0 + accel * cfg_.accel_max * dt, 0.0, cfg_.v_max);
  const double dist = 0.5 * (v0 + v1) * dt;
  const double curvature = std::tan(steer * cfg_.steer_max) / cfg_.wheelbase;
  const double dtheta = dist * curvature;
  const double h0 = ego_.heading;
  if (std::abs(dtheta) < 1e-12) {
    ego_.x += dist * std::cos(h0);
    ego_.y += dist * std::sin(h0);
  } else {
    // Exact constant-curvature arc over the step.
    const double radius = 1.0 / curvature;
    ego_.x += radius * (std::sin(h0 + dtheta) - std::sin(h0));
    ego_.y -= radius * (std::cos(h0 + dtheta) - std::cos(h0));
  }
  ego_.heading = track::wrap_angle(h0 + dtheta);
  ego_.speed = v1;

  frame_ = track::project(*cfg_.track, {ego_.x, ego_.y, ego_.heading});
  progress_.update(*cfg_.track, frame_.s);
  advance_traffic();
  ++steps_;

  StepResult r;
  r.cause = check_termination();
  r.terminated = r.cause != TerminationCause::None;
  terminated_ = r.terminated;
  r.reward = compute_reward(cfg_, frame_, ego_.speed, r.cause);
  r.lane_frame = frame_;
  r.observation = observe();
  return r;
}

Observation Env::observe() const {
  const auto& rg = cfg_.ranges;
  const auto& trk = *cfg_.track;
  auto scaled = [](double v, double range) { return std::clamp(v / range, -1.0, 1.0); };

  Observation obs;
  const double evx = ego_.speed * std::cos(ego_.heading);
  const double evy = ego_.speed * std::sin(ego_.heading);
  obs.at(0, 0) = 1.0;
  obs.at(0, 1) = scaled(ego_.x, rg.position);
  obs.at(0, 2) = scaled(ego_.y, rg.position);
  obs.at(0, 3) = scaled(evx, rg.velocity);
  obs.at(0, 4) = scaled(evy, rg.velocity);
  obs.at(0, 5) = scaled(ego_.heading, track::kPi);
  obs.at(0, 6) = std::clamp(2.0 * frame_.s / trk.total_length - 1.0, -1.0, 1.0);
  obs.at(0, 7) = scaled(frame_.d_lat, rg.lateral);
  obs.at(0, 8) = scaled(frame_.d_ang, rg.angular);

  std::vector<std::pair<double, std::size_t>> order;
  for (std::size_t i = 0; i < traffic_.size(); ++i) {
    if (!traffic_[i].active) continue;
    const double dx = traffic_[i].state.x - ego_.x;
    const double dy = traffic_[i].state.y - ego_.y;
    order.emplace_back(std::hypot(dx, dy), i);
  }
  std::sort(order.begin(), order.end());
  const std::size_t rows = std::min(order.size(), kObservedVehicles - 1);
  for (std::size_t r = 0; r < rows; ++r) {
    const auto& t = traffic_[order[r].second].state;
    const auto tf = track::project(trk, {t.x, t.y, t.heading});
    double ds = trk.forward_distance(frame_.s, tf.s);
    if (trk.closed && ds > trk.total_length / 2.0) ds -= trk.total_length;
    const std::size_t row = r + 1;
    obs.at(row, 0) = 1.0;
    obs.at(row, 1) = scaled(t.x - ego_.x, rg.position);
    obs.at(row, 2) = scaled(t.y - ego_.y, rg.position);
    obs.at(row, 3) = scaled(t.speed * std::cos(t.heading) - evx, rg.velocity);
    obs.at(row, 4) = scaled(t.speed * std::sin(t.heading) - evy, rg.velocity);
    obs.at(row, 5) = scaled(t.heading, track::kPi);
    obs.at(row, 6) = scaled(ds, rg.longitudinal);
    obs.at(row, 7) = scaled(tf.d_lat, rg.lateral);
    obs.at(row, 8) = scaled(tf.d_ang, rg.angular);
  }
  return obs;
}

}  // namespace ikh::sim
