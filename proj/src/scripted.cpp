#include "ikh/scripted.hpp"

#include <algorithm>
#include <cmath>

#include "ikh/error.hpp"

namespace ikh::scripted {

namespace {

using MatF = net::Matrix<float>;
using VecF = net::Vector<float>;

constexpr std::size_t kCol = sim::kFeatures;
constexpr std::size_t kVx = 3, kVy = 4, kLat = 7, kAng = 8;
constexpr int kSpeedUnits = 8;
constexpr double kLogStd = -5.0;

// Feedback gains on the scaled lateral and heading offsets, and on the
// scaled speed error.
constexpr double kLatGain = 1.0;
constexpr double kAngGain = 2.0;
constexpr double kSpeedGain = 10.0;

net::Mlp lane_keeper(const sim::EnvConfig& cfg, double steer_sign) {
  MatF w1 = MatF::Zero(12, sim::kObservationDim);
  for (int k = 0; k < kSpeedUnits; ++k) {
    const double theta = k * track::kPi / 4.0;
    w1(k, kVx) = static_cast<float>(std::cos(theta));
    w1(k, kVy) = static_cast<float>(std::sin(theta));
  }
  w1(8, kLat) = 1.0f;
  w1(9, kLat) = -1.0f;
  w1(10, kAng) = 1.0f;
  w1(11, kAng) = -1.0f;

  // Sum of rectified projections onto 8 evenly spaced directions is
  // about (8 / pi) * |v|.
  const double speed_scale = track::kPi / kSpeedUnits;
  const double target = cfg.v_target / cfg.ranges.velocity;
  MatF w2 = MatF::Zero(4, 12);
  VecF b2 = VecF::Zero(4);
  w2(0, 8) = static_cast<float>(-steer_sign * kLatGain);
  w2(0, 9) = static_cast<float>(steer_sign * kLatGain);
  w2(0, 10) = static_cast<float>(-steer_sign * kAngGain);
  w2(0, 11) = static_cast<float>(steer_sign * kAngGain);
  for (int k = 0; k < kSpeedUnits; ++k) w2(1, k) = static_cast<float>(-kSpeedGain * speed_scale);
  b2(1) = static_cast<float>(kSpeedGain * target);
  b2(2) = b2(3) = static_cast<float>(kLogStd);

  std::vector<net::Layer<float>> layers;
  layers.push_back({w1, VecF::Zero(12), net::Activation::ReLU});
  layers.push_back({w2, b2, net::Activation::Identity});
  return net::Mlp(std::move(layers));
}

}  // namespace

net::Mlp lane_keeper_actor(const sim::EnvConfig& cfg) { return lane_keeper(cfg, 1.0); }

net::Mlp negated_steer_actor(const sim::EnvConfig& cfg) { return lane_keeper(cfg, -1.0); }

net::Mlp constant_actor(double steer, double accel, std::size_t state_dim) {
  constexpr double lim = 1.0 - 1e-6;
  VecF b(4);
  b << static_cast<float>(std::atanh(std::clamp(steer, -lim, lim))),
      static_cast<float>(std::atanh(std::clamp(accel, -lim, lim))), static_cast<float>(kLogStd),
      static_cast<float>(kLogStd);
  std::vector<net::Layer<float>> layers;
  layers.push_back({MatF::Zero(4, static_cast<Eigen::Index>(state_dim)), b, net::Activation::Identity});
  return net::Mlp(std::move(layers));
}

sim::ControlAction StationaryAgent::act(const sim::Env&, const sim::Observation&) { return {0.0, 0.0}; }

sim::ControlAction LaneKeeperAgent::act(const sim::Env& env, const sim::Observation&) {
  const auto& cfg = env.config();
  const auto& frame = env.lane_frame();
  const double v = env.ego().speed;
  const double ahead = frame.s + 0.5 * v * cfg.dt;
  const double kappa = env.track().curvature_at(ahead) - 0.04 * frame.d_lat - 0.4 * frame.d_ang;
  const double delta = std::atan(cfg.wheelbase * kappa);
  return {std::clamp(delta / cfg.steer_max, -1.0, 1.0),
          std::clamp((cfg.v_target - v) / (cfg.accel_max * cfg.dt), -1.0, 1.0)};
}

const std::vector<std::string>& scripted_agent_names() {
  static const std::vector<std::string> names{"stationary", "lane_keeper"};
  return names;
}

std::unique_ptr<eval::Agent> make_scripted_agent(const std::string& name) {
  if (name == "stationary") return std::make_unique<StationaryAgent>();
  if (name == "lane_keeper") return std::make_unique<LaneKeeperAgent>();
  throw Error(ErrorCode::AgentUnresolvable, "unknown scripted agent '" + name + "'");
}

}  // namespace ikh::scripted
