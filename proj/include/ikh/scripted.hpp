#pragma once

// Hand-built reference policies: fixed-weight actor nets usable as skills,
// and environment-aware controllers used as evaluation baselines.

#include <memory>
#include <string>
#include <vector>

#include "ikh/eval.hpp"
#include "ikh/net.hpp"
#include "ikh/sim.hpp"

namespace ikh::scripted {

/// Actor net (45 -> 12 -> 4) steering on the lane-offset features and
/// holding v_target using an estimate of the ego speed. Log-std heads are
/// a constant -5.
net::Mlp lane_keeper_actor(const sim::EnvConfig& cfg);
/// Same net with the steering sign flipped: drives off the lane.
net::Mlp negated_steer_actor(const sim::EnvConfig& cfg);
/// Actor whose mean is atanh of the given action for every state.
net::Mlp constant_actor(double steer, double accel, std::size_t state_dim = sim::kObservationDim);

/// Zero steering and zero acceleration.
class StationaryAgent : public eval::Agent {
 public:
  std::string name() const override { return "scripted:stationary"; }
  sim::ControlAction act(const sim::Env& env, const sim::Observation& obs) override;
};

/// Curvature feed-forward plus lateral and heading feedback; accelerates to
/// v_target in one step where possible.
class LaneKeeperAgent : public eval::Agent {
 public:
  std::string name() const override { return "scripted:lane_keeper"; }
  sim::ControlAction act(const sim::Env& env, const sim::Observation& obs) override;
};

const std::vector<std::string>& scripted_agent_names();
/// Throws AgentUnresolvable for unknown names.
std::unique_ptr<eval::Agent> make_scripted_agent(const std::string& name);

}  // namespace ikh::scripted
