#include "ikh/compose.hpp"

#include <algorithm>
#include <fstream>

#include "ikh/checkpoint.hpp"
#include "ikh/config.hpp"
#include "ikh/error.hpp"

namespace ikh::compose {

PolicySet::PolicySet(std::vector<Skill> skills) : skills_(std::move(skills)) {
  if (skills_.empty()) throw Error(ErrorCode::ManifestEmpty, "policy set needs at least one skill");
  const auto in = skills_.front().actor.input_dim();
  for (const auto& s : skills_) {
    if (s.actor.input_dim() != in) {
      throw Error(ErrorCode::DimMismatch, "skill '" + s.label + "' has state dim " +
                                              std::to_string(s.actor.input_dim()) + ", expected " +
                                              std::to_string(in));
    }
    if (s.actor.output_dim() != 2 * sim::kActionDim) {
      throw Error(ErrorCode::DimMismatch, "skill '" + s.label + "' does not emit a 2-dim control");
    }
  }
}

std::vector<std::string> PolicySet::labels() const {
  std::vector<std::string> out;
  for (const auto& s : skills_) out.push_back(s.label);
  return out;
}

std::vector<std::uint64_t> PolicySet::hashes() const {
  std::vector<std::uint64_t> out;
  for (const auto& s : skills_) out.push_back(net::parameter_hash(s.actor));
  return out;
}

std::vector<ControlAction> PolicySet::query(const VectorF& state) const {
  if (static_cast<std::size_t>(state.size()) != state_dim()) {
    throw Error(ErrorCode::DimMismatch, "state dim " + std::to_string(state.size()) + ", skills expect " +
                                            std::to_string(state_dim()));
  }
  std::vector<ControlAction> out;
  out.reserve(skills_.size());
  for (const auto& s : skills_) {
    const auto a = sac::squashed_action(s.actor, state, Mode::Deterministic);
    out.push_back({a(0), a(1)});
  }
  return out;
}

ControlAction combine_actions(std::span<const ControlAction> actions, std::span<const double> weights,
                              double eps) {
  if (actions.size() != weights.size()) {
    throw Error(ErrorCode::DimMismatch, "one weight per skill action required");
  }
  double total = 0.0, steer = 0.0, accel = 0.0;
  for (std::size_t i = 0; i < actions.size(); ++i) {
    steer += actions[i].steer * weights[i];
    accel += actions[i].accel * weights[i];
    total += weights[i];
  }
  const double denom = std::max(total, eps);
  return {std::clamp(steer / denom, -1.0, 1.0), std::clamp(accel / denom, -1.0, 1.0)};
}

WeightVector weights_from_squashed(const VectorF& squashed) {
  WeightVector w(static_cast<std::size_t>(squashed.size()));
  for (std::size_t i = 0; i < w.size(); ++i) {
    w[i] = std::clamp((static_cast<double>(squashed(static_cast<Eigen::Index>(i))) + 1.0) / 2.0, 0.0, 1.0);
  }
  return w;
}

IkhAgent::IkhAgent(PolicySet skills, net::Mlp master_actor, std::uint64_t seed)
    : skills_(std::move(skills)), master_(std::move(master_actor)), rng_(seed) {
  if (master_.output_dim() != 2 * skills_.size()) {
    throw Error(ErrorCode::DimMismatch, "master emits " + std::to_string(master_.output_dim() / 2) +
                                            " weights for " + std::to_string(skills_.size()) + " skills");
  }
  if (master_.input_dim() != skills_.state_dim()) {
    throw Error(ErrorCode::DimMismatch, "master and skills disagree on the state dim");
  }
}

void IkhAgent::force_weights(std::optional<WeightVector> weights) {
  if (weights && weights->size() != skills_.size()) {
    throw Error(ErrorCode::DimMismatch, "forced weight count differs from the skill count");
  }
  forced_ = std::move(weights);
}

std::pair<ControlAction, WeightVector> IkhAgent::act(const VectorF& state, Mode mode) {
  const auto actions = skills_.query(state);
  WeightVector w = forced_ ? *forced_ : weights_from_squashed(sac::squashed_action(master_, state, mode, &rng_));
  const auto a = combine_actions(actions, w);
  return {a, std::move(w)};
}

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ConfigError, "cannot read manifest " + path.string());
  std::vector<ManifestEntry> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorCode::ConfigError, path.string() + ":" + std::to_string(lineno) + ": expected label = path");
    }
    ManifestEntry e{trim(line.substr(0, eq)), trim(line.substr(eq + 1))};
    if (e.label.empty() || e.checkpoint.empty()) {
      throw Error(ErrorCode::ConfigError, path.string() + ":" + std::to_string(lineno) + ": empty label or path");
    }
    if (e.checkpoint.is_relative()) e.checkpoint = path.parent_path() / e.checkpoint;
    out.push_back(std::move(e));
  }
  if (out.empty()) throw Error(ErrorCode::ManifestEmpty, path.string() + " lists no policies");
  return out;
}

void write_manifest(const std::filesystem::path& path, const std::vector<ManifestEntry>& entries) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  for (const auto& e : entries) out << e.label << " = " << e.checkpoint.string() << '\n';
}

PolicySet load_policy_set(const std::vector<ManifestEntry>& entries) {
  if (entries.empty()) throw Error(ErrorCode::ManifestEmpty, "no policies");
  std::vector<Skill> skills;
  for (const auto& e : entries) skills.push_back({e.label, net::load_checkpoint(e.checkpoint)});
  return PolicySet(std::move(skills));
}

MasterTrainResult train_master(const sac::EnvFactory& make_env, const PolicySet& skills,
                               const sac::SacConfig& cfg, std::uint64_t seed,
                               const std::function<void(const sac::Transition&)>& on_transition) {
  if (skills.state_dim() != sim::kObservationDim) {
    throw Error(ErrorCode::DimMismatch, "skills expect state dim " + std::to_string(skills.state_dim()));
  }
  const auto before = skills.hashes();
  sac::SacAgent master(sim::kObservationDim, skills.size(), cfg, seed, kWeightBox);
  const auto result = sac::run_training(
      make_env, master,
      [&skills](const VectorF& obs, const VectorF& squashed) {
        const auto w = weights_from_squashed(squashed);
        const auto actions = skills.query(obs);
        return combine_actions(actions, w);
      },
      seed, on_transition);
  if (skills.hashes() != before) {
    throw Error(ErrorCode::FrozenPolicyMutated, "a skill's parameters changed during master training");
  }
  return {master.actor(), result.log, result.updates};
}

}  // namespace ikh::compose
