#pragma once

// Policy composition: a frozen set of skill actors, a master policy that
// outputs one weight per skill, and the normalized weighted average that turns
// skill actions plus weights into the executed control.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ikh/net.hpp"
#include "ikh/sac.hpp"
#include "ikh/sim.hpp"

namespace ikh::compose {

using sac::Mode;
using sac::VectorF;
using sim::ControlAction;

/// Denominator floor for the weighted average.
inline constexpr double kWeightEpsilon = 1e-6;

using WeightVector = std::vector<double>;

struct Skill {
  std::string label;
  net::Mlp actor;
};

/// Ordered, immutable set of frozen skill actors sharing one state and action space.
class PolicySet {
 public:
  explicit PolicySet(std::vector<Skill> skills);

  std::size_t size() const { return skills_.size(); }
  std::size_t state_dim() const { return skills_.front().actor.input_dim(); }
  const Skill& operator[](std::size_t i) const { return skills_[i]; }
  std::vector<std::string> labels() const;
  std::vector<std::uint64_t> hashes() const;

  /// Deterministic (mean) action of every skill, in set order.
  std::vector<ControlAction> query(const VectorF& state) const;

 private:
  std::vector<Skill> skills_;
};

/// sum_i a_i w_i / max(sum_i w_i, eps), clamped to [-1, 1] per component.
ControlAction combine_actions(std::span<const ControlAction> actions, std::span<const double> weights,
                              double eps = kWeightEpsilon);

/// Affine map of the master's squashed output (-1, 1)^m onto [0, 1]^m.
WeightVector weights_from_squashed(const VectorF& squashed);

inline constexpr sac::ActionBox kWeightBox{0.0f, 1.0f};

class IkhAgent {
 public:
  IkhAgent(PolicySet skills, net::Mlp master_actor, std::uint64_t seed = 0);

  std::pair<ControlAction, WeightVector> act(const VectorF& state, Mode mode);

  /// Test hook: bypass the master and use fixed weights.
  void force_weights(std::optional<WeightVector> weights);

  const PolicySet& skills() const { return skills_; }
  const net::Mlp& master() const { return master_; }

 private:
  PolicySet skills_;
  net::Mlp master_;
  net::Rng rng_;
  std::optional<WeightVector> forced_;
};

struct ManifestEntry {
  std::string label;
  std::filesystem::path checkpoint;
};

/// `label = checkpoint-path` lines; order defines the weight index.
/// Relative paths resolve against the manifest's directory.
std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const std::vector<ManifestEntry>& entries);
PolicySet load_policy_set(const std::vector<ManifestEntry>& entries);

struct MasterTrainResult {
  net::Mlp master;
  std::vector<sac::EpisodeLogRow> log;
  std::size_t updates = 0;
};

/// Master-policy training: the master's weights drive the combination of
/// frozen skill actions; the stored transition action is the weight vector.
/// Throws FrozenPolicyMutated if any skill parameter changes.
MasterTrainResult train_master(const sac::EnvFactory& make_env, const PolicySet& skills,
                               const sac::SacConfig& cfg, std::uint64_t seed,
                               const std::function<void(const sac::Transition&)>& on_transition = {});

}  // namespace ikh::compose
