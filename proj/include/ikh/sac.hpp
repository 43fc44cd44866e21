#pragma once

// Soft actor-critic with a fixed entropy coefficient, twin critics and
// Polyak-averaged target critics. Works over any continuous action box; the
// actor's tanh output in (-1, 1)^k is mapped affinely onto [low, high]^k.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "ikh/config.hpp"
#include "ikh/net.hpp"
#include "ikh/sim.hpp"

namespace ikh::sac {

using net::Matrix;
using net::Mlp;
using net::Rng;
using net::Vector;
using VectorF = Vector<float>;
using MatrixF = Matrix<float>;

inline constexpr double kLogStdMin = -20.0;
inline constexpr double kLogStdMax = 2.0;

struct SacConfig {
  double lr = 3e-4;
  std::size_t batch_size = 256;
  std::size_t gradient_steps = 10;
  std::size_t total_steps = 100'000;
  double tau = 0.005;
  double gamma = 0.99;
  double alpha = 0.2;
  std::size_t buffer_capacity = 100'000;
  std::size_t update_every = 1;  // env steps between update rounds
  std::size_t warmup_steps = 1'000;
  std::size_t num_envs = 1;
  std::vector<std::size_t> hidden = {256, 256};

  void validate() const;
};

/// Reference hyperparameter columns (H, M, I, IN, L/LC, R, U, RT) as "table2-<col>", and the
/// same with total_steps shrunk to 100k as "desk-<col>".
std::optional<SacConfig> sac_preset(const std::string& name);
std::vector<std::string> sac_preset_names();

/// Applies lr, bs, gs, ts, tau, gamma, alpha (+ buffer_capacity,
/// update_every, warmup_steps, num_envs, hidden) from a key/value file.
void apply_sac_overrides(const KeyValueConfig& file, SacConfig& cfg);
const std::set<std::string>& sac_config_keys();

struct Transition {
  std::vector<float> state;
  std::vector<float> action;  // in the agent's action box
  float reward = 0.0f;
  std::vector<float> next_state;
  bool done = false;  // true only for failure terminations
};

struct Batch {
  MatrixF states;       // state_dim x B
  MatrixF actions;      // action_dim x B (box space)
  MatrixF rewards;      // 1 x B
  MatrixF next_states;  // state_dim x B
  MatrixF dones;        // 1 x B
};

/// Fixed-capacity FIFO ring of transitions.
class ReplayBuffer {
 public:
  ReplayBuffer(std::size_t capacity, std::size_t state_dim, std::size_t action_dim);

  void push(std::span<const float> state, std::span<const float> action, float reward,
            std::span<const float> next_state, bool done);
  void push(const Transition& t) { push(t.state, t.action, t.reward, t.next_state, t.done); }

  Transition at(std::size_t i) const;  // i = 0 is the oldest stored item
  Batch sample(std::size_t batch_size, Rng& rng) const;

  std::size_t size() const { return size_; }
  std::size_t capacity() const { return capacity_; }
  std::size_t state_dim() const { return state_dim_; }
  std::size_t action_dim() const { return action_dim_; }

 private:
  std::size_t capacity_, state_dim_, action_dim_;
  std::size_t size_ = 0;
  std::size_t cursor_ = 0;
  std::vector<float> states_, actions_, rewards_, next_states_, dones_;
};

enum class Mode { Stochastic, Deterministic };

struct LossReport {
  double q1_loss = 0.0;
  double q2_loss = 0.0;
  double actor_loss = 0.0;
};

struct ActionBox {
  float low = -1.0f;
  float high = 1.0f;
};

class SacAgent {
 public:
  SacAgent(std::size_t state_dim, std::size_t action_dim, SacConfig cfg, std::uint64_t seed,
           ActionBox box = {});

  /// Tanh-squashed action in (-1, 1)^k.
  VectorF sample_action(const VectorF& state, Mode mode);
  /// Uniform random action in [-1, 1]^k (warm-up exploration).
  VectorF random_action();

  VectorF to_box(const VectorF& squashed) const;
  VectorF from_box(const VectorF& boxed) const;

  LossReport update(const ReplayBuffer& buffer);

  /// Mean and clamped log-std heads of the actor for a batch of states.
  void actor_heads(const MatrixF& states, MatrixF& mean, MatrixF& log_std) const;

  const Mlp& actor() const { return actor_; }
  Mlp& actor() { return actor_; }
  const Mlp& critic(int i) const { return i == 0 ? q1_ : q2_; }
  const Mlp& target_critic(int i) const { return i == 0 ? q1_target_ : q2_target_; }
  const SacConfig& config() const { return cfg_; }
  const ActionBox& box() const { return box_; }
  std::size_t state_dim() const { return state_dim_; }
  std::size_t action_dim() const { return action_dim_; }
  std::size_t gradient_iterations() const { return gradient_iterations_; }

 private:
  struct SquashedSample {
    MatrixF mean, log_std, noise, action, log_prob;  // log_prob: 1 x B
  };
  SquashedSample squashed_sample(const MatrixF& mean, const MatrixF& log_std);
  void gradient_iteration(const Batch& batch, LossReport& report);

  std::size_t state_dim_, action_dim_;
  SacConfig cfg_;
  ActionBox box_;
  Rng rng_;
  Mlp actor_, q1_, q2_, q1_target_, q2_target_;
  net::AdamState<float> actor_opt_, q1_opt_, q2_opt_;
  std::size_t gradient_iterations_ = 0;
};

/// Squashed action from a standalone actor net (mean and log-std heads).
/// Stochastic mode draws the exploration noise from rng.
VectorF squashed_action(const Mlp& actor, const VectorF& state, Mode mode, Rng* rng = nullptr);

/// Tanh-squashed Gaussian log-density correction log(1 - tanh(u)^2), stable for large |u|.
double log_one_minus_tanh_sq(double u);

VectorF to_vector(const sim::Observation& obs);

struct EpisodeLogRow {
  std::size_t step = 0;
  std::size_t episode = 0;
  double episodic_reward = 0.0;
  LossReport losses;
};

void write_training_log(std::ostream& out, const std::vector<EpisodeLogRow>& rows);

/// Maps the agent's squashed action and the current observation to the
/// control applied in the environment.
using ActionAdapter = std::function<sim::ControlAction(const VectorF& obs, const VectorF& squashed)>;
using EnvFactory = std::function<sim::Env(std::size_t env_index)>;

struct TrainingResult {
  std::vector<EpisodeLogRow> log;
  std::size_t updates = 0;
};

/// Collect/update loop over num_envs environments stepped round-robin; env i
/// is reset with seed + i. Transitions store the agent's action in box space.
/// `on_transition`, when set, sees every stored transition.
TrainingResult run_training(const EnvFactory& make_env, SacAgent& agent, const ActionAdapter& adapter,
                            std::uint64_t seed,
                            const std::function<void(const Transition&)>& on_transition = {});

struct PretrainResult {
  Mlp actor;
  std::vector<EpisodeLogRow> log;
};

/// Skill pre-training: the agent's action is the control directly.
PretrainResult pretrain(const EnvFactory& make_env, const SacConfig& cfg, std::uint64_t seed);

}  // namespace ikh::sac
