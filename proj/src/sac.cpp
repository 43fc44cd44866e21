#include "ikh/sac.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>

#include "ikh/error.hpp"

namespace ikh::sac {

void SacConfig::validate() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorCode::ConfigError, msg); };
  if (!(gamma > 0.0 && gamma <= 1.0)) fail("gamma must be in (0, 1]");
  if (!(tau > 0.0 && tau <= 1.0)) fail("tau must be in (0, 1]");
  if (alpha < 0.0) fail("alpha must be >= 0");
  if (!(lr > 0.0)) fail("lr must be > 0");
  if (batch_size == 0 || batch_size > buffer_capacity) fail("need 0 < batch_size <= buffer_capacity");
  if (gradient_steps == 0) fail("gradient_steps must be > 0");
  if (update_every == 0) fail("update_every must be > 0");
  if (num_envs == 0) fail("num_envs must be > 0");
  if (hidden.empty()) fail("need at least one hidden layer");
}

namespace {

struct Column {
  const char* name;
  double lr;
  std::size_t bs;
  double tau, gamma, alpha;
};

// Reference columns: lr, bs, tau, gamma, alpha per task (gs = 10, ts = 1e7).
constexpr Column kTable2[] = {
    {"H", 1e-4, 1024, 0.9, 0.99, 0.5},   {"M", 1e-4, 1024, 0.005, 0.99, 0.5},
    {"I", 1e-4, 1024, 0.9, 0.99, 0.5},   {"IN", 5e-5, 8192, 0.1, 0.65, 0.5},
    {"LC", 1e-4, 1024, 0.005, 0.99, 1.0}, {"L", 1e-4, 1024, 0.005, 0.99, 1.0},
    {"R", 1e-4, 1024, 0.9, 0.99, 0.5},   {"U", 5e-5, 4096, 0.9, 0.65, 0.5},
    {"RT", 1e-4, 1024, 0.9, 0.99, 0.5},
};

}  // namespace

std::optional<SacConfig> sac_preset(const std::string& name) {
  for (const auto& col : kTable2) {
    const std::string table = std::string("table2-") + col.name;
    const std::string desk = std::string("desk-") + col.name;
    if (name != table && name != desk) continue;
    SacConfig cfg;
    cfg.lr = col.lr;
    cfg.batch_size = col.bs;
    cfg.gradient_steps = 10;
    cfg.total_steps = name == table ? 10'000'000 : 100'000;
    cfg.tau = col.tau;
    cfg.gamma = col.gamma;
    cfg.alpha = col.alpha;
    cfg.buffer_capacity = std::max<std::size_t>(cfg.buffer_capacity, col.bs);
    cfg.update_every = 10;
    return cfg;
  }
  return std::nullopt;
}

std::vector<std::string> sac_preset_names() {
  std::vector<std::string> names;
  for (const auto& col : kTable2) names.push_back(std::string("table2-") + col.name);
  for (const auto& col : kTable2) names.push_back(std::string("desk-") + col.name);
  return names;
}

const std::set<std::string>& sac_config_keys() {
  static const std::set<std::string> keys = {"lr",           "bs",           "gs",       "ts",
                                             "tau",          "gamma",        "alpha",    "buffer_capacity",
                                             "update_every", "warmup_steps", "num_envs", "hidden"};
  return keys;
}

void apply_sac_overrides(const KeyValueConfig& file, SacConfig& cfg) {
  auto count = [&](const std::string& key, std::size_t& field) {
    if (auto v = file.find_int(key)) {
      if (*v < 0) throw Error(ErrorCode::ConfigError, key + " must be >= 0");
      field = static_cast<std::size_t>(*v);
    }
  };
  if (auto v = file.find_double("lr")) cfg.lr = *v;
  count("bs", cfg.batch_size);
  count("gs", cfg.gradient_steps);
  count("ts", cfg.total_steps);
  if (auto v = file.find_double("tau")) cfg.tau = *v;
  if (auto v = file.find_double("gamma")) cfg.gamma = *v;
  if (auto v = file.find_double("alpha")) cfg.alpha = *v;
  count("buffer_capacity", cfg.buffer_capacity);
  count("update_every", cfg.update_every);
  count("warmup_steps", cfg.warmup_steps);
  count("num_envs", cfg.num_envs);
  if (file.has("hidden")) {
    cfg.hidden.clear();
    for (double h : file.get_doubles("hidden")) cfg.hidden.push_back(static_cast<std::size_t>(h));
  }
}

ReplayBuffer::ReplayBuffer(std::size_t capacity, std::size_t state_dim, std::size_t action_dim)
    : capacity_(capacity), state_dim_(state_dim), action_dim_(action_dim) {
  if (capacity == 0) throw Error(ErrorCode::ConfigError, "replay capacity must be > 0");
  states_.resize(capacity * state_dim);
  next_states_.resize(capacity * state_dim);
  actions_.resize(capacity * action_dim);
  rewards_.resize(capacity);
  dones_.resize(capacity);
}

void ReplayBuffer::push(std::span<const float> state, std::span<const float> action, float reward,
                        std::span<const float> next_state, bool done) {
  if (state.size() != state_dim_ || next_state.size() != state_dim_ || action.size() != action_dim_) {
    throw Error(ErrorCode::DimMismatch, "transition dimensions differ from the buffer's");
  }
  std::copy(state.begin(), state.end(), states_.begin() + static_cast<std::ptrdiff_t>(cursor_ * state_dim_));
  std::copy(next_state.begin(), next_state.end(),
            next_states_.begin() + static_cast<std::ptrdiff_t>(cursor_ * state_dim_));
  std::copy(action.begin(), action.end(), actions_.begin() + static_cast<std::ptrdiff_t>(cursor_ * action_dim_));
  rewards_[cursor_] = reward;
  dones_[cursor_] = done ? 1.0f : 0.0f;
  cursor_ = (cursor_ + 1) % capacity_;
  size_ = std::min(size_ + 1, capacity_);
}

Transition ReplayBuffer::at(std::size_t i) const {
  if (i >= size_) throw Error(ErrorCode::DimMismatch, "replay index out of range");
  const std::size_t slot = (cursor_ + capacity_ - size_ + i) % capacity_;
  Transition t;
  auto s = states_.begin() + static_cast<std::ptrdiff_t>(slot * state_dim_);
  auto n = next_states_.begin() + static_cast<std::ptrdiff_t>(slot * state_dim_);
  auto a = actions_.begin() + static_cast<std::ptrdiff_t>(slot * action_dim_);
  t.state.assign(s, s + static_cast<std::ptrdiff_t>(state_dim_));
  t.next_state.assign(n, n + static_cast<std::ptrdiff_t>(state_dim_));
  t.action.assign(a, a + static_cast<std::ptrdiff_t>(action_dim_));
  t.reward = rewards_[slot];
  t.done = dones_[slot] != 0.0f;
  return t;
}

Batch ReplayBuffer::sample(std::size_t batch_size, Rng& rng) const {
  if (size_ == 0) throw Error(ErrorCode::BufferTooSmall, "empty replay buffer");
  const auto sd = static_cast<Eigen::Index>(state_dim_);
  const auto ad = static_cast<Eigen::Index>(action_dim_);
  const auto b = static_cast<Eigen::Index>(batch_size);
  Batch out{MatrixF(sd, b), MatrixF(ad, b), MatrixF(1, b), MatrixF(sd, b), MatrixF(1, b)};
  std::uniform_int_distribution<std::size_t> pick(0, size_ - 1);
  for (Eigen::Index j = 0; j < b; ++j) {
    const std::size_t slot = pick(rng);
    out.states.col(j) = Eigen::Map<const VectorF>(states_.data() + slot * state_dim_, sd);
    out.next_states.col(j) = Eigen::Map<const VectorF>(next_states_.data() + slot * state_dim_, sd);
    out.actions.col(j) = Eigen::Map<const VectorF>(actions_.data() + slot * action_dim_, ad);
    out.rewards(0, j) = rewards_[slot];
    out.dones(0, j) = dones_[slot];
  }
  return out;
}

double log_one_minus_tanh_sq(double u) {
  // log(1 - tanh(u)^2) = 2 * (log 2 - u - softplus(-2u))
  const double x = -2.0 * u;
  const double softplus = x > 30.0 ? x : std::log1p(std::exp(x));
  return 2.0 * (std::log(2.0) - u - softplus);
}

VectorF to_vector(const sim::Observation& obs) {
  VectorF v(static_cast<Eigen::Index>(obs.values.size()));
  for (std::size_t i = 0; i < obs.values.size(); ++i) v(static_cast<Eigen::Index>(i)) = static_cast<float>(obs.values[i]);
  return v;
}

namespace {

Mlp make_net(std::size_t in, const std::vector<std::size_t>& hidden, std::size_t out, Rng& rng) {
  std::vector<std::size_t> dims{in};
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(out);
  return Mlp::xavier(dims, net::Activation::ReLU, net::Activation::Identity, rng);
}

MatrixF stack(const MatrixF& top, const MatrixF& bottom) {
  MatrixF out(top.rows() + bottom.rows(), top.cols());
  out.topRows(top.rows()) = top;
  out.bottomRows(bottom.rows()) = bottom;
  return out;
}

}  // namespace

SacAgent::SacAgent(std::size_t state_dim, std::size_t action_dim, SacConfig cfg, std::uint64_t seed,
                   ActionBox box)
    : state_dim_(state_dim), action_dim_(action_dim), cfg_(std::move(cfg)), box_(box), rng_(seed) {
  cfg_.validate();
  if (!(box_.high > box_.low)) throw Error(ErrorCode::ConfigError, "empty action box");
  actor_ = make_net(state_dim, cfg_.hidden, 2 * action_dim, rng_);
  q1_ = make_net(state_dim + action_dim, cfg_.hidden, 1, rng_);
  q2_ = make_net(state_dim + action_dim, cfg_.hidden, 1, rng_);
  q1_target_ = q1_;
  q2_target_ = q2_;
  actor_opt_ = net::AdamState<float>(actor_, cfg_.lr);
  q1_opt_ = net::AdamState<float>(q1_, cfg_.lr);
  q2_opt_ = net::AdamState<float>(q2_, cfg_.lr);
}

void SacAgent::actor_heads(const MatrixF& states, MatrixF& mean, MatrixF& log_std) const {
  const MatrixF out = actor_.forward(states);
  const auto k = static_cast<Eigen::Index>(action_dim_);
  mean = out.topRows(k);
  log_std = out.bottomRows(k).cwiseMax(float(kLogStdMin)).cwiseMin(float(kLogStdMax));
}

VectorF squashed_action(const Mlp& actor, const VectorF& state, Mode mode, Rng* rng) {
  if (static_cast<std::size_t>(state.size()) != actor.input_dim()) {
    throw Error(ErrorCode::DimMismatch, "state dimension differs from the actor input");
  }
  if (actor.output_dim() % 2 != 0) throw Error(ErrorCode::DimMismatch, "actor must output mean and log-std");
  const VectorF out = actor.forward(state);
  const auto k = out.size() / 2;
  VectorF u = out.head(k);
  if (mode == Mode::Stochastic) {
    if (!rng) throw Error(ErrorCode::ConfigError, "stochastic action needs a random stream");
    std::normal_distribution<float> normal(0.0f, 1.0f);
    for (Eigen::Index j = 0; j < k; ++j) {
      const float log_std = std::clamp(out(k + j), float(kLogStdMin), float(kLogStdMax));
      u(j) += std::exp(log_std) * normal(*rng);
    }
  }
  return u.array().tanh().matrix();
}

VectorF SacAgent::sample_action(const VectorF& state, Mode mode) {
  return squashed_action(actor_, state, mode, &rng_);
}

VectorF SacAgent::random_action() {
  std::uniform_real_distribution<float> uni(-1.0f, 1.0f);
  VectorF a(static_cast<Eigen::Index>(action_dim_));
  for (Eigen::Index j = 0; j < a.size(); ++j) a(j) = uni(rng_);
  return a;
}

VectorF SacAgent::to_box(const VectorF& squashed) const {
  const float half = 0.5f * (box_.high - box_.low);
  const float mid = 0.5f * (box_.high + box_.low);
  return (squashed.array() * half + mid).matrix();
}

VectorF SacAgent::from_box(const VectorF& boxed) const {
  const float half = 0.5f * (box_.high - box_.low);
  const float mid = 0.5f * (box_.high + box_.low);
  return ((boxed.array() - mid) / half).matrix();
}

SacAgent::SquashedSample SacAgent::squashed_sample(const MatrixF& mean, const MatrixF& log_std) {
  SquashedSample s;
  s.mean = mean;
  s.log_std = log_std;
  s.noise.resize(mean.rows(), mean.cols());
  std::normal_distribution<float> normal(0.0f, 1.0f);
  // Column-major fill: one sample's action dims are drawn together.
  for (Eigen::Index c = 0; c < s.noise.cols(); ++c)
    for (Eigen::Index r = 0; r < s.noise.rows(); ++r) s.noise(r, c) = normal(rng_);
  const MatrixF u = mean + (log_std.array().exp() * s.noise.array()).matrix();
  s.action = u.array().tanh().matrix();
  s.log_prob.resize(1, mean.cols());
  constexpr double kHalfLog2Pi = 0.91893853320467274178;
  for (Eigen::Index c = 0; c < mean.cols(); ++c) {
    double lp = 0.0;
    for (Eigen::Index r = 0; r < mean.rows(); ++r) {
      const double xi = s.noise(r, c);
      lp += -0.5 * xi * xi - static_cast<double>(log_std(r, c)) - kHalfLog2Pi -
            log_one_minus_tanh_sq(static_cast<double>(u(r, c)));
    }
    s.log_prob(0, c) = static_cast<float>(lp);
  }
  return s;
}

void SacAgent::gradient_iteration(const Batch& batch, LossReport& report) {
  const auto b = batch.states.cols();
  const auto k = static_cast<Eigen::Index>(action_dim_);
  const float inv_b = 1.0f / static_cast<float>(b);
  const float alpha = static_cast<float>(cfg_.alpha);

  // Bootstrapped target from the target critics; no gradients flow here.
  MatrixF next_mean, next_log_std;
  actor_heads(batch.next_states, next_mean, next_log_std);
  const auto next = squashed_sample(next_mean, next_log_std);
  const MatrixF next_in = stack(batch.next_states, next.action);
  const MatrixF q1n = q1_target_.forward(next_in);
  const MatrixF q2n = q2_target_.forward(next_in);
  const MatrixF soft_v = q1n.cwiseMin(q2n) - alpha * next.log_prob;
  const MatrixF y = batch.rewards +
                    (float(cfg_.gamma) * (1.0f - batch.dones.array()) * soft_v.array()).matrix();

  // Critic regression on the stored (canonical) actions.
  MatrixF canonical(batch.actions.rows(), b);
  {
    const float half = 0.5f * (box_.high - box_.low);
    const float mid = 0.5f * (box_.high + box_.low);
    canonical = ((batch.actions.array() - mid) / half).matrix();
  }
  const MatrixF critic_in = stack(batch.states, canonical);
  double losses[2];
  int idx = 0;
  for (auto [q, opt] : {std::pair{&q1_, &q1_opt_}, std::pair{&q2_, &q2_opt_}}) {
    net::ForwardCache<float> cache;
    const MatrixF pred = q->forward(critic_in, &cache);
    const MatrixF err = pred - y;
    losses[idx++] = err.template cast<double>().squaredNorm() / static_cast<double>(b);
    const MatrixF upstream = 2.0f * inv_b * err;
    const auto grads = q->backward(cache, upstream);
    net::adam_step(*q, grads, *opt);
  }

  // Actor step on alpha * log pi - min(q1, q2) through the reparameterized sample.
  net::ForwardCache<float> actor_cache;
  const MatrixF raw = actor_.forward(batch.states, &actor_cache);
  const MatrixF mean = raw.topRows(k);
  const MatrixF raw_log_std = raw.bottomRows(k);
  const MatrixF log_std = raw_log_std.cwiseMax(float(kLogStdMin)).cwiseMin(float(kLogStdMax));
  const auto cur = squashed_sample(mean, log_std);
  const MatrixF actor_in = stack(batch.states, cur.action);
  net::ForwardCache<float> c1, c2;
  const MatrixF q1a = q1_.forward(actor_in, &c1);
  const MatrixF q2a = q2_.forward(actor_in, &c2);
  const MatrixF use1 = (q1a.array() <= q2a.array()).cast<float>().matrix();
  const MatrixF use2 = MatrixF::Ones(1, b) - use1;
  const MatrixF min_q = q1a.cwiseProduct(use1) + q2a.cwiseProduct(use2);
  const auto g1 = q1_.backward(c1, use1, false);
  const auto g2 = q2_.backward(c2, use2, false);
  const MatrixF dq_da = g1.input.bottomRows(k) + g2.input.bottomRows(k);

  const MatrixF& a = cur.action;
  const MatrixF std_dev = log_std.array().exp().matrix();
  const MatrixF one_minus_a2 = (1.0f - a.array().square()).matrix();
  const MatrixF dq_du = dq_da.cwiseProduct(one_minus_a2);
  MatrixF upstream(2 * k, b);
  upstream.topRows(k) = inv_b * (alpha * 2.0f * a - dq_du);
  const MatrixF sigma_xi = std_dev.cwiseProduct(cur.noise);
  MatrixF g_log_std = inv_b * (alpha * (2.0f * a.cwiseProduct(sigma_xi).array() - 1.0f).matrix() -
                               dq_du.cwiseProduct(sigma_xi));
  // The clamp blocks gradients outside [kLogStdMin, kLogStdMax].
  g_log_std = (raw_log_std.array() > float(kLogStdMax) || raw_log_std.array() < float(kLogStdMin))
                  .select(0.0f, g_log_std);
  upstream.bottomRows(k) = g_log_std;
  const auto actor_grads = actor_.backward(actor_cache, upstream);
  net::adam_step(actor_, actor_grads, actor_opt_);

  const double actor_loss =
      (alpha * cur.log_prob - min_q).template cast<double>().sum() / static_cast<double>(b);

  net::soft_update(q1_target_, q1_, cfg_.tau);
  net::soft_update(q2_target_, q2_, cfg_.tau);

  if (!std::isfinite(losses[0]) || !std::isfinite(losses[1]) || !std::isfinite(actor_loss)) {
    throw Error(ErrorCode::NonFiniteLoss, "non-finite loss during SAC update");
  }
  report.q1_loss = losses[0];
  report.q2_loss = losses[1];
  report.actor_loss = actor_loss;
  ++gradient_iterations_;
}

LossReport SacAgent::update(const ReplayBuffer& buffer) {
  const std::size_t need = std::max(cfg_.batch_size, cfg_.warmup_steps);
  if (buffer.size() < need) {
    throw Error(ErrorCode::BufferTooSmall, "replay holds " + std::to_string(buffer.size()) +
                                               " transitions, need " + std::to_string(need));
  }
  if (buffer.state_dim() != state_dim_ || buffer.action_dim() != action_dim_) {
    throw Error(ErrorCode::DimMismatch, "replay buffer dimensions differ from the agent's");
  }
  LossReport report;
  for (std::size_t i = 0; i < cfg_.gradient_steps; ++i) {
    const auto batch = buffer.sample(cfg_.batch_size, rng_);
    gradient_iteration(batch, report);
  }
  return report;
}

void write_training_log(std::ostream& out, const std::vector<EpisodeLogRow>& rows) {
  out << "step,episode,episodic_reward,q1_loss,q2_loss,actor_loss\n";
  out << std::setprecision(9);
  for (const auto& r : rows) {
    out << r.step << ',' << r.episode << ',' << r.episodic_reward << ',' << r.losses.q1_loss << ','
        << r.losses.q2_loss << ',' << r.losses.actor_loss << '\n';
  }
}

TrainingResult run_training(const EnvFactory& make_env, SacAgent& agent, const ActionAdapter& adapter,
                            std::uint64_t seed, const std::function<void(const Transition&)>& on_transition) {
  const auto& cfg = agent.config();
  TrainingResult result;
  if (cfg.total_steps == 0) return result;

  std::vector<sim::Env> envs;
  std::vector<VectorF> obs;
  std::vector<double> episode_reward(cfg.num_envs, 0.0);
  for (std::size_t i = 0; i < cfg.num_envs; ++i) {
    envs.push_back(make_env(i));
    obs.push_back(to_vector(envs.back().reset(seed + i)));
  }

  ReplayBuffer buffer(cfg.buffer_capacity, agent.state_dim(), agent.action_dim());
  const std::size_t ready = std::max(cfg.batch_size, cfg.warmup_steps);
  LossReport last;
  std::size_t episodes = 0;
  Transition tr;
  for (std::size_t t = 0; t < cfg.total_steps; ++t) {
    const std::size_t e = t % cfg.num_envs;
    const VectorF squashed = t < cfg.warmup_steps ? agent.random_action()
                                                  : agent.sample_action(obs[e], Mode::Stochastic);
    const auto control = adapter(obs[e], squashed);
    const auto step = envs[e].step(control);
    const VectorF next = to_vector(step.observation);

    const VectorF boxed = agent.to_box(squashed);
    tr.state.assign(obs[e].data(), obs[e].data() + obs[e].size());
    tr.action.assign(boxed.data(), boxed.data() + boxed.size());
    tr.reward = static_cast<float>(step.reward);
    tr.next_state.assign(next.data(), next.data() + next.size());
    // Time-limit truncation still bootstraps.
    tr.done = step.terminated && step.cause != sim::TerminationCause::MaxSteps;
    buffer.push(tr);
    if (on_transition) on_transition(tr);

    episode_reward[e] += step.reward;
    if (step.terminated) {
      result.log.push_back({t + 1, episodes++, episode_reward[e], last});
      episode_reward[e] = 0.0;
      obs[e] = to_vector(envs[e].reset());
    } else {
      obs[e] = next;
    }

    if ((t + 1) % cfg.update_every == 0 && buffer.size() >= ready) {
      last = agent.update(buffer);
      ++result.updates;
    }
  }
  return result;
}

PretrainResult pretrain(const EnvFactory& make_env, const SacConfig& cfg, std::uint64_t seed) {
  SacAgent agent(sim::kObservationDim, sim::kActionDim, cfg, seed);
  const auto result = run_training(make_env, agent,
                                   [](const VectorF&, const VectorF& a) {
                                     return sim::ControlAction{a(0), a(1)};
                                   },
                                   seed);
  return {agent.actor(), result.log};
}

}  // namespace ikh::sac
