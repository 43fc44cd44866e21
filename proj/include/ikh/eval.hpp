#pragma once

// Evaluation harness: completed-sector metric, per-seed episode records,
// Table-I-style bin distribution, spawn heatmap and per-step weight traces.

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "ikh/compose.hpp"
#include "ikh/net.hpp"
#include "ikh/sim.hpp"
#include "ikh/track.hpp"

namespace ikh::eval {

/// Anything that maps the current environment state to a control.
class Agent {
 public:
  virtual ~Agent() = default;
  virtual std::string name() const = 0;
  virtual void begin_episode(const sim::Env&) {}
  virtual sim::ControlAction act(const sim::Env& env, const sim::Observation& obs) = 0;
};

/// Plain SAC actor queried with its mean action.
class ActorAgent : public Agent {
 public:
  explicit ActorAgent(net::Mlp actor, std::string name = "sac");
  std::string name() const override { return name_; }
  sim::ControlAction act(const sim::Env& env, const sim::Observation& obs) override;

 private:
  net::Mlp actor_;
  std::string name_;
};

/// IKH agent queried deterministically; remembers the last weight vector.
class ComposedAgent : public Agent {
 public:
  explicit ComposedAgent(compose::IkhAgent agent, std::string name = "ikh");
  std::string name() const override { return name_; }
  sim::ControlAction act(const sim::Env& env, const sim::Observation& obs) override;

  const compose::WeightVector& last_weights() const { return last_weights_; }
  compose::IkhAgent& inner() { return agent_; }

 private:
  compose::IkhAgent agent_;
  std::string name_;
  compose::WeightVector last_weights_;
};

struct EpisodeRecord {
  std::uint64_t seed = 0;
  std::size_t spawn_sector = 0;
  std::size_t sectors_completed = 0;
  int steps = 0;
  sim::TerminationCause cause = sim::TerminationCause::None;
  double total_reward = 0.0;
};

inline constexpr std::size_t kBinCount = 4;
/// 0-2, 3-5, 6-8, 9+.
std::size_t bin_of(std::size_t sectors);
const std::array<std::string, kBinCount>& bin_labels();

struct SeedRun {
  std::uint64_t seed = 0;
  std::vector<EpisodeRecord> episodes;
};

struct EvalReport {
  std::vector<SeedRun> runs;

  std::size_t episode_count() const;
  std::vector<EpisodeRecord> all_records() const;
  double mean_sectors() const;
  double variance_sectors() const;  // population variance over all episodes
  std::array<std::size_t, kBinCount> bin_counts() const;
  std::array<double, kBinCount> bin_percentages() const;
  /// Mean and standard deviation over seeds of each seed's bin percentage.
  std::array<std::pair<double, double>, kBinCount> per_seed_bin_percentages() const;
};

/// Completed sectors along one episode's arc-length sequence (running maximum
/// of net forward boundary crossings since the first frame).
std::size_t count_sectors(const std::vector<double>& s_sequence, const track::TrackSpec& track);

EpisodeRecord run_episode(Agent& agent, sim::Env& env, std::uint64_t seed);

/// `episodes` episodes per seed; the env is reseeded with each seed before its
/// first episode and continues that stream afterwards.
EvalReport evaluate(Agent& agent, const sim::EnvConfig& cfg, std::size_t episodes = 100,
                    const std::vector<std::uint64_t>& seeds = {0, 1, 2, 3, 4});

void write_report_csv(std::ostream& out, const EvalReport& report);
void write_summary(std::ostream& out, const EvalReport& report, const std::string& agent_name);

struct HeatmapCell {
  std::size_t sector = 0;
  double mean_sectors = 0.0;
  std::size_t episodes = 0;
  bool absent() const { return episodes == 0; }
};

/// One cell per track sector, in sector order; sectors never spawned in are absent.
std::vector<HeatmapCell> spawn_heatmap(const EvalReport& report, const track::TrackSpec& track);
void write_heatmap_csv(std::ostream& out, const std::vector<HeatmapCell>& cells);
void write_heatmap_svg(std::ostream& out, const std::vector<HeatmapCell>& cells);

struct TraceRow {
  std::size_t step = 0;
  std::size_t episode = 0;
  std::size_t sector = 0;
  double reward = 0.0;
  compose::WeightVector weights;
  sim::ControlAction action;
};

struct WeightTrace {
  std::vector<std::string> labels;
  std::vector<TraceRow> rows;
};

/// Throws NotComposable unless `agent` is a ComposedAgent.
WeightTrace record_trace(Agent& agent, const sim::EnvConfig& cfg, std::size_t episodes, std::uint64_t seed);
void write_trace_csv(std::ostream& out, const WeightTrace& trace);

}  // namespace ikh::eval
