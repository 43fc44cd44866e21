#include "ikh/eval.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "ikh/error.hpp"
#include "ikh/sac.hpp"

namespace ikh::eval {

ActorAgent::ActorAgent(net::Mlp actor, std::string name) : actor_(std::move(actor)), name_(std::move(name)) {
  if (actor_.input_dim() != sim::kObservationDim || actor_.output_dim() != 2 * sim::kActionDim) {
    throw Error(ErrorCode::DimMismatch, "actor is " + std::to_string(actor_.input_dim()) + " -> " +
                                            std::to_string(actor_.output_dim()) + ", expected 45 -> 4");
  }
}

sim::ControlAction ActorAgent::act(const sim::Env&, const sim::Observation& obs) {
  const auto a = sac::squashed_action(actor_, sac::to_vector(obs), sac::Mode::Deterministic);
  return {a(0), a(1)};
}

ComposedAgent::ComposedAgent(compose::IkhAgent agent, std::string name)
    : agent_(std::move(agent)), name_(std::move(name)) {}

sim::ControlAction ComposedAgent::act(const sim::Env&, const sim::Observation& obs) {
  auto [action, weights] = agent_.act(sac::to_vector(obs), sac::Mode::Deterministic);
  last_weights_ = std::move(weights);
  return action;
}

std::size_t bin_of(std::size_t sectors) { return std::min<std::size_t>(sectors / 3, kBinCount - 1); }

const std::array<std::string, kBinCount>& bin_labels() {
  static const std::array<std::string, kBinCount> labels{"0-2", "3-5", "6-8", "9+"};
  return labels;
}

std::size_t EvalReport::episode_count() const {
  std::size_t n = 0;
  for (const auto& r : runs) n += r.episodes.size();
  return n;
}

std::vector<EpisodeRecord> EvalReport::all_records() const {
  std::vector<EpisodeRecord> out;
  for (const auto& r : runs) out.insert(out.end(), r.episodes.begin(), r.episodes.end());
  return out;
}

double EvalReport::mean_sectors() const {
  const auto n = episode_count();
  if (n == 0) return 0.0;
  double sum = 0.0;
  for (const auto& r : runs)
    for (const auto& e : r.episodes) sum += static_cast<double>(e.sectors_completed);
  return sum / static_cast<double>(n);
}

double EvalReport::variance_sectors() const {
  const auto n = episode_count();
  if (n == 0) return 0.0;
  const double mean = mean_sectors();
  double sum = 0.0;
  for (const auto& r : runs)
    for (const auto& e : r.episodes) sum += std::pow(static_cast<double>(e.sectors_completed) - mean, 2);
  return sum / static_cast<double>(n);
}

std::array<std::size_t, kBinCount> EvalReport::bin_counts() const {
  std::array<std::size_t, kBinCount> counts{};
  for (const auto& r : runs)
    for (const auto& e : r.episodes) ++counts[bin_of(e.sectors_completed)];
  return counts;
}

std::array<double, kBinCount> EvalReport::bin_percentages() const {
  std::array<double, kBinCount> pct{};
  const auto n = episode_count();
  if (n == 0) return pct;
  const auto counts = bin_counts();
  for (std::size_t b = 0; b < kBinCount; ++b) pct[b] = 100.0 * static_cast<double>(counts[b]) / static_cast<double>(n);
  return pct;
}

std::array<std::pair<double, double>, kBinCount> EvalReport::per_seed_bin_percentages() const {
  std::array<std::pair<double, double>, kBinCount> out{};
  std::vector<std::array<double, kBinCount>> per_seed;
  for (const auto& r : runs) {
    if (r.episodes.empty()) continue;
    EvalReport single{{r}};
    per_seed.push_back(single.bin_percentages());
  }
  if (per_seed.empty()) return out;
  const double k = static_cast<double>(per_seed.size());
  for (std::size_t b = 0; b < kBinCount; ++b) {
    double mean = 0.0;
    for (const auto& p : per_seed) mean += p[b];
    mean /= k;
    double var = 0.0;
    for (const auto& p : per_seed) var += (p[b] - mean) * (p[b] - mean);
    out[b] = {mean, per_seed.size() > 1 ? std::sqrt(var / (k - 1.0)) : 0.0};
  }
  return out;
}

std::size_t count_sectors(const std::vector<double>& s_sequence, const track::TrackSpec& track) {
  if (s_sequence.empty()) return 0;
  track::SectorProgress progress(track, s_sequence.front());
  for (std::size_t i = 1; i < s_sequence.size(); ++i) progress.update(track, s_sequence[i]);
  return static_cast<std::size_t>(std::max(progress.completed(), 0));
}

namespace {

EpisodeRecord play(Agent& agent, sim::Env& env, sim::Observation obs, std::uint64_t seed,
                   const std::function<void(const sim::ControlAction&, const sim::StepResult&, std::size_t)>& on_step) {
  EpisodeRecord rec;
  rec.seed = seed;
  rec.spawn_sector = env.spawn_sector();
  agent.begin_episode(env);
  while (!env.terminated()) {
    const std::size_t sector = env.progress().sector();
    const auto action = agent.act(env, obs);
    const auto r = env.step(action);
    rec.total_reward += r.reward;
    rec.cause = r.cause;
    obs = r.observation;
    if (on_step) on_step(action, r, sector);
  }
  rec.steps = env.steps();
  rec.sectors_completed = static_cast<std::size_t>(std::max(env.progress().completed(), 0));
  return rec;
}

}  // namespace

EpisodeRecord run_episode(Agent& agent, sim::Env& env, std::uint64_t seed) {
  return play(agent, env, env.reset(seed), seed, {});
}

EvalReport evaluate(Agent& agent, const sim::EnvConfig& cfg, std::size_t episodes,
                    const std::vector<std::uint64_t>& seeds) {
  EvalReport report;
  for (const auto seed : seeds) {
    SeedRun run{seed, {}};
    sim::Env env(cfg);
    for (std::size_t e = 0; e < episodes; ++e) {
      auto obs = e == 0 ? env.reset(seed) : env.reset();
      run.episodes.push_back(play(agent, env, std::move(obs), seed, {}));
    }
    report.runs.push_back(std::move(run));
  }
  return report;
}

void write_report_csv(std::ostream& out, const EvalReport& report) {
  out << "seed,episode,spawn_sector,sectors_completed,steps,termination,total_reward\n";
  out << std::setprecision(10);
  for (const auto& run : report.runs) {
    for (std::size_t e = 0; e < run.episodes.size(); ++e) {
      const auto& r = run.episodes[e];
      out << run.seed << ',' << e << ',' << r.spawn_sector << ',' << r.sectors_completed << ',' << r.steps << ','
          << sim::to_string(r.cause) << ',' << r.total_reward << '\n';
    }
  }
}

void write_summary(std::ostream& out, const EvalReport& report, const std::string& agent_name) {
  out << "agent: " << agent_name << '\n';
  out << "episodes: " << report.episode_count() << " over " << report.runs.size() << " seed(s)\n";
  out << std::fixed << std::setprecision(2);
  out << "completed sectors: mean " << report.mean_sectors() << ", variance " << report.variance_sectors() << "\n\n";
  const auto counts = report.bin_counts();
  const auto pct = report.per_seed_bin_percentages();
  out << "| sectors | episodes | percent (mean +- std over seeds) |\n";
  out << "|---------|----------|----------------------------------|\n";
  for (std::size_t b = 0; b < kBinCount; ++b) {
    out << "| " << std::left << std::setw(7) << bin_labels()[b] << " | " << std::right << std::setw(8) << counts[b]
        << " | " << std::setw(6) << pct[b].first << " +- " << std::setw(5) << pct[b].second
        << std::string(18, ' ') << " |\n";
  }
}

std::vector<HeatmapCell> spawn_heatmap(const EvalReport& report, const track::TrackSpec& track) {
  std::vector<HeatmapCell> cells(track.sector_count());
  std::vector<double> sums(cells.size(), 0.0);
  for (std::size_t i = 0; i < cells.size(); ++i) cells[i].sector = i;
  for (const auto& run : report.runs) {
    for (const auto& e : run.episodes) {
      if (e.spawn_sector >= cells.size()) continue;
      sums[e.spawn_sector] += static_cast<double>(e.sectors_completed);
      ++cells[e.spawn_sector].episodes;
    }
  }
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (cells[i].episodes > 0) cells[i].mean_sectors = sums[i] / static_cast<double>(cells[i].episodes);
  }
  return cells;
}

namespace {

std::string sector_name(std::size_t i) {
  return i < 26 ? std::string(1, static_cast<char>('a' + i)) : std::to_string(i);
}

}  // namespace

void write_heatmap_csv(std::ostream& out, const std::vector<HeatmapCell>& cells) {
  out << "segment,mean_sectors,n_episodes\n";
  out << std::setprecision(10);
  for (const auto& c : cells) {
    out << sector_name(c.sector) << ',';
    if (c.absent()) {
      out << "absent";
    } else {
      out << c.mean_sectors;
    }
    out << ',' << c.episodes << '\n';
  }
}

void write_heatmap_svg(std::ostream& out, const std::vector<HeatmapCell>& cells) {
  constexpr int cell = 60, pad = 10;
  const int width = static_cast<int>(cells.size()) * cell + 2 * pad;
  double top = 1.0;
  for (const auto& c : cells) top = std::max(top, c.mean_sectors);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << cell + 2 * pad + 20
      << "\" font-family=\"monospace\" font-size=\"12\">\n";
  out << std::fixed << std::setprecision(2);
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const auto& c = cells[i];
    const int x = pad + static_cast<int>(i) * cell;
    std::string fill = "#cccccc";
    if (!c.absent()) {
      const int level = static_cast<int>(std::lround(255.0 * (1.0 - c.mean_sectors / top)));
      std::ostringstream col;
      col << "rgb(255," << level << ',' << level << ')';
      fill = col.str();
    }
    out << "  <rect x=\"" << x << "\" y=\"" << pad << "\" width=\"" << cell << "\" height=\"" << cell
        << "\" fill=\"" << fill << "\" stroke=\"black\"/>\n";
    out << "  <text x=\"" << x + 4 << "\" y=\"" << pad + 14 << "\">" << sector_name(c.sector) << "</text>\n";
    out << "  <text x=\"" << x + 4 << "\" y=\"" << pad + cell - 6 << "\">";
    if (c.absent()) {
      out << "absent";
    } else {
      out << c.mean_sectors;
    }
    out << "</text>\n";
  }
  out << "  <text x=\"" << pad << "\" y=\"" << cell + 2 * pad + 12
      << "\">mean completed sectors by spawn sector</text>\n";
  out << "</svg>\n";
}

WeightTrace record_trace(Agent& agent, const sim::EnvConfig& cfg, std::size_t episodes, std::uint64_t seed) {
  auto* composed = dynamic_cast<ComposedAgent*>(&agent);
  if (composed == nullptr) {
    throw Error(ErrorCode::NotComposable, "agent '" + agent.name() + "' has no weight output to trace");
  }
  WeightTrace trace;
  trace.labels = composed->inner().skills().labels();
  sim::Env env(cfg);
  for (std::size_t e = 0; e < episodes; ++e) {
    auto obs = e == 0 ? env.reset(seed) : env.reset();
    std::size_t step = 0;
    play(agent, env, std::move(obs), seed,
         [&](const sim::ControlAction& action, const sim::StepResult& r, std::size_t sector) {
           trace.rows.push_back({step++, e, sector, r.reward, composed->last_weights(), action});
         });
  }
  return trace;
}

void write_trace_csv(std::ostream& out, const WeightTrace& trace) {
  out << "step,episode,sector,reward";
  for (std::size_t i = 0; i < trace.labels.size(); ++i) out << ",w_" << i + 1 << '_' << trace.labels[i];
  out << ",steer,accel\n";
  out << std::setprecision(10);
  for (const auto& r : trace.rows) {
    out << r.step << ',' << r.episode << ',' << r.sector << ',' << r.reward;
    for (const double w : r.weights) out << ',' << w;
    out << ',' << r.action.steer << ',' << r.action.accel << '\n';
  }
}

}  // namespace ikh::eval
