#include "ikh/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>

#include "ikh/checkpoint.hpp"
#include "ikh/compose.hpp"
#include "ikh/config.hpp"
#include "ikh/error.hpp"
#include "ikh/eval.hpp"
#include "ikh/sac.hpp"
#include "ikh/scripted.hpp"
#include "ikh/sim.hpp"
#include "ikh/track.hpp"

namespace ikh::cli {

namespace fs = std::filesystem;

namespace {

struct Common {
  std::string task;
  std::string config;
  std::uint64_t seed = 0;
  std::string out;
};

struct TrainFlags {
  std::string preset;
  std::optional<std::size_t> num_envs;
  std::optional<std::size_t> steps;
};

fs::path data_dir() {
  if (const char* dir = std::getenv("IKH_DATA_DIR"); dir != nullptr && *dir != '\0') return dir;
  return fs::current_path();
}

fs::path output_path(const std::string& flag, const std::string& fallback) {
  return flag.empty() ? data_dir() / fallback : fs::path(flag);
}

void ensure_parent(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

std::ofstream open_out(const fs::path& p) {
  ensure_parent(p);
  std::ofstream f(p, std::ios::binary);
  if (!f) throw Error(ErrorCode::IoError, "cannot write " + p.string());
  return f;
}

track::TrackSpec load_task(const std::string& task) {
  if (track::bundled_track_source(task)) return track::resolve_track(task);
  if (fs::is_regular_file(task)) return track::resolve_track(task);
  std::string known;
  for (const auto& n : track::bundled_track_names()) known += (known.empty() ? "" : ", ") + n;
  throw Error(ErrorCode::UnknownTask, "'" + task + "' is neither a bundled task (" + known + ") nor a track file");
}

/// Splits a combined run-config file into its environment and SAC parts.
std::pair<KeyValueConfig, KeyValueConfig> split_config(const std::string& path) {
  KeyValueConfig env_part, sac_part;
  if (path.empty()) return {env_part, sac_part};
  const auto file = KeyValueConfig::load(path);
  for (const auto& [k, v] : file.values()) {
    if (sim::env_config_keys().count(k)) {
      env_part.set(k, v);
    } else if (sac::sac_config_keys().count(k)) {
      sac_part.set(k, v);
    } else {
      throw Error(ErrorCode::ConfigError, path + ": unknown key '" + k + "'");
    }
  }
  return {env_part, sac_part};
}

sim::EnvConfig resolve_env(const Common& c, const KeyValueConfig& env_part, const std::string& default_task) {
  std::string task = c.task;
  if (task.empty() && !env_part.has("track")) task = default_task;
  KeyValueConfig file = env_part;
  sim::EnvConfig base;
  if (!task.empty()) {
    base = sim::make_env_config(std::make_shared<const track::TrackSpec>(load_task(task)));
    if (file.has("track")) {
      // --task outranks the file's track entry.
      auto values = file.values();
      values.erase("track");
      file = KeyValueConfig();
      for (const auto& [k, v] : values) file.set(k, v);
    }
  } else {
    base = sim::make_env_config(
        std::make_shared<const track::TrackSpec>(load_task(env_part.get_string("track"))));
    file = KeyValueConfig();
    for (const auto& [k, v] : env_part.values())
      if (k != "track") file.set(k, v);
  }
  auto cfg = sim::load_env_config(file, base);
  cfg.spawn.seed = c.seed;
  return cfg;
}

sac::SacConfig resolve_sac(const TrainFlags& t, const KeyValueConfig& sac_part) {
  sac::SacConfig cfg;
  if (!t.preset.empty()) {
    auto p = sac::sac_preset(t.preset);
    if (!p) throw Error(ErrorCode::ConfigError, "unknown preset '" + t.preset + "'");
    cfg = *p;
  }
  sac::apply_sac_overrides(sac_part, cfg);
  if (t.num_envs) cfg.num_envs = *t.num_envs;
  if (t.steps) cfg.total_steps = *t.steps;
  cfg.validate();
  return cfg;
}

sac::EnvFactory env_factory(const sim::EnvConfig& cfg) {
  return [cfg](std::size_t) { return sim::Env(cfg); };
}

fs::path sidecar_of(const fs::path& master) { return fs::path(master.string() + ".policies"); }

std::unique_ptr<eval::Agent> resolve_agent(const std::string& spec, const std::string& policies_flag,
                                           std::uint64_t seed) {
  if (spec.rfind("scripted:", 0) == 0) return scripted::make_scripted_agent(spec.substr(9));
  std::string path = spec;
  enum class Kind { Auto, Sac, Ikh } kind = Kind::Auto;
  if (spec.rfind("sac:", 0) == 0) {
    kind = Kind::Sac;
    path = spec.substr(4);
  } else if (spec.rfind("ikh:", 0) == 0) {
    kind = Kind::Ikh;
    path = spec.substr(4);
  }
  if (path.empty() || !fs::is_regular_file(path)) {
    throw Error(ErrorCode::AgentUnresolvable, "agent '" + spec + "' is not scripted:NAME or an existing checkpoint");
  }
  fs::path manifest = policies_flag;
  if (manifest.empty() && kind != Kind::Sac && fs::is_regular_file(sidecar_of(path))) manifest = sidecar_of(path);
  if (kind == Kind::Ikh && manifest.empty()) {
    throw Error(ErrorCode::AgentUnresolvable, "no policy manifest for IKH agent '" + spec + "'");
  }
  auto actor = net::load_checkpoint(path);
  if (manifest.empty() || kind == Kind::Sac) return std::make_unique<eval::ActorAgent>(std::move(actor));
  auto skills = compose::load_policy_set(compose::read_manifest(manifest));
  return std::make_unique<eval::ComposedAgent>(compose::IkhAgent(std::move(skills), std::move(actor), seed));
}

void add_common(CLI::App& cmd, Common& c, bool task_required) {
  auto* t = cmd.add_option("--task", c.task, "bundled task name or track file");
  if (task_required) t->required();
  cmd.add_option("--config", c.config, "key = value run config (env and SAC keys)");
  cmd.add_option("--seed", c.seed, "random seed");
  cmd.add_option("--out", c.out, "output path");
}

void add_train(CLI::App& cmd, TrainFlags& t) {
  cmd.add_option("--preset", t.preset, "SAC preset (table2-<col> or desk-<col>)");
  cmd.add_option("--num-envs", t.num_envs, "parallel environments, stepped round-robin");
  cmd.add_option("--steps", t.steps, "total environment steps (overrides ts)");
}

void write_log(const fs::path& p, const std::vector<sac::EpisodeLogRow>& log) {
  auto f = open_out(p);
  sac::write_training_log(f, log);
}

int cmd_pretrain(const Common& c, const TrainFlags& t, const std::string& log_flag, std::ostream& out) {
  const auto [env_part, sac_part] = split_config(c.config);
  const auto env = resolve_env(c, env_part, "");
  const auto cfg = resolve_sac(t, sac_part);
  const fs::path ckpt = output_path(c.out, c.task + ".ckpt");
  const fs::path log = log_flag.empty() ? ckpt.parent_path() / "rewards.csv" : fs::path(log_flag);
  const auto result = sac::pretrain(env_factory(env), cfg, c.seed);
  ensure_parent(ckpt);
  net::save_checkpoint(result.actor, ckpt);
  write_log(log, result.log);
  out << "wrote " << ckpt.string() << " and " << log.string() << " (" << result.log.size() << " episodes)\n";
  return kExitOk;
}

int cmd_train_master(const Common& c, const TrainFlags& t, const std::string& policies, const std::string& log_flag,
                     std::ostream& out) {
  const auto [env_part, sac_part] = split_config(c.config);
  const auto env = resolve_env(c, env_part, "racetrack");
  const auto cfg = resolve_sac(t, sac_part);
  const auto entries = compose::read_manifest(policies);
  const auto skills = compose::load_policy_set(entries);
  const fs::path ckpt = output_path(c.out, "master.ckpt");
  const fs::path log = log_flag.empty() ? ckpt.parent_path() / "rewards.csv" : fs::path(log_flag);
  const auto result = compose::train_master(env_factory(env), skills, cfg, c.seed);
  ensure_parent(ckpt);
  net::save_checkpoint(result.master, ckpt);
  std::vector<compose::ManifestEntry> resolved;
  for (const auto& e : entries) resolved.push_back({e.label, fs::absolute(e.checkpoint).lexically_normal()});
  compose::write_manifest(sidecar_of(ckpt), resolved);
  write_log(log, result.log);
  out << "wrote " << ckpt.string() << " (m=" << skills.size() << ") and " << sidecar_of(ckpt).string() << '\n';
  return kExitOk;
}

int cmd_eval(const Common& c, const std::string& agent_spec, const std::string& policies, std::size_t episodes,
             std::size_t seeds, std::ostream& out) {
  const auto [env_part, sac_part] = split_config(c.config);
  if (!sac_part.values().empty()) throw Error(ErrorCode::ConfigError, "eval takes no SAC keys");
  const auto env = resolve_env(c, env_part, "racetrack");
  auto agent = resolve_agent(agent_spec, policies, c.seed);
  std::vector<std::uint64_t> seed_list;
  for (std::size_t i = 0; i < seeds; ++i) seed_list.push_back(c.seed + i);
  const auto report = eval::evaluate(*agent, env, episodes, seed_list);

  const fs::path dir = output_path(c.out, "eval");
  fs::create_directories(dir);
  {
    auto f = open_out(dir / "report.csv");
    eval::write_report_csv(f, report);
  }
  {
    auto f = open_out(dir / "summary.md");
    eval::write_summary(f, report, agent->name());
  }
  const auto cells = eval::spawn_heatmap(report, *env.track);
  {
    auto f = open_out(dir / "heatmap.csv");
    eval::write_heatmap_csv(f, cells);
  }
  {
    auto f = open_out(dir / "heatmap.svg");
    eval::write_heatmap_svg(f, cells);
  }
  eval::write_summary(out, report, agent->name());
  return kExitOk;
}

int cmd_trace(const Common& c, const std::string& agent_spec, const std::string& policies, std::size_t episodes,
              std::ostream& out) {
  const auto [env_part, sac_part] = split_config(c.config);
  if (!sac_part.values().empty()) throw Error(ErrorCode::ConfigError, "trace takes no SAC keys");
  const auto env = resolve_env(c, env_part, "racetrack");
  auto agent = resolve_agent(agent_spec, policies, c.seed);
  const auto trace = eval::record_trace(*agent, env, episodes, c.seed);
  const fs::path path = output_path(c.out, "trace.csv");
  auto f = open_out(path);
  eval::write_trace_csv(f, trace);
  out << "wrote " << path.string() << " (" << trace.rows.size() << " rows)\n";
  return kExitOk;
}

bool is_usage_error(ErrorCode code) {
  switch (code) {
    case ErrorCode::UnknownTask:
    case ErrorCode::ConfigError:
    case ErrorCode::NotComposable:
    case ErrorCode::AgentUnresolvable:
    case ErrorCode::DimMismatch:
    case ErrorCode::ManifestEmpty:
    case ErrorCode::InvalidEnvConfig:
    case ErrorCode::DiscontinuousChain:
    case ErrorCode::NonClosedLoop:
    case ErrorCode::EmptyTrack:
    case ErrorCode::InvalidTrack:
      return true;
    default:
      return false;
  }
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Skill composition for autonomous driving: pretrain, train-master, eval, trace", "ikh"};
  app.require_subcommand(1);

  Common c;
  TrainFlags t;
  std::string policies, agent_spec, log;
  std::size_t episodes = 100, seeds = 5, trace_episodes = 1;

  auto* pre = app.add_subcommand("pretrain", "pre-train a skill policy with SAC");
  add_common(*pre, c, true);
  add_train(*pre, t);
  pre->add_option("--log", log, "reward log CSV (default: rewards.csv next to --out)");

  auto* master = app.add_subcommand("train-master", "train a master policy over frozen skills");
  add_common(*master, c, false);
  add_train(*master, t);
  master->add_option("--policies", policies, "policy-set manifest (label = checkpoint)")->required();
  master->add_option("--log", log, "reward log CSV (default: rewards.csv next to --out)");

  auto* ev = app.add_subcommand("eval", "completed-sector evaluation");
  add_common(*ev, c, false);
  ev->add_option("--agent", agent_spec, "scripted:NAME, sac:CKPT, ikh:MASTER or a checkpoint path")->required();
  ev->add_option("--policies", policies, "manifest for an IKH agent (default: MASTER.policies)");
  ev->add_option("--episodes", episodes, "episodes per seed");
  ev->add_option("--seeds", seeds, "number of seeds, starting at --seed");

  auto* tr = app.add_subcommand("trace", "per-step weight trace of an IKH agent");
  add_common(*tr, c, false);
  tr->add_option("--agent", agent_spec, "ikh:MASTER or a master checkpoint path")->required();
  tr->add_option("--policies", policies, "manifest (default: MASTER.policies)");
  tr->add_option("--episodes", trace_episodes, "episodes to trace");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }

  try {
    if (*pre) return cmd_pretrain(c, t, log, out);
    if (*master) return cmd_train_master(c, t, policies, log, out);
    if (*ev) return cmd_eval(c, agent_spec, policies, episodes, seeds, out);
    if (*tr) return cmd_trace(c, agent_spec, policies, trace_episodes, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return is_usage_error(e.code()) ? kExitUsage : kExitRuntime;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace ikh::cli
