#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ikh/config.hpp"
#include "ikh/error.hpp"
#include "ikh/scripted.hpp"
#include "ikh/sim.hpp"

using namespace ikh;
using namespace ikh::sim;

namespace {

std::shared_ptr<const track::TrackSpec> shared(track::TrackSpec t) {
  return std::make_shared<const track::TrackSpec>(std::move(t));
}

EnvConfig open_field(double lane_width = 6.0) {
  track::SegmentSpec s{track::SegmentKind::Straight, 2000, 0, 0, track::Turn::CCW, {}};
  return make_env_config(shared(track::build_track({s}, lane_width, {0.0}, false)), 0);
}

EnvConfig racetrack(int traffic) { return make_env_config(shared(track::resolve_track("racetrack")), traffic); }

bool rows_empty(const Observation& o, std::size_t from) {
  for (std::size_t r = from; r < kObservedVehicles; ++r)
    for (std::size_t c = 0; c < kFeatures; ++c)
      if (o.at(r, c) != 0.0) return false;
  return true;
}

}  // namespace

TEST_CASE("config: dt is pinned at 5 Hz and weights sum to one") {
  auto cfg = racetrack(0);
  CHECK_NOTHROW(cfg.validate());
  cfg.dt = 0.1;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = racetrack(0);
  cfg.c_v = 0.5;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = racetrack(0);
  cfg.max_steps = 0;
  CHECK_THROWS_AS(cfg.validate(), Error);
}

TEST_CASE("config: file keys override, unknown keys are errors") {
  const auto base = racetrack(5);
  const auto cfg = load_env_config(
      KeyValueConfig::parse("max_steps = 50\nv_target = 12\nc_v = 0.3\nc_l = 0.7\nmax_traffic = 1\n"), base);
  CHECK(cfg.max_steps == 50);
  CHECK(cfg.v_target == 12.0);
  CHECK(cfg.c_l == 0.7);
  CHECK(cfg.spawn.max_traffic == 1);
  CHECK_THROWS_AS(load_env_config(KeyValueConfig::parse("speed_limit = 3\n"), base), Error);
  const auto swapped = load_env_config(KeyValueConfig::parse("track = indiana\n"), base);
  CHECK(swapped.track->name == "indiana");
}

TEST_CASE("reset: determinism, empty rows and aligned spawn") {
  Env a(racetrack(5)), b(racetrack(5));
  CHECK(a.reset(42) == b.reset(42));
  CHECK(a.reset() == b.reset());

  Env e(racetrack(0));
  const auto o = e.reset(3);
  CHECK(o.at(0, 0) == 1.0);
  CHECK(rows_empty(o, 1));
  CHECK(std::abs(o.at(0, 7)) < 1e-9);
  CHECK(std::abs(o.at(0, 8)) < 1e-9);
  CHECK(e.steps() == 0);
  CHECK(e.progress().completed() == 0);
  CHECK(e.progress().sector() == e.spawn_sector());
}

TEST_CASE("observation: presence flags and zeroed absent rows") {
  Env e(racetrack(5));
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const auto o = e.reset(seed);
    CHECK(o.values.size() == 45);
    CHECK(o.at(0, 0) == 1.0);
    for (std::size_t r = 1; r < kObservedVehicles; ++r) {
      const double p = o.at(r, 0);
      CHECK((p == 0.0 || p == 1.0));
      if (p == 0.0) CHECK(rows_empty(o, r));
    }
    for (double v : o.values) CHECK(std::abs(v) <= 1.0);
  }
}

TEST_CASE("step: zero action at rest stays put") {
  Env e(open_field());
  e.reset(0);
  const auto before = e.ego();
  const auto r = e.step({0, 0});
  CHECK(e.ego().x == before.x);
  CHECK(e.ego().y == before.y);
  CHECK_FALSE(r.terminated);
  CHECK(r.cause == TerminationCause::None);
}

TEST_CASE("step: forced overlap is a collision with penalty") {
  Env e(open_field());
  e.reset(0);
  e.set_ego({100, 0, 0, 0});
  e.set_traffic({{102, 0.5, 0.1, 0}});
  const auto r = e.step({0, 0});
  CHECK(r.terminated);
  CHECK(r.cause == TerminationCause::Collision);
  CHECK(r.reward == doctest::Approx(compute_reward(e.config(), r.lane_frame, 0.0, TerminationCause::None) - 1.0));
}

TEST_CASE("step: leaving the lane terminates OffTrack; stepping afterwards throws") {
  Env e(open_field());
  e.reset(0);
  e.set_ego({100, 2.9, track::kPi / 2, 5.0});
  const auto r = e.step({0, 0});
  CHECK(r.cause == TerminationCause::OffTrack);
  CHECK(r.reward < 0.0);
  try {
    e.step({0, 0});
    FAIL("expected SteppedAfterTermination");
  } catch (const Error& err) {
    CHECK(err.code() == ErrorCode::SteppedAfterTermination);
  }
}

TEST_CASE("step: max_steps truncates") {
  auto cfg = open_field();
  cfg.max_steps = 7;
  Env e(cfg);
  e.reset(0);
  StepResult r;
  for (int i = 0; i < 7; ++i) r = e.step({0, 0});
  CHECK(r.cause == TerminationCause::MaxSteps);
  CHECK(e.steps() == 7);
}

TEST_CASE("step: constant steer follows the closed-form circle") {
  Env e(open_field(4000.0));
  e.reset(0);
  const double v = 8.0, steer = 0.4;
  const VehicleState start{500, 0, 0.3, v};
  e.set_ego(start);
  const auto& cfg = e.config();
  const double radius = cfg.wheelbase / std::tan(steer * cfg.steer_max);
  const double cx = start.x - radius * std::sin(start.heading);
  const double cy = start.y + radius * std::cos(start.heading);
  for (int n = 1; n <= 100; ++n) {
    e.step({steer, 0});
    const double theta = start.heading + n * v * cfg.dt / radius;
    const double x = cx + radius * std::sin(theta);
    const double y = cy - radius * std::cos(theta);
    REQUIRE(std::hypot(e.ego().x - x, e.ego().y - y) < 1e-6 * n);
    REQUIRE(std::abs(track::wrap_angle(e.ego().heading - theta)) < 1e-9);
  }
}

TEST_CASE("step: speed is clamped to [0, v_max] and actions to [-1, 1]") {
  Env e(open_field());
  e.reset(0);
  for (int i = 0; i < 40; ++i) e.step({0, 5.0});
  CHECK(e.ego().speed == doctest::Approx(e.config().v_max));
  for (int i = 0; i < 40; ++i) e.step({0, -3.0});
  CHECK(e.ego().speed == 0.0);
}

TEST_CASE("reward: examples and range") {
  auto cfg = racetrack(0);
  CHECK(compute_reward(cfg, {0, 0, 0}, cfg.v_target, TerminationCause::None) == doctest::Approx(1.0));
  CHECK(compute_reward(cfg, {0, cfg.track->lane_width / 2, 0}, 0.0, TerminationCause::None) == doctest::Approx(0.0));
  CHECK(compute_reward(cfg, {0, 0, 0}, cfg.v_target / 2, TerminationCause::None) == doctest::Approx(0.8));
  track::Rng rng(1);
  std::uniform_real_distribution<double> lat(-5, 5), speed(0, 15);
  for (int i = 0; i < 1000; ++i) {
    const double r = compute_reward(cfg, {0, lat(rng), 0}, speed(rng), TerminationCause::None);
    CHECK(r >= 0.0);
    CHECK(r <= 1.0);
  }
}

TEST_CASE("observation: mirrored traffic flips relative y and lateral offset only") {
  Env e(open_field());
  e.reset(0);
  e.set_ego({500, 0, 0, 6});
  e.set_traffic({{520, 1.5, 0, 6}, {520, -1.5, 0, 6}});
  const auto o = e.observe();
  for (std::size_t c = 0; c < kFeatures; ++c) {
    CAPTURE(c);
    if (c == 2 || c == 7) {
      CHECK(o.at(1, c) == doctest::Approx(-o.at(2, c)));
      CHECK(o.at(1, c) != 0.0);
    } else {
      CHECK(o.at(1, c) == o.at(2, c));
    }
  }
}

TEST_CASE("observation: traffic rows sorted by distance (brute-force oracle)") {
  Env e(open_field(40.0));
  e.reset(0);
  e.set_ego({500, 0, 0, 5});
  const std::vector<VehicleState> cars{{540, 3, 0, 5}, {515, -4, 0, 5}, {470, 1, 0, 5}};
  e.set_traffic(cars);
  const auto o = e.observe();
  std::vector<std::size_t> idx{0, 1, 2};
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return std::hypot(cars[a].x - 500, cars[a].y) < std::hypot(cars[b].x - 500, cars[b].y);
  });
  for (std::size_t r = 0; r < 3; ++r) {
    const auto& c = cars[idx[r]];
    CHECK(o.at(r + 1, 1) == doctest::Approx((c.x - 500) / 100.0));
    CHECK(o.at(r + 1, 2) == doctest::Approx(c.y / 100.0));
  }
  CHECK(rows_empty(o, 4));
}

TEST_CASE("overlap is symmetric") {
  track::Rng rng(9);
  std::uniform_real_distribution<double> pos(-6, 6), ang(-track::kPi, track::kPi);
  int hits = 0;
  for (int i = 0; i < 1000; ++i) {
    const VehicleState a{pos(rng), pos(rng), ang(rng), 0};
    const VehicleState b{pos(rng), pos(rng), ang(rng), 0};
    CHECK(overlap(a, b) == overlap(b, a));
    hits += overlap(a, b);
  }
  CHECK(hits > 0);
  CHECK(hits < 1000);
  CHECK_FALSE(overlap({0, 0, 0, 0}, {5.01, 0, 0, 0}));
  CHECK(overlap({0, 0, 0, 0}, {4.99, 0, 0, 0}));
}

TEST_CASE("determinism: identical action sequences give identical trajectories") {
  Env a(racetrack(5)), b(racetrack(5));
  a.reset(11);
  b.reset(11);
  track::Rng rng(4);
  std::uniform_real_distribution<double> u(-1, 1);
  while (!a.terminated()) {
    const ControlAction act{u(rng), u(rng)};
    const auto ra = a.step(act);
    const auto rb = b.step(act);
    REQUIRE(ra.observation == rb.observation);
    REQUIRE(ra.reward == rb.reward);
    REQUIRE(ra.cause == rb.cause);
  }
  CHECK(b.terminated());
}

TEST_CASE("sector index moves by at most one per step") {
  auto cfg = racetrack(0);
  cfg.v_target = cfg.v_max;
  Env e(cfg);
  scripted::LaneKeeperAgent keeper;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto obs = e.reset(seed);
    auto prev = e.progress().sector();
    const auto n = static_cast<long>(cfg.track->sector_count());
    while (!e.terminated()) {
      obs = e.step(keeper.act(e, obs)).observation;
      const auto now = track::sector_of(*cfg.track, e.lane_frame().s);
      long diff = (static_cast<long>(now) - static_cast<long>(prev) + n) % n;
      CHECK(diff <= 1);
      prev = now;
    }
  }
}

TEST_CASE("traffic keeps its gap instead of running into a stopped ego") {
  auto cfg = racetrack(0);
  cfg.max_steps = 150;
  Env e(cfg);
  e.reset(0);
  const auto p = cfg.track->pose_at(60.0);
  e.set_ego({p.x, p.y, p.heading, 0});
  const auto q = cfg.track->pose_at(35.0);
  e.set_traffic({{q.x, q.y, q.heading, 7}});
  StepResult r;
  while (!e.terminated()) r = e.step({0, 0});
  CHECK(r.cause == TerminationCause::MaxSteps);
}
