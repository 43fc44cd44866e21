#include <doctest.h>

#include <cmath>
#include <map>
#include <set>

#include "ikh/config.hpp"
#include "ikh/error.hpp"
#include "ikh/track.hpp"

using namespace ikh;
using namespace ikh::track;

namespace {

ErrorCode build_error(const std::string& source) {
  try {
    build_track(KeyValueConfig::parse(source));
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("build unexpectedly succeeded");
  return ErrorCode::IoError;
}

SegmentSpec straight(double len) { return {SegmentKind::Straight, len, 0, 0, Turn::CCW, {}}; }
SegmentSpec arc(double r, double sweep, Turn dir = Turn::CCW) { return {SegmentKind::Arc, 0, r, sweep, dir, {}}; }

TrackSpec rounded_rectangle() {
  std::vector<SegmentSpec> segs;
  for (int i = 0; i < 4; ++i) {
    segs.push_back(straight(100));
    segs.push_back(arc(20, kPi / 2));
  }
  return build_track(segs, 6.0, {0.0}, true);
}

// Piece of centerline read straight from a track source: length and signed curvature.
struct Piece {
  double length;
  double curvature;
};

std::vector<Piece> pieces_from_source(const std::string& name) {
  const auto cfg = KeyValueConfig::parse(*bundled_track_source(name));
  std::vector<Piece> out;
  for (int i = 0; cfg.has("segment." + std::to_string(i) + ".kind"); ++i) {
    const std::string p = "segment." + std::to_string(i) + ".";
    if (cfg.get_string(p + "kind") == "straight") {
      out.push_back({cfg.get_double(p + "length"), 0.0});
    } else {
      std::string sweep = cfg.get_string(p + "sweep");
      double rad = 0;
      if (sweep.size() > 3 && sweep.substr(sweep.size() - 3) == "deg") {
        rad = std::stod(sweep.substr(0, sweep.size() - 3)) * kPi / 180.0;
      } else {
        rad = std::stod(sweep);
      }
      const double r = cfg.get_double(p + "radius");
      const double sign = cfg.get_string(p + "direction") == "cw" ? -1.0 : 1.0;
      out.push_back({r * rad, sign / r});
    }
  }
  return out;
}

}  // namespace

TEST_CASE("build: single straight") {
  const auto t = build_track({straight(100)}, 6.0, {0.0}, false);
  CHECK(t.total_length == doctest::Approx(100.0));
  CHECK_FALSE(t.closed);
}

TEST_CASE("build: rounded rectangle closes with length 400 + 40 pi") {
  const auto t = rounded_rectangle();
  CHECK(t.total_length == doctest::Approx(400.0 + 40.0 * kPi).epsilon(1e-12));
  const auto end = t.segments.back().end();
  CHECK(std::hypot(end.x, end.y) < 1e-9);
}

TEST_CASE("build: errors") {
  CHECK(build_error("closed = false\n") == ErrorCode::EmptyTrack);
  CHECK(build_error("closed = true\nsegment.0.kind = straight\nsegment.0.length = 50\n") == ErrorCode::NonClosedLoop);
  CHECK(build_error("segment.0.kind = straight\nsegment.0.length = 50\n"
                    "segment.1.kind = straight\nsegment.1.length = 50\nsegment.1.x = 51\nsegment.1.y = 0\nsegment.1.heading = 0\n") ==
        ErrorCode::DiscontinuousChain);
  CHECK(build_error("segment.0.kind = straight\nsegment.0.length = -5\n") == ErrorCode::InvalidTrack);
  CHECK(build_error("segment.0.kind = arc\nsegment.0.radius = 0\nsegment.0.sweep = 1\n") == ErrorCode::InvalidTrack);
}

TEST_CASE("build: explicit start pose within tolerance is accepted") {
  const auto t = build_track(KeyValueConfig::parse("segment.0.kind = straight\nsegment.0.length = 50\n"
                                                    "segment.1.kind = straight\nsegment.1.length = 50\n"
                                                    "segment.1.x = 50\nsegment.1.y = 0\nsegment.1.heading = 0\n"));
  CHECK(t.total_length == doctest::Approx(100.0));
}

TEST_CASE("bundled tracks chain continuously") {
  for (const auto& name : bundled_track_names()) {
    CAPTURE(name);
    const auto t = resolve_track(name);
    for (std::size_t k = 0; k + 1 < t.segments.size(); ++k) {
      const auto e = t.segments[k].end();
      const auto s = t.segments[k + 1].start();
      CHECK(std::hypot(e.x - s.x, e.y - s.y) < 1e-9);
      CHECK(std::abs(wrap_angle(e.heading - s.heading)) < 1e-9);
    }
    if (t.closed) {
      const auto e = t.segments.back().end();
      const auto s = t.segments.front().start();
      CHECK(std::hypot(e.x - s.x, e.y - s.y) < 1e-9);
    }
    for (std::size_t i = 1; i < t.sector_boundaries.size(); ++i) {
      CHECK(t.sector_boundaries[i] > t.sector_boundaries[i - 1]);
    }
    CHECK(t.sector_boundaries.front() >= 0.0);
    CHECK(t.sector_boundaries.back() < t.total_length);
  }
}

TEST_CASE("racetrack: 9 sectors, length and boundaries agree with numeric integration at 1 mm") {
  const auto t = resolve_track("racetrack");
  REQUIRE(t.sector_count() == 9);
  REQUIRE(t.closed);

  const auto pieces = pieces_from_source("racetrack");
  const double ds = 1e-3;
  double x = 0, y = 0, heading = 0, s = 0;
  std::size_t next_boundary = 1;
  double worst = 0.0;
  for (const auto& p : pieces) {
    const auto n = static_cast<long>(std::llround(p.length / ds));
    const double h = p.length / static_cast<double>(n);
    for (long i = 0; i < n; ++i) {
      const double mid = heading + 0.5 * h * p.curvature;
      x += h * std::cos(mid);
      y += h * std::sin(mid);
      heading += h * p.curvature;
      s += h;
      if (next_boundary < t.sector_boundaries.size() &&
          std::abs(s - t.sector_boundaries[next_boundary]) < 0.5 * h) {
        const auto q = t.pose_at(t.sector_boundaries[next_boundary]);
        worst = std::max(worst, std::hypot(q.x - x, q.y - y));
        ++next_boundary;
      }
    }
  }
  CHECK(next_boundary == t.sector_boundaries.size());
  CHECK(worst < 1e-3);
  CHECK(std::abs(s - t.total_length) < 1e-3);
  CHECK(std::hypot(x, y) < 1e-3);  // closes numerically as well
}

TEST_CASE("project: on-line start and left offset sign") {
  const auto t = build_track({straight(100)}, 6.0, {0.0}, false);
  const auto f0 = project(t, {0, 0, 0});
  CHECK(f0.s == 0.0);
  CHECK(f0.d_lat == 0.0);
  CHECK(f0.d_ang == 0.0);
  const auto f1 = project(t, {30, 1, 0.2});
  CHECK(f1.s == doctest::Approx(30.0));
  CHECK(f1.d_lat == doctest::Approx(1.0));
  CHECK(f1.d_ang == doctest::Approx(0.2));
}

TEST_CASE("project: matches dense-sampling nearest point near arc apexes") {
  const auto t = resolve_track("racetrack");
  const int samples = 100000;
  std::vector<Pose> pts(samples);
  for (int i = 0; i < samples; ++i) pts[i] = t.pose_at(t.total_length * i / samples);
  Rng rng(31);
  std::uniform_real_distribution<double> off(-2.5, 2.5);
  for (const auto& seg : t.segments) {
    if (seg.kind() != SegmentKind::Arc) continue;
    const auto apex = seg.pose_at(seg.length() / 2);
    const double lat = off(rng);
    const Pose p{apex.x - std::sin(apex.heading) * lat, apex.y + std::cos(apex.heading) * lat, apex.heading};
    const auto f = project(t, p);
    double best = 1e300;
    for (const auto& q : pts) best = std::min(best, std::hypot(q.x - p.x, q.y - p.y));
    CHECK(std::abs(std::abs(f.d_lat) - best) < 1e-3);
    CHECK(f.d_lat == doctest::Approx(lat).epsilon(1e-6));
  }
}

TEST_CASE("project inverts pose_at on the centerline") {
  Rng rng(32);
  for (const auto& name : {"racetrack", "indiana", "lane_centering", "roundabout"}) {
    const auto t = resolve_track(name);
    std::uniform_real_distribution<double> u(0.0, t.total_length);
    for (int i = 0; i < 1000; ++i) {
      const double s = u(rng);
      const auto f = project(t, t.pose_at(s));
      const double ds = t.closed ? std::min(std::abs(f.s - s), t.total_length - std::abs(f.s - s)) : std::abs(f.s - s);
      REQUIRE(ds < 1e-6);
      REQUIRE(std::abs(f.d_lat) < 1e-6);
      REQUIRE(std::abs(f.d_ang) < 1e-6);
    }
  }
}

TEST_CASE("sector_of: boundary inclusion, cyclic wrap, even loop") {
  const auto race = resolve_track("racetrack");
  CHECK(sector_of(race, race.sector_boundaries[0]) == 0);
  CHECK(sector_of(race, race.sector_boundaries[3]) == 3);
  CHECK(sector_of(race, race.sector_boundaries[3] - 1e-9) == 2);

  auto loop = build_track({arc(90.0 / (2 * kPi), 2 * kPi)}, 6.0, {5, 15, 25, 35, 45, 55, 65, 75, 85}, true);
  CHECK(sector_of(loop, 5.0 - 1e-9) == 8);
  CHECK(sector_of(loop, 46.0) == 4);

  std::vector<double> bounds;
  for (int i = 0; i < 9; ++i) bounds.push_back(10.0 * i);
  auto even = build_track({arc(90.0 / (2 * kPi), 2 * kPi)}, 6.0, bounds, true);
  CHECK(sector_of(even, 41.0) == 4);
}

TEST_CASE("sector_of: piecewise constant and 9 distinct values on the racetrack") {
  const auto t = resolve_track("racetrack");
  std::set<std::size_t> seen;
  std::size_t prev = 0;
  for (double s = 0; s < t.total_length; s += 0.01) {
    const auto k = sector_of(t, s);
    CHECK(k >= prev);
    prev = k;
    seen.insert(k);
  }
  CHECK(seen.size() == 9);
}

TEST_CASE("sample_spawn: zero traffic, determinism and separation") {
  const auto t = resolve_track("racetrack");
  SpawnConfig cfg;
  cfg.max_traffic = 0;
  cfg.spawnable_sectors = t.spawn_sectors;
  Rng rng(1);
  CHECK(sample_spawn(t, cfg, rng).traffic.empty());

  cfg.max_traffic = 5;
  Rng a(77), b(77);
  for (int i = 0; i < 50; ++i) {
    const auto x = sample_spawn(t, cfg, a);
    const auto y = sample_spawn(t, cfg, b);
    CHECK(x.ego_s == y.ego_s);
    CHECK(x.traffic_s == y.traffic_s);
    CHECK(x.traffic.size() <= 5);
    std::vector<double> all = x.traffic_s;
    all.push_back(x.ego_s);
    for (std::size_t p = 0; p < all.size(); ++p)
      for (std::size_t q = p + 1; q < all.size(); ++q) {
        const double d = std::abs(all[p] - all[q]);
        CHECK(std::min(d, t.total_length - d) >= kMinSpawnSeparation - 1e-9);
      }
    CHECK(std::find(t.spawn_sectors.begin(), t.spawn_sectors.end(), x.ego_sector) != t.spawn_sectors.end());
  }
}

TEST_CASE("sample_spawn: uniform over spawnable sectors (chi-square)") {
  const auto t = resolve_track("racetrack");
  SpawnConfig cfg;
  cfg.max_traffic = 0;
  for (std::size_t i = 0; i < t.sector_count(); ++i) cfg.spawnable_sectors.push_back(i);
  Rng rng(5);
  const int n = 10000;
  std::vector<int> counts(t.sector_count(), 0);
  for (int i = 0; i < n; ++i) ++counts[sample_spawn(t, cfg, rng).ego_sector];
  const double expected = static_cast<double>(n) / static_cast<double>(counts.size());
  double chi2 = 0.0;
  for (const int c : counts) {
    chi2 += (c - expected) * (c - expected) / expected;
    CHECK(std::abs(c - expected) < 3.0 * std::sqrt(expected * (1.0 - 1.0 / 9.0)));
  }
  CHECK(chi2 < 26.12);  // chi-square 8 dof, p = 0.001
}

TEST_CASE("sample_spawn: impossible separation overflows") {
  const auto t = build_track({straight(20)}, 6.0, {0.0}, false);
  SpawnConfig cfg;
  cfg.max_traffic = 50;
  cfg.spawnable_sectors = {0};
  Rng rng(3);
  bool overflowed = false;
  for (int i = 0; i < 20 && !overflowed; ++i) {
    try {
      sample_spawn(t, cfg, rng);
    } catch (const Error& e) {
      overflowed = e.code() == ErrorCode::SpawnOverflow;
    }
  }
  CHECK(overflowed);
}

TEST_CASE("SectorProgress: running maximum of net forward crossings") {
  auto t = build_track({arc(90.0 / (2 * kPi), 2 * kPi)}, 6.0, {0, 10, 20, 30, 40, 50, 60, 70, 80}, true);
  SectorProgress p(t, 35.0);
  p.update(t, 45.0);
  p.update(t, 55.0);
  CHECK(p.completed() == 2);
  p.update(t, 45.0);
  CHECK(p.completed() == 2);
  p.update(t, 55.0);
  CHECK(p.completed() == 2);
  p.update(t, 65.0);
  CHECK(p.completed() == 3);
}
