#include "ikh/track.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ikh/error.hpp"

namespace ikh::track {

double wrap_angle(double a) {
  a = std::fmod(a, 2.0 * kPi);
  if (a <= -kPi) a += 2.0 * kPi;
  if (a > kPi) a -= 2.0 * kPi;
  return a;
}

namespace {

double sign_of(Turn t) { return t == Turn::CCW ? 1.0 : -1.0; }

double wrap_positive(double a) {
  a = std::fmod(a, 2.0 * kPi);
  if (a < 0.0) a += 2.0 * kPi;
  return a;
}

}  // namespace

Segment::Segment(const SegmentSpec& spec, const Pose& start, double s_start)
    : kind_(spec.kind), start_(start), s_start_(s_start) {
  if (kind_ == SegmentKind::Straight) {
    if (!(spec.length > 0.0)) throw Error(ErrorCode::InvalidTrack, "straight length must be > 0");
    length_ = spec.length;
    return;
  }
  if (!(spec.radius > 0.0)) throw Error(ErrorCode::InvalidTrack, "arc radius must be > 0");
  if (spec.sweep == 0.0 || !std::isfinite(spec.sweep)) {
    throw Error(ErrorCode::InvalidTrack, "arc sweep must be nonzero");
  }
  radius_ = spec.radius;
  sweep_ = std::abs(spec.sweep);
  direction_ = spec.sweep < 0.0 ? (spec.direction == Turn::CCW ? Turn::CW : Turn::CCW) : spec.direction;
  if (sweep_ > 2.0 * kPi + 1e-12) throw Error(ErrorCode::InvalidTrack, "arc sweep exceeds a full turn");
  length_ = radius_ * sweep_;
  const double sg = sign_of(direction_);
  cx_ = start_.x - sg * radius_ * std::sin(start_.heading);
  cy_ = start_.y + sg * radius_ * std::cos(start_.heading);
}

double Segment::curvature() const {
  return kind_ == SegmentKind::Straight ? 0.0 : sign_of(direction_) / radius_;
}

Pose Segment::pose_at(double u) const {
  if (kind_ == SegmentKind::Straight) {
    return {start_.x + u * std::cos(start_.heading), start_.y + u * std::sin(start_.heading),
            start_.heading};
  }
  const double sg = sign_of(direction_);
  const double h = start_.heading + sg * u / radius_;
  return {cx_ + sg * radius_ * std::sin(h), cy_ - sg * radius_ * std::cos(h), wrap_angle(h)};
}

std::pair<double, double> Segment::closest(double x, double y) const {
  if (kind_ == SegmentKind::Straight) {
    const double dx = x - start_.x;
    const double dy = y - start_.y;
    const double u = std::clamp(dx * std::cos(start_.heading) + dy * std::sin(start_.heading), 0.0, length_);
    const auto p = pose_at(u);
    return {u, (x - p.x) * (x - p.x) + (y - p.y) * (y - p.y)};
  }
  const double sg = sign_of(direction_);
  const double phi = std::atan2(y - cy_, x - cx_);
  const double tangent = phi + sg * kPi / 2.0;
  double theta = wrap_positive(sg * (tangent - start_.heading));
  if (theta > sweep_) {
    // Outside the swept range: snap to whichever end is angularly closer.
    theta = (theta - sweep_ < 2.0 * kPi - theta) ? sweep_ : 0.0;
  }
  const double u = theta * radius_;
  const auto p = pose_at(u);
  return {u, (x - p.x) * (x - p.x) + (y - p.y) * (y - p.y)};
}

std::size_t TrackSpec::segment_index(double s) const {
  if (segments.empty()) throw Error(ErrorCode::EmptyTrack, "track has no segments");
  if (closed) {
    s = std::fmod(s, total_length);
    if (s < 0.0) s += total_length;
  }
  auto it = std::upper_bound(segments.begin(), segments.end(), s,
                             [](double v, const Segment& seg) { return v < seg.s_start(); });
  if (it == segments.begin()) return 0;
  return static_cast<std::size_t>(std::distance(segments.begin(), it) - 1);
}

Pose TrackSpec::pose_at(double s) const {
  if (closed) {
    s = std::fmod(s, total_length);
    if (s < 0.0) s += total_length;
  }
  const auto& seg = segments[segment_index(s)];
  return seg.pose_at(std::clamp(s - seg.s_start(), 0.0, seg.length()));
}

double TrackSpec::curvature_at(double s) const { return segments[segment_index(s)].curvature(); }

double TrackSpec::forward_distance(double a, double b) const {
  if (!closed) return b - a;
  double d = std::fmod(b - a, total_length);
  if (d < 0.0) d += total_length;
  return d;
}

TrackSpec build_track(const std::vector<SegmentSpec>& specs, double lane_width,
                      std::vector<double> boundaries, bool closed, const Pose& origin,
                      std::string name, std::vector<std::size_t> spawn_sectors) {
  if (specs.empty()) throw Error(ErrorCode::EmptyTrack, "track has no segments");
  if (!(lane_width > 0.0)) throw Error(ErrorCode::InvalidTrack, "lane_width must be > 0");

  TrackSpec track;
  track.name = std::move(name);
  track.lane_width = lane_width;
  track.closed = closed;

  Pose cursor = specs.front().start.value_or(origin);
  double s = 0.0;
  for (std::size_t k = 0; k < specs.size(); ++k) {
    const auto& spec = specs[k];
    if (k > 0 && spec.start) {
      const double gap = std::hypot(spec.start->x - cursor.x, spec.start->y - cursor.y);
      const double turn = std::abs(wrap_angle(spec.start->heading - cursor.heading));
      if (gap > kChainTolerance || turn > kChainTolerance) {
        throw Error(ErrorCode::DiscontinuousChain,
                    "segment " + std::to_string(k) + " starts " + std::to_string(gap) +
                        " m from the previous end");
      }
    }
    track.segments.emplace_back(spec, cursor, s);
    s += track.segments.back().length();
    cursor = track.segments.back().end();
  }
  track.total_length = s;

  if (closed) {
    const auto& first = track.segments.front().start();
    const double gap = std::hypot(cursor.x - first.x, cursor.y - first.y);
    const double turn = std::abs(wrap_angle(cursor.heading - first.heading));
    if (gap > kChainTolerance || turn > kChainTolerance) {
      throw Error(ErrorCode::NonClosedLoop,
                  "closed track ends " + std::to_string(gap) + " m from its start");
    }
  }

  if (boundaries.empty()) boundaries.push_back(0.0);
  for (std::size_t i = 0; i < boundaries.size(); ++i) {
    if (boundaries[i] < 0.0 || boundaries[i] >= track.total_length) {
      throw Error(ErrorCode::InvalidTrack, "sector boundary outside [0, total_length)");
    }
    if (i > 0 && !(boundaries[i] > boundaries[i - 1])) {
      throw Error(ErrorCode::InvalidTrack, "sector boundaries must be strictly increasing");
    }
  }
  track.sector_boundaries = std::move(boundaries);
  for (auto sec : spawn_sectors) {
    if (sec >= track.sector_boundaries.size()) {
      throw Error(ErrorCode::InvalidTrack, "spawn sector index out of range");
    }
  }
  track.spawn_sectors = std::move(spawn_sectors);
  return track;
}

namespace {

double parse_angle(const KeyValueConfig& cfg, const std::string& key) {
  auto text = cfg.get_string(key);
  bool degrees = false;
  if (text.size() > 3 && text.compare(text.size() - 3, 3, "deg") == 0) {
    degrees = true;
    text = trim(text.substr(0, text.size() - 3));
  }
  KeyValueConfig tmp;
  tmp.set(key, text);
  const double v = tmp.get_double(key);
  return degrees ? v * kPi / 180.0 : v;
}

}  // namespace

TrackSpec build_track(const KeyValueConfig& src) {
  std::set<std::string> allowed = {"name",        "lane_width",    "closed",  "sectors",
                                   "start_x",     "start_y",       "start_heading",
                                   "spawn_sectors"};
  std::vector<SegmentSpec> specs;
  for (std::size_t n = 0;; ++n) {
    const std::string prefix = "segment." + std::to_string(n) + ".";
    if (!src.has(prefix + "kind")) break;
    for (const char* field : {"kind", "length", "radius", "sweep", "direction", "x", "y", "heading"}) {
      allowed.insert(prefix + field);
    }
    SegmentSpec spec;
    const auto kind = src.get_string(prefix + "kind");
    if (kind == "straight") {
      spec.kind = SegmentKind::Straight;
      spec.length = src.get_double(prefix + "length");
    } else if (kind == "arc") {
      spec.kind = SegmentKind::Arc;
      spec.radius = src.get_double(prefix + "radius");
      spec.sweep = parse_angle(src, prefix + "sweep");
      const auto dir = src.has(prefix + "direction") ? src.get_string(prefix + "direction") : "ccw";
      if (dir == "ccw" || dir == "CCW" || dir == "left") {
        spec.direction = Turn::CCW;
      } else if (dir == "cw" || dir == "CW" || dir == "right") {
        spec.direction = Turn::CW;
      } else {
        throw Error(ErrorCode::ConfigError, src.origin() + ": bad direction '" + dir + "'");
      }
    } else {
      throw Error(ErrorCode::ConfigError, src.origin() + ": unknown segment kind '" + kind + "'");
    }
    if (src.has(prefix + "x") || src.has(prefix + "y") || src.has(prefix + "heading")) {
      spec.start = Pose{src.get_double(prefix + "x"), src.get_double(prefix + "y"),
                        parse_angle(src, prefix + "heading")};
    }
    specs.push_back(spec);
  }
  src.require_known(allowed);

  Pose origin;
  if (src.has("start_x")) origin.x = src.get_double("start_x");
  if (src.has("start_y")) origin.y = src.get_double("start_y");
  if (src.has("start_heading")) origin.heading = parse_angle(src, "start_heading");

  std::vector<double> boundaries;
  if (src.has("sectors")) boundaries = src.get_doubles("sectors");
  std::vector<std::size_t> spawn;
  if (src.has("spawn_sectors")) {
    for (double v : src.get_doubles("spawn_sectors")) spawn.push_back(static_cast<std::size_t>(v));
  }
  return build_track(specs, src.has("lane_width") ? src.get_double("lane_width") : 6.0,
                     std::move(boundaries), src.has("closed") && src.get_bool("closed"), origin,
                     src.has("name") ? src.get_string("name") : std::string{}, std::move(spawn));
}

TrackSpec resolve_track(const std::string& name_or_path) {
  if (auto text = bundled_track_source(name_or_path)) {
    return build_track(KeyValueConfig::parse(*text, name_or_path));
  }
  return build_track(KeyValueConfig::load(name_or_path));
}

LaneFrame project(const TrackSpec& track, const Pose& pose) {
  std::size_t best = 0;
  double best_u = 0.0;
  double best_d2 = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < track.segments.size(); ++k) {
    const auto [u, d2] = track.segments[k].closest(pose.x, pose.y);
    if (d2 < best_d2) {
      best = k;
      best_u = u;
      best_d2 = d2;
    }
  }
  const auto& seg = track.segments[best];
  const auto q = seg.pose_at(best_u);
  LaneFrame f;
  f.s = seg.s_start() + best_u;
  if (track.closed && f.s >= track.total_length) f.s -= track.total_length;
  f.d_lat = std::cos(q.heading) * (pose.y - q.y) - std::sin(q.heading) * (pose.x - q.x);
  f.d_ang = wrap_angle(pose.heading - q.heading);
  return f;
}

std::size_t sector_of(const TrackSpec& track, double s) {
  const auto& b = track.sector_boundaries;
  if (b.size() <= 1) return 0;
  auto it = std::upper_bound(b.begin(), b.end(), s);
  if (it == b.begin()) return b.size() - 1;  // before the first boundary: wraps to the last sector
  return static_cast<std::size_t>(std::distance(b.begin(), it) - 1);
}

namespace {

double sector_length(const TrackSpec& track, std::size_t i) {
  const auto& b = track.sector_boundaries;
  if (i + 1 < b.size()) return b[i + 1] - b[i];
  if (track.closed) return track.total_length - b[i] + b.front();
  return track.total_length - b[i];
}

double separation(const TrackSpec& track, double a, double b) {
  const double d = std::abs(a - b);
  return track.closed ? std::min(d, track.total_length - d) : d;
}

}  // namespace

Spawn sample_spawn(const TrackSpec& track, const SpawnConfig& cfg, Rng& rng) {
  if (cfg.max_traffic < 0) throw Error(ErrorCode::InvalidEnvConfig, "max_traffic must be >= 0");
  std::vector<std::size_t> sectors = cfg.spawnable_sectors;
  if (sectors.empty()) throw Error(ErrorCode::InvalidEnvConfig, "no spawnable sectors");
  for (auto sec : sectors) {
    if (sec >= track.sector_count()) throw Error(ErrorCode::InvalidEnvConfig, "spawn sector out of range");
  }

  Spawn out;
  std::uniform_int_distribution<std::size_t> pick(0, sectors.size() - 1);
  out.ego_sector = sectors[pick(rng)];
  std::uniform_real_distribution<double> along(0.0, sector_length(track, out.ego_sector));
  double s = track.sector_boundaries[out.ego_sector] + along(rng);
  if (track.closed && s >= track.total_length) s -= track.total_length;
  if (!track.closed) s = std::min(s, std::nextafter(track.total_length, 0.0));
  out.ego_s = s;
  out.ego = track.pose_at(s);
  out.ego_sector = sector_of(track, s);

  std::uniform_int_distribution<int> count_dist(0, cfg.max_traffic);
  const int count = count_dist(rng);
  std::uniform_real_distribution<double> anywhere(0.0, track.total_length);
  int attempts = 0;
  while (static_cast<int>(out.traffic_s.size()) < count) {
    if (++attempts > 1000) {
      throw Error(ErrorCode::SpawnOverflow, "cannot place " + std::to_string(count) +
                                                " vehicles with the required separation");
    }
    const double cand = anywhere(rng);
    bool ok = separation(track, cand, out.ego_s) >= kMinSpawnSeparation;
    for (double other : out.traffic_s) ok = ok && separation(track, cand, other) >= kMinSpawnSeparation;
    if (!ok) continue;
    out.traffic_s.push_back(cand);
    out.traffic.push_back(track.pose_at(cand));
  }
  return out;
}

}  // namespace ikh::track

namespace ikh::track {

SectorProgress::SectorProgress(const TrackSpec& track, double s) : sector_(sector_of(track, s)) {}

void SectorProgress::update(const TrackSpec& track, double s) {
  const auto next = sector_of(track, s);
  if (next == sector_) return;
  const auto n = static_cast<long>(track.sector_count());
  long diff = (static_cast<long>(next) - static_cast<long>(sector_)) % n;
  if (diff < 0) diff += n;
  // Jumps are attributed to the shorter way around the loop.
  if (diff * 2 <= n) {
    net_ += static_cast<int>(diff);
  } else {
    net_ -= static_cast<int>(n - diff);
  }
  sector_ = next;
  best_ = std::max(best_, net_);
}

}  // namespace ikh::track
