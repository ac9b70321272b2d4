#include "scenekeeper/simulator.hpp"

#include <algorithm>
#include <cmath>

#include "scenekeeper/error.hpp"
#include "scenekeeper/oracle.hpp"

namespace scenekeeper {
namespace {

constexpr double kHeadRadius = 0.12;
constexpr double kCarryReach = 0.15;
constexpr double kCarryHeight = 0.9;
constexpr double kArmHalfWidth = 0.04;
constexpr double kSettle = 1.0;  // seconds to bring a lifted prop to the carry point

struct Ground {
  double x = 0.0;
  double y = 0.0;
};

std::optional<Ground> actor_at(const Actor& a, double t) {
  const ActorKey* cur = nullptr;
  const ActorKey* next = nullptr;
  for (std::size_t i = 0; i < a.path.size(); ++i) {
    if (a.path[i].t <= t) {
      cur = &a.path[i];
      next = i + 1 < a.path.size() ? &a.path[i + 1] : nullptr;
    }
  }
  if (!cur || cur->absent) return std::nullopt;
  if (!next || next->absent) return Ground{cur->x, cur->y};
  const double s = (t - cur->t) / (next->t - cur->t);
  return Ground{cur->x + (next->x - cur->x) * s, cur->y + (next->y - cur->y) * s};
}

const Actor* find_actor(const ScenarioScript& s, const std::string& name) {
  for (const Actor& a : s.actors) {
    if (a.name == name) return &a;
  }
  return nullptr;
}

Vec3 rest_center(const Prop& p, const PropKey& k) {
  return {k.at.x, k.at.y, k.at.z + 0.5 * p.size.z};
}

// Where an actor holds something when it is not on its way to a surface:
// just in front of the body, toward the work area.
Vec3 carry_point(const ScenarioScript& s, const Actor& a, const Ground& g) {
  const Vec3 center = s.workArea.center();
  double dx = center.x - g.x;
  double dy = center.y - g.y;
  const double len = std::hypot(dx, dy);
  if (len < 1e-9) {
    dx = 1.0, dy = 0.0;
  } else {
    dx /= len, dy /= len;
  }
  const double reach = a.radius + kCarryReach;
  return {g.x + dx * reach, g.y + dy * reach, kCarryHeight};
}

Vec3 lerp(const Vec3& a, const Vec3& b, double s) { return a + (b - a) * s; }

std::optional<PropPose> prop_at(const ScenarioScript& s, const Prop& p, double t) {
  std::optional<std::size_t> cur;
  for (std::size_t i = 0; i < p.timeline.size(); ++i) {
    if (p.timeline[i].t <= t) cur = i;
  }
  if (!cur) return std::nullopt;
  const PropKey& k = p.timeline[*cur];
  if (k.kind == PropKeyKind::Absent) return std::nullopt;
  if (k.kind == PropKeyKind::Rest) {
    return PropPose{p.label, Aabb::from_center_size(rest_center(p, k), p.size), std::nullopt};
  }

  const Actor* actor = find_actor(s, k.heldBy);
  const std::optional<Ground> g = actor ? actor_at(*actor, t) : std::nullopt;
  if (!g) return std::nullopt;
  const Vec3 carry = carry_point(s, *actor, *g);

  const PropKey* prev = *cur > 0 && p.timeline[*cur - 1].kind == PropKeyKind::Rest
                            ? &p.timeline[*cur - 1]
                            : nullptr;
  const PropKey* next = *cur + 1 < p.timeline.size() &&
                                p.timeline[*cur + 1].kind == PropKeyKind::Rest
                            ? &p.timeline[*cur + 1]
                            : nullptr;
  Vec3 center;
  if (next) {
    const Vec3 from =
        prev ? rest_center(p, *prev) : carry_point(s, *actor, actor_at(*actor, k.t).value_or(*g));
    center = lerp(from, rest_center(p, *next), (t - k.t) / (next->t - k.t));
  } else if (prev) {
    center = lerp(rest_center(p, *prev), carry, std::min(1.0, (t - k.t) / kSettle));
  } else {
    center = carry;
  }
  return PropPose{p.label, Aabb::from_center_size(center, p.size), k.heldBy};
}

void raise(HeightMap& map, int col, int row, double h) {
  if (map.in_bounds(col, row) && h > map.at(col, row)) map.set(col, row, h);
}

// Cell range whose centers can fall inside [lo, hi] along one axis.
std::pair<int, int> cell_span(double lo, double hi, double origin, double res, int count) {
  const int a = std::max(0, static_cast<int>(std::floor((lo - origin) / res - 0.5)));
  const int b = std::min(count - 1, static_cast<int>(std::ceil((hi - origin) / res - 0.5)));
  return {a, b};
}

}  // namespace

ScenePose pose_at(const ScenarioScript& script, double t) {
  if (!(t >= 0.0 && t <= script.duration + 1e-9)) {
    throw Error("time-out-of-range", std::to_string(t));
  }
  ScenePose pose;
  pose.t = t;
  std::vector<PropPose> props;
  for (const Prop& p : script.props) {
    if (auto pp = prop_at(script, p, t)) props.push_back(std::move(*pp));
  }
  for (const Actor& a : script.actors) {
    const std::optional<Ground> g = actor_at(a, t);
    if (!g) continue;
    PersonPose person;
    person.name = a.name;
    person.position = {g->x, g->y, 0.0};
    person.box = {{g->x - a.radius, g->y - a.radius, 0.0}, {g->x + a.radius, g->y + a.radius, a.height}};
    for (const Gesture& gesture : a.gestures) {
      if (t < gesture.from || t > gesture.to) continue;
      Hand h{gesture.hand, std::nullopt};
      if (gesture.target) h.pointing = normalized(*gesture.target - gesture.hand);
      person.hands.push_back(h);
    }
    for (const PropPose& p : props) {
      if (p.heldBy == a.name) person.hands.push_back({p.box.center(), std::nullopt});
    }
    pose.persons.push_back(std::move(person));
  }
  pose.props = std::move(props);
  return pose;
}

HeightMap render_height_map(const ScenarioScript& script, double t) {
  const ScenePose pose = pose_at(script, t);
  const double res = script.resolution;
  const int width = std::max(1, static_cast<int>(std::lround((script.room.max.x - script.room.min.x) / res)));
  const int height = std::max(1, static_cast<int>(std::lround((script.room.max.y - script.room.min.y) / res)));
  const Vec3 origin{script.room.min.x, script.room.min.y, 0.0};
  HeightMap map(width, height, res, origin);
  auto center_of = [&](int col, int row) {
    return std::pair{origin.x + (col + 0.5) * res, origin.y + (row + 0.5) * res};
  };

  for (const PropPose& p : pose.props) {
    const auto [c0, c1] = cell_span(p.box.min.x, p.box.max.x, origin.x, res, width);
    const auto [r0, r1] = cell_span(p.box.min.y, p.box.max.y, origin.y, res, height);
    for (int r = r0; r <= r1; ++r) {
      for (int c = c0; c <= c1; ++c) {
        const auto [x, y] = center_of(c, r);
        if (x >= p.box.min.x && x <= p.box.max.x && y >= p.box.min.y && y <= p.box.max.y) {
          raise(map, c, r, p.box.max.z);
        }
      }
    }
  }

  for (const PersonPose& person : pose.persons) {
    const Actor* a = find_actor(script, person.name);
    const double radius = a->radius;
    const double body = a->height - 2.0 * kHeadRadius;
    const Vec3 head{person.position.x, person.position.y, a->height - kHeadRadius};
    const auto [c0, c1] = cell_span(person.box.min.x, person.box.max.x, origin.x, res, width);
    const auto [r0, r1] = cell_span(person.box.min.y, person.box.max.y, origin.y, res, height);
    for (int r = r0; r <= r1; ++r) {
      for (int c = c0; c <= c1; ++c) {
        const auto [x, y] = center_of(c, r);
        const double d2 = (x - head.x) * (x - head.x) + (y - head.y) * (y - head.y);
        if (d2 > radius * radius) continue;
        double h = body;
        if (d2 <= kHeadRadius * kHeadRadius) h = std::max(h, head.z + std::sqrt(kHeadRadius * kHeadRadius - d2));
        raise(map, c, r, h);
      }
    }

    for (const Hand& hand : person.hands) {
      double dx = hand.position.x - person.position.x;
      double dy = hand.position.y - person.position.y;
      const double len = std::hypot(dx, dy);
      if (len <= radius) continue;
      dx /= len, dy /= len;
      const double sx = person.position.x + dx * radius;
      const double sy = person.position.y + dy * radius;
      const double seg = len - radius;
      const auto [ac0, ac1] = cell_span(std::min(sx, hand.position.x) - kArmHalfWidth,
                                        std::max(sx, hand.position.x) + kArmHalfWidth, origin.x, res, width);
      const auto [ar0, ar1] = cell_span(std::min(sy, hand.position.y) - kArmHalfWidth,
                                        std::max(sy, hand.position.y) + kArmHalfWidth, origin.y, res, height);
      for (int r = ar0; r <= ar1; ++r) {
        for (int c = ac0; c <= ac1; ++c) {
          const auto [x, y] = center_of(c, r);
          const double along = std::clamp((x - sx) * dx + (y - sy) * dy, 0.0, seg);
          const double px = sx + dx * along - x;
          const double py = sy + dy * along - y;
          if (px * px + py * py <= kArmHalfWidth * kArmHalfWidth) raise(map, c, r, hand.position.z);
        }
      }
    }
  }
  return map;
}

DetectorConfig detector_config(const ScenarioScript& script) {
  DetectorConfig cfg;
  cfg.workArea = script.workArea;
  cfg.surfaceHeight = 0.0;
  return cfg;
}

std::vector<double> frame_times(const ScenarioScript& script) {
  const auto last = static_cast<long>(std::floor(script.duration * script.rate + 1e-9));
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(last + 1));
  for (long i = 0; i <= last; ++i) out.push_back(static_cast<double>(i) / script.rate);
  return out;
}

DetectionFrame frame_from_pose(const ScenePose& pose, std::int64_t index) {
  DetectionFrame f;
  f.frame = index;
  f.t = pose.t;
  for (const PersonPose& p : pose.persons) f.persons.push_back({p.name, p.box.center(), p.box, p.hands});
  for (const PropPose& p : pose.props) {
    f.objects.push_back({p.label, p.box.center(), p.box, p.heldBy, p.label});
  }
  return quantize(std::move(f));
}

ScenarioRun run_scenario(const ScenarioScript& script, RunMode mode, bool withTruth) {
  ScenarioRun run;
  const DetectorConfig cfg = detector_config(script);
  std::int64_t index = 1;
  for (const double t : frame_times(script)) {
    ScenePose pose = pose_at(script, t);
    // Truth uses the same 1e-6 grid as the wire so poses compare exactly.
    for (PersonPose& p : pose.persons) {
      p.box = quantize(p.box);
      for (Hand& h : p.hands) {
        h.position = quantize(h.position);
        if (h.pointing) h.pointing = quantize(*h.pointing);
      }
    }
    for (PropPose& p : pose.props) p.box = quantize(p.box);
    pose.t = quantize(t);

    if (mode == RunMode::ViaFrames) {
      run.frames.push_back(frame_from_pose(pose, index));
    } else {
      DetectionFrame f = detect_frame(render_height_map(script, t), cfg, pose.t);
      f.frame = index;
      run.frames.push_back(quantize(std::move(f)));
    }
    ++index;
    if (withTruth) {
      std::vector<Relation> rel = oracle::relations_at(script, pose);
      run.truth.frames.push_back({std::move(pose), std::move(rel)});
    }
  }
  for (const Prop& p : script.props) {
    if (p.owner) run.truth.ownership[p.label] = *p.owner;
  }
  return run;
}

}  // namespace scenekeeper
