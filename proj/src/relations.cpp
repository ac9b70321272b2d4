#include "scenekeeper/relations.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <limits>

#include "scenekeeper/error.hpp"

namespace scenekeeper {
namespace {

// Absorbs rounding in the inclusive comparisons; every threshold is "≥" or "≤".
constexpr double kSlack = 1e-9;
constexpr double kContactTolerance = 1e-6;

constexpr std::array<std::string_view, kRelationKindCount> kKindNames = {
    "In", "On", "Near", "NextTo", "Belongs", "LastTouchedBy", "InLocation"};
constexpr std::array<std::string_view, kRelationKindCount> kKindSnake = {
    "in", "on", "near", "next_to", "belongs", "last_touched_by", "in_location"};

double footprint_overlap(const Aabb& a, const Aabb& b) {
  const double dx = std::max(0.0, std::min(a.max.x, b.max.x) - std::max(a.min.x, b.min.x));
  const double dy = std::max(0.0, std::min(a.max.y, b.max.y) - std::max(a.min.y, b.min.y));
  return dx * dy;
}

}  // namespace

std::string_view to_string(RelationKind kind) { return kKindNames[static_cast<std::size_t>(kind)]; }

std::optional<RelationKind> parse_relation_kind(std::string_view text) {
  for (std::size_t i = 0; i < kRelationKindCount; ++i) {
    if (text == kKindNames[i] || text == kKindSnake[i]) return static_cast<RelationKind>(i);
  }
  return std::nullopt;
}

bool RelationSet::has_stable(RelationKind kind, const std::string& subject,
                             const std::string& object) const {
  return std::any_of(stable.begin(), stable.end(), [&](const Relation& r) {
    return r.kind == kind && r.subject == subject && r.object == object;
  });
}

bool RelationSet::has_raw(RelationKind kind, const std::string& subject,
                          const std::string& object) const {
  return runs.contains(RelationKey{kind, subject, object});
}

bool rel_in(const Aabb& o1, const Aabb& o2, double threshold) {
  return containment_fraction(o1, o2) >= threshold - kSlack;
}

bool rel_on(const Aabb& o1, const Aabb& o2, const RelationConfig& cfg) {
  const double lift = o1.min.z - o2.max.z;
  if (lift < -kContactTolerance || lift > cfg.onGap + kSlack) return false;
  const double smaller = std::min(o1.footprint_area(), o2.footprint_area());
  if (!(smaller > 0.0)) return false;
  return footprint_overlap(o1, o2) >= cfg.onOverlap * smaller - kSlack;
}

bool rel_near(const Aabb& o1, const Aabb& o2) {
  return box_gap_distance(o1, o2) <= std::max(o1.max_extent(), o2.max_extent()) + kSlack;
}

bool rel_next_to(const Aabb& o1, const Aabb& o2, std::span<const Aabb> others) {
  if (!rel_near(o1, o2)) return false;
  const Vec3 a = o1.center();
  const Vec3 b = o2.center();
  if (a == b) return true;
  return std::none_of(others.begin(), others.end(),
                      [&](const Aabb& box) { return open_segment_intersects_box(a, b, box); });
}

bool rel_in_location(const TrackedEntity& e, const LocationRegion& r) {
  return r.box.contains(e.centroid);
}

std::optional<OwnershipRecord> infer_ownership(const TrackedEntity& newTrack,
                                               std::span<const TrackedEntity> persons,
                                               const RelationConfig& cfg, double now) {
  const TrackedEntity* nearest = nullptr;
  double best = std::numeric_limits<double>::infinity();
  double runner_up = std::numeric_limits<double>::infinity();
  for (const TrackedEntity& p : persons) {
    if (p.kind != EntityKind::Person || !p.present_at(now)) continue;
    const double d = box_gap_distance(newTrack.boundingBox, p.boundingBox);
    if (d < best) {
      runner_up = best;
      best = d;
      nearest = &p;
    } else if (d < runner_up) {
      runner_up = d;
    }
  }
  if (!nearest || best > cfg.ownRadius + kSlack) return std::nullopt;
  if (runner_up - best < cfg.ownMargin - kSlack) return std::nullopt;
  return OwnershipRecord{newTrack.id, nearest->id, now};
}

std::vector<Relation> TouchLedger::update(std::span<const TrackedEntity> objects,
                                          std::span<const TrackedEntity> persons,
                                          const RelationConfig& cfg, double now) {
  for (const TrackedEntity& o : objects) {
    if (o.kind != EntityKind::WorkObject || !o.present_at(now)) continue;
    const std::string* toucher = nullptr;
    for (const TrackedEntity& p : persons) {
      if (p.kind != EntityKind::Person || !p.present_at(now)) continue;
      const bool touching = std::any_of(p.hands.begin(), p.hands.end(), [&](const Hand& h) {
        return point_box_distance(h.position, o.boundingBox) <= cfg.touchRadius + kSlack;
      });
      if (touching && (!toucher || p.id < *toucher)) toucher = &p.id;
    }
    if (toucher) touches_[o.id] = {*toucher, now};
  }

  std::vector<Relation> out;
  for (const TrackedEntity& o : objects) {
    if (const auto it = touches_.find(o.id); it != touches_.end()) {
      out.push_back({RelationKind::LastTouchedBy, o.id, it->second.person, it->second.at});
    }
  }
  return out;
}

std::optional<TouchLedger::Touch> TouchLedger::last_touch(const std::string& objectId) const {
  if (const auto it = touches_.find(objectId); it != touches_.end()) return it->second;
  return std::nullopt;
}

RelationSet compute_relations(std::span<const TrackedEntity> tracks,
                              std::span<const LocationRegion> regions, const RelationSet& prior,
                              const RelationConfig& cfg, double now,
                              const RelationContext& ctx) {
  std::vector<const TrackedEntity*> objects;
  std::vector<const TrackedEntity*> present;
  for (const TrackedEntity& t : tracks) {
    if (!t.present_at(now)) continue;
    present.push_back(&t);
    if (t.kind == EntityKind::WorkObject) objects.push_back(&t);
  }

  std::map<RelationKey, std::string> raw;  // value unused; map keeps keys sorted
  auto emit = [&](RelationKind kind, const std::string& s, const std::string& o) {
    if (cfg.is_enabled(kind)) raw.emplace(RelationKey{kind, s, o}, std::string{});
  };

  const std::size_t n = objects.size();
  std::vector<char> on(n * n, 0);
  std::vector<char> in(n * n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const Aabb& bi = objects[i]->boundingBox;
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const Aabb& bj = objects[j]->boundingBox;
      on[i * n + j] = rel_on(bi, bj, cfg);
      in[i * n + j] = bi.volume() > 0.0 && rel_in(bi, bj, cfg.inThreshold);
      if (in[i * n + j]) emit(RelationKind::In, objects[i]->id, objects[j]->id);
      if (on[i * n + j]) emit(RelationKind::On, objects[i]->id, objects[j]->id);
    }
  }

  std::vector<Aabb> others;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const Aabb& bi = objects[i]->boundingBox;
      const Aabb& bj = objects[j]->boundingBox;
      if (!rel_near(bi, bj)) continue;
      emit(RelationKind::Near, objects[i]->id, objects[j]->id);
      emit(RelationKind::Near, objects[j]->id, objects[i]->id);

      // Things stacked on or nested in either endpoint travel with it and do
      // not separate the pair.
      others.clear();
      for (std::size_t k = 0; k < n; ++k) {
        if (k == i || k == j) continue;
        if (on[k * n + i] || on[k * n + j] || in[k * n + i] || in[k * n + j]) continue;
        others.push_back(objects[k]->boundingBox);
      }
      if (rel_next_to(bi, bj, others)) {
        emit(RelationKind::NextTo, objects[i]->id, objects[j]->id);
        emit(RelationKind::NextTo, objects[j]->id, objects[i]->id);
      }
    }
  }

  if (ctx.owners) {
    for (const TrackedEntity* o : objects) {
      if (const auto it = ctx.owners->find(o->id); it != ctx.owners->end()) {
        emit(RelationKind::Belongs, o->id, it->second);
      }
    }
  }
  for (const Relation& r : ctx.lastTouched) {
    const bool live = std::any_of(objects.begin(), objects.end(),
                                  [&](const TrackedEntity* o) { return o->id == r.subject; });
    if (live) emit(RelationKind::LastTouchedBy, r.subject, r.object);
  }
  for (const TrackedEntity* e : present) {
    for (const LocationRegion& region : regions) {
      if (rel_in_location(*e, region)) emit(RelationKind::InLocation, e->id, region.name);
    }
  }

  RelationSet out;
  out.frameTime = now;
  const int debounce = std::max(1, cfg.debounceFrames);
  for (const auto& [key, unused] : raw) {
    RelationRun run{now, 1};
    if (const auto it = prior.runs.find(key); it != prior.runs.end()) {
      run = {it->second.since, it->second.frames + 1};
    }
    out.runs.emplace(key, run);
    Relation rel{key.kind, key.subject, key.object, run.since};
    out.raw.push_back(rel);
    if (run.frames >= debounce) out.stable.push_back(std::move(rel));
  }
  return out;
}

}  // namespace scenekeeper
