#pragma once

#include <bitset>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "scenekeeper/geometry.hpp"
#include "scenekeeper/tracking.hpp"

namespace scenekeeper {

enum class RelationKind { In, On, Near, NextTo, Belongs, LastTouchedBy, InLocation };
inline constexpr std::size_t kRelationKindCount = 7;

std::string_view to_string(RelationKind kind);
/// Accepts the enum spelling ("NextTo") or snake case ("next_to").
std::optional<RelationKind> parse_relation_kind(std::string_view text);

struct Relation {
  RelationKind kind = RelationKind::Near;
  std::string subject;
  std::string object;  // entity id, or a region name for InLocation
  double since = 0.0;  // start of the current uninterrupted run

  /// Identity of a relation ignores `since`.
  auto key() const { return std::tie(kind, subject, object); }
  friend bool operator==(const Relation&, const Relation&) = default;
};

struct RelationKey {
  RelationKind kind;
  std::string subject;
  std::string object;

  auto operator<=>(const RelationKey&) const = default;
};

struct RelationRun {
  double since = 0.0;
  int frames = 0;

  friend bool operator==(const RelationRun&, const RelationRun&) = default;
};

struct RelationSet {
  double frameTime = 0.0;
  std::vector<Relation> raw;     // true in this frame, sorted by key
  std::vector<Relation> stable;  // held for at least debounceFrames consecutive frames
  std::map<RelationKey, RelationRun> runs;  // debounce state for every raw relation

  bool has_stable(RelationKind kind, const std::string& subject, const std::string& object) const;
  bool has_raw(RelationKind kind, const std::string& subject, const std::string& object) const;
};

struct LocationRegion {
  std::string name;
  Aabb box;

  friend bool operator==(const LocationRegion&, const LocationRegion&) = default;
};

struct RelationConfig {
  double inThreshold = 0.8;
  double onGap = 0.02;
  double onOverlap = 0.5;
  double ownRadius = 1.0;
  double ownMargin = 0.2;
  double touchRadius = 0.1;
  int debounceFrames = 3;
  std::bitset<kRelationKindCount> enabled = std::bitset<kRelationKindCount>().set();

  bool is_enabled(RelationKind k) const { return enabled.test(static_cast<std::size_t>(k)); }
};

struct OwnershipRecord {
  std::string objectId;
  std::string ownerId;
  double assignedAt = 0.0;

  friend bool operator==(const OwnershipRecord&, const OwnershipRecord&) = default;
};

/// o1 is in o2 when at least 80% of o1's volume lies inside o2.
/// Throws Error("degenerate-box") for a zero-volume o1.
bool rel_in(const Aabb& o1, const Aabb& o2, double threshold = 0.8);

/// o1 rests on o2: o1's bottom is at or above o2's top, within `onGap`, with
/// horizontal overlap of at least `onOverlap` of the smaller footprint.
bool rel_on(const Aabb& o1, const Aabb& o2, const RelationConfig& cfg);

/// Box gap no greater than the largest of the six extents of both boxes.
bool rel_near(const Aabb& o1, const Aabb& o2);

/// Near, and no box in `others` crosses the open centroid-to-centroid segment.
bool rel_next_to(const Aabb& o1, const Aabb& o2, std::span<const Aabb> others);

bool rel_in_location(const TrackedEntity& e, const LocationRegion& r);

/// Owner of an object that has just appeared: the unique person within
/// ownRadius that is at least ownMargin closer than every other person.
std::optional<OwnershipRecord> infer_ownership(const TrackedEntity& newTrack,
                                               std::span<const TrackedEntity> persons,
                                               const RelationConfig& cfg, double now);

/// Remembers who touched each object last.
class TouchLedger {
 public:
  struct Touch {
    std::string person;
    double at = 0.0;
    friend bool operator==(const Touch&, const Touch&) = default;
  };

  /// Refreshes the ledger from hands of present persons at time `now` and
  /// returns a LastTouchedBy relation for every object ever touched that is
  /// still among `objects`.
  std::vector<Relation> update(std::span<const TrackedEntity> objects,
                               std::span<const TrackedEntity> persons,
                               const RelationConfig& cfg, double now);

  std::optional<Touch> last_touch(const std::string& objectId) const;
  const std::map<std::string, Touch>& entries() const { return touches_; }

 private:
  std::map<std::string, Touch> touches_;
};

/// Extra per-frame facts that are not pure geometry.
struct RelationContext {
  const std::map<std::string, std::string>* owners = nullptr;  // objectId -> personId
  std::span<const Relation> lastTouched;
};

/// Evaluates every enabled relation over the tracks present at `now` and
/// debounces against `prior`.
RelationSet compute_relations(std::span<const TrackedEntity> tracks,
                              std::span<const LocationRegion> regions, const RelationSet& prior,
                              const RelationConfig& cfg, double now,
                              const RelationContext& ctx = {});

}  // namespace scenekeeper
