#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "scenekeeper/frame.hpp"
#include "scenekeeper/geometry.hpp"

namespace scenekeeper {

enum class EntityKind { Person, WorkObject };

struct Visible {
  friend bool operator==(const Visible&, const Visible&) = default;
};
struct Held {
  std::string agentId;
  friend bool operator==(const Held&, const Held&) = default;
};
struct Lost {
  Vec3 lastCentroid;
  friend bool operator==(const Lost&, const Lost&) = default;
};
using TrackState = std::variant<Visible, Held, Lost>;

struct TrackedEntity {
  std::string id;  // tracker-issued, never reused within a session
  EntityKind kind = EntityKind::WorkObject;
  Aabb boundingBox;
  Vec3 centroid;
  double firstSeen = 0.0;
  double lastSeen = 0.0;
  TrackState state = Visible{};
  std::optional<std::string> label;
  std::string sourceId;     // identity hint from the frame source, may be empty
  std::vector<Hand> hands;  // persons only; hands seen in the latest frame

  bool is_lost() const { return std::holds_alternative<Lost>(state); }
  bool is_held() const { return std::holds_alternative<Held>(state); }
  /// Observed (or carried in a hand) in the frame at time `now`. Tracks that
  /// are merely coasting through the lost-grace period are not present.
  bool present_at(double now) const {
    return !is_lost() && (is_held() || lastSeen == now);
  }

  friend bool operator==(const TrackedEntity&, const TrackedEntity&) = default;
};

struct TrackUpdate {
  std::vector<std::string> appeared;  // new tracks and tracks resumed from Lost
  std::vector<std::string> created;   // subset of `appeared`: brand-new identities
  std::vector<std::string> updated;
  std::vector<std::string> lost;
  double frameTime = 0.0;
};

struct TrackerConfig {
  double gate = 0.3;
  double lostGrace = 1.0;
  double holdRadius = 0.15;
  double reacquireRadius = 0.3;
};

/// What the associator needs to know about a detection.
struct Observation {
  EntityKind kind = EntityKind::WorkObject;
  Vec3 centroid;
};

struct Assignment {
  std::size_t track = 0;      // index into the track list
  std::size_t detection = 0;  // index into the detection list
  double distance = 0.0;

  friend bool operator==(const Assignment&, const Assignment&) = default;
};

/// Greedy nearest-centroid matching within the same kind. Candidate pairs are
/// taken in ascending distance (ties by track id, then detection index), each
/// side used at most once, never farther than `gate`. Lost tracks are skipped.
/// Greedy order can swap identities in crossing configurations where the
/// optimal assignment would not.
std::vector<Assignment> associate(std::span<const TrackedEntity> tracks,
                                  std::span<const Observation> detections, double gate);

class Tracker {
 public:
  explicit Tracker(TrackerConfig cfg = {}) : cfg_(cfg) {}

  /// Advances all tracks to `frame`. Throws Error("time-regression") unless
  /// frame.t is strictly greater than the previous frame time.
  TrackUpdate step(const DetectionFrame& frame);

  const std::vector<TrackedEntity>& tracks() const { return tracks_; }
  const TrackedEntity* find(const std::string& id) const;
  std::optional<double> last_time() const { return last_time_; }
  const TrackerConfig& config() const { return cfg_; }

 private:
  std::string next_id(EntityKind kind);

  TrackerConfig cfg_;
  std::vector<TrackedEntity> tracks_;
  std::optional<double> last_time_;
  std::size_t next_person_ = 1;
  std::size_t next_object_ = 1;
};

}  // namespace scenekeeper
