#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "scenekeeper/relations.hpp"
#include "scenekeeper/tracking.hpp"

namespace scenekeeper {

struct ObjectFact {
  std::string objectId;
  std::optional<std::string> label;
  bool labelAsserted = false;  // set by a user assertion; wins over source labels
  double lastSeenAt = 0.0;
  Vec3 lastCentroid;
  std::vector<Relation> lastStableRelations;  // stable relations mentioning the object
  std::optional<std::string> lastTouchedBy;
  std::vector<std::string> lastRegions;  // regions of the most recent stable InLocation
  bool present = false;                   // observed in the latest recorded frame

  friend bool operator==(const ObjectFact&, const ObjectFact&) = default;
};

struct PersonFact {
  std::string personId;
  std::optional<std::string> label;
  double lastSeenAt = 0.0;
  Vec3 lastCentroid;
  bool present = false;

  friend bool operator==(const PersonFact&, const PersonFact&) = default;
};

struct Expectation {
  std::string id;
  std::string objectLabel;
  std::string region;
  double missingAfter = 5.0;

  friend bool operator==(const Expectation&, const Expectation&) = default;
};

enum class AlertKind { Missing, Misplaced };
std::string_view to_string(AlertKind kind);

struct Alert {
  AlertKind kind = AlertKind::Missing;
  std::string expectationId;
  std::string objectLabel;
  std::string region;
  double raisedAt = 0.0;

  friend bool operator==(const Alert&, const Alert&) = default;
};

struct NotFound {
  friend bool operator==(const NotFound&, const NotFound&) = default;
};
using LocateResult = std::variant<ObjectFact, std::vector<ObjectFact>, NotFound>;

/// In-memory store of ownership, per-object facts and the watchlist. Single
/// writer; readers work on copies.
class KnowledgeBase {
 public:
  /// Folds one frame into the store. Throws Error("time-regression") when
  /// rs.frameTime precedes the previously recorded frame.
  void record_frame(const RelationSet& rs, std::span<const TrackedEntity> tracks,
                    std::span<const OwnershipRecord> newOwnerships = {});

  /// Insert-only; returns false (and changes nothing) when a record exists.
  bool add_ownership(const OwnershipRecord& record);
  std::optional<std::string> owner_of(const std::string& objectId) const;
  std::vector<std::string> objects_of(const std::string& personId) const;
  const std::map<std::string, OwnershipRecord>& ownerships() const { return ownership_; }

  /// Label lookup, optionally restricted to one owner. Labels compare
  /// case-insensitively.
  LocateResult locate(const std::string& label,
                      const std::optional<std::string>& owner = std::nullopt) const;

  /// Records a user-given name for an object; later source labels do not
  /// override it.
  void assert_label(const std::string& objectId, const std::string& label);

  const ObjectFact* object(const std::string& id) const;
  const PersonFact* person(const std::string& id) const;
  /// Person by id or by (case-insensitive) label.
  const PersonFact* find_person(const std::string& nameOrId) const;
  /// Display name for an entity: its label, else its id.
  std::string display_name(const std::string& id) const;
  const std::map<std::string, ObjectFact>& objects() const { return objects_; }
  const std::map<std::string, PersonFact>& persons() const { return persons_; }

  void add_expectation(const Expectation& e, double now);
  const std::map<std::string, Expectation>& expectations() const { return expectations_; }
  /// Re-evaluates the watchlist at `now` and returns the active alerts.
  std::vector<Alert> check_expectations(double now);
  std::vector<Alert> active_alerts() const;

  std::optional<double> last_frame_time() const { return last_time_; }

  /// Full store as a versioned JSON-lines document.
  std::string snapshot() const;
  void save(const std::filesystem::path& path) const;
  /// Replaces the store from a snapshot. On any error the store is left
  /// untouched and Error("snapshot") names the offending line.
  void load_text(const std::string& text);
  void load(const std::filesystem::path& path);

  friend bool operator==(const KnowledgeBase&, const KnowledgeBase&) = default;

 private:
  struct WatchState {
    double lastPresentAt = 0.0;
    friend bool operator==(const WatchState&, const WatchState&) = default;
  };

  std::map<std::string, OwnershipRecord> ownership_;
  std::map<std::string, ObjectFact> objects_;
  std::map<std::string, PersonFact> persons_;
  std::map<std::string, Expectation> expectations_;
  std::map<std::string, WatchState> watch_;
  std::map<std::pair<std::string, AlertKind>, Alert> alerts_;
  std::optional<double> last_time_;
};

}  // namespace scenekeeper
