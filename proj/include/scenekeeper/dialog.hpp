#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "scenekeeper/knowledge.hpp"
#include "scenekeeper/relations.hpp"
#include "scenekeeper/tracking.hpp"

namespace scenekeeper {

/// Spoken name that gets the system's attention.
inline constexpr std::string_view kAttentionKeyword = "celia";
/// Seconds a user has to start the request once attention is triggered.
inline constexpr double kAttentionWindow = 2.0;

enum class Intent { WhereIs, WhoseIs, WhatIsRelated, AssertLabel };

enum class OwnerRefKind { None, The, My, Your, Named };

struct OwnerRef {
  OwnerRefKind kind = OwnerRefKind::None;
  std::string name;  // Named only, as spoken

  friend bool operator==(const OwnerRef&, const OwnerRef&) = default;
};

struct Query {
  Intent intent = Intent::WhereIs;
  std::optional<std::string> objectLabel;
  OwnerRef owner;
  bool deictic = false;
  std::optional<RelationKind> relation;  // WhatIsRelated only

  friend bool operator==(const Query&, const Query&) = default;
};

/// Splits a leading attention keyword ("Celia, ...") off an utterance.
/// Returns whether it was present and the remaining text.
std::pair<bool, std::string> split_keyword(std::string_view text);

/// Case-insensitive grammar:
///   [celia ,] where is (my|your|<name>'s|the) <label>
///   whose <label> is (this|that)
///   what is (in|on|near|next to) (the <label>|this)
///   this is (my|<name>'s) <label>
/// Throws Error("unparsed-utterance") when nothing matches.
Query parse_query(std::string_view text);

/// Sets a label (and, if absent, an owner) for an object; produced by
/// "this is my wallet" and applied to the knowledge base by the caller.
struct LabelAssertion {
  std::string objectId;
  std::string label;
  std::optional<std::string> ownerId;

  friend bool operator==(const LabelAssertion&, const LabelAssertion&) = default;
};

struct Answer {
  std::string text;
  std::optional<std::string> groundedObject;
  std::vector<Relation> relationsUsed;
  double time = 0.0;
  std::optional<std::string> speaker;
  std::optional<LabelAssertion> assertion;

  friend bool operator==(const Answer&, const Answer&) = default;
};

struct Ray {
  Vec3 origin;
  Vec3 direction;  // unit
};

struct Grounded {
  std::string id;
  friend bool operator==(const Grounded&, const Grounded&) = default;
};
struct Candidates {
  std::vector<std::string> ids;
  friend bool operator==(const Candidates&, const Candidates&) = default;
};
struct NoPointing {
  friend bool operator==(const NoPointing&, const NoPointing&) = default;
};
using GroundResult = std::variant<Grounded, Candidates, NotFound, NoPointing>;

/// Largest perpendicular distance at which a pointed-at box is selected.
inline constexpr double kPointingTolerance = 0.3;

/// Smallest distance between the ray and the box, and the ray parameter
/// (range) where it is attained.
std::pair<double, double> ray_box_distance(const Ray& ray, const Aabb& box);

/// Resolves a query's referent to a tracked object.
GroundResult ground(const Query& q, const KnowledgeBase& kb, std::span<const TrackedEntity> tracks,
                    const std::optional<Ray>& pointing, const std::optional<std::string>& speaker,
                    double now);

/// "It is next to the vase, under the magazines" style description built
/// from the fact's stable relations.
Answer render_answer(const ObjectFact& fact, const KnowledgeBase& kb);

struct KeywordEvent {
  double t = 0.0;
  std::optional<std::string> speaker;
};
struct GazeEvent {
  double t = 0.0;
  std::optional<std::string> speaker;
};
struct UtteranceEvent {
  double t = 0.0;  // start of speech
  std::string text;
  std::optional<std::string> speaker;
};
struct TickEvent {
  double t = 0.0;
};
using DialogEvent = std::variant<KeywordEvent, GazeEvent, UtteranceEvent, TickEvent>;
double event_time(const DialogEvent& ev);

struct DialogIdle {
  friend bool operator==(const DialogIdle&, const DialogIdle&) = default;
};
struct DialogAttending {
  double deadline = 0.0;
  friend bool operator==(const DialogAttending&, const DialogAttending&) = default;
};
/// Waiting for the answer to a "which one?" question.
struct DialogEngaged {
  Query pending;
  std::vector<std::string> candidates;
  double askedAt = 0.0;
  friend bool operator==(const DialogEngaged&, const DialogEngaged&) = default;
};

struct AttentionState {
  std::variant<DialogIdle, DialogAttending, DialogEngaged> mode = DialogIdle{};
  std::optional<std::string> speaker;

  friend bool operator==(const AttentionState&, const AttentionState&) = default;
};
std::string_view mode_name(const AttentionState& s);

/// Read-only view of the world an answer is computed against.
struct WorldView {
  const KnowledgeBase& kb;
  std::span<const TrackedEntity> tracks;
  Vec3 microphone;
};

inline constexpr std::string_view kUnparsedReply = "Sorry, I did not understand that.";

class DialogManager {
 public:
  /// Feeds one event; events must arrive in time order.
  std::optional<Answer> on_event(const DialogEvent& ev, const WorldView& world);
  const AttentionState& state() const { return state_; }

 private:
  Answer respond(const Query& q, const std::optional<std::string>& speaker, double now,
                 const WorldView& world);
  Answer follow_up(const DialogEngaged& engaged, const std::string& text,
                   const std::optional<std::string>& speaker, double now, const WorldView& world);

  AttentionState state_;
};

}  // namespace scenekeeper
