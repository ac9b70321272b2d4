#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "scenekeeper/detection.hpp"
#include "scenekeeper/dialog.hpp"
#include "scenekeeper/frame.hpp"
#include "scenekeeper/geometry.hpp"
#include "scenekeeper/knowledge.hpp"
#include "scenekeeper/relations.hpp"

namespace scenekeeper {

/// Ground position of an actor; `absent` removes the actor until the next
/// positioned key.
struct ActorKey {
  double t = 0.0;
  double x = 0.0;
  double y = 0.0;
  bool absent = false;
};

/// Hand raised to `hand` over [from, to], optionally pointing at `target`.
struct Gesture {
  double from = 0.0;
  double to = 0.0;
  Vec3 hand;
  std::optional<Vec3> target;
};

struct Actor {
  std::string name;
  double height = 1.7;
  double radius = 0.2;
  std::vector<ActorKey> path;
  std::vector<Gesture> gestures;
};

enum class PropKeyKind { Rest, Held, Absent };

/// From `t` on, the prop rests with its bottom-center at `at`, is carried
/// by actor `heldBy`, or is gone.
struct PropKey {
  double t = 0.0;
  PropKeyKind kind = PropKeyKind::Rest;
  Vec3 at;
  std::string heldBy;
};

struct Prop {
  std::string label;
  Vec3 size;
  std::optional<std::string> owner;  // expected owner, checked by tests
  std::vector<PropKey> timeline;
};

struct ScenarioScript {
  std::string name;
  double duration = 0.0;
  std::uint64_t seed = 0;
  double rate = 30.0;
  double resolution = 0.01;
  Aabb workArea{{0, 0, 0}, {2.0, 1.2, 1.0}};
  Aabb room;  // map extent; defaults to the work area grown by 1 m sideways
  Vec3 microphone;
  std::vector<LocationRegion> regions;
  std::vector<Actor> actors;
  std::vector<Prop> props;
  std::vector<Expectation> expectations;
  std::vector<DialogEvent> events;  // sorted by time
};

/// Parses a scenario document. Throws Error("scenario", ...) naming the
/// problem; unknown keys are rejected.
ScenarioScript parse_scenario(const std::string& text);
ScenarioScript load_scenario(const std::filesystem::path& path);

struct PersonPose {
  std::string name;
  Vec3 position;  // on the floor
  Aabb box;
  std::vector<Hand> hands;
};

struct PropPose {
  std::string label;
  Aabb box;
  std::optional<std::string> heldBy;
};

struct ScenePose {
  double t = 0.0;
  std::vector<PersonPose> persons;
  std::vector<PropPose> props;
};

/// Exact poses at time t. Throws Error("time-out-of-range").
ScenePose pose_at(const ScenarioScript& script, double t);

/// Rasterizes the scene at time t (cylinder + head per person, boxes per
/// prop, flat arm slabs toward each hand).
HeightMap render_height_map(const ScenarioScript& script, double t);

/// Detector settings matching the script's work area.
DetectorConfig detector_config(const ScenarioScript& script);

enum class RunMode { ViaFrames, ViaHeightMaps };

struct FrameTruth {
  ScenePose pose;
  std::vector<Relation> relations;  // oracle relations between prop labels
};

struct GroundTruth {
  std::vector<FrameTruth> frames;
  std::map<std::string, std::string> ownership;  // prop label -> actor name
};

struct ScenarioRun {
  std::vector<DetectionFrame> frames;
  GroundTruth truth;
};

/// Frame times at script.rate starting at 0, inclusive of the last whole
/// frame not after the duration.
std::vector<double> frame_times(const ScenarioScript& script);

/// Exact poses as a frame (ids are actor names and prop labels).
DetectionFrame frame_from_pose(const ScenePose& pose, std::int64_t index);

ScenarioRun run_scenario(const ScenarioScript& script, RunMode mode, bool withTruth = true);

}  // namespace scenekeeper
