#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "scenekeeper/dialog.hpp"
#include "scenekeeper/frame.hpp"
#include "scenekeeper/knowledge.hpp"
#include "scenekeeper/relations.hpp"
#include "scenekeeper/simulator.hpp"
#include "scenekeeper/tracking.hpp"

namespace scenekeeper {

struct PipelineConfig {
  TrackerConfig tracker;
  RelationConfig relations;
  std::vector<LocationRegion> regions;
  std::vector<Expectation> expectations;
  Vec3 microphone{1.0, 0.6, 2.5};
};

/// Everything downstream of the frame stream: tracking, relations, the
/// knowledge base and the dialog manager, driven by frame time.
class Session {
 public:
  explicit Session(PipelineConfig cfg = {});

  /// Tracks, relates and records one frame, then lets the dialog expire
  /// its attention window. Throws Error("time-regression") for frames
  /// that do not advance time.
  void process(const DetectionFrame& frame);

  /// Feeds a dialog event. Label assertions in the answer are applied to
  /// the knowledge base.
  std::optional<Answer> handle(const DialogEvent& ev);

  const PipelineConfig& config() const { return cfg_; }
  const Tracker& tracker() const { return tracker_; }
  const RelationSet& relations() const { return relations_; }
  const KnowledgeBase& kb() const { return kb_; }
  KnowledgeBase& kb() { return kb_; }
  const AttentionState& attention() const { return dialog_.state(); }
  const TouchLedger& touches() const { return touches_; }
  std::optional<double> now() const { return tracker_.last_time(); }
  std::int64_t frames_processed() const { return frames_; }
  std::optional<std::int64_t> last_frame_id() const { return lastFrameId_; }

 private:
  PipelineConfig cfg_;
  Tracker tracker_;
  TouchLedger touches_;
  RelationSet relations_;
  KnowledgeBase kb_;
  DialogManager dialog_;
  std::int64_t frames_ = 0;
  std::optional<std::int64_t> lastFrameId_;
  bool expectationsAdded_ = false;
};

/// Pipeline settings for a scenario: `base` plus the script's regions,
/// expectations and microphone.
PipelineConfig pipeline_for(const ScenarioScript& script, PipelineConfig base = {});

/// Processes `frames` in order and delivers each script event right after
/// the last frame not later than it. Returns the answers given.
std::vector<Answer> play(Session& session, const std::vector<DetectionFrame>& frames,
                         const std::vector<DialogEvent>& events);

}  // namespace scenekeeper
