#pragma once

#include <chrono>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "scenekeeper/config.hpp"
#include "scenekeeper/dialog.hpp"
#include "scenekeeper/pipeline.hpp"

namespace scenekeeper {

/// JSON renderings shared by the HTTP API, the push channel and the CLI.
std::string answer_json(const Answer& a);
std::string state_json(const Session& s, std::int64_t droppedFrames = 0);
/// Null when the id is unknown.
std::optional<std::string> object_json(const Session& s, const std::string& id);
std::string alerts_json(const Session& s);

/// The long-running process: a frame source, a single pipeline worker and
/// an HTTP server whose handlers read immutable snapshots of its state.
///
///   GET  /state            tracks, regions, stable relations, alerts, attention
///   GET  /objects/{id}     one object (404 when unknown)
///   GET  /alerts
///   GET  /healthz
///   GET  /frames           push channel: newline-delimited JSON messages
///   POST /query            {"text", "speaker"?, "time"?}
///   POST /events           {"type": "keyword"|"gaze", "speaker"?, "time"?}
///   POST /scenario         {"path", "mode"?, "speed"?}
///   POST /move             {"entity", "to": [x,y] or [x,y,z]} (live-sim only)
///   POST /snapshot         {"path"?}
class Service {
 public:
  explicit Service(ServiceConfig cfg);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Binds the listener and starts the worker and the configured source.
  /// Throws Error("bind") or Error("config") (unreadable scenario/recording).
  void start();
  /// Port actually bound (useful with port 0).
  int port() const;

  /// Stops the source, drains the worker, writes the snapshot (when a
  /// path is configured) and closes the listener. Idempotent.
  void stop();

  /// Blocks until the current source has delivered everything and the
  /// worker queue is empty, or the timeout passes. Returns true when idle.
  bool wait_idle(std::chrono::milliseconds timeout);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace scenekeeper
