#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "scenekeeper/detection.hpp"
#include "scenekeeper/pipeline.hpp"
#include "scenekeeper/simulator.hpp"

namespace scenekeeper {

enum class SourceKind { None, LiveSim, Replay };

struct SourceConfig {
  SourceKind kind = SourceKind::None;
  std::filesystem::path scenario;  // LiveSim
  RunMode mode = RunMode::ViaFrames;
  std::filesystem::path recording;  // Replay
  double speed = 1.0;               // Replay and LiveSim pacing; 0 = no waiting
};

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8077;
  std::optional<int> streamPort;  // raw frame lines over TCP on `host`
  std::optional<std::filesystem::path> snapshotPath;
  SourceConfig source;
  DetectorConfig detector;
  PipelineConfig pipeline;
};

/// Parses the YAML service configuration. Relative paths are resolved
/// against `baseDir`. Throws Error("config", ...) for unknown keys and
/// invalid values.
ServiceConfig parse_config(const std::string& text, const std::filesystem::path& baseDir = ".");
ServiceConfig load_config(const std::filesystem::path& path);

}  // namespace scenekeeper
