#include "scenekeeper/config.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <fstream>
#include <sstream>

#include "scenekeeper/error.hpp"

namespace scenekeeper {
namespace {

[[noreturn]] void fail(const std::string& where, const std::string& what) {
  throw Error("config", where + ": " + what);
}

void check_keys(const YAML::Node& node, const std::string& where,
                std::initializer_list<const char*> allowed) {
  if (!node.IsMap()) fail(where, "expected a mapping");
  for (const auto& kv : node) {
    const std::string key = kv.first.as<std::string>();
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
      fail(where, "unknown key '" + key + "'");
    }
  }
}

double number(const YAML::Node& node, const std::string& where) {
  try {
    return node.as<double>();
  } catch (const YAML::Exception&) {
    fail(where, "expected a number");
  }
}

double positive(const YAML::Node& node, const std::string& where) {
  const double v = number(node, where);
  if (!(v > 0.0)) fail(where, "must be positive");
  return v;
}

std::string text(const YAML::Node& node, const std::string& where) {
  if (!node.IsScalar()) fail(where, "expected a string");
  return node.as<std::string>();
}

Vec3 vec3(const YAML::Node& node, const std::string& where) {
  if (!node.IsSequence() || node.size() != 3) fail(where, "expected 3 numbers");
  return {number(node[0], where), number(node[1], where), number(node[2], where)};
}

Aabb box(const YAML::Node& node, const std::string& where) {
  check_keys(node, where, {"min", "max"});
  const Aabb b{vec3(node["min"], where + ".min"), vec3(node["max"], where + ".max")};
  if (!b.valid()) fail(where, "min exceeds max");
  return b;
}

void set(const YAML::Node& parent, const char* key, const std::string& where, double& out,
         bool mustBePositive = true) {
  if (!parent[key]) return;
  out = mustBePositive ? positive(parent[key], where + "." + key)
                       : number(parent[key], where + "." + key);
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  const std::filesystem::path path(p);
  return path.is_absolute() ? path : base / path;
}

ServiceConfig parse_root(const YAML::Node& root, const std::filesystem::path& base) {
  ServiceConfig c;
  if (!root || root.IsNull()) return c;
  check_keys(root, "config",
             {"listen", "stream_port", "snapshot_path", "source", "work_area", "microphone", "regions",
              "detector", "tracker", "relations", "expectations"});

  if (root["listen"]) {
    const std::string listen = text(root["listen"], "listen");
    const auto colon = listen.rfind(':');
    if (colon == std::string::npos) fail("listen", "expected host:port");
    c.host = listen.substr(0, colon);
    try {
      c.port = std::stoi(listen.substr(colon + 1));
    } catch (const std::exception&) {
      fail("listen", "bad port");
    }
    if (c.port < 0 || c.port > 65535) fail("listen", "bad port");
  }
  if (root["stream_port"]) {
    c.streamPort = root["stream_port"].as<int>();
    if (*c.streamPort < 0 || *c.streamPort > 65535) fail("stream_port", "bad port");
  }
  if (root["snapshot_path"]) c.snapshotPath = resolve(base, text(root["snapshot_path"], "snapshot_path"));

  if (const YAML::Node s = root["source"]) {
    check_keys(s, "source", {"kind", "scenario", "mode", "path", "speed"});
    const std::string kind = s["kind"] ? text(s["kind"], "source.kind") : "none";
    if (kind == "live-sim") {
      c.source.kind = SourceKind::LiveSim;
      if (!s["scenario"]) fail("source", "live-sim needs a scenario");
      c.source.scenario = resolve(base, text(s["scenario"], "source.scenario"));
    } else if (kind == "replay") {
      c.source.kind = SourceKind::Replay;
      if (!s["path"]) fail("source", "replay needs a path");
      c.source.recording = resolve(base, text(s["path"], "source.path"));
    } else if (kind != "none") {
      fail("source.kind", "expected none, live-sim or replay");
    }
    if (s["mode"]) {
      const std::string mode = text(s["mode"], "source.mode");
      if (mode == "frames") {
        c.source.mode = RunMode::ViaFrames;
      } else if (mode == "heightmaps") {
        c.source.mode = RunMode::ViaHeightMaps;
      } else {
        fail("source.mode", "expected frames or heightmaps");
      }
    }
    if (s["speed"]) {
      c.source.speed = number(s["speed"], "source.speed");
      if (c.source.speed < 0.0) fail("source.speed", "must not be negative");
    }
  }

  if (root["work_area"]) c.detector.workArea = box(root["work_area"], "work_area");
  if (root["microphone"]) c.pipeline.microphone = vec3(root["microphone"], "microphone");
  if (const YAML::Node regions = root["regions"]) {
    for (std::size_t i = 0; i < regions.size(); ++i) {
      const std::string w = "regions[" + std::to_string(i) + "]";
      check_keys(regions[i], w, {"name", "box"});
      c.pipeline.regions.push_back({text(regions[i]["name"], w + ".name"), box(regions[i]["box"], w + ".box")});
    }
  }

  if (const YAML::Node d = root["detector"]) {
    check_keys(d, "detector",
               {"surface_height", "min_rise", "max_object_height", "min_person_height",
                "max_person_height", "min_person_footprint", "max_person_footprint",
                "arm_elongation", "arm_attach_radius"});
    DetectorConfig& x = c.detector;
    set(d, "surface_height", "detector", x.surfaceHeight, false);
    set(d, "min_rise", "detector", x.minRise);
    set(d, "max_object_height", "detector", x.maxObjectHeight);
    set(d, "min_person_height", "detector", x.minPersonHeight);
    set(d, "max_person_height", "detector", x.maxPersonHeight);
    set(d, "min_person_footprint", "detector", x.minPersonFootprint);
    set(d, "max_person_footprint", "detector", x.maxPersonFootprint);
    set(d, "arm_elongation", "detector", x.armElongation);
    set(d, "arm_attach_radius", "detector", x.armAttachRadius);
    if (x.minPersonHeight > x.maxPersonHeight) fail("detector", "person height band is empty");
  }

  if (const YAML::Node t = root["tracker"]) {
    check_keys(t, "tracker", {"gate", "lost_grace", "hold_radius", "reacquire_radius"});
    TrackerConfig& x = c.pipeline.tracker;
    set(t, "gate", "tracker", x.gate);
    set(t, "lost_grace", "tracker", x.lostGrace, false);
    set(t, "hold_radius", "tracker", x.holdRadius);
    set(t, "reacquire_radius", "tracker", x.reacquireRadius);
    if (x.lostGrace < 0.0) fail("tracker.lost_grace", "must not be negative");
  }

  if (const YAML::Node r = root["relations"]) {
    check_keys(r, "relations",
               {"in_threshold", "on_gap", "on_overlap", "own_radius", "own_margin", "touch_radius",
                "debounce_frames", "enabled"});
    RelationConfig& x = c.pipeline.relations;
    set(r, "in_threshold", "relations", x.inThreshold);
    set(r, "on_gap", "relations", x.onGap, false);
    set(r, "on_overlap", "relations", x.onOverlap);
    set(r, "own_radius", "relations", x.ownRadius);
    set(r, "own_margin", "relations", x.ownMargin, false);
    set(r, "touch_radius", "relations", x.touchRadius);
    if (x.inThreshold > 1.0) fail("relations.in_threshold", "must be at most 1");
    if (x.onOverlap > 1.0) fail("relations.on_overlap", "must be at most 1");
    if (r["debounce_frames"]) {
      x.debounceFrames = r["debounce_frames"].as<int>();
      if (x.debounceFrames < 1) fail("relations.debounce_frames", "must be at least 1");
    }
    if (const YAML::Node e = r["enabled"]) {
      if (!e.IsSequence()) fail("relations.enabled", "expected a list of relation kinds");
      x.enabled.reset();
      for (std::size_t i = 0; i < e.size(); ++i) {
        const std::string name = text(e[i], "relations.enabled");
        const auto kind = parse_relation_kind(name);
        if (!kind) fail("relations.enabled", "unknown relation '" + name + "'");
        x.enabled.set(static_cast<std::size_t>(*kind));
      }
    }
  }

  if (const YAML::Node e = root["expectations"]) {
    for (std::size_t i = 0; i < e.size(); ++i) {
      const std::string w = "expectations[" + std::to_string(i) + "]";
      check_keys(e[i], w, {"id", "label", "region", "missing_after"});
      Expectation x;
      x.id = text(e[i]["id"], w + ".id");
      x.objectLabel = text(e[i]["label"], w + ".label");
      x.region = text(e[i]["region"], w + ".region");
      x.missingAfter = number(e[i]["missing_after"], w + ".missing_after");
      if (x.missingAfter < 0.0) fail(w + ".missing_after", "must not be negative");
      c.pipeline.expectations.push_back(x);
    }
  }
  return c;
}

}  // namespace

ServiceConfig parse_config(const std::string& source, const std::filesystem::path& baseDir) {
  try {
    return parse_root(YAML::Load(source), baseDir);
  } catch (const YAML::Exception& e) {
    throw Error("config", e.what());
  }
}

ServiceConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("config", "cannot read " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), path.parent_path().empty() ? "." : path.parent_path());
}

}  // namespace scenekeeper
