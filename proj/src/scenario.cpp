#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "scenekeeper/error.hpp"
#include "scenekeeper/simulator.hpp"

namespace scenekeeper {
namespace {

[[noreturn]] void fail(const std::string& where, const std::string& what) {
  throw Error("scenario", where + ": " + what);
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

std::string text(const YAML::Node& node, const std::string& where) {
  if (!node.IsScalar()) fail(where, "expected a string");
  return node.as<std::string>();
}

std::vector<double> numbers(const YAML::Node& node, const std::string& where, std::size_t n) {
  if (!node.IsSequence() || node.size() != n) {
    fail(where, "expected " + std::to_string(n) + " numbers");
  }
  std::vector<double> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(number(node[i], where));
  return out;
}

Vec3 vec3(const YAML::Node& node, const std::string& where) {
  const auto v = numbers(node, where, 3);
  return {v[0], v[1], v[2]};
}

Aabb box(const YAML::Node& node, const std::string& where) {
  check_keys(node, where, {"min", "max"});
  if (!node["min"] || !node["max"]) fail(where, "needs min and max");
  const Aabb b{vec3(node["min"], where + ".min"), vec3(node["max"], where + ".max")};
  if (!b.valid()) fail(where, "min exceeds max");
  return b;
}

void check_time(double t, const ScenarioScript& s, const std::string& where) {
  if (t < 0.0 || t > s.duration) fail(where, "time outside [0, duration]");
}

std::optional<std::string> optional_text(const YAML::Node& node, const char* key,
                                         const std::string& where) {
  if (!node[key] || node[key].IsNull()) return std::nullopt;
  return text(node[key], where + "." + key);
}

Actor parse_actor(const YAML::Node& n, const std::string& where, const ScenarioScript& s) {
  check_keys(n, where, {"name", "height", "radius", "path", "gestures"});
  Actor a;
  if (!n["name"]) fail(where, "missing name");
  a.name = text(n["name"], where + ".name");
  if (n["height"]) a.height = number(n["height"], where + ".height");
  if (n["radius"]) a.radius = number(n["radius"], where + ".radius");
  if (!(a.height > 0.0) || !(a.radius > 0.0)) fail(where, "height and radius must be positive");
  if (!n["path"] || !n["path"].IsSequence() || n["path"].size() == 0) fail(where, "missing path");
  for (std::size_t i = 0; i < n["path"].size(); ++i) {
    const YAML::Node k = n["path"][i];
    const std::string w = where + ".path[" + std::to_string(i) + "]";
    check_keys(k, w, {"t", "at", "absent"});
    ActorKey key;
    key.t = number(k["t"], w + ".t");
    check_time(key.t, s, w);
    if (k["absent"]) {
      key.absent = k["absent"].as<bool>();
    } else {
      const auto xy = numbers(k["at"], w + ".at", 2);
      key.x = xy[0];
      key.y = xy[1];
    }
    if (!a.path.empty() && key.t <= a.path.back().t) fail(w, "times must increase");
    a.path.push_back(key);
  }
  if (n["gestures"]) {
    for (std::size_t i = 0; i < n["gestures"].size(); ++i) {
      const YAML::Node g = n["gestures"][i];
      const std::string w = where + ".gestures[" + std::to_string(i) + "]";
      check_keys(g, w, {"from", "to", "hand", "point_at"});
      Gesture gesture;
      gesture.from = number(g["from"], w + ".from");
      gesture.to = number(g["to"], w + ".to");
      check_time(gesture.from, s, w);
      check_time(gesture.to, s, w);
      if (gesture.to < gesture.from) fail(w, "ends before it starts");
      gesture.hand = vec3(g["hand"], w + ".hand");
      if (g["point_at"]) gesture.target = vec3(g["point_at"], w + ".point_at");
      a.gestures.push_back(gesture);
    }
  }
  return a;
}

Prop parse_prop(const YAML::Node& n, const std::string& where, const ScenarioScript& s) {
  check_keys(n, where, {"label", "size", "owner", "timeline"});
  Prop p;
  if (!n["label"]) fail(where, "missing label");
  p.label = text(n["label"], where + ".label");
  p.size = vec3(n["size"], where + ".size");
  if (!(p.size.x > 0.0 && p.size.y > 0.0 && p.size.z > 0.0)) fail(where, "size must be positive");
  p.owner = optional_text(n, "owner", where);
  if (!n["timeline"] || !n["timeline"].IsSequence() || n["timeline"].size() == 0) {
    fail(where, "missing timeline");
  }
  for (std::size_t i = 0; i < n["timeline"].size(); ++i) {
    const YAML::Node k = n["timeline"][i];
    const std::string w = where + ".timeline[" + std::to_string(i) + "]";
    check_keys(k, w, {"t", "at", "held_by", "absent"});
    PropKey key;
    key.t = number(k["t"], w + ".t");
    check_time(key.t, s, w);
    const int kinds = (k["at"] ? 1 : 0) + (k["held_by"] ? 1 : 0) + (k["absent"] ? 1 : 0);
    if (kinds != 1) fail(w, "needs exactly one of at, held_by, absent");
    if (k["at"]) {
      key.kind = PropKeyKind::Rest;
      key.at = vec3(k["at"], w + ".at");
    } else if (k["held_by"]) {
      key.kind = PropKeyKind::Held;
      key.heldBy = text(k["held_by"], w + ".held_by");
    } else {
      key.kind = PropKeyKind::Absent;
    }
    if (!p.timeline.empty() && key.t <= p.timeline.back().t) fail(w, "times must increase");
    p.timeline.push_back(key);
  }
  return p;
}

DialogEvent parse_event(const YAML::Node& n, const std::string& where, const ScenarioScript& s) {
  check_keys(n, where, {"t", "keyword", "gaze", "utterance", "speaker"});
  const double t = number(n["t"], where + ".t");
  check_time(t, s, where);
  const std::optional<std::string> speaker = optional_text(n, "speaker", where);
  const int kinds = (n["keyword"] ? 1 : 0) + (n["gaze"] ? 1 : 0) + (n["utterance"] ? 1 : 0);
  if (kinds != 1) fail(where, "needs exactly one of keyword, gaze, utterance");
  if (n["keyword"]) return KeywordEvent{t, speaker};
  if (n["gaze"]) return GazeEvent{t, speaker};
  return UtteranceEvent{t, text(n["utterance"], where + ".utterance"), speaker};
}

ScenarioScript parse_document(const YAML::Node& root);

}  // namespace

ScenarioScript parse_scenario(const std::string& source) {
  try {
    return parse_document(YAML::Load(source));
  } catch (const YAML::Exception& e) {
    throw Error("scenario", e.what());
  }
}

namespace {

ScenarioScript parse_document(const YAML::Node& root) {
  check_keys(root, "scenario",
             {"name", "duration", "seed", "rate", "resolution", "work_area", "room", "microphone",
              "regions", "actors", "props", "expectations", "events"});

  ScenarioScript s;
  if (!root["name"] || !root["duration"]) fail("scenario", "name and duration are required");
  s.name = text(root["name"], "name");
  s.duration = number(root["duration"], "duration");
  if (!(s.duration > 0.0)) fail("duration", "must be positive");
  if (root["seed"]) s.seed = root["seed"].as<std::uint64_t>();
  if (root["rate"]) s.rate = number(root["rate"], "rate");
  if (!(s.rate > 0.0)) fail("rate", "must be positive");
  if (root["resolution"]) s.resolution = number(root["resolution"], "resolution");
  if (!(s.resolution > 0.0)) fail("resolution", "must be positive");
  if (root["work_area"]) s.workArea = box(root["work_area"], "work_area");
  if (root["room"]) {
    s.room = box(root["room"], "room");
  } else {
    s.room = {{s.workArea.min.x - 1.0, s.workArea.min.y - 1.0, 0.0},
              {s.workArea.max.x + 1.0, s.workArea.max.y + 1.0, 0.0}};
  }
  s.microphone = root["microphone"] ? vec3(root["microphone"], "microphone")
                                    : Vec3{s.workArea.center().x, s.workArea.center().y, 2.5};

  if (root["regions"]) {
    for (std::size_t i = 0; i < root["regions"].size(); ++i) {
      const YAML::Node r = root["regions"][i];
      const std::string w = "regions[" + std::to_string(i) + "]";
      check_keys(r, w, {"name", "box"});
      s.regions.push_back({text(r["name"], w + ".name"), box(r["box"], w + ".box")});
    }
  }
  std::set<std::string> actor_names;
  if (root["actors"]) {
    for (std::size_t i = 0; i < root["actors"].size(); ++i) {
      const std::string w = "actors[" + std::to_string(i) + "]";
      s.actors.push_back(parse_actor(root["actors"][i], w, s));
      if (!actor_names.insert(s.actors.back().name).second) fail(w, "duplicate actor name");
    }
  }
  std::set<std::string> labels;
  if (root["props"]) {
    for (std::size_t i = 0; i < root["props"].size(); ++i) {
      const std::string w = "props[" + std::to_string(i) + "]";
      Prop p = parse_prop(root["props"][i], w, s);
      if (!labels.insert(p.label).second) fail(w, "duplicate label '" + p.label + "'");
      if (actor_names.contains(p.label)) fail(w, "label clashes with an actor name");
      for (const PropKey& k : p.timeline) {
        if (k.kind == PropKeyKind::Held && !actor_names.contains(k.heldBy)) {
          fail(w, "held_by names unknown actor '" + k.heldBy + "'");
        }
      }
      if (p.owner && !actor_names.contains(*p.owner)) fail(w, "owner is not an actor");
      s.props.push_back(std::move(p));
    }
  }
  if (root["expectations"]) {
    for (std::size_t i = 0; i < root["expectations"].size(); ++i) {
      const YAML::Node e = root["expectations"][i];
      const std::string w = "expectations[" + std::to_string(i) + "]";
      check_keys(e, w, {"id", "label", "region", "missing_after"});
      Expectation x;
      x.id = text(e["id"], w + ".id");
      x.objectLabel = text(e["label"], w + ".label");
      x.region = text(e["region"], w + ".region");
      x.missingAfter = number(e["missing_after"], w + ".missing_after");
      s.expectations.push_back(x);
    }
  }
  if (root["events"]) {
    for (std::size_t i = 0; i < root["events"].size(); ++i) {
      s.events.push_back(parse_event(root["events"][i], "events[" + std::to_string(i) + "]", s));
    }
    std::stable_sort(s.events.begin(), s.events.end(), [](const auto& a, const auto& b) {
      return event_time(a) < event_time(b);
    });
  }
  return s;
}

}  // namespace

ScenarioScript load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("scenario", "cannot read " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str());
}

}  // namespace scenekeeper
