#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "scenekeeper/geometry.hpp"

namespace scenekeeper {

/// A hand end point; `pointing` is a unit vector when a direction was found.
struct Hand {
  Vec3 position;
  std::optional<Vec3> pointing;

  friend bool operator==(const Hand&, const Hand&) = default;
};

struct FramePerson {
  std::string id;  // source identity hint; empty when the source has none
  Vec3 centroid;
  Aabb bbox;
  std::vector<Hand> hands;

  friend bool operator==(const FramePerson&, const FramePerson&) = default;
};

struct FrameObject {
  std::string id;
  Vec3 centroid;
  Aabb bbox;
  std::optional<std::string> heldBy;  // a FramePerson::id
  std::optional<std::string> label;

  friend bool operator==(const FrameObject&, const FrameObject&) = default;
};

/// One timestamped snapshot of everything the sensor side sees. This is the
/// unit carried on the wire, one per line.
struct DetectionFrame {
  std::int64_t frame = 0;
  double t = 0.0;
  std::vector<FramePerson> persons;
  std::vector<FrameObject> objects;

  friend bool operator==(const DetectionFrame&, const DetectionFrame&) = default;
};

/// Rounds to the 1e-6 grid used by the canonical wire encoding, so a frame
/// survives encode/decode unchanged.
double quantize(double value);
Vec3 quantize(const Vec3& v);
Aabb quantize(const Aabb& box);
DetectionFrame quantize(DetectionFrame frame);

}  // namespace scenekeeper
