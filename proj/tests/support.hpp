#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "scenekeeper/frame.hpp"
#include "scenekeeper/geometry.hpp"
#include "scenekeeper/tracking.hpp"

namespace testing_support {

using namespace scenekeeper;

// Seeded generator for the property tests. Each helper draws from it in a
// fixed order so a failing case can be reproduced from the seed alone.
class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
  bool coin(double p = 0.5) { return uniform(0.0, 1.0) < p; }

  /// Value on a 1 cm lattice in [lo, hi].
  double cm(double lo, double hi) {
    return integer(static_cast<int>(std::lround(lo * 100)), static_cast<int>(std::lround(hi * 100))) / 100.0;
  }

  /// Box with cm-lattice corners, sides in [minSide, maxSide], inside `area`.
  Aabb lattice_box(const Aabb& area, double minSide, double maxSide) {
    Vec3 size{cm(minSide, maxSide), cm(minSide, maxSide), cm(minSide, maxSide)};
    Vec3 lo{cm(area.min.x, area.max.x - size.x), cm(area.min.y, area.max.y - size.y),
            cm(area.min.z, area.max.z - size.z)};
    return {lo, lo + size};
  }

  Vec3 unit_planar() {
    const double a = uniform(0.0, 2.0 * M_PI);
    return {std::cos(a), std::sin(a), 0.0};
  }

  std::mt19937_64& engine() { return rng_; }

 private:
  std::mt19937_64 rng_;
};

/// Random tabletop on a 1 cm lattice: boxes standing on the surface, some
/// stacked on earlier boxes and some nested inside them, so every relation
/// kind shows up with reasonable frequency.
inline std::vector<Aabb> random_scene(Gen& g, int count) {
  const Aabb area{{0, 0, 0}, {0.8, 0.6, 0.6}};
  std::vector<Aabb> boxes;
  while (static_cast<int>(boxes.size()) < count) {
    const int mode = boxes.empty() ? 0 : g.integer(0, 3);
    if (mode == 1) {
      // Stacked on top of an earlier box, partly overhanging.
      const Aabb& base = boxes[g.integer(0, static_cast<int>(boxes.size()) - 1)];
      const Vec3 size{g.cm(0.03, 0.2), g.cm(0.03, 0.2), g.cm(0.01, 0.1)};
      const double x = g.cm(base.min.x - size.x * 0.8, base.max.x - size.x * 0.2);
      const double y = g.cm(base.min.y - size.y * 0.8, base.max.y - size.y * 0.2);
      const double z = base.max.z + g.integer(0, 3) / 100.0;
      boxes.push_back({{x, y, z}, {x + size.x, y + size.y, z + size.z}});
    } else if (mode == 2) {
      // Mostly inside an earlier box.
      const Aabb& outer = boxes[g.integer(0, static_cast<int>(boxes.size()) - 1)];
      const Vec3 e = outer.extents();
      if (e.x < 0.04 || e.y < 0.04 || e.z < 0.04) continue;
      Vec3 lo{g.cm(outer.min.x, outer.max.x - 0.02), g.cm(outer.min.y, outer.max.y - 0.02),
              g.cm(outer.min.z, outer.max.z - 0.02)};
      Vec3 hi{g.cm(lo.x + 0.01, outer.max.x + 0.03), g.cm(lo.y + 0.01, outer.max.y + 0.03),
              g.cm(lo.z + 0.01, outer.max.z + 0.03)};
      boxes.push_back({lo, hi});
    } else {
      const Vec3 size{g.cm(0.02, 0.25), g.cm(0.02, 0.25), g.cm(0.02, 0.25)};
      const double x = g.cm(area.min.x, area.max.x - size.x);
      const double y = g.cm(area.min.y, area.max.y - size.y);
      boxes.push_back({{x, y, 0.0}, {x + size.x, y + size.y, size.z}});
    }
  }
  return boxes;
}

inline Aabb box(Vec3 lo, Vec3 hi) { return {lo, hi}; }

inline FrameObject object(const std::string& id, const Aabb& b, std::optional<std::string> label = {},
                          std::optional<std::string> heldBy = {}) {
  return {id, b.center(), b, std::move(heldBy), std::move(label)};
}

inline FramePerson person(const std::string& id, const Vec3& at, std::vector<Hand> hands = {}) {
  const Aabb b{{at.x - 0.2, at.y - 0.2, 0.0}, {at.x + 0.2, at.y + 0.2, 1.7}};
  return {id, b.center(), b, std::move(hands)};
}

inline DetectionFrame frame(std::int64_t id, double t, std::vector<FramePerson> persons,
                            std::vector<FrameObject> objects) {
  return {id, t, std::move(persons), std::move(objects)};
}

inline TrackedEntity track(const std::string& id, EntityKind kind, const Aabb& b, double seen = 0.0) {
  TrackedEntity e;
  e.id = id;
  e.kind = kind;
  e.boundingBox = b;
  e.centroid = b.center();
  e.firstSeen = seen;
  e.lastSeen = seen;
  return e;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("sk-test-" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace testing_support
