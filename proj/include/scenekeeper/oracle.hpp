#pragma once

#include <span>
#include <string>
#include <vector>

#include "scenekeeper/geometry.hpp"
#include "scenekeeper/relations.hpp"
#include "scenekeeper/simulator.hpp"

// Brute-force reference evaluation of the relation rules, written without
// the closed-form routines in geometry/relations. Used by tests only.
namespace scenekeeper::oracle {

/// Band half-width around every threshold inside which a verdict is
/// considered borderline.
inline constexpr double kBand = 0.01;

struct Verdict {
  bool value = false;
  bool borderline = false;
};

/// Fraction of `inner`'s volume inside `outer`, by counting the centers of
/// a voxel grid laid over `inner` (cells at most `voxel` per side and at
/// least 200 per axis).
double voxel_containment(const Aabb& inner, const Aabb& outer, double voxel = 0.01);

/// Box-to-box distance by alternating projections.
double projected_gap(const Aabb& a, const Aabb& b);

/// Horizontal overlap area by counting cells over the smaller footprint.
double counted_overlap(const Aabb& a, const Aabb& b);

Verdict in(const Aabb& o1, const Aabb& o2, const RelationConfig& cfg = {});
Verdict on(const Aabb& o1, const Aabb& o2, const RelationConfig& cfg = {});
Verdict near(const Aabb& o1, const Aabb& o2);

/// Samples the centroid segment every `step` meters. Borderline when
/// inflating or shrinking the blockers by kBand changes the answer.
Verdict clear_between(const Aabb& o1, const Aabb& o2, std::span<const Aabb> others,
                      double step = 0.001);

struct Box {
  std::string id;
  Aabb box;
};

struct PairVerdicts {
  std::string a;
  std::string b;
  Verdict inAB, inBA, onAB, onBA, near, nextTo;
};

/// Every ordered relation between every unordered pair of boxes.
std::vector<PairVerdicts> evaluate(std::span<const Box> boxes, const RelationConfig& cfg = {});

/// Relations (In, On, Near, NextTo, InLocation) that hold at time t, named
/// by prop label and region name.
std::vector<Relation> relations_at(const ScenarioScript& script, const ScenePose& pose,
                                   const RelationConfig& cfg = {});

}  // namespace scenekeeper::oracle
