#pragma once

#include <optional>
#include <vector>

#include "scenekeeper/frame.hpp"
#include "scenekeeper/geometry.hpp"

namespace scenekeeper {

struct GridCell {
  int col = 0;
  int row = 0;

  friend bool operator==(const GridCell&, const GridCell&) = default;
};

/// A 4-connected region rising above the reference surface.
struct Protrusion {
  std::vector<GridCell> cells;  // ascending grid index
  std::vector<Vec3> points;     // cell centers lifted to their heights, parallel to `cells`
  Aabb boundingBox;             // cell footprints from the surface up to the highest point
  bool touchesWorkAreaEdge = false;
  double maxHeight = 0.0;  // above the reference surface
  double footprintArea = 0.0;
  double resolution = 0.01;
  Vec3 origin;  // grid origin of the map the cells index into
};

enum class Classification { Person, WorkObject, Arm, Reject };

/// Thresholds for the stalagmite/bump model. Heights are measured from the
/// reference surface, areas are horizontal footprints.
struct DetectorConfig {
  double surfaceHeight = 0.0;
  double minRise = 0.02;
  double maxObjectHeight = 0.6;
  double minPersonHeight = 1.2;
  double maxPersonHeight = 2.2;
  double minPersonFootprint = 0.05;
  double maxPersonFootprint = 0.6;
  double armElongation = 3.0;
  double armAttachRadius = 0.8;
  Aabb workArea{{0, 0, 0}, {2.0, 1.2, 1.0}};
};

/// Connected components of cells with sample > surfaceHeight + minRise,
/// ordered by descending footprint, ties by smallest grid index.
/// `touchesWorkAreaEdge` is set for components reaching the map border.
std::vector<Protrusion> segment_protrusions(const HeightMap& map, double surfaceHeight,
                                            double minRise);

Classification classify_protrusion(const Protrusion& p, const DetectorConfig& cfg);

/// The arm cell closest to the work-area boundary (where the arm enters).
GridCell arm_entry_cell(const Protrusion& arm, const Aabb& workArea);

/// Hand at the geodesically farthest arm point from the entry cell.
/// Throws Error("not-an-arm") when the protrusion does not touch the edge.
Hand extract_hand(const Protrusion& arm, const Aabb& workArea);

/// Principal axis of the arm oriented from `entry` towards `hand`; empty when
/// the arm has fewer than 3 points or its axis confidence is below 2.
std::optional<Vec3> estimate_pointing(const Protrusion& arm, const Vec3& entry, const Vec3& hand);

/// Full pipeline on one map: segment, classify, attach hands to persons.
/// Work-area cells are segmented against the work-area border so arms
/// reaching in from outside show up as edge-touching protrusions.
DetectionFrame detect_frame(const HeightMap& map, const DetectorConfig& cfg, double t);

}  // namespace scenekeeper
