#include "scenekeeper/detection.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <unordered_map>

#include "scenekeeper/error.hpp"

namespace scenekeeper {
namespace {

std::int64_t cell_key(const GridCell& c) {
  return (static_cast<std::int64_t>(c.row) << 32) | static_cast<std::uint32_t>(c.col);
}

double horizontal_elongation(const Aabb& box) {
  const Vec3 e = box.extents();
  const double longest = std::max(e.x, e.y);
  const double shortest = std::min(e.x, e.y);
  if (shortest <= 0.0) return std::numeric_limits<double>::infinity();
  return longest / shortest;
}

double distance_to_xy_boundary(const Vec3& p, const Aabb& area) {
  return std::min({std::abs(p.x - area.min.x), std::abs(area.max.x - p.x),
                   std::abs(p.y - area.min.y), std::abs(area.max.y - p.y)});
}

// Index of the cell among `candidates` whose point lies nearest the mean of
// the candidates' points; ties resolve to the earliest candidate.
std::size_t most_central(const Protrusion& p, const std::vector<std::size_t>& candidates) {
  Vec3 mean;
  for (std::size_t i : candidates) mean = mean + p.points[i];
  mean = mean * (1.0 / static_cast<double>(candidates.size()));
  std::size_t best = candidates.front();
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t i : candidates) {
    const double dx = p.points[i].x - mean.x;
    const double dy = p.points[i].y - mean.y;
    const double d = dx * dx + dy * dy;
    if (d < best_d - 1e-15) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

std::size_t entry_index(const Protrusion& arm, const Aabb& workArea) {
  double best = std::numeric_limits<double>::infinity();
  for (const Vec3& p : arm.points) best = std::min(best, distance_to_xy_boundary(p, workArea));
  std::vector<std::size_t> tied;
  for (std::size_t i = 0; i < arm.points.size(); ++i) {
    if (distance_to_xy_boundary(arm.points[i], workArea) <= best + 1e-9) tied.push_back(i);
  }
  return most_central(arm, tied);
}

struct CellRange {
  int col0 = 0, col1 = -1, row0 = 0, row1 = -1;  // inclusive
  bool empty() const { return col1 < col0 || row1 < row0; }
};

CellRange work_area_cells(const HeightMap& map, const Aabb& area) {
  const double res = map.resolution();
  CellRange r;
  r.col0 = std::max(0, static_cast<int>(std::ceil((area.min.x - map.origin().x) / res - 0.5)));
  r.col1 = std::min(map.width() - 1,
                    static_cast<int>(std::floor((area.max.x - map.origin().x) / res - 0.5)));
  r.row0 = std::max(0, static_cast<int>(std::ceil((area.min.y - map.origin().y) / res - 0.5)));
  r.row1 = std::min(map.height() - 1,
                    static_cast<int>(std::floor((area.max.y - map.origin().y) / res - 0.5)));
  return r;
}

}  // namespace

std::vector<Protrusion> segment_protrusions(const HeightMap& map, double surfaceHeight,
                                            double minRise) {
  if (!(minRise > 0.0)) throw Error("invalid-argument", "minRise must be positive");
  const double threshold = surfaceHeight + minRise;
  const int w = map.width();
  const int h = map.height();
  const double res = map.resolution();
  std::vector<char> visited(map.samples().size(), 0);
  std::vector<Protrusion> out;

  for (int row = 0; row < h; ++row) {
    for (int col = 0; col < w; ++col) {
      const std::size_t seed = map.index(col, row);
      if (visited[seed] || !(map.at(col, row) > threshold)) continue;

      Protrusion p;
      p.resolution = res;
      p.origin = map.origin();
      std::deque<GridCell> frontier{{col, row}};
      visited[seed] = 1;
      while (!frontier.empty()) {
        const GridCell c = frontier.front();
        frontier.pop_front();
        p.cells.push_back(c);
        constexpr int kDc[4] = {1, -1, 0, 0};
        constexpr int kDr[4] = {0, 0, 1, -1};
        for (int k = 0; k < 4; ++k) {
          const int nc = c.col + kDc[k];
          const int nr = c.row + kDr[k];
          if (!map.in_bounds(nc, nr)) continue;
          const std::size_t ni = map.index(nc, nr);
          if (visited[ni] || !(map.at(nc, nr) > threshold)) continue;
          visited[ni] = 1;
          frontier.push_back({nc, nr});
        }
      }

      std::sort(p.cells.begin(), p.cells.end(), [](const GridCell& a, const GridCell& b) {
        return a.row != b.row ? a.row < b.row : a.col < b.col;
      });
      int c0 = w, c1 = -1, r0 = h, r1 = -1;
      double top = 0.0;
      p.points.reserve(p.cells.size());
      for (const GridCell& c : p.cells) {
        p.points.push_back(map.cell_point(c.col, c.row));
        top = std::max(top, map.at(c.col, c.row));
        c0 = std::min(c0, c.col);
        c1 = std::max(c1, c.col);
        r0 = std::min(r0, c.row);
        r1 = std::max(r1, c.row);
        if (c.col == 0 || c.row == 0 || c.col == w - 1 || c.row == h - 1) {
          p.touchesWorkAreaEdge = true;
        }
      }
      const Vec3& o = map.origin();
      p.boundingBox = {{o.x + c0 * res, o.y + r0 * res, o.z + surfaceHeight},
                       {o.x + (c1 + 1) * res, o.y + (r1 + 1) * res, o.z + top}};
      p.maxHeight = top - surfaceHeight;
      p.footprintArea = static_cast<double>(p.cells.size()) * res * res;
      out.push_back(std::move(p));
    }
  }

  std::stable_sort(out.begin(), out.end(), [](const Protrusion& a, const Protrusion& b) {
    return a.cells.size() > b.cells.size();
  });
  return out;
}

Classification classify_protrusion(const Protrusion& p, const DetectorConfig& cfg) {
  if (p.maxHeight >= cfg.minPersonHeight && p.maxHeight <= cfg.maxPersonHeight &&
      p.footprintArea >= cfg.minPersonFootprint && p.footprintArea <= cfg.maxPersonFootprint) {
    return Classification::Person;
  }
  if (p.touchesWorkAreaEdge && p.maxHeight < cfg.minPersonHeight &&
      horizontal_elongation(p.boundingBox) >= cfg.armElongation) {
    return Classification::Arm;
  }
  if (p.maxHeight > 0.0 && p.maxHeight <= cfg.maxObjectHeight) return Classification::WorkObject;
  return Classification::Reject;
}

GridCell arm_entry_cell(const Protrusion& arm, const Aabb& workArea) {
  if (arm.cells.empty()) throw Error("not-an-arm", "empty protrusion");
  return arm.cells[entry_index(arm, workArea)];
}

Hand extract_hand(const Protrusion& arm, const Aabb& workArea) {
  if (!arm.touchesWorkAreaEdge || arm.cells.empty()) throw Error("not-an-arm");

  const std::size_t entry = entry_index(arm, workArea);
  std::unordered_map<std::int64_t, std::size_t> lookup;
  lookup.reserve(arm.cells.size() * 2);
  for (std::size_t i = 0; i < arm.cells.size(); ++i) lookup.emplace(cell_key(arm.cells[i]), i);

  // Breadth-first hop count over the component, 8-neighbourhood.
  std::vector<int> hops(arm.cells.size(), -1);
  std::deque<std::size_t> frontier{entry};
  hops[entry] = 0;
  int farthest = 0;
  while (!frontier.empty()) {
    const std::size_t i = frontier.front();
    frontier.pop_front();
    farthest = std::max(farthest, hops[i]);
    for (int dr = -1; dr <= 1; ++dr) {
      for (int dc = -1; dc <= 1; ++dc) {
        if (dr == 0 && dc == 0) continue;
        const auto it = lookup.find(cell_key({arm.cells[i].col + dc, arm.cells[i].row + dr}));
        if (it == lookup.end() || hops[it->second] >= 0) continue;
        hops[it->second] = hops[i] + 1;
        frontier.push_back(it->second);
      }
    }
  }

  std::vector<std::size_t> tip;
  for (std::size_t i = 0; i < hops.size(); ++i) {
    if (hops[i] == farthest) tip.push_back(i);
  }
  const std::size_t hand_index = most_central(arm, tip);

  Hand hand{arm.points[hand_index], std::nullopt};
  hand.pointing = estimate_pointing(arm, arm.points[entry], hand.position);
  return hand;
}

std::optional<Vec3> estimate_pointing(const Protrusion& arm, const Vec3& entry, const Vec3& hand) {
  if (arm.points.size() < 3) return std::nullopt;
  PrincipalAxis pa;
  try {
    pa = principal_axis(arm.points);
  } catch (const Error&) {
    return std::nullopt;
  }
  if (pa.confidence < kMinAxisConfidence) return std::nullopt;
  if (dot(pa.axis, hand - entry) < 0.0) pa.axis = pa.axis * -1.0;
  return pa.axis;
}

DetectionFrame detect_frame(const HeightMap& map, const DetectorConfig& cfg, double t) {
  DetectionFrame frame;
  frame.t = t;

  const CellRange wa = work_area_cells(map, cfg.workArea);
  const double res = map.resolution();

  std::vector<Protrusion> inner;
  HeightMap outer = map;
  if (!wa.empty()) {
    const int cw = wa.col1 - wa.col0 + 1;
    const int ch = wa.row1 - wa.row0 + 1;
    std::vector<double> crop;
    crop.reserve(static_cast<std::size_t>(cw) * static_cast<std::size_t>(ch));
    for (int r = wa.row0; r <= wa.row1; ++r) {
      for (int c = wa.col0; c <= wa.col1; ++c) {
        crop.push_back(map.at(c, r));
        outer.set(c, r, 0.0);
      }
    }
    const Vec3 crop_origin{map.origin().x + wa.col0 * res, map.origin().y + wa.row0 * res,
                           map.origin().z};
    inner = segment_protrusions(HeightMap(cw, ch, res, crop_origin, std::move(crop)),
                                cfg.surfaceHeight, cfg.minRise);
  }
  std::vector<Protrusion> outside =
      segment_protrusions(outer, cfg.surfaceHeight, cfg.minRise);
  for (Protrusion& p : outside) p.touchesWorkAreaEdge = false;

  std::vector<const Protrusion*> all;
  for (const Protrusion& p : outside) all.push_back(&p);
  for (const Protrusion& p : inner) all.push_back(&p);

  struct PendingArm {
    const Protrusion* arm;
    Vec3 entry;
    Hand hand;
  };
  std::vector<PendingArm> arms;
  for (const Protrusion* p : all) {
    switch (classify_protrusion(*p, cfg)) {
      case Classification::Person:
        frame.persons.push_back({"", p->boundingBox.center(), p->boundingBox, {}});
        break;
      case Classification::WorkObject:
        frame.objects.push_back(
            {"", p->boundingBox.center(), p->boundingBox, std::nullopt, std::nullopt});
        break;
      case Classification::Arm: {
        const Hand hand = extract_hand(*p, cfg.workArea);
        const Vec3 entry = p->points[entry_index(*p, cfg.workArea)];
        arms.push_back({p, entry, hand});
        break;
      }
      case Classification::Reject:
        break;
    }
  }

  const std::size_t body_count = frame.persons.size();
  for (const PendingArm& a : arms) {
    std::optional<std::size_t> owner;
    double best = 0.0;
    for (std::size_t i = 0; i < body_count; ++i) {
      const double d = point_box_distance(a.entry, frame.persons[i].bbox);
      if (d <= cfg.armAttachRadius && (!owner || d < best)) {
        best = d;
        owner = i;
      }
    }
    if (owner) {
      frame.persons[*owner].hands.push_back(a.hand);
    } else {
      frame.persons.push_back({"", a.arm->boundingBox.center(), a.arm->boundingBox, {a.hand}});
    }
  }
  return frame;
}

}  // namespace scenekeeper
