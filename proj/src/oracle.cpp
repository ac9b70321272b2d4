#include "scenekeeper/oracle.hpp"

#include <algorithm>
#include <cmath>

namespace scenekeeper::oracle {
namespace {

constexpr double kContact = 1e-6;
// Floor on cells per axis so thin boxes are still resolved to ~0.0025.
constexpr long kMinCells = 200;

bool inside(const Vec3& p, const Aabb& b) {
  return p.x >= b.min.x && p.x <= b.max.x && p.y >= b.min.y && p.y <= b.max.y && p.z >= b.min.z &&
         p.z <= b.max.z;
}

Vec3 project(const Vec3& p, const Aabb& b) {
  return {std::clamp(p.x, b.min.x, b.max.x), std::clamp(p.y, b.min.y, b.max.y),
          std::clamp(p.z, b.min.z, b.max.z)};
}

double extent(const Aabb& b, int axis) { return b.max[axis] - b.min[axis]; }

double largest_side(const Aabb& a, const Aabb& b) {
  double m = 0.0;
  for (int axis = 0; axis < 3; ++axis) m = std::max({m, extent(a, axis), extent(b, axis)});
  return m;
}

Aabb grown(const Aabb& b, double d) {
  return {{b.min.x - d, b.min.y - d, b.min.z - d}, {b.max.x + d, b.max.y + d, b.max.z + d}};
}

bool blocked(const Vec3& a, const Vec3& b, std::span<const Aabb> others, double step) {
  const double len = distance(a, b);
  const long n = std::max(2L, static_cast<long>(std::ceil(len / step)));
  for (long k = 1; k < n; ++k) {
    const double s = static_cast<double>(k) / static_cast<double>(n);
    const Vec3 p{a.x + (b.x - a.x) * s, a.y + (b.y - a.y) * s, a.z + (b.z - a.z) * s};
    for (const Aabb& o : others) {
      if (o.min.x <= o.max.x && o.min.y <= o.max.y && o.min.z <= o.max.z && inside(p, o)) {
        return true;
      }
    }
  }
  return false;
}

}  // namespace

double voxel_containment(const Aabb& inner, const Aabb& outer, double voxel) {
  long n[3];
  double h[3];
  for (int axis = 0; axis < 3; ++axis) {
    const double len = extent(inner, axis);
    n[axis] = std::max(kMinCells, static_cast<long>(std::ceil(len / voxel - 1e-9)));
    h[axis] = len / static_cast<double>(n[axis]);
  }
  // Count per axis, then multiply: the voxel centers form a product grid.
  double fraction = 1.0;
  for (int axis = 0; axis < 3; ++axis) {
    long hits = 0;
    for (long i = 0; i < n[axis]; ++i) {
      const double c = inner.min[axis] + (static_cast<double>(i) + 0.5) * h[axis];
      if (c >= outer.min[axis] && c <= outer.max[axis]) ++hits;
    }
    fraction *= static_cast<double>(hits) / static_cast<double>(n[axis]);
  }
  return fraction;
}

double projected_gap(const Aabb& a, const Aabb& b) {
  Vec3 p = a.center();
  Vec3 q = project(p, b);
  for (int i = 0; i < 200; ++i) {
    const Vec3 p2 = project(q, a);
    const Vec3 q2 = project(p2, b);
    const bool settled = distance(p2, p) < 1e-15 && distance(q2, q) < 1e-15;
    p = p2;
    q = q2;
    if (settled) break;
  }
  return distance(p, q);
}

double counted_overlap(const Aabb& a, const Aabb& b) {
  const Aabb& small = extent(a, 0) * extent(a, 1) <= extent(b, 0) * extent(b, 1) ? a : b;
  const Aabb& other = &small == &a ? b : a;
  const double target = 0.0025;
  long hits = 0;
  const long nx = std::max(1L, static_cast<long>(std::ceil(extent(small, 0) / target - 1e-9)));
  const long ny = std::max(1L, static_cast<long>(std::ceil(extent(small, 1) / target - 1e-9)));
  const double hx = extent(small, 0) / static_cast<double>(nx);
  const double hy = extent(small, 1) / static_cast<double>(ny);
  for (long i = 0; i < nx; ++i) {
    const double x = small.min.x + (static_cast<double>(i) + 0.5) * hx;
    if (x < other.min.x || x > other.max.x) continue;
    for (long j = 0; j < ny; ++j) {
      const double y = small.min.y + (static_cast<double>(j) + 0.5) * hy;
      if (y >= other.min.y && y <= other.max.y) ++hits;
    }
  }
  return static_cast<double>(hits) * hx * hy;
}

Verdict in(const Aabb& o1, const Aabb& o2, const RelationConfig& cfg) {
  if (!(o1.volume() > 0.0)) return {false, false};
  const double f = voxel_containment(o1, o2);
  return {f >= cfg.inThreshold, std::abs(f - cfg.inThreshold) <= kBand};
}

Verdict on(const Aabb& o1, const Aabb& o2, const RelationConfig& cfg) {
  const double lift = o1.min.z - o2.max.z;
  const bool lift_ok = lift >= -kContact && lift <= cfg.onGap;
  const bool lift_border = (lift > -kBand && lift < -kContact) || std::abs(lift - cfg.onGap) < kBand;
  const double smaller = std::min(extent(o1, 0) * extent(o1, 1), extent(o2, 0) * extent(o2, 1));
  if (!(smaller > 0.0)) return {false, lift_border};
  const double ratio = counted_overlap(o1, o2) / smaller;
  const bool overlap_ok = ratio >= cfg.onOverlap;
  const bool overlap_border = std::abs(ratio - cfg.onOverlap) < kBand;
  return {lift_ok && overlap_ok, lift_border || ((lift_ok || lift_border) && overlap_border)};
}

Verdict near(const Aabb& o1, const Aabb& o2) {
  const double gap = projected_gap(o1, o2);
  const double limit = largest_side(o1, o2);
  return {gap <= limit, std::abs(gap - limit) <= kBand};
}

Verdict clear_between(const Aabb& o1, const Aabb& o2, std::span<const Aabb> others,
                      double step) {
  const Vec3 a = o1.center();
  const Vec3 b = o2.center();
  if (distance(a, b) == 0.0) return {true, false};
  std::vector<Aabb> fat;
  std::vector<Aabb> thin;
  for (const Aabb& o : others) {
    fat.push_back(grown(o, kBand));
    thin.push_back(grown(o, -kBand));
  }
  const bool exact = !blocked(a, b, others, step);
  const bool clear_fat = !blocked(a, b, fat, step);
  const bool clear_thin = !blocked(a, b, thin, step);
  return {exact, clear_fat != clear_thin};
}

std::vector<PairVerdicts> evaluate(std::span<const Box> boxes, const RelationConfig& cfg) {
  const std::size_t n = boxes.size();
  std::vector<Verdict> inv(n * n);
  std::vector<Verdict> onv(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      inv[i * n + j] = in(boxes[i].box, boxes[j].box, cfg);
      onv[i * n + j] = on(boxes[i].box, boxes[j].box, cfg);
    }
  }
  std::vector<PairVerdicts> out;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      PairVerdicts v;
      v.a = boxes[i].id;
      v.b = boxes[j].id;
      v.inAB = inv[i * n + j];
      v.inBA = inv[j * n + i];
      v.onAB = onv[i * n + j];
      v.onBA = onv[j * n + i];
      v.near = near(boxes[i].box, boxes[j].box);

      std::vector<Aabb> blockers;
      bool filter_border = false;
      for (std::size_t k = 0; k < n; ++k) {
        if (k == i || k == j) continue;
        const Verdict rides[] = {onv[k * n + i], onv[k * n + j], inv[k * n + i], inv[k * n + j]};
        bool riding = false;
        for (const Verdict& r : rides) {
          riding = riding || r.value;
          filter_border = filter_border || r.borderline;
        }
        if (!riding) blockers.push_back(boxes[k].box);
      }
      const Verdict clear = clear_between(boxes[i].box, boxes[j].box, blockers);
      v.nextTo = {v.near.value && clear.value,
                  v.near.borderline || (v.near.value && (clear.borderline || filter_border))};
      out.push_back(std::move(v));
    }
  }
  return out;
}

std::vector<Relation> relations_at(const ScenarioScript& script, const ScenePose& pose,
                                   const RelationConfig& cfg) {
  std::vector<Box> boxes;
  for (const PropPose& p : pose.props) boxes.push_back({p.label, p.box});
  std::vector<Relation> out;
  auto add = [&](RelationKind k, const std::string& s, const std::string& o) {
    out.push_back({k, s, o, pose.t});
  };
  for (const PairVerdicts& v : evaluate(boxes, cfg)) {
    if (v.inAB.value) add(RelationKind::In, v.a, v.b);
    if (v.inBA.value) add(RelationKind::In, v.b, v.a);
    if (v.onAB.value) add(RelationKind::On, v.a, v.b);
    if (v.onBA.value) add(RelationKind::On, v.b, v.a);
    if (v.near.value) {
      add(RelationKind::Near, v.a, v.b);
      add(RelationKind::Near, v.b, v.a);
    }
    if (v.nextTo.value) {
      add(RelationKind::NextTo, v.a, v.b);
      add(RelationKind::NextTo, v.b, v.a);
    }
  }
  for (const LocationRegion& r : script.regions) {
    for (const PropPose& p : pose.props) {
      if (inside(p.box.center(), r.box)) add(RelationKind::InLocation, p.label, r.name);
    }
    for (const PersonPose& p : pose.persons) {
      if (inside(p.box.center(), r.box)) add(RelationKind::InLocation, p.name, r.name);
    }
  }
  std::sort(out.begin(), out.end(),
            [](const Relation& x, const Relation& y) { return x.key() < y.key(); });
  return out;
}

}  // namespace scenekeeper::oracle
