#include "scenekeeper/geometry.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <limits>

#include "scenekeeper/error.hpp"

namespace scenekeeper {

Vec3 normalized(const Vec3& a) {
  const double n = norm(a);
  if (n == 0.0) throw Error("zero-vector");
  return a * (1.0 / n);
}

Aabb Aabb::from_center_size(const Vec3& center, const Vec3& size) {
  const Vec3 half = size * 0.5;
  return {center - half, center + half};
}

Aabb Aabb::enclosing(std::span<const Vec3> points) {
  if (points.empty()) throw Error("empty-point-set");
  Aabb box{points.front(), points.front()};
  for (const Vec3& p : points) {
    for (std::size_t c = 0; c < 3; ++c) {
      box.min[c] = std::min(box.min[c], p[c]);
      box.max[c] = std::max(box.max[c], p[c]);
    }
  }
  return box;
}

double Aabb::volume() const {
  const Vec3 e = extents();
  return std::max(0.0, e.x) * std::max(0.0, e.y) * std::max(0.0, e.z);
}

double Aabb::footprint_area() const {
  const Vec3 e = extents();
  return std::max(0.0, e.x) * std::max(0.0, e.y);
}

double Aabb::max_extent() const {
  const Vec3 e = extents();
  return std::max({e.x, e.y, e.z});
}

bool Aabb::valid() const {
  return is_finite(min) && is_finite(max) && min.x <= max.x && min.y <= max.y && min.z <= max.z;
}

bool Aabb::contains(const Vec3& p) const {
  return p.x >= min.x && p.x <= max.x && p.y >= min.y && p.y <= max.y && p.z >= min.z &&
         p.z <= max.z;
}

Aabb Aabb::inflated(double margin) const {
  const Vec3 m{margin, margin, margin};
  return {min - m, max + m};
}

HeightMap::HeightMap(int width, int height, double resolution, Vec3 origin)
    : HeightMap(width, height, resolution, origin,
                std::vector<double>(static_cast<std::size_t>(std::max(0, width)) *
                                        static_cast<std::size_t>(std::max(0, height)),
                                    0.0)) {}

HeightMap::HeightMap(int width, int height, double resolution, Vec3 origin,
                     std::vector<double> samples)
    : width_(width),
      height_(height),
      resolution_(resolution),
      origin_(origin),
      samples_(std::move(samples)) {
  if (width < 0 || height < 0) throw Error("invalid-height-map", "negative dimensions");
  if (!(resolution > 0.0)) throw Error("invalid-height-map", "resolution must be positive");
  if (samples_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
    throw Error("invalid-height-map", "sample count does not match width*height");
  }
  for (double s : samples_) {
    if (!(s >= 0.0) || !std::isfinite(s)) throw Error("invalid-height-map", "negative sample");
  }
}

void HeightMap::set(int col, int row, double value) {
  if (!(value >= 0.0)) throw Error("invalid-height-map", "negative sample");
  samples_[index(col, row)] = value;
}

Vec3 HeightMap::cell_point(int col, int row) const {
  return {origin_.x + (col + 0.5) * resolution_, origin_.y + (row + 0.5) * resolution_,
          origin_.z + at(col, row)};
}

Aabb HeightMap::footprint() const {
  return {origin_, {origin_.x + width_ * resolution_, origin_.y + height_ * resolution_,
                    origin_.z}};
}

double intersection_volume(const Aabb& a, const Aabb& b) {
  double v = 1.0;
  for (std::size_t c = 0; c < 3; ++c) {
    v *= std::max(0.0, std::min(a.max[c], b.max[c]) - std::max(a.min[c], b.min[c]));
  }
  return v;
}

double containment_fraction(const Aabb& inner, const Aabb& outer) {
  const double v = inner.volume();
  if (!(v > 0.0)) throw Error("degenerate-box");
  return std::clamp(intersection_volume(inner, outer) / v, 0.0, 1.0);
}

double box_gap_distance(const Aabb& a, const Aabb& b) {
  double sq = 0.0;
  for (std::size_t c = 0; c < 3; ++c) {
    const double gap = std::max({0.0, a.min[c] - b.max[c], b.min[c] - a.max[c]});
    sq += gap * gap;
  }
  return std::sqrt(sq);
}

double point_box_distance(const Vec3& p, const Aabb& box) {
  double sq = 0.0;
  for (std::size_t c = 0; c < 3; ++c) {
    const double gap = std::max({0.0, box.min[c] - p[c], p[c] - box.max[c]});
    sq += gap * gap;
  }
  return std::sqrt(sq);
}

std::optional<std::pair<double, double>> clip_segment(const Vec3& p, const Vec3& q,
                                                      const Aabb& box) {
  const Vec3 d = q - p;
  if (d == Vec3{}) throw Error("degenerate-segment");
  double enter = 0.0;
  double exit = 1.0;
  for (std::size_t c = 0; c < 3; ++c) {
    if (d[c] == 0.0) {
      if (p[c] < box.min[c] || p[c] > box.max[c]) return std::nullopt;
      continue;
    }
    double t0 = (box.min[c] - p[c]) / d[c];
    double t1 = (box.max[c] - p[c]) / d[c];
    if (t0 > t1) std::swap(t0, t1);
    enter = std::max(enter, t0);
    exit = std::min(exit, t1);
    if (enter > exit) return std::nullopt;
  }
  return std::pair{enter, exit};
}

bool segment_intersects_box(const Vec3& p, const Vec3& q, const Aabb& box) {
  return clip_segment(p, q, box).has_value();
}

bool open_segment_intersects_box(const Vec3& p, const Vec3& q, const Aabb& box) {
  const auto span = clip_segment(p, q, box);
  if (!span) return false;
  return span->first < 1.0 && span->second > 0.0;
}

PrincipalAxis principal_axis(std::span<const Vec3> points) {
  if (points.size() < 3) throw Error("insufficient-spread", "need at least 3 points");

  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  for (const Vec3& p : points) mean += Eigen::Vector3d(p.x, p.y, p.z);
  mean /= static_cast<double>(points.size());

  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (const Vec3& p : points) {
    const Eigen::Vector3d d = Eigen::Vector3d(p.x, p.y, p.z) - mean;
    cov += d * d.transpose();
  }
  cov /= static_cast<double>(points.size());
  if (!(cov.trace() > 1e-18)) throw Error("insufficient-spread", "all points coincide");

  // Eigenvalues come back in increasing order.
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver(cov);
  const Eigen::Vector3d values = solver.eigenvalues();
  Eigen::Vector3d axis = solver.eigenvectors().col(2).normalized();

  for (int c = 0; c < 3; ++c) {
    if (std::abs(axis[c]) > 1e-9) {
      if (axis[c] < 0) axis = -axis;
      break;
    }
  }

  const double largest = values[2];
  const double second = std::max(values[1], 0.0);
  const double confidence = second > largest * 1e-15 ? largest / second
                                                     : std::numeric_limits<double>::infinity();
  return {{axis[0], axis[1], axis[2]}, confidence};
}

}  // namespace scenekeeper
