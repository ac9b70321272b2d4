#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace scenekeeper {

/// Point or direction in meters. z is up; the origin sits at one corner of
/// the work surface.
struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  double operator[](std::size_t axis) const { return axis == 0 ? x : axis == 1 ? y : z; }
  double& operator[](std::size_t axis) { return axis == 0 ? x : axis == 1 ? y : z; }

  friend bool operator==(const Vec3&, const Vec3&) = default;
};

inline Vec3 operator+(const Vec3& a, const Vec3& b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
inline Vec3 operator-(const Vec3& a, const Vec3& b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
inline Vec3 operator*(const Vec3& a, double s) { return {a.x * s, a.y * s, a.z * s}; }
inline Vec3 operator*(double s, const Vec3& a) { return a * s; }
inline double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }
inline double distance(const Vec3& a, const Vec3& b) { return norm(a - b); }
inline bool is_finite(const Vec3& a) {
  return std::isfinite(a.x) && std::isfinite(a.y) && std::isfinite(a.z);
}
/// Unit vector along `a`; `a` must be non-zero.
Vec3 normalized(const Vec3& a);

/// Axis-aligned box. All sets are closed: a box contains its faces.
struct Aabb {
  Vec3 min;
  Vec3 max;

  static Aabb from_center_size(const Vec3& center, const Vec3& size);
  /// Smallest box enclosing `points`; `points` must be non-empty.
  static Aabb enclosing(std::span<const Vec3> points);

  Vec3 extents() const { return max - min; }
  Vec3 center() const { return (min + max) * 0.5; }
  double volume() const;
  double footprint_area() const;
  double max_extent() const;
  bool valid() const;
  bool contains(const Vec3& p) const;
  Aabb translated(const Vec3& offset) const { return {min + offset, max + offset}; }
  Aabb inflated(double margin) const;

  friend bool operator==(const Aabb&, const Aabb&) = default;
};

/// Raster stand-in for a top-down depth image. `samples` holds height above
/// the floor, row-major (`row * width + col`). Cell (col, row) covers
/// [origin.x + col*resolution, +resolution) along x and likewise along y.
class HeightMap {
 public:
  HeightMap() = default;
  HeightMap(int width, int height, double resolution, Vec3 origin);
  HeightMap(int width, int height, double resolution, Vec3 origin, std::vector<double> samples);

  int width() const { return width_; }
  int height() const { return height_; }
  double resolution() const { return resolution_; }
  const Vec3& origin() const { return origin_; }
  std::span<const double> samples() const { return samples_; }

  double at(int col, int row) const { return samples_[index(col, row)]; }
  void set(int col, int row, double value);
  std::size_t index(int col, int row) const {
    return static_cast<std::size_t>(row) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(col);
  }
  bool in_bounds(int col, int row) const {
    return col >= 0 && row >= 0 && col < width_ && row < height_;
  }
  /// Cell center lifted to the cell's height.
  Vec3 cell_point(int col, int row) const;
  /// Horizontal footprint of the whole grid, z spanning origin.z..origin.z.
  Aabb footprint() const;

 private:
  int width_ = 0;
  int height_ = 0;
  double resolution_ = 0.01;
  Vec3 origin_;
  std::vector<double> samples_;
};

double intersection_volume(const Aabb& a, const Aabb& b);

/// Closed-set overlap test; touching boxes intersect.
inline bool intersects(const Aabb& a, const Aabb& b) {
  return a.min.x <= b.max.x && b.min.x <= a.max.x && a.min.y <= b.max.y &&
         b.min.y <= a.max.y && a.min.z <= b.max.z && b.min.z <= a.max.z;
}

/// Fraction of `inner`'s volume lying inside `outer`.
/// Throws Error("degenerate-box") when `inner` has zero volume.
double containment_fraction(const Aabb& inner, const Aabb& outer);

/// Euclidean norm of the per-axis gaps; 0 when the boxes intersect or touch.
double box_gap_distance(const Aabb& a, const Aabb& b);

/// Distance from a point to the closed box (0 inside).
double point_box_distance(const Vec3& p, const Aabb& box);

/// Parameter interval [enter, exit] ⊆ [0, 1] of the closed segment p→q that
/// lies inside the closed box, if any. Throws Error("degenerate-segment").
std::optional<std::pair<double, double>> clip_segment(const Vec3& p, const Vec3& q,
                                                      const Aabb& box);

/// Slab test on the closed segment and closed box.
bool segment_intersects_box(const Vec3& p, const Vec3& q, const Aabb& box);

/// Like segment_intersects_box but ignores contact that happens only at the
/// endpoints p or q.
bool open_segment_intersects_box(const Vec3& p, const Vec3& q, const Aabb& box);

struct PrincipalAxis {
  Vec3 axis;          // unit length
  double confidence;  // largest / second-largest eigenvalue; +inf for a perfect line
};

/// Minimum λ1/λ2 for a principal axis to be treated as a meaningful direction.
inline constexpr double kMinAxisConfidence = 2.0;

/// Dominant eigenvector of the point covariance. The returned sign is
/// canonical (first non-negligible component positive); callers orient it.
/// Throws Error("insufficient-spread") for fewer than 3 points or when every
/// point coincides.
PrincipalAxis principal_axis(std::span<const Vec3> points);

}  // namespace scenekeeper
