#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

namespace sianms {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  bool operator==(const Vec2& o) const = default;

  double dot(const Vec2& o) const { return x * o.x + y * o.y; }
  double cross(const Vec2& o) const { return x * o.y - y * o.x; }
  double norm() const { return std::hypot(x, y); }
  double squared_norm() const { return x * x + y * y; }
};

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  bool operator==(const Vec3& o) const = default;

  Vec2 xy() const { return {x, y}; }
  double norm() const { return std::sqrt(x * x + y * y + z * z); }
};

inline double distance_bev(const Vec3& a, const Vec3& b) {
  return std::hypot(a.x - b.x, a.y - b.y);
}

/// Wraps an angle to (-pi, pi].
inline double wrap_angle(double a) {
  a = std::fmod(a, kTwoPi);
  if (a <= -kPi) a += kTwoPi;
  if (a > kPi) a -= kTwoPi;
  return a;
}

/// Absolute angular difference wrapped to [0, pi].
inline double angle_diff(double a, double b) { return std::abs(wrap_angle(a - b)); }

inline Vec2 unit_dir(double angle) { return {std::cos(angle), std::sin(angle)}; }

/// Closed interval of bearings on the circle. Stored unwrapped: lo in
/// (-pi, pi], hi = lo + width with width in [0, 2*pi). Angles equal to an
/// endpoint are inside (closed-interval convention).
class AngularInterval {
 public:
  AngularInterval() = default;
  AngularInterval(double lo, double hi) : lo_(wrap_angle(lo)) {
    double width = hi - lo;
    width = std::fmod(width, kTwoPi);
    if (width < 0) width += kTwoPi;
    width_ = width;
  }

  static AngularInterval from_center(double center, double width) {
    return AngularInterval(center - width / 2.0, center + width / 2.0);
  }

  double lo() const { return lo_; }
  double hi() const { return lo_ + width_; }
  double width() const { return width_; }
  double center() const { return wrap_angle(lo_ + width_ / 2.0); }

  bool contains(double angle) const {
    double rel = std::fmod(angle - lo_, kTwoPi);
    if (rel < 0) rel += kTwoPi;
    return rel <= width_ || rel >= kTwoPi - 1e-15;
  }

  bool intersects(const AngularInterval& o) const {
    return contains(o.lo_) || contains(wrap_angle(o.hi())) || o.contains(lo_);
  }

  /// Offset of `angle` from lo(), unwrapped into [0, 2*pi).
  double unwrap_from_lo(double angle) const {
    double rel = std::fmod(angle - lo_, kTwoPi);
    if (rel < 0) rel += kTwoPi;
    return rel;
  }

  /// Angular distance from `angle` to the nearest point of the interval
  /// (0 when inside).
  double distance_to(double angle) const {
    double rel = unwrap_from_lo(angle);
    if (rel <= width_) return 0.0;
    return std::min(rel - width_, kTwoPi - rel);
  }

  /// Smallest interval covering both; valid when the two intersect (the
  /// union is then a single connected arc).
  AngularInterval merge(const AngularInterval& o) const {
    double rel = unwrap_from_lo(o.lo_);
    double start = lo_;
    double end = lo_ + width_;
    if (rel <= width_ + 1e-15) {
      end = std::max(end, lo_ + rel + o.width_);
    } else {
      // o starts before us (wrapping); extend backwards.
      start = lo_ - (kTwoPi - rel);
      end = std::max(start + o.width_, lo_ + width_);
    }
    return AngularInterval(start, end);
  }

 private:
  double lo_ = 0.0;
  double width_ = 0.0;
};

/// BEV ray: origin plus unit direction.
struct Ray2 {
  Vec2 origin;
  double angle = 0.0;

  Vec2 direction() const { return unit_dir(angle); }
  Vec2 point_at(double t) const { return origin + direction() * t; }
};

/// Rigid BEV transform that maps a ray onto the +x half-line from the
/// origin: q = R(-angle) * (p - ray.origin). z passes through untouched.
class CanonicalTransform {
 public:
  explicit CanonicalTransform(const Ray2& axis)
      : origin_(axis.origin), c_(std::cos(axis.angle)), s_(std::sin(axis.angle)) {}

  Vec3 apply(const Vec3& p) const {
    const double dx = p.x - origin_.x;
    const double dy = p.y - origin_.y;
    return {c_ * dx + s_ * dy, -s_ * dx + c_ * dy, p.z};
  }

  Vec3 invert(const Vec3& q) const {
    return {c_ * q.x - s_ * q.y + origin_.x, s_ * q.x + c_ * q.y + origin_.y, q.z};
  }

  std::vector<Vec3> apply(const std::vector<Vec3>& pts) const {
    std::vector<Vec3> out;
    out.reserve(pts.size());
    for (const auto& p : pts) out.push_back(apply(p));
    return out;
  }

  double angle() const { return std::atan2(s_, c_); }

 private:
  Vec2 origin_;
  double c_ = 1.0;
  double s_ = 0.0;
};

}  // namespace sianms
