#include "sianms/frustum.hpp"

#include <cmath>

#include "sianms/errors.hpp"

namespace sianms {

void DetectionRange::validate() const {
  if (!(d_max > 0.0)) throw ValidationError("d_max must be positive");
  if (!(r_min >= 0.0 && r_min < d_max))
    throw ValidationError("r_min must satisfy 0 <= r_min < d_max");
}

double bearing_of_u(const Camera& cam, double u) {
  return std::atan2(u - cam.cx, cam.fx);
}

std::optional<Projection> try_project_point(const Camera& cam, const Vec3& p) {
  const double dx = p.x - cam.pos.x;
  const double dy = p.y - cam.pos.y;
  const double bearing = wrap_angle(std::atan2(dy, dx) - cam.yaw);
  const double r = std::hypot(dx, dy);
  const double forward = r * std::cos(bearing);
  if (forward <= 1e-12) return std::nullopt;
  Projection proj;
  proj.u = cam.cx + cam.fx * std::tan(bearing);
  proj.v = cam.cy - cam.fy * (p.z - cam.z) / forward;
  proj.depth = forward;
  return proj;
}

Projection project_point(const Camera& cam, const Vec3& p) {
  auto proj = try_project_point(cam, p);
  if (!proj) throw GeometryError("point behind camera " + std::to_string(cam.id));
  return *proj;
}

Frustum frustum_from_bbox(const Camera& cam, const BBox2D& bbox,
                          const DetectionRange& range) {
  range.validate();
  Frustum f;
  f.camera_id = cam.id;
  f.apex = cam.pos;
  f.apex_z = cam.z;
  f.cam_yaw = cam.yaw;
  f.interval = AngularInterval(cam.yaw + bearing_of_u(cam, bbox.u_min),
                               cam.yaw + bearing_of_u(cam, bbox.u_max));
  f.r_min = range.r_min;
  f.r_max = range.d_max;
  f.slope_min = (cam.cy - bbox.v_max) / cam.fy;
  f.slope_max = (cam.cy - bbox.v_min) / cam.fy;
  return f;
}

Ray2 single_axis(const Camera& cam, const BBox2D& bbox) {
  return Ray2{cam.pos, wrap_angle(cam.yaw + bearing_of_u(cam, bbox.center_u()))};
}

namespace {

// Endpoint of `f`'s arc angularly farthest from `other`'s interval. Ties are
// broken toward the endpoint farther from other's center, then toward hi.
double far_endpoint(const Frustum& f, const Frustum& other) {
  const double lo = f.interval.lo();
  const double hi = f.interval.hi();
  const double d_lo = other.interval.distance_to(lo);
  const double d_hi = other.interval.distance_to(hi);
  if (d_lo > d_hi) return lo;
  if (d_hi > d_lo) return hi;
  const double c = other.interval.center();
  return (angle_diff(lo, c) > angle_diff(hi, c)) ? lo : hi;
}

}  // namespace

std::pair<Vec2, Vec2> circle_boundary_points(const Frustum& f1, const Frustum& f2,
                                             const DetectionRange& range) {
  range.validate();
  if (!f1.interval.intersects(f2.interval))
    throw DisjointFrustumsError("frustum angular intervals are disjoint");
  const Vec2 origin = (f1.apex + f2.apex) * 0.5;
  const Vec2 p_l = origin + unit_dir(far_endpoint(f1, f2)) * range.d_max;
  const Vec2 p_r = origin + unit_dir(far_endpoint(f2, f1)) * range.d_max;
  return {p_l, p_r};
}

Ray2 merged_axis(const Vec2& p_l, const Vec2& p_r, const Vec2& origin) {
  if ((p_l - p_r).squared_norm() < 1e-24)
    throw GeometryError("degenerate merged axis: p_l == p_r");
  const Vec2 mid = (p_l + p_r) * 0.5;
  const Vec2 d = mid - origin;
  if (d.squared_norm() < 1e-24)
    throw GeometryError("degenerate merged axis: midpoint at origin");
  return Ray2{origin, std::atan2(d.y, d.x)};
}

std::vector<Vec3> rotate_to_canonical(const std::vector<Vec3>& points, const Ray2& axis) {
  return CanonicalTransform(axis).apply(points);
}

bool frustum_contains(const Frustum& f, const Vec3& p) {
  const double dx = p.x - f.apex.x;
  const double dy = p.y - f.apex.y;
  const double r = std::hypot(dx, dy);
  if (r < 1e-12) return false;
  if (r < f.r_min || r > f.r_max) return false;
  const double theta = std::atan2(dy, dx);
  if (!f.interval.contains(theta)) return false;
  const double forward = r * std::cos(wrap_angle(theta - f.cam_yaw));
  if (forward <= 1e-12) return false;
  const double slope = (p.z - f.apex_z) / forward;
  return slope >= f.slope_min && slope <= f.slope_max;
}

bool frustums_overlap(const Frustum& f1, const Frustum& f2) {
  if (!f1.interval.intersects(f2.interval)) return false;
  if (std::max(f1.r_min, f2.r_min) > std::min(f1.r_max, f2.r_max)) return false;
  return std::max(f1.slope_min, f2.slope_min) <= std::min(f1.slope_max, f2.slope_max);
}

std::vector<Vec3> aggregate_frustum_points(const Frustum& f1, const Frustum& f2,
                                           const std::vector<Vec3>& lidar) {
  if (!frustums_overlap(f1, f2))
    throw DisjointFrustumsError("cannot aggregate: frustums do not overlap");
  std::vector<Vec3> out;
  for (const auto& p : lidar)
    if (frustum_contains(f1, p) || frustum_contains(f2, p)) out.push_back(p);
  return out;
}

std::optional<ProjectedBox> project_box_to_image(const Camera& cam, const Box3D& box) {
  const double c = std::cos(box.yaw);
  const double s = std::sin(box.yaw);
  const double hl = box.size.y / 2.0, hw = box.size.x / 2.0, hh = box.size.z / 2.0;

  // Bearings beyond this are treated as off-image sideways; tan() stays
  // finite and the resulting u lands far beyond the relevant edge.
  constexpr double kMaxBearing = 1.25;
  double u_min = 1e18, u_max = -1e18, v_min = 1e18, v_max = -1e18;
  bool any_in_front = false;

  for (const double sx : {-1.0, 1.0})
    for (const double sy : {-1.0, 1.0})
      for (const double sz : {-1.0, 1.0}) {
        const Vec3 corner{box.center.x + c * sx * hl - s * sy * hw,
                          box.center.y + s * sx * hl + c * sy * hw,
                          box.center.z + sz * hh};
        const double dx = corner.x - cam.pos.x;
        const double dy = corner.y - cam.pos.y;
        const double bearing = wrap_angle(std::atan2(dy, dx) - cam.yaw);
        if (std::abs(bearing) >= kMaxBearing) {
          if (bearing < 0)
            u_min = std::min(u_min, -1e9);
          else
            u_max = std::max(u_max, 1e9);
          continue;
        }
        const double forward = std::hypot(dx, dy) * std::cos(bearing);
        if (forward <= 1e-9) continue;
        any_in_front = true;
        const double u = cam.cx + cam.fx * std::tan(bearing);
        const double v = cam.cy - cam.fy * (corner.z - cam.z) / forward;
        u_min = std::min(u_min, u);
        u_max = std::max(u_max, u);
        v_min = std::min(v_min, v);
        v_max = std::max(v_max, v);
      }

  if (!any_in_front) return std::nullopt;
  ProjectedBox out;
  out.truncated_left = u_min < 0.0;
  out.truncated_right = u_max > static_cast<double>(cam.width);
  out.bbox.u_min = std::max(u_min, 0.0);
  out.bbox.u_max = std::min(u_max, static_cast<double>(cam.width));
  out.bbox.v_min = std::max(v_min, 0.0);
  out.bbox.v_max = std::min(v_max, static_cast<double>(cam.height));
  if (out.bbox.u_max - out.bbox.u_min < 1.0 || out.bbox.v_max - out.bbox.v_min < 1.0)
    return std::nullopt;
  return out;
}

}  // namespace sianms
