#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "sianms/geom.hpp"
#include "sianms/scene.hpp"

namespace sianms {

struct DetectionRange {
  double d_max = 50.0;  // radius of the maximum-detection-distance circle
  double r_min = 0.0;   // near bound; 0 keeps the wedge apexed at the camera

  void validate() const;
};

/// BEV wedge behind a 2D detection box: an angular interval apexed at the
/// camera position, bounded by [r_min, r_max] in range and by the two
/// pixel-row planes of the box's v-extent.
struct Frustum {
  int camera_id = 0;
  Vec2 apex;           // camera position
  double apex_z = 0.0; // camera mount height
  double cam_yaw = 0.0;
  AngularInterval interval;  // global-frame bearings
  double r_min = 0.0;
  double r_max = 0.0;
  // Vertical bounds as slopes dz/dx_forward, i.e. tan of the elevation
  // angles of the bbox's bottom/top rows.
  double slope_min = 0.0;
  double slope_max = 0.0;
};

struct Projection {
  double u = 0.0;
  double v = 0.0;
  double depth = 0.0;  // forward (optical-axis) distance
};

/// Pinhole projection of a global-frame point. Throws GeometryError when the
/// point is not in front of the camera.
Projection project_point(const Camera& cam, const Vec3& p);

/// Non-throwing variant; nullopt when the point is behind the camera.
std::optional<Projection> try_project_point(const Camera& cam, const Vec3& p);

/// Bearing of pixel column u relative to the optical axis: atan((u-cx)/fx).
double bearing_of_u(const Camera& cam, double u);

Frustum frustum_from_bbox(const Camera& cam, const BBox2D& bbox,
                          const DetectionRange& range);

/// Ray from the camera origin through the bbox center's BEV direction.
Ray2 single_axis(const Camera& cam, const BBox2D& bbox);

/// The two extreme points where the paired frustums meet the
/// maximum-detection-distance circle: p_l is the endpoint of f1's arc
/// angularly farthest from f2, p_r the symmetric endpoint of f2. Both lie at
/// distance d_max from the shared origin (midpoint of the camera positions).
/// Throws DisjointFrustumsError when the angular intervals do not intersect.
std::pair<Vec2, Vec2> circle_boundary_points(const Frustum& f1, const Frustum& f2,
                                             const DetectionRange& range);

/// Ray from `origin` through the midpoint of p_l and p_r. Throws
/// GeometryError when p_l == p_r.
Ray2 merged_axis(const Vec2& p_l, const Vec2& p_r, const Vec2& origin);

/// Rigid transform mapping the axis ray onto the +x half-line from the
/// origin, applied to every point. Inverse available via CanonicalTransform.
std::vector<Vec3> rotate_to_canonical(const std::vector<Vec3>& points, const Ray2& axis);

bool frustum_contains(const Frustum& f, const Vec3& p);

/// True iff the angular intervals intersect (closed, modulo 2*pi) with
/// nonempty range and vertical intersection.
bool frustums_overlap(const Frustum& f1, const Frustum& f2);

/// Points contained in f1 or f2 (set union, input order, no duplicates).
/// Throws DisjointFrustumsError when the frustums do not overlap.
std::vector<Vec3> aggregate_frustum_points(const Frustum& f1, const Frustum& f2,
                                           const std::vector<Vec3>& lidar);

struct ProjectedBox {
  BBox2D bbox;  // clipped to the image
  bool truncated_left = false;
  bool truncated_right = false;
};

/// Image-plane bounding box of a 3D box's projected corners, clipped to the
/// image; nullopt when the box does not project into the image.
std::optional<ProjectedBox> project_box_to_image(const Camera& cam, const Box3D& box);

}  // namespace sianms
