#pragma once

#include <optional>
#include <vector>

#include "sianms/geom.hpp"
#include "sianms/scene.hpp"

namespace sianms {

struct FitConfig {
  double ground_z_thr = 0.3;  // points at or below this height are ground
  double cluster_gap = 1.0;   // along-axis gap that splits depth clusters
  int min_points = 5;

  void validate() const;
};

/// Removes points with z <= ground_z_thr.
std::vector<Vec3> ground_filter(const std::vector<Vec3>& points, const FitConfig& cfg);

/// Points in the canonical (axis-rotated) frame, sorted by the along-axis
/// coordinate; returns the first contiguous run with consecutive gaps
/// <= cluster_gap and at least min_points members. Empty when no such run
/// exists.
std::vector<Vec3> nearest_cluster(const std::vector<Vec3>& points, const FitConfig& cfg);

struct RectFit {
  Vec2 center;
  double width = 0.0;   // lateral extent
  double length = 0.0;  // extent along yaw; length >= width
  double yaw = 0.0;     // in (-pi/2, pi/2]
};

/// Minimum-area enclosing rectangle of the BEV projection (convex hull +
/// per-edge calipers). Throws GeometryError for fewer than 3 points or a
/// collinear set.
RectFit min_area_rect_bev(const std::vector<Vec3>& points);

/// Full fit: canonical rotation, ground removal, depth clustering, min-area
/// rectangle, z-extent for height, then back to the global frame. nullopt
/// when too few points survive (detection dropped).
std::optional<Box3D> fit_box(const std::vector<Vec3>& frustum_points, const Ray2& axis,
                             const FitConfig& cfg);

}  // namespace sianms
