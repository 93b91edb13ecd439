#pragma once

#include <array>
#include <vector>

#include "sianms/geom.hpp"
#include "sianms/scene.hpp"

namespace sianms {

enum class IouMode { axis_aligned, rotated };

struct NmsConfig {
  double iou_thr = 0.3;
  IouMode mode = IouMode::axis_aligned;
  bool class_agnostic = false;  // default per-class

  void validate() const;
};

/// BEV footprint corners of a box, counter-clockwise.
std::array<Vec2, 4> bev_corners(const Box3D& box);

/// IoU of the axis-aligned bounding rectangles of the two BEV footprints.
double iou_axis_aligned_bev(const Box3D& a, const Box3D& b);

/// Exact IoU of the rotated BEV rectangles (convex polygon clipping).
double iou_rotated_bev(const Box3D& a, const Box3D& b);

/// Score-ordered greedy NMS; a kept box suppresses remaining boxes with
/// IoU strictly greater than iou_thr. Ties in score keep input order.
std::vector<Box3D> greedy_nms(const std::vector<Box3D>& boxes, const NmsConfig& cfg);

}  // namespace sianms
