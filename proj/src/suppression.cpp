#include "sianms/suppression.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "sianms/errors.hpp"

namespace sianms {

void NmsConfig::validate() const {
  if (!(iou_thr >= 0.0 && iou_thr <= 1.0))
    throw ValidationError("iou_thr must be in [0, 1]");
}

std::array<Vec2, 4> bev_corners(const Box3D& box) {
  const double c = std::cos(box.yaw);
  const double s = std::sin(box.yaw);
  const double hl = box.size.y / 2.0;  // along yaw
  const double hw = box.size.x / 2.0;  // lateral
  const std::array<Vec2, 4> local{{{hl, hw}, {-hl, hw}, {-hl, -hw}, {hl, -hw}}};
  std::array<Vec2, 4> out;
  for (std::size_t i = 0; i < 4; ++i)
    out[i] = {box.center.x + c * local[i].x - s * local[i].y,
              box.center.y + s * local[i].x + c * local[i].y};
  return out;
}

namespace {

double polygon_area(const std::vector<Vec2>& poly) {
  double twice = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Vec2& p = poly[i];
    const Vec2& q = poly[(i + 1) % poly.size()];
    twice += p.cross(q);
  }
  return std::abs(twice) / 2.0;
}

// Sutherland-Hodgman clip of a convex polygon by the half-plane left of a->b.
std::vector<Vec2> clip_halfplane(const std::vector<Vec2>& poly, const Vec2& a,
                                 const Vec2& b) {
  std::vector<Vec2> out;
  const std::size_t n = poly.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2& p = poly[i];
    const Vec2& q = poly[(i + 1) % n];
    const double sp = (b - a).cross(p - a);
    const double sq = (b - a).cross(q - a);
    if (sp >= 0.0) out.push_back(p);
    if ((sp > 0.0 && sq < 0.0) || (sp < 0.0 && sq > 0.0)) {
      const double t = sp / (sp - sq);
      out.push_back(p + (q - p) * t);
    }
  }
  return out;
}

double footprint_area(const Box3D& b) { return b.size.x * b.size.y; }

// Degenerate (zero-area) footprints: IoU is 0 unless both are degenerate and
// coincident.
bool degenerate(const Box3D& b) { return footprint_area(b) <= 0.0; }

bool coincident(const Box3D& a, const Box3D& b) {
  const auto ca = bev_corners(a);
  const auto cb = bev_corners(b);
  for (std::size_t i = 0; i < 4; ++i)
    if (std::abs(ca[i].x - cb[i].x) > 1e-12 || std::abs(ca[i].y - cb[i].y) > 1e-12)
      return false;
  return true;
}

}  // namespace

double iou_axis_aligned_bev(const Box3D& a, const Box3D& b) {
  if (degenerate(a) || degenerate(b))
    return (degenerate(a) && degenerate(b) && coincident(a, b)) ? 1.0 : 0.0;
  const auto ca = bev_corners(a);
  const auto cb = bev_corners(b);
  auto aabb = [](const std::array<Vec2, 4>& c) {
    double xmin = c[0].x, xmax = c[0].x, ymin = c[0].y, ymax = c[0].y;
    for (const auto& p : c) {
      xmin = std::min(xmin, p.x);
      xmax = std::max(xmax, p.x);
      ymin = std::min(ymin, p.y);
      ymax = std::max(ymax, p.y);
    }
    return std::array<double, 4>{xmin, ymin, xmax, ymax};
  };
  const auto ra = aabb(ca);
  const auto rb = aabb(cb);
  const double iw = std::min(ra[2], rb[2]) - std::max(ra[0], rb[0]);
  const double ih = std::min(ra[3], rb[3]) - std::max(ra[1], rb[1]);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  const double area_a = (ra[2] - ra[0]) * (ra[3] - ra[1]);
  const double area_b = (rb[2] - rb[0]) * (rb[3] - rb[1]);
  return inter / (area_a + area_b - inter);
}

double iou_rotated_bev(const Box3D& a, const Box3D& b) {
  if (degenerate(a) || degenerate(b))
    return (degenerate(a) && degenerate(b) && coincident(a, b)) ? 1.0 : 0.0;
  const auto ca = bev_corners(a);
  const auto cb = bev_corners(b);
  std::vector<Vec2> poly(ca.begin(), ca.end());
  for (std::size_t i = 0; i < 4 && poly.size() >= 3; ++i)
    poly = clip_halfplane(poly, cb[i], cb[(i + 1) % 4]);
  if (poly.size() < 3) return 0.0;
  const double inter = polygon_area(poly);
  const double uni = footprint_area(a) + footprint_area(b) - inter;
  if (uni <= 0.0) return 1.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

std::vector<Box3D> greedy_nms(const std::vector<Box3D>& boxes, const NmsConfig& cfg) {
  cfg.validate();
  std::vector<std::size_t> order(boxes.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&boxes](std::size_t i, std::size_t j) {
    return boxes[i].score > boxes[j].score;
  });

  const auto iou = (cfg.mode == IouMode::axis_aligned) ? iou_axis_aligned_bev
                                                       : iou_rotated_bev;
  std::vector<bool> suppressed(boxes.size(), false);
  std::vector<Box3D> kept;
  for (std::size_t oi = 0; oi < order.size(); ++oi) {
    const std::size_t i = order[oi];
    if (suppressed[i]) continue;
    kept.push_back(boxes[i]);
    for (std::size_t oj = oi + 1; oj < order.size(); ++oj) {
      const std::size_t j = order[oj];
      if (suppressed[j]) continue;
      if (!cfg.class_agnostic && boxes[i].class_id != boxes[j].class_id) continue;
      if (iou(boxes[i], boxes[j]) > cfg.iou_thr) suppressed[j] = true;
    }
  }
  return kept;
}

}  // namespace sianms
