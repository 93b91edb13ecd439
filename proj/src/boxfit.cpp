#include "sianms/boxfit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "sianms/errors.hpp"
#include "sianms/frustum.hpp"

namespace sianms {

void FitConfig::validate() const {
  if (!(ground_z_thr > 0.0 && cluster_gap > 0.0 && min_points > 0))
    throw ConfigError("fit config fields must be positive");
}

std::vector<Vec3> ground_filter(const std::vector<Vec3>& points, const FitConfig& cfg) {
  cfg.validate();
  std::vector<Vec3> out;
  for (const auto& p : points)
    if (p.z > cfg.ground_z_thr) out.push_back(p);
  return out;
}

std::vector<Vec3> nearest_cluster(const std::vector<Vec3>& points, const FitConfig& cfg) {
  cfg.validate();
  std::vector<std::size_t> order(points.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&points](std::size_t a, std::size_t b) {
    return points[a].x < points[b].x;
  });

  std::size_t run_start = 0;
  for (std::size_t i = 0; i <= order.size(); ++i) {
    const bool run_ends =
        i == order.size() ||
        (i > run_start && points[order[i]].x - points[order[i - 1]].x > cfg.cluster_gap);
    if (!run_ends) continue;
    if (i - run_start >= static_cast<std::size_t>(cfg.min_points)) {
      std::vector<Vec3> cluster;
      cluster.reserve(i - run_start);
      for (std::size_t k = run_start; k < i; ++k) cluster.push_back(points[order[k]]);
      return cluster;
    }
    run_start = i;
  }
  return {};
}

namespace {

std::vector<Vec2> convex_hull(std::vector<Vec2> pts) {
  std::sort(pts.begin(), pts.end(), [](const Vec2& a, const Vec2& b) {
    return a.x < b.x || (a.x == b.x && a.y < b.y);
  });
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  const std::size_t n = pts.size();
  if (n < 3) return pts;
  std::vector<Vec2> hull(2 * n);
  std::size_t k = 0;
  for (std::size_t i = 0; i < n; ++i) {
    while (k >= 2 && (hull[k - 1] - hull[k - 2]).cross(pts[i] - hull[k - 2]) <= 0) --k;
    hull[k++] = pts[i];
  }
  const std::size_t lower = k + 1;
  for (std::size_t i = n - 1; i-- > 0;) {
    while (k >= lower && (hull[k - 1] - hull[k - 2]).cross(pts[i] - hull[k - 2]) <= 0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

}  // namespace

RectFit min_area_rect_bev(const std::vector<Vec3>& points) {
  if (points.size() < 3)
    throw GeometryError("min_area_rect_bev: need at least 3 points");
  std::vector<Vec2> flat;
  flat.reserve(points.size());
  for (const auto& p : points) flat.push_back(p.xy());
  const std::vector<Vec2> hull = convex_hull(std::move(flat));
  if (hull.size() < 3)
    throw GeometryError("min_area_rect_bev: degenerate (collinear) point set");

  double best_area = std::numeric_limits<double>::infinity();
  RectFit best;
  for (std::size_t e = 0; e < hull.size(); ++e) {
    const Vec2 edge = hull[(e + 1) % hull.size()] - hull[e];
    const double len = edge.norm();
    if (len < 1e-15) continue;
    const Vec2 d{edge.x / len, edge.y / len};
    const Vec2 n{-d.y, d.x};
    double dmin = 1e300, dmax = -1e300, nmin = 1e300, nmax = -1e300;
    for (const auto& p : hull) {
      const double a = p.dot(d);
      const double b = p.dot(n);
      dmin = std::min(dmin, a);
      dmax = std::max(dmax, a);
      nmin = std::min(nmin, b);
      nmax = std::max(nmax, b);
    }
    const double area = (dmax - dmin) * (nmax - nmin);
    if (area < best_area) {
      best_area = area;
      const double cd = (dmin + dmax) / 2.0;
      const double cn = (nmin + nmax) / 2.0;
      best.center = {d.x * cd + n.x * cn, d.y * cd + n.y * cn};
      const double extent_d = dmax - dmin;
      const double extent_n = nmax - nmin;
      double yaw = std::atan2(d.y, d.x);
      if (extent_d >= extent_n) {
        best.length = extent_d;
        best.width = extent_n;
      } else {
        best.length = extent_n;
        best.width = extent_d;
        yaw += kPi / 2.0;
      }
      // Rectangle orientation is defined modulo pi.
      yaw = wrap_angle(yaw);
      if (yaw <= -kPi / 2.0) yaw += kPi;
      if (yaw > kPi / 2.0) yaw -= kPi;
      best.yaw = yaw;
    }
  }
  if (!(best_area < std::numeric_limits<double>::infinity()) || best.width <= 0.0)
    throw GeometryError("min_area_rect_bev: degenerate (zero-area) point set");
  return best;
}

std::optional<Box3D> fit_box(const std::vector<Vec3>& frustum_points, const Ray2& axis,
                             const FitConfig& cfg) {
  cfg.validate();
  const CanonicalTransform canonical(axis);
  const std::vector<Vec3> rotated = canonical.apply(frustum_points);
  const std::vector<Vec3> elevated = ground_filter(rotated, cfg);
  const std::vector<Vec3> cluster = nearest_cluster(elevated, cfg);
  if (cluster.size() < 3) return std::nullopt;

  RectFit rect;
  try {
    rect = min_area_rect_bev(cluster);
  } catch (const GeometryError&) {
    return std::nullopt;
  }

  double z_min = cluster.front().z, z_max = cluster.front().z;
  for (const auto& p : cluster) {
    z_min = std::min(z_min, p.z);
    z_max = std::max(z_max, p.z);
  }

  Box3D canonical_box;
  canonical_box.center = {rect.center.x, rect.center.y, (z_min + z_max) / 2.0};
  canonical_box.size = {rect.width, rect.length, std::max(z_max - z_min, 0.05)};
  canonical_box.yaw = rect.yaw;

  Box3D out = canonical_box;
  out.center = canonical.invert(canonical_box.center);
  // Rectangle orientation is only defined modulo pi; fix the branch in the
  // global frame so identical footprints always fit to the same yaw.
  double yaw = wrap_angle(canonical_box.yaw + axis.angle);
  if (yaw <= -kPi / 2.0) yaw += kPi;
  if (yaw > kPi / 2.0) yaw -= kPi;
  out.yaw = yaw;
  return out;
}

}  // namespace sianms
