#include "sianms/association.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "sianms/errors.hpp"
#include "sianms/frustum.hpp"

namespace sianms {

void AssociationConfig::validate() const {
  if (!(dis_thr >= 0.0)) throw ValidationError("dis_thr must be nonnegative");
}

std::pair<std::vector<DetectionRef>, std::vector<DetectionRef>> overlap_candidates(
    const CameraRig& rig, const Frame& frame, std::pair<int, int> cam_pair,
    const AssociationConfig& cfg) {
  cfg.validate();
  if (!rig.is_adjacent(cam_pair.first, cam_pair.second))
    throw ValidationError("cameras " + std::to_string(cam_pair.first) + "," +
                          std::to_string(cam_pair.second) + " are not adjacent");

  auto gather = [&](int cam_id, int other_id) {
    const auto idx = rig.index_of(cam_id);
    const Camera& cam = rig.cameras[*idx];
    const Camera& other = rig.camera_by_id(other_id);
    const AngularInterval other_coverage = other.coverage();
    std::vector<DetectionRef> refs;
    const auto& dets = frame.detections[*idx];
    for (std::size_t i = 0; i < dets.size(); ++i) {
      const auto& det = dets[i];
      if (!cfg.classes.empty() && !cfg.classes.count(det.class_id)) continue;
      const AngularInterval wedge(cam.yaw + bearing_of_u(cam, det.bbox.u_min),
                                  cam.yaw + bearing_of_u(cam, det.bbox.u_max));
      if (wedge.intersects(other_coverage)) refs.push_back({*idx, i});
    }
    return refs;
  };

  return {gather(cam_pair.first, cam_pair.second),
          gather(cam_pair.second, cam_pair.first)};
}

DistanceMatrix pairwise_distances(const std::vector<std::vector<double>>& list_a,
                                  const std::vector<std::vector<double>>& list_b) {
  DistanceMatrix m;
  m.rows = list_a.size();
  m.cols = list_b.size();
  m.values.assign(m.rows * m.cols, 0.0);
  for (std::size_t i = 0; i < m.rows; ++i) {
    if (list_a[i].empty()) throw ValidationError("missing embedding in list_a");
    for (std::size_t j = 0; j < m.cols; ++j) {
      if (list_b[j].empty()) throw ValidationError("missing embedding in list_b");
      if (list_a[i].size() != list_b[j].size())
        throw ValidationError("embedding dimension mismatch");
      double sq = 0.0;
      for (std::size_t k = 0; k < list_a[i].size(); ++k) {
        const double d = list_a[i][k] - list_b[j][k];
        sq += d * d;
      }
      m.at(i, j) = std::sqrt(sq);
    }
  }
  return m;
}

namespace {

void fill_unmatched(const DistanceMatrix& m, MatchResult& result) {
  std::vector<bool> row_used(m.rows, false), col_used(m.cols, false);
  for (const auto& p : result.pairs) {
    row_used[p.row] = true;
    col_used[p.col] = true;
  }
  for (std::size_t i = 0; i < m.rows; ++i)
    if (!row_used[i]) result.unmatched_rows.push_back(i);
  for (std::size_t j = 0; j < m.cols; ++j)
    if (!col_used[j]) result.unmatched_cols.push_back(j);
}

}  // namespace

MatchResult greedy_match(const DistanceMatrix& m, const AssociationConfig& cfg) {
  cfg.validate();
  struct Entry {
    double dist;
    std::size_t row, col;
  };
  std::vector<Entry> entries;
  for (std::size_t i = 0; i < m.rows; ++i)
    for (std::size_t j = 0; j < m.cols; ++j)
      if (m.at(i, j) <= cfg.dis_thr) entries.push_back({m.at(i, j), i, j});
  std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    if (a.dist != b.dist) return a.dist < b.dist;
    if (a.row != b.row) return a.row < b.row;
    return a.col < b.col;
  });

  MatchResult result;
  std::vector<bool> row_used(m.rows, false), col_used(m.cols, false);
  for (const auto& e : entries) {
    if (row_used[e.row] || col_used[e.col]) continue;
    row_used[e.row] = true;
    col_used[e.col] = true;
    result.pairs.push_back({e.row, e.col, e.dist});
  }
  std::sort(result.pairs.begin(), result.pairs.end(),
            [](const MatchPair& a, const MatchPair& b) { return a.row < b.row; });
  fill_unmatched(m, result);
  return result;
}

namespace {

// Minimum-cost perfect matching on a square cost matrix (Jonker-style
// potentials, O(n^3)). Returns row_of_col assignments.
std::vector<int> solve_square_assignment(const std::vector<std::vector<double>>& cost) {
  constexpr double kInf = std::numeric_limits<double>::infinity();
  const int n = static_cast<int>(cost.size());
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, kInf);
    std::vector<bool> used(n + 1, false);
    do {
      used[j0] = true;
      const int i0 = p[j0];
      int j1 = 0;
      double delta = kInf;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  return p;  // p[j] = row (1-based) assigned to column j
}

}  // namespace

MatchResult optimal_match(const DistanceMatrix& m, const AssociationConfig& cfg) {
  cfg.validate();
  MatchResult result;
  if (m.rows == 0 || m.cols == 0) {
    fill_unmatched(m, result);
    return result;
  }

  // Pad to square; forbidden (> dis_thr) entries get a constant cost larger
  // than any achievable real total, so the solver first maximizes the number
  // of allowed pairs, then minimizes their total distance. Padding cells
  // cost 0.
  double allowed_sum = 0.0;
  for (std::size_t i = 0; i < m.rows; ++i)
    for (std::size_t j = 0; j < m.cols; ++j)
      if (m.at(i, j) <= cfg.dis_thr) allowed_sum += m.at(i, j);
  const double big = allowed_sum + 1.0;

  const std::size_t n = std::max(m.rows, m.cols);
  std::vector<std::vector<double>> cost(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < m.rows; ++i)
    for (std::size_t j = 0; j < m.cols; ++j)
      cost[i][j] = (m.at(i, j) <= cfg.dis_thr) ? m.at(i, j) : big;

  const std::vector<int> p = solve_square_assignment(cost);
  for (std::size_t j = 1; j <= n; ++j) {
    const int row1 = p[j];
    if (row1 == 0) continue;
    const std::size_t i = static_cast<std::size_t>(row1 - 1);
    const std::size_t c = j - 1;
    if (i >= m.rows || c >= m.cols) continue;
    if (m.at(i, c) > cfg.dis_thr) continue;
    result.pairs.push_back({i, c, m.at(i, c)});
  }
  std::sort(result.pairs.begin(), result.pairs.end(),
            [](const MatchPair& a, const MatchPair& b) { return a.row < b.row; });
  fill_unmatched(m, result);
  return result;
}

double calibrate_threshold(
    const std::vector<std::pair<double, bool>>& labeled_distances) {
  if (labeled_distances.empty())
    throw ValidationError("calibrate_threshold: no labeled distances");
  std::vector<double> ds;
  ds.reserve(labeled_distances.size());
  for (const auto& [d, positive] : labeled_distances) ds.push_back(d);
  std::sort(ds.begin(), ds.end());
  ds.erase(std::unique(ds.begin(), ds.end()), ds.end());

  std::vector<double> candidates;
  candidates.push_back(ds.front() / 2.0);
  for (std::size_t i = 0; i + 1 < ds.size(); ++i)
    candidates.push_back((ds[i] + ds[i + 1]) / 2.0);
  candidates.push_back(ds.back() + 1.0);

  double best_f1 = -1.0;
  std::vector<double> plateau;
  for (const double thr : candidates) {
    std::size_t tp = 0, fp = 0, fn = 0;
    for (const auto& [d, positive] : labeled_distances) {
      const bool predicted = d <= thr;
      if (predicted && positive) ++tp;
      if (predicted && !positive) ++fp;
      if (!predicted && positive) ++fn;
    }
    const double denom = static_cast<double>(2 * tp + fp + fn);
    const double f1 = denom > 0.0 ? 2.0 * static_cast<double>(tp) / denom : 0.0;
    if (f1 > best_f1 + 1e-15) {
      best_f1 = f1;
      plateau.clear();
    }
    if (f1 >= best_f1 - 1e-15) plateau.push_back(thr);
  }
  // Middle of the best plateau: separable data gets a mid-gap threshold.
  return plateau[plateau.size() / 2];
}

}  // namespace sianms
