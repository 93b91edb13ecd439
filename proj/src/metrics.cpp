#include "sianms/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "sianms/errors.hpp"

namespace sianms {

void EvalConfig::validate() const {
  if (dist_thresholds.empty())
    throw ConfigError("dist_thresholds must be nonempty");
  double prev = 0.0;
  for (const double t : dist_thresholds) {
    if (!(t > prev)) throw ConfigError("dist_thresholds must be positive ascending");
    prev = t;
  }
  if (!(recall_floor >= 0.0 && recall_floor < 1.0))
    throw ConfigError("recall_floor must be in [0, 1)");
  if (!(tp_metric_threshold > 0.0))
    throw ConfigError("tp_metric_threshold must be positive");
  if (!(d_max > 0.0)) throw ConfigError("d_max must be positive");
}

namespace {

struct PooledEntry {
  double score;
  std::size_t frame;
  std::size_t index;
  bool tp = false;
  int gt_index = -1;
};

// Global score-descending greedy matching (ties: frame, then input index).
// Each detection takes the nearest unmatched GT of its frame with BEV center
// distance strictly below the threshold.
std::vector<PooledEntry> pool_and_match(const FrameBoxes& dets, const FrameBoxes& gts,
                                        double threshold) {
  std::vector<PooledEntry> pooled;
  for (std::size_t f = 0; f < dets.size(); ++f)
    for (std::size_t i = 0; i < dets[f].size(); ++i)
      pooled.push_back({dets[f][i].score, f, i});
  std::sort(pooled.begin(), pooled.end(), [](const PooledEntry& a, const PooledEntry& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.frame != b.frame) return a.frame < b.frame;
    return a.index < b.index;
  });

  std::vector<std::vector<bool>> gt_taken(gts.size());
  for (std::size_t f = 0; f < gts.size(); ++f) gt_taken[f].assign(gts[f].size(), false);

  for (auto& entry : pooled) {
    const Box3D& det = dets[entry.frame][entry.index];
    const auto& frame_gts = gts[entry.frame];
    double best_dist = threshold;
    int best_gt = -1;
    for (std::size_t g = 0; g < frame_gts.size(); ++g) {
      if (gt_taken[entry.frame][g]) continue;
      const double dist = distance_bev(det.center, frame_gts[g].center);
      if (dist < best_dist) {
        best_dist = dist;
        best_gt = static_cast<int>(g);
      }
    }
    if (best_gt >= 0) {
      entry.tp = true;
      entry.gt_index = best_gt;
      gt_taken[entry.frame][static_cast<std::size_t>(best_gt)] = true;
    }
  }
  return pooled;
}

// np.interp-style piecewise-linear sample of the PR points: left fill is the
// first precision, right fill is 0; at duplicated recall values the last
// (lowest-precision) point wins.
double sample_precision(const std::vector<double>& rec, const std::vector<double>& prec,
                        double r) {
  if (rec.empty()) return 0.0;
  if (r < rec.front()) return prec.front();
  if (r > rec.back()) return 0.0;
  // Largest j with rec[j] <= r.
  const auto it = std::upper_bound(rec.begin(), rec.end(), r);
  const std::size_t j = static_cast<std::size_t>(it - rec.begin()) - 1;
  if (rec[j] == r || j + 1 == rec.size()) return prec[j];
  const double t = (r - rec[j]) / (rec[j + 1] - rec[j]);
  return prec[j] + t * (prec[j + 1] - prec[j]);
}

}  // namespace

MatchOutcome match_dets_to_gt(const std::vector<Box3D>& dets,
                              const std::vector<Box3D>& gts, double threshold) {
  const FrameBoxes d{dets};
  const FrameBoxes g{gts};
  const auto pooled = pool_and_match(d, g, threshold);
  MatchOutcome out;
  out.per_detection.assign(dets.size(), DetOutcome::fp);
  out.matched_gt.assign(dets.size(), -1);
  std::size_t matched = 0;
  for (const auto& e : pooled) {
    if (e.tp) {
      out.per_detection[e.index] = DetOutcome::tp;
      out.matched_gt[e.index] = e.gt_index;
      ++matched;
    }
  }
  out.fn = gts.size() - matched;
  return out;
}

std::optional<double> average_precision(const FrameBoxes& dets, const FrameBoxes& gts,
                                        double threshold, const EvalConfig& cfg) {
  cfg.validate();
  std::size_t npos = 0;
  for (const auto& frame : gts) npos += frame.size();
  if (npos == 0) return std::nullopt;

  const auto pooled = pool_and_match(dets, gts, threshold);
  if (pooled.empty()) return 0.0;

  std::vector<double> rec, prec;
  rec.reserve(pooled.size());
  prec.reserve(pooled.size());
  std::size_t tp = 0, fp = 0;
  for (const auto& e : pooled) {
    if (e.tp)
      ++tp;
    else
      ++fp;
    rec.push_back(static_cast<double>(tp) / static_cast<double>(npos));
    prec.push_back(static_cast<double>(tp) / static_cast<double>(tp + fp));
  }

  if (cfg.plain_interpolation) {
    double sum = 0.0;
    for (int k = 0; k <= 100; ++k) sum += sample_precision(rec, prec, k / 100.0);
    return sum / 101.0;
  }

  const int first = static_cast<int>(std::round(100.0 * cfg.recall_floor)) + 1;
  double sum = 0.0;
  int count = 0;
  for (int k = first; k <= 100; ++k) {
    const double p = sample_precision(rec, prec, k / 100.0);
    sum += std::max(0.0, p - cfg.recall_floor);
    ++count;
  }
  if (count == 0) return 0.0;
  return (sum / count) / (1.0 - cfg.recall_floor);
}

double ate(const std::vector<TpPair>& tp_pairs) {
  if (tp_pairs.empty()) throw ValidationError("ate: no true positives");
  double sum = 0.0;
  for (const auto& p : tp_pairs)
    sum += distance_bev(p.detection.center, p.ground_truth.center);
  return sum / static_cast<double>(tp_pairs.size());
}

double aligned_size_iou(const Box3D& a, const Box3D& b) {
  const double inter = std::min(a.size.x, b.size.x) * std::min(a.size.y, b.size.y) *
                       std::min(a.size.z, b.size.z);
  const double va = a.size.x * a.size.y * a.size.z;
  const double vb = b.size.x * b.size.y * b.size.z;
  return inter / (va + vb - inter);
}

double ase(const std::vector<TpPair>& tp_pairs) {
  if (tp_pairs.empty()) throw ValidationError("ase: no true positives");
  double sum = 0.0;
  for (const auto& p : tp_pairs) sum += 1.0 - aligned_size_iou(p.detection, p.ground_truth);
  return 100.0 * sum / static_cast<double>(tp_pairs.size());
}

double aoe(const std::vector<TpPair>& tp_pairs, bool fold_half) {
  if (tp_pairs.empty()) throw ValidationError("aoe: no true positives");
  double sum = 0.0;
  for (const auto& p : tp_pairs) {
    double d = angle_diff(p.detection.yaw, p.ground_truth.yaw);
    if (fold_half && d > kPi / 2.0) d = kPi - d;
    sum += d;
  }
  return sum / static_cast<double>(tp_pairs.size());
}

bool in_overlap_region(const CameraRig& rig, const Vec3& center, double d_max) {
  for (const auto& [a, b] : rig.adjacency) {
    const Camera& ca = rig.camera_by_id(a);
    const Camera& cb = rig.camera_by_id(b);
    const Vec2 apex = (ca.pos + cb.pos) * 0.5;
    const Vec2 d = center.xy() - apex;
    if (d.norm() > d_max) continue;
    const double theta = std::atan2(d.y, d.x);
    if (ca.coverage().contains(theta) && cb.coverage().contains(theta)) return true;
  }
  return false;
}

std::vector<Box3D> region_filter(const std::vector<Box3D>& boxes, const CameraRig& rig,
                                 EvalRegion region, double d_max) {
  if (region == EvalRegion::all) return boxes;
  std::vector<Box3D> out;
  for (const auto& b : boxes)
    if (in_overlap_region(rig, b.center, d_max)) out.push_back(b);
  return out;
}

EvalReport evaluate(const Scene& scene, const FrameBoxes& detections,
                    const EvalConfig& cfg) {
  cfg.validate();
  if (detections.size() != scene.frames.size())
    throw ValidationError("evaluate: detections do not align with scene frames");

  EvalReport report;
  for (const int cls : cfg.classes) {
    FrameBoxes dets(scene.frames.size());
    FrameBoxes gts(scene.frames.size());
    for (std::size_t f = 0; f < scene.frames.size(); ++f) {
      std::vector<Box3D> frame_dets;
      for (const auto& d : detections[f])
        if (d.class_id == cls) frame_dets.push_back(d);
      std::vector<Box3D> frame_gts;
      for (const auto& gt : scene.frames[f].ground_truth)
        if (gt.box.class_id == cls) frame_gts.push_back(gt.box);
      dets[f] = region_filter(frame_dets, scene.rig, cfg.region, cfg.d_max);
      gts[f] = region_filter(frame_gts, scene.rig, cfg.region, cfg.d_max);
    }

    ClassMetrics metrics;
    for (const auto& frame : gts) metrics.n_gt += frame.size();

    double ap_sum = 0.0;
    bool ap_defined = true;
    for (const double thr : cfg.dist_thresholds) {
      const auto ap_val = average_precision(dets, gts, thr, cfg);
      if (!ap_val) {
        ap_defined = false;
        break;
      }
      metrics.ap_per_threshold[thr] = 100.0 * *ap_val;
      ap_sum += *ap_val;
    }
    if (ap_defined)
      metrics.ap = 100.0 * ap_sum / static_cast<double>(cfg.dist_thresholds.size());

    const auto pooled = pool_and_match(dets, gts, cfg.tp_metric_threshold);
    std::vector<TpPair> tp_pairs;
    for (const auto& e : pooled) {
      if (e.tp) {
        tp_pairs.push_back({dets[e.frame][e.index],
                            gts[e.frame][static_cast<std::size_t>(e.gt_index)]});
        ++metrics.tp;
      } else {
        ++metrics.fp;
      }
    }
    metrics.fn = metrics.n_gt - metrics.tp;
    if (!tp_pairs.empty()) {
      metrics.ate = ate(tp_pairs);
      metrics.ase = ase(tp_pairs);
      metrics.aoe = aoe(tp_pairs, cfg.aoe_fold_half);
    }
    report.per_class[cls] = std::move(metrics);
  }
  return report;
}

std::string report_to_table(const EvalReport& report) {
  std::ostringstream out;
  out << "class      AP       ATE      ASE      AOE      TP     FP     FN\n";
  for (const auto& [cls, m] : report.per_class) {
    char line[160];
    auto fmt = [](const std::optional<double>& v, const char* format) {
      char buf[32];
      if (v)
        std::snprintf(buf, sizeof(buf), format, *v);
      else
        std::snprintf(buf, sizeof(buf), "     -");
      return std::string(buf);
    };
    std::snprintf(line, sizeof(line), "%-9d %s   %s   %s   %s   %-6zu %-6zu %-6zu\n", cls,
                  fmt(m.ap, "%6.2f").c_str(), fmt(m.ate, "%6.3f").c_str(),
                  fmt(m.ase, "%6.2f").c_str(), fmt(m.aoe, "%6.3f").c_str(), m.tp, m.fp,
                  m.fn);
    out << line;
  }
  return out.str();
}

}  // namespace sianms
