#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sianms/scene.hpp"

namespace sianms {

enum class EvalRegion { all, overlap_only };

struct EvalConfig {
  std::vector<double> dist_thresholds{0.5, 1.0, 2.0, 4.0};
  EvalRegion region = EvalRegion::all;
  std::vector<int> classes{0};
  double recall_floor = 0.10;       // nuScenes min recall / min precision
  double tp_metric_threshold = 2.0; // center-distance gate for ATE/ASE/AOE
  double d_max = 50.0;              // overlap wedges extend to this radius
  bool plain_interpolation = false; // no floor: plain 101-point mean
  bool aoe_fold_half = false;       // wrap orientation error to [0, pi/2]

  void validate() const;
};

struct ClassMetrics {
  std::optional<double> ap;               // percent, mean over thresholds
  std::map<double, double> ap_per_threshold;  // percent
  std::optional<double> ate;              // meters
  std::optional<double> ase;              // percent
  std::optional<double> aoe;              // radians
  std::size_t tp = 0, fp = 0, fn = 0;     // at tp_metric_threshold
  std::size_t n_gt = 0;
};

struct EvalReport {
  std::map<int, ClassMetrics> per_class;
};

/// Per-frame detections aligned with scene.frames.
using FrameBoxes = std::vector<std::vector<Box3D>>;

struct TpPair {
  Box3D detection;
  Box3D ground_truth;
};

enum class DetOutcome { tp, fp };

struct MatchOutcome {
  std::vector<DetOutcome> per_detection;  // aligned with input detections
  std::vector<int> matched_gt;            // gt index per detection, -1 for FP
  std::size_t fn = 0;
};

/// Greedy score-descending matching: each detection takes the nearest
/// unmatched ground truth with BEV center distance strictly below the
/// threshold.
MatchOutcome match_dets_to_gt(const std::vector<Box3D>& dets,
                              const std::vector<Box3D>& gts, double threshold);

/// Pooled average precision at one center-distance threshold, as a fraction
/// in [0, 1]; nullopt when there is no ground truth of the class.
std::optional<double> average_precision(const FrameBoxes& dets, const FrameBoxes& gts,
                                        double threshold, const EvalConfig& cfg);

double ate(const std::vector<TpPair>& tp_pairs);    // meters
double ase(const std::vector<TpPair>& tp_pairs);    // percent
double aoe(const std::vector<TpPair>& tp_pairs, bool fold_half = false);  // radians

/// Size-aligned 3D IoU of two boxes after centering and de-rotating.
double aligned_size_iou(const Box3D& a, const Box3D& b);

/// Keeps boxes whose BEV center lies inside any adjacent-pair coverage
/// intersection wedge (out to d_max). Region `all` keeps everything.
bool in_overlap_region(const CameraRig& rig, const Vec3& center, double d_max);
std::vector<Box3D> region_filter(const std::vector<Box3D>& boxes, const CameraRig& rig,
                                 EvalRegion region, double d_max);

/// Full evaluation of per-frame detections against scene ground truth.
EvalReport evaluate(const Scene& scene, const FrameBoxes& detections,
                    const EvalConfig& cfg);

/// Human-readable metric table.
std::string report_to_table(const EvalReport& report);

}  // namespace sianms
