#pragma once

#include <cstddef>
#include <set>
#include <utility>
#include <vector>

#include "sianms/scene.hpp"

namespace sianms {

enum class MatchMode { greedy, optimal };

struct AssociationConfig {
  // Distance threshold above which a candidate pair is dismissed. Default is
  // the midpoint of the two contrastive margins (alpha=1, beta=3).
  double dis_thr = 2.0;
  MatchMode mode = MatchMode::greedy;
  std::set<int> classes{0};  // class ids to associate; default cars only

  void validate() const;
};

/// Dense row-major distance matrix between two candidate lists.
struct DistanceMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  double at(std::size_t i, std::size_t j) const { return values[i * cols + j]; }
  double& at(std::size_t i, std::size_t j) { return values[i * cols + j]; }
};

struct MatchPair {
  std::size_t row = 0;
  std::size_t col = 0;
  double distance = 0.0;
};

struct MatchResult {
  std::vector<MatchPair> pairs;  // sorted by row
  std::vector<std::size_t> unmatched_rows;
  std::vector<std::size_t> unmatched_cols;
};

/// Reference to a detection within a frame: camera list index + position.
struct DetectionRef {
  std::size_t camera_index = 0;
  std::size_t det_index = 0;
};

/// Detections of each camera of an adjacent pair whose frustum wedge
/// intersects the other camera's coverage, class-filtered per config.
/// Throws ValidationError when the cameras are not adjacent in the rig.
std::pair<std::vector<DetectionRef>, std::vector<DetectionRef>> overlap_candidates(
    const CameraRig& rig, const Frame& frame, std::pair<int, int> cam_pair,
    const AssociationConfig& cfg);

/// M[i][j] = L2 distance between embeddings i and j. Throws ValidationError
/// on missing embeddings or dimension mismatch.
DistanceMatrix pairwise_distances(const std::vector<std::vector<double>>& list_a,
                                  const std::vector<std::vector<double>>& list_b);

/// Pairs with distance > dis_thr are dismissed; the rest are sorted
/// ascending (ties by row then column) and accepted in order, skipping pairs
/// whose row or column is already consumed.
MatchResult greedy_match(const DistanceMatrix& m, const AssociationConfig& cfg);

/// One-to-one assignment restricted to entries <= dis_thr that maximizes the
/// pair count and, among those, minimizes the total distance.
MatchResult optimal_match(const DistanceMatrix& m, const AssociationConfig& cfg);

/// Threshold sweep over labeled candidate distances: returns the threshold
/// maximizing match F1 (midpoints between consecutive distinct distances).
double calibrate_threshold(const std::vector<std::pair<double, bool>>& labeled_distances);

}  // namespace sianms
