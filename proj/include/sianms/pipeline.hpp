#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sianms/association.hpp"
#include "sianms/boxfit.hpp"
#include "sianms/contrastive.hpp"
#include "sianms/frustum.hpp"
#include "sianms/metrics.hpp"
#include "sianms/scene.hpp"
#include "sianms/suppression.hpp"

namespace sianms {

enum class Variant { vanilla, axis_nms, sianms, hybrid };

std::string variant_name(Variant v);
Variant variant_from_name(const std::string& name);

struct PipelineConfig {
  Variant variant = Variant::vanilla;
  AssociationConfig association;
  NmsConfig nms;
  FitConfig fit;
  DetectionRange range;
  EvalConfig eval;
  int threads = 1;

  void validate() const;
};

struct DismissedMatch {
  int frame_id = 0;
  int camera_a = 0, camera_b = 0;
  std::size_t det_a = 0, det_b = 0;
  double distance = 0.0;
  std::string reason;  // "disjoint_frustums"
};

struct DroppedFit {
  int frame_id = 0;
  int camera_id = 0;  // -1 for merged fits
  std::size_t det_index = 0;
  std::string reason;  // "empty_fit"
};

struct RunLog {
  std::size_t frames = 0;
  std::size_t detections_in = 0;
  std::size_t boxes_out = 0;
  std::size_t matches = 0;
  std::vector<DismissedMatch> dismissed;
  std::vector<DroppedFit> dropped;
};

struct PipelineResult {
  FrameBoxes boxes;  // aligned with scene.frames
  RunLog log;
};

/// Runs one variant over the whole scene. The encoder is required for the
/// sianms and hybrid variants (ConfigError otherwise).
PipelineResult run_pipeline(const Scene& scene, const PipelineConfig& cfg,
                            const ToyEncoder* encoder);

/// Per-frame match lists for the `match` subcommand, including the merged
/// axis construction (boundary circle points and their midpoint) for
/// plotting when the pair's frustums overlap.
struct FrameMatchRecord {
  int frame_id = 0;
  int camera_a = 0, camera_b = 0;
  std::size_t det_a = 0, det_b = 0;
  double distance = 0.0;
  bool frustums_overlap = false;
  Vec2 p_l, p_r, p_m;
  double axis_yaw = 0.0;
};

std::vector<FrameMatchRecord> match_scene(const Scene& scene, const PipelineConfig& cfg,
                                          const ToyEncoder& encoder);

struct BenchmarkReport {
  // region name ("all" / "overlap") -> variant name -> metrics of the
  // benchmarked class.
  std::map<std::string, std::map<std::string, ClassMetrics>> cells;
  int class_id = 0;
};

/// Runs every variant and evaluates it in both regions (Table-style report).
BenchmarkReport run_benchmark(const Scene& scene,
                              const std::vector<PipelineConfig>& variants,
                              const ToyEncoder* encoder);

std::string benchmark_to_table(const BenchmarkReport& report);
std::string benchmark_to_json_text(const BenchmarkReport& report);
BenchmarkReport benchmark_from_json_text(const std::string& text);

/// Detections file I/O (per-frame Box3D lists; see docs/file_formats.md).
void save_detections(const FrameBoxes& boxes, const std::string& path);
FrameBoxes load_detections(const std::string& path);

std::string run_log_to_json_text(const RunLog& log);

/// Labeled candidate distances from a scene (ground-truth instance identity
/// via image-plane IoU), for threshold calibration.
std::vector<std::pair<double, bool>> labeled_candidate_distances(
    const Scene& scene, const PipelineConfig& cfg, const ToyEncoder& encoder);

}  // namespace sianms
