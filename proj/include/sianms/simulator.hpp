#pragma once

#include <cstdint>
#include <string>

#include "sianms/rng.hpp"
#include "sianms/scene.hpp"

namespace sianms {

struct SimConfig {
  int n_cameras = 6;
  double hfov = 70.0 * kPi / 180.0;
  double yaw_spacing = 60.0 * kPi / 180.0;
  double camera_z = 1.6;
  double lidar_z = 2.1;  // roof-mounted scanner, above most car roofs
  double image_width = 1600;
  double image_height = 900;
  double rig_radius = 0.0;  // 0 = co-located cameras; >0 offsets each outward

  double d_max = 50.0;
  double min_range = 5.0;

  int n_frames = 10;
  int objects_min = 6;
  int objects_max = 12;

  // Car size prior (w, l, h) with 10% relative sigma.
  Vec3 car_size_mean{1.9, 4.5, 1.7};
  double size_sigma_rel = 0.10;

  // Noise model.
  double center_jitter_px = 2.0;    // detection bbox center jitter
  double dropout_prob = 0.05;       // per camera detection
  double embed_noise = 0.05;        // sigma_e on the instance latent
  double view_drift = 0.1;          // feature drift per unit image bearing offset
  double lidar_range_noise = 0.03;  // sigma_r, meters along the viewing ray
  double lidar_points_at_10m = 1500; // per-object budget, scaled by (10/r)^2
  int lidar_points_min = 16;
  double motion_sigma = 0.15;       // per-frame Brownian drift of objects
  double yaw_motion_sigma = 0.01;
  int object_lifetime = 8;  // frames before an object leaves and a new one spawns

  // Score model: base - range and truncation penalties + jitter.
  double score_base = 0.92;
  double score_range_coef = 0.25;
  double score_trunc_penalty = 0.12;
  double score_sigma = 0.03;

  int feature_dim = 32;  // encoder input dimension
  std::uint64_t seed = 42;

  void validate() const;
};

/// n cameras at shared (or ring-offset) positions, yaws k * spacing,
/// adjacency between consecutive cameras cyclically. Throws ConfigError when
/// hfov <= yaw_spacing (no overlap).
CameraRig generate_rig(const SimConfig& cfg);

/// Persistent object state: identity, feature latents, geometry.
struct SimObject {
  int instance_id = 0;
  std::vector<double> latent;     // unit-norm feature latent
  std::vector<double> drift_dir;  // direction of view-dependent feature drift
  Vec3 size;
  Vec2 pos;
  double yaw = 0.0;
};

std::vector<SimObject> sample_objects(const SimConfig& cfg, Rng& rng);

Frame generate_frame(const SimConfig& cfg, const CameraRig& rig, int frame_id,
                     const std::vector<SimObject>& objects, Rng& rng);

/// Full deterministic scene: same config (incl. seed) gives a bitwise
/// identical scene.
Scene generate_scene(const SimConfig& cfg);

/// SimConfig JSON I/O (flat object mirroring the field names).
SimConfig sim_config_from_json_text(const std::string& text);
std::string sim_config_to_json_text(const SimConfig& cfg);
SimConfig load_sim_config(const std::string& path);

}  // namespace sianms
