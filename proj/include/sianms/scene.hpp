#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sianms/geom.hpp"

namespace sianms {

// Conventions, used everywhere: the rig lives in a planar global frame
// (roll = pitch = 0, fixed mount height). A camera's optical axis is its
// local +x in BEV; a pixel column u maps to the bearing
// yaw + atan((u - cx) / fx), so u grows with the bearing. All angles are
// radians, all lengths meters.

struct Camera {
  int id = 0;
  double fx = 0.0, fy = 0.0;
  double cx = 0.0, cy = 0.0;
  int width = 0, height = 0;
  Vec2 pos;           // global BEV position
  double z = 0.0;     // mount height
  double yaw = 0.0;
  double hfov = 0.0;  // derived: 2*atan(width / (2*fx)); stored for convenience

  /// Builds a camera with hfov derived from width/fx.
  static Camera make(int id, double fx, double fy, double cx, double cy, int width,
                     int height, Vec2 pos, double z, double yaw);

  /// Angular coverage wedge of the camera in the global frame.
  AngularInterval coverage() const {
    return AngularInterval::from_center(yaw, hfov);
  }

  void validate() const;  // throws ValidationError
};

struct CameraRig {
  std::vector<Camera> cameras;
  std::vector<std::pair<int, int>> adjacency;  // contiguous camera-id pairs, cyclic

  const Camera& camera_by_id(int id) const;  // throws ValidationError if absent
  std::optional<std::size_t> index_of(int id) const;
  bool is_adjacent(int a, int b) const;

  void validate() const;
};

struct BBox2D {
  double u_min = 0.0, v_min = 0.0, u_max = 0.0, v_max = 0.0;

  double center_u() const { return 0.5 * (u_min + u_max); }
  double center_v() const { return 0.5 * (v_min + v_max); }
  double width() const { return u_max - u_min; }
  double height() const { return v_max - v_min; }
};

struct Detection2D {
  int camera_id = 0;
  BBox2D bbox;
  double score = 0.0;
  int class_id = 0;
  std::vector<double> embedding;  // feature vector; empty for GT-projection records
  bool truncated_left = false;
  bool truncated_right = false;
};

struct Box3D {
  Vec3 center;
  Vec3 size;  // (w, l, h); l is the extent along yaw
  double yaw = 0.0;
  double score = 0.0;
  int class_id = 0;

  void validate() const;
};

struct GroundTruthObject {
  int instance_id = 0;
  Box3D box;
  std::vector<int> visible_in;
};

struct Frame {
  int frame_id = 0;
  // detections[i] belongs to rig.cameras[i].
  std::vector<std::vector<Detection2D>> detections;
  std::vector<Vec3> lidar;  // global frame
  std::vector<GroundTruthObject> ground_truth;
};

struct Scene {
  CameraRig rig;
  std::vector<Frame> frames;
  std::uint64_t seed = 0;
  std::string meta;  // generator parameters, serialized JSON text

  void validate() const;
};

/// Rigid transform of a box from the camera frame (forward = +x) to the
/// global frame. Size unchanged, yaw re-normalized.
Box3D camera_to_global(const Camera& cam, const Box3D& box_local);

/// Inverse of camera_to_global.
Box3D global_to_camera(const Camera& cam, const Box3D& box_global);

/// Scene file I/O (JSON, format_version "1"; see docs/file_formats.md).
/// Round trips are bit-exact for every numeric field.
Scene load_scene(const std::string& path);
void save_scene(const Scene& scene, const std::string& path);

Scene scene_from_json_text(const std::string& text);
std::string scene_to_json_text(const Scene& scene);

}  // namespace sianms
