#include "sianms/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "sianms/errors.hpp"
#include "sianms/frustum.hpp"

namespace sianms {

using ordered_json = nlohmann::ordered_json;

void SimConfig::validate() const {
  if (n_cameras < 1) throw ConfigError("n_cameras must be >= 1");
  if (!(hfov > 0.0 && hfov < kPi)) throw ConfigError("hfov must be in (0, pi)");
  if (!(yaw_spacing > 0.0)) throw ConfigError("yaw_spacing must be positive");
  if (n_cameras > 1 && !(hfov > yaw_spacing))
    throw ConfigError("hfov must exceed yaw_spacing so adjacent cameras overlap");
  if (!(d_max > 0.0 && min_range > 0.0 && min_range < d_max))
    throw ConfigError("require 0 < min_range < d_max");
  if (n_frames < 1) throw ConfigError("n_frames must be >= 1");
  if (objects_min < 1 || objects_max < objects_min)
    throw ConfigError("invalid objects_per_frame range");
  if (feature_dim < 2) throw ConfigError("feature_dim must be >= 2");
  if (center_jitter_px < 0 || dropout_prob < 0 || dropout_prob > 1 || embed_noise < 0 ||
      view_drift < 0 || lidar_range_noise < 0 || motion_sigma < 0 ||
      yaw_motion_sigma < 0 || score_sigma < 0)
    throw ConfigError("noise parameters must be nonnegative (dropout in [0,1])");
  if (lidar_points_at_10m <= 0 || lidar_points_min < 1)
    throw ConfigError("lidar point budget must be positive");
  if (object_lifetime < 1) throw ConfigError("object_lifetime must be >= 1");
  if (image_width < 2 || image_height < 2) throw ConfigError("image size too small");
}

CameraRig generate_rig(const SimConfig& cfg) {
  cfg.validate();
  CameraRig rig;
  const double fx = cfg.image_width / (2.0 * std::tan(cfg.hfov / 2.0));
  for (int k = 0; k < cfg.n_cameras; ++k) {
    const double yaw = wrap_angle(k * cfg.yaw_spacing);
    const Vec2 pos = unit_dir(yaw) * cfg.rig_radius;
    rig.cameras.push_back(Camera::make(k, fx, fx, cfg.image_width / 2.0,
                                       cfg.image_height / 2.0,
                                       static_cast<int>(cfg.image_width),
                                       static_cast<int>(cfg.image_height), pos,
                                       cfg.camera_z, yaw));
  }
  if (cfg.n_cameras == 2) {
    rig.adjacency.emplace_back(0, 1);
  } else if (cfg.n_cameras > 2) {
    for (int k = 0; k < cfg.n_cameras; ++k)
      rig.adjacency.emplace_back(k, (k + 1) % cfg.n_cameras);
  }
  rig.validate();
  return rig;
}

namespace {

SimObject spawn_object(const SimConfig& cfg, Rng& rng, int instance_id) {
  SimObject obj;
  obj.instance_id = instance_id;
  obj.latent = rng.unit_vector(static_cast<std::size_t>(cfg.feature_dim));
  obj.drift_dir = rng.unit_vector(static_cast<std::size_t>(cfg.feature_dim));
  auto jitter = [&](double mean) {
    return std::max(mean * (1.0 + cfg.size_sigma_rel * rng.normal()), 0.3 * mean);
  };
  obj.size = {jitter(cfg.car_size_mean.x), jitter(cfg.car_size_mean.y),
              jitter(cfg.car_size_mean.z)};
  const double r_lo = cfg.min_range;
  const double r_hi = 0.9 * cfg.d_max;
  const double r = std::sqrt(rng.uniform(r_lo * r_lo, r_hi * r_hi));
  const double theta = rng.uniform(-kPi, kPi);
  obj.pos = unit_dir(theta) * r;
  obj.yaw = rng.uniform(-kPi, kPi);
  return obj;
}

}  // namespace

std::vector<SimObject> sample_objects(const SimConfig& cfg, Rng& rng) {
  cfg.validate();
  const int n = static_cast<int>(rng.uniform_int(cfg.objects_min, cfg.objects_max));
  std::vector<SimObject> objects;
  objects.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) objects.push_back(spawn_object(cfg, rng, i));
  return objects;
}

namespace {

Box3D object_box(const SimObject& obj) {
  Box3D box;
  box.center = {obj.pos.x, obj.pos.y, obj.size.z / 2.0};
  box.size = obj.size;
  box.yaw = wrap_angle(obj.yaw);
  box.score = 1.0;
  box.class_id = 0;
  return box;
}

// Uniform samples on the sensor-visible faces of the box (side faces whose
// outward normal points at the rig, plus the top face when the scanner sits
// above it), with range noise along the ray from the sensor.
void sample_lidar(const SimConfig& cfg, const SimObject& obj, Rng& rng,
                  std::vector<Vec3>& out) {
  const Vec3 sensor{0.0, 0.0, cfg.lidar_z};
  const double r = obj.pos.norm();
  const int budget = std::max(
      cfg.lidar_points_min,
      static_cast<int>(std::lround(cfg.lidar_points_at_10m * (10.0 / r) * (10.0 / r))));

  const Vec2 u_l = unit_dir(obj.yaw);          // along length
  const Vec2 u_w{-u_l.y, u_l.x};               // along width
  struct SideFace {
    Vec2 center, tangent;
    double half_extent;
    double area;
  };
  std::vector<SideFace> sides;
  auto add_side = [&](const Vec2& normal, const Vec2& tangent, double offset,
                      double half_extent) {
    const Vec2 center = obj.pos + normal * offset;
    if (normal.dot(center) < 0.0)  // facing the rig origin
      sides.push_back({center, tangent, half_extent, 2.0 * half_extent * obj.size.z});
  };
  add_side(u_l, u_w, obj.size.y / 2.0, obj.size.x / 2.0);
  add_side(u_l * -1.0, u_w, obj.size.y / 2.0, obj.size.x / 2.0);
  add_side(u_w, u_l, obj.size.x / 2.0, obj.size.y / 2.0);
  add_side(u_w * -1.0, u_l, obj.size.x / 2.0, obj.size.y / 2.0);

  const bool top_visible = cfg.lidar_z > obj.size.z;
  const double top_area = top_visible ? obj.size.x * obj.size.y : 0.0;

  double total_area = top_area;
  for (const auto& f : sides) total_area += f.area;
  if (total_area <= 0.0) return;

  auto emit = [&](Vec3 p) {
    const Vec3 ray = p - sensor;
    const double len = ray.norm();
    if (len > 1e-9) {
      const double noise = rng.normal(0.0, cfg.lidar_range_noise);
      p = p + ray * (noise / len);
    }
    out.push_back(p);
  };

  for (const auto& f : sides) {
    const int n_face = static_cast<int>(std::lround(budget * f.area / total_area));
    for (int i = 0; i < n_face; ++i) {
      const double t = rng.uniform(-f.half_extent, f.half_extent);
      const double z = rng.uniform(0.0, obj.size.z);
      emit({f.center.x + f.tangent.x * t, f.center.y + f.tangent.y * t, z});
    }
  }
  if (top_visible) {
    const int n_top = static_cast<int>(std::lround(budget * top_area / total_area));
    for (int i = 0; i < n_top; ++i) {
      const double a = rng.uniform(-obj.size.y / 2.0, obj.size.y / 2.0);
      const double b = rng.uniform(-obj.size.x / 2.0, obj.size.x / 2.0);
      emit({obj.pos.x + u_l.x * a + u_w.x * b, obj.pos.y + u_l.y * a + u_w.y * b,
            obj.size.z});
    }
  }
}

}  // namespace

Frame generate_frame(const SimConfig& cfg, const CameraRig& rig, int frame_id,
                     const std::vector<SimObject>& objects, Rng& rng) {
  Frame frame;
  frame.frame_id = frame_id;
  frame.detections.resize(rig.cameras.size());

  for (const auto& obj : objects) {
    const Box3D box = object_box(obj);
    GroundTruthObject gt;
    gt.instance_id = obj.instance_id;
    gt.box = box;

    for (std::size_t ci = 0; ci < rig.cameras.size(); ++ci) {
      const Camera& cam = rig.cameras[ci];
      const auto projected = project_box_to_image(cam, box);
      if (!projected) continue;
      gt.visible_in.push_back(cam.id);

      if (rng.bernoulli(cfg.dropout_prob)) continue;

      Detection2D det;
      det.camera_id = cam.id;
      det.class_id = 0;

      BBox2D bb = projected->bbox;
      const double du = rng.normal(0.0, cfg.center_jitter_px);
      const double dv = rng.normal(0.0, cfg.center_jitter_px);
      bb.u_min = std::clamp(bb.u_min + du, 0.0, static_cast<double>(cam.width) - 1.0);
      bb.u_max = std::clamp(bb.u_max + du, bb.u_min + 1.0, static_cast<double>(cam.width));
      bb.v_min = std::clamp(bb.v_min + dv, 0.0, static_cast<double>(cam.height) - 1.0);
      bb.v_max = std::clamp(bb.v_max + dv, bb.v_min + 1.0, static_cast<double>(cam.height));
      det.bbox = bb;
      det.truncated_left = projected->truncated_left;
      det.truncated_right = projected->truncated_right;

      const double r = (obj.pos - cam.pos).norm();
      const bool truncated = det.truncated_left || det.truncated_right;
      det.score = std::clamp(cfg.score_base - cfg.score_range_coef * (r / cfg.d_max) -
                                 (truncated ? cfg.score_trunc_penalty : 0.0) +
                                 rng.normal(0.0, cfg.score_sigma),
                             0.05, 0.99);

      // Feature vector: instance latent + isotropic noise + view-dependent
      // drift along the instance's drift direction, scaled by the bearing of
      // the (pre-jitter) box center from the optical axis.
      const double bearing =
          bearing_of_u(cam, projected->bbox.center_u()) / (cam.hfov / 2.0);
      det.embedding.resize(static_cast<std::size_t>(cfg.feature_dim));
      for (int k = 0; k < cfg.feature_dim; ++k)
        det.embedding[static_cast<std::size_t>(k)] =
            obj.latent[static_cast<std::size_t>(k)] +
            cfg.embed_noise * rng.normal() +
            cfg.view_drift * bearing * obj.drift_dir[static_cast<std::size_t>(k)];

      frame.detections[ci].push_back(std::move(det));
    }

    if (!gt.visible_in.empty()) frame.ground_truth.push_back(std::move(gt));
    sample_lidar(cfg, obj, rng, frame.lidar);
  }
  return frame;
}

Scene generate_scene(const SimConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  Scene scene;
  scene.rig = generate_rig(cfg);
  scene.seed = cfg.seed;
  scene.meta = sim_config_to_json_text(cfg);

  std::vector<SimObject> objects = sample_objects(cfg, rng);
  int next_instance_id = static_cast<int>(objects.size());
  for (int f = 0; f < cfg.n_frames; ++f) {
    if (f > 0) {
      for (std::size_t i = 0; i < objects.size(); ++i) {
        // Objects leave the scene after their lifetime (staggered per slot)
        // and a fresh instance takes the slot; survivors drift.
        if ((f + static_cast<int>(i)) % cfg.object_lifetime == 0) {
          objects[i] = spawn_object(cfg, rng, next_instance_id++);
        } else {
          objects[i].pos.x += rng.normal(0.0, cfg.motion_sigma);
          objects[i].pos.y += rng.normal(0.0, cfg.motion_sigma);
          objects[i].yaw =
              wrap_angle(objects[i].yaw + rng.normal(0.0, cfg.yaw_motion_sigma));
        }
      }
    }
    scene.frames.push_back(generate_frame(cfg, scene.rig, f, objects, rng));
  }
  scene.validate();
  return scene;
}

namespace {

template <typename T>
void read_if(const ordered_json& j, const char* key, T& value) {
  if (auto it = j.find(key); it != j.end()) value = it->get<T>();
}

}  // namespace

std::string sim_config_to_json_text(const SimConfig& c) {
  ordered_json j;
  j["n_cameras"] = c.n_cameras;
  j["hfov"] = c.hfov;
  j["yaw_spacing"] = c.yaw_spacing;
  j["camera_z"] = c.camera_z;
  j["lidar_z"] = c.lidar_z;
  j["image_width"] = c.image_width;
  j["image_height"] = c.image_height;
  j["rig_radius"] = c.rig_radius;
  j["d_max"] = c.d_max;
  j["min_range"] = c.min_range;
  j["n_frames"] = c.n_frames;
  j["objects_min"] = c.objects_min;
  j["objects_max"] = c.objects_max;
  j["car_size_mean"] = ordered_json::array({c.car_size_mean.x, c.car_size_mean.y,
                                            c.car_size_mean.z});
  j["size_sigma_rel"] = c.size_sigma_rel;
  j["center_jitter_px"] = c.center_jitter_px;
  j["dropout_prob"] = c.dropout_prob;
  j["embed_noise"] = c.embed_noise;
  j["view_drift"] = c.view_drift;
  j["lidar_range_noise"] = c.lidar_range_noise;
  j["lidar_points_at_10m"] = c.lidar_points_at_10m;
  j["lidar_points_min"] = c.lidar_points_min;
  j["motion_sigma"] = c.motion_sigma;
  j["yaw_motion_sigma"] = c.yaw_motion_sigma;
  j["object_lifetime"] = c.object_lifetime;
  j["score_base"] = c.score_base;
  j["score_range_coef"] = c.score_range_coef;
  j["score_trunc_penalty"] = c.score_trunc_penalty;
  j["score_sigma"] = c.score_sigma;
  j["feature_dim"] = c.feature_dim;
  j["seed"] = c.seed;
  return j.dump(2);
}

SimConfig sim_config_from_json_text(const std::string& text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("sim config: ") + e.what());
  }
  static const std::set<std::string> known{
      "n_cameras", "hfov", "yaw_spacing", "camera_z", "lidar_z", "image_width",
      "image_height", "rig_radius", "d_max", "min_range", "n_frames", "objects_min",
      "objects_max", "car_size_mean", "size_sigma_rel", "center_jitter_px",
      "dropout_prob", "embed_noise", "view_drift", "lidar_range_noise",
      "lidar_points_at_10m", "lidar_points_min", "motion_sigma", "yaw_motion_sigma",
      "object_lifetime", "score_base", "score_range_coef", "score_trunc_penalty",
      "score_sigma", "feature_dim", "seed"};
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!known.count(it.key()))
      throw ParseError("sim config: unknown field \"" + it.key() + "\"");

  SimConfig c;
  read_if(j, "n_cameras", c.n_cameras);
  read_if(j, "hfov", c.hfov);
  read_if(j, "yaw_spacing", c.yaw_spacing);
  read_if(j, "camera_z", c.camera_z);
  read_if(j, "lidar_z", c.lidar_z);
  read_if(j, "image_width", c.image_width);
  read_if(j, "image_height", c.image_height);
  read_if(j, "rig_radius", c.rig_radius);
  read_if(j, "d_max", c.d_max);
  read_if(j, "min_range", c.min_range);
  read_if(j, "n_frames", c.n_frames);
  read_if(j, "objects_min", c.objects_min);
  read_if(j, "objects_max", c.objects_max);
  if (auto it = j.find("car_size_mean"); it != j.end()) {
    if (!it->is_array() || it->size() != 3)
      throw ParseError("sim config: car_size_mean must be [w, l, h]");
    c.car_size_mean = {(*it)[0].get<double>(), (*it)[1].get<double>(),
                       (*it)[2].get<double>()};
  }
  read_if(j, "size_sigma_rel", c.size_sigma_rel);
  read_if(j, "center_jitter_px", c.center_jitter_px);
  read_if(j, "dropout_prob", c.dropout_prob);
  read_if(j, "embed_noise", c.embed_noise);
  read_if(j, "view_drift", c.view_drift);
  read_if(j, "lidar_range_noise", c.lidar_range_noise);
  read_if(j, "lidar_points_at_10m", c.lidar_points_at_10m);
  read_if(j, "lidar_points_min", c.lidar_points_min);
  read_if(j, "motion_sigma", c.motion_sigma);
  read_if(j, "yaw_motion_sigma", c.yaw_motion_sigma);
  read_if(j, "object_lifetime", c.object_lifetime);
  read_if(j, "score_base", c.score_base);
  read_if(j, "score_range_coef", c.score_range_coef);
  read_if(j, "score_trunc_penalty", c.score_trunc_penalty);
  read_if(j, "score_sigma", c.score_sigma);
  read_if(j, "feature_dim", c.feature_dim);
  read_if(j, "seed", c.seed);
  c.validate();
  return c;
}

SimConfig load_sim_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open sim config: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return sim_config_from_json_text(buf.str());
}

}  // namespace sianms
