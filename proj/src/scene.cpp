#include "sianms/scene.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "sianms/errors.hpp"

namespace sianms {

using ordered_json = nlohmann::ordered_json;

Camera Camera::make(int id, double fx, double fy, double cx, double cy, int width,
                    int height, Vec2 pos, double z, double yaw) {
  Camera cam;
  cam.id = id;
  cam.fx = fx;
  cam.fy = fy;
  cam.cx = cx;
  cam.cy = cy;
  cam.width = width;
  cam.height = height;
  cam.pos = pos;
  cam.z = z;
  cam.yaw = wrap_angle(yaw);
  cam.hfov = 2.0 * std::atan2(static_cast<double>(width), 2.0 * fx);
  cam.validate();
  return cam;
}

void Camera::validate() const {
  if (fx <= 0.0 || fy <= 0.0)
    throw ValidationError("camera " + std::to_string(id) + ": fx/fy must be positive");
  if (width <= 0 || height <= 0)
    throw ValidationError("camera " + std::to_string(id) + ": width/height must be positive");
  if (!(hfov > 0.0 && hfov < kPi))
    throw ValidationError("camera " + std::to_string(id) + ": hfov out of (0, pi)");
  const double expected = 2.0 * std::atan2(static_cast<double>(width), 2.0 * fx);
  if (std::abs(expected - hfov) > 1e-9)
    throw ValidationError("camera " + std::to_string(id) +
                          ": hfov inconsistent with width/fx");
}

const Camera& CameraRig::camera_by_id(int id) const {
  for (const auto& c : cameras)
    if (c.id == id) return c;
  throw ValidationError("camera_id " + std::to_string(id) + " not in rig");
}

std::optional<std::size_t> CameraRig::index_of(int id) const {
  for (std::size_t i = 0; i < cameras.size(); ++i)
    if (cameras[i].id == id) return i;
  return std::nullopt;
}

bool CameraRig::is_adjacent(int a, int b) const {
  for (const auto& [p, q] : adjacency)
    if ((p == a && q == b) || (p == b && q == a)) return true;
  return false;
}

void CameraRig::validate() const {
  std::set<int> ids;
  for (const auto& cam : cameras) {
    cam.validate();
    if (!ids.insert(cam.id).second)
      throw ValidationError("duplicate camera id " + std::to_string(cam.id));
  }
  for (const auto& [a, b] : adjacency) {
    const Camera& ca = camera_by_id(a);
    const Camera& cb = camera_by_id(b);
    if (!ca.coverage().intersects(cb.coverage()))
      throw ValidationError("adjacent cameras " + std::to_string(a) + "," +
                            std::to_string(b) + " have no angular overlap");
  }
}

void Box3D::validate() const {
  if (!(size.x > 0.0 && size.y > 0.0 && size.z > 0.0))
    throw ValidationError("box size must be positive");
  if (!(yaw > -kPi - 1e-12 && yaw <= kPi + 1e-12))
    throw ValidationError("box yaw not normalized to (-pi, pi]");
}

void Scene::validate() const {
  rig.validate();
  if (frames.empty()) throw ValidationError("scene has no frames");
  for (const auto& frame : frames) {
    if (frame.detections.size() != rig.cameras.size())
      throw ValidationError("frame " + std::to_string(frame.frame_id) +
                            ": detections lists do not match rig cameras");
    for (std::size_t i = 0; i < frame.detections.size(); ++i) {
      for (const auto& det : frame.detections[i]) {
        if (!rig.index_of(det.camera_id))
          throw ValidationError("frame " + std::to_string(frame.frame_id) +
                                ": detection references camera_id " +
                                std::to_string(det.camera_id) + " not in rig");
        if (det.camera_id != rig.cameras[i].id)
          throw ValidationError("frame " + std::to_string(frame.frame_id) +
                                ": detection filed under wrong camera list");
        if (det.score < 0.0 || det.score > 1.0)
          throw ValidationError("frame " + std::to_string(frame.frame_id) +
                                ": detection score outside [0,1]");
        if (!(det.bbox.u_min < det.bbox.u_max && det.bbox.v_min < det.bbox.v_max))
          throw ValidationError("frame " + std::to_string(frame.frame_id) +
                                ": empty detection bbox");
        const Camera& cam = rig.cameras[i];
        if (det.bbox.u_min < 0.0 || det.bbox.u_max > cam.width ||
            det.bbox.v_min < 0.0 || det.bbox.v_max > cam.height)
          throw ValidationError("frame " + std::to_string(frame.frame_id) +
                                ": detection bbox outside image bounds");
      }
    }
    std::set<int> instance_ids;
    for (const auto& gt : frame.ground_truth) {
      if (!instance_ids.insert(gt.instance_id).second)
        throw ValidationError("frame " + std::to_string(frame.frame_id) +
                              ": duplicate instance_id " +
                              std::to_string(gt.instance_id));
      if (gt.visible_in.empty())
        throw ValidationError("frame " + std::to_string(frame.frame_id) +
                              ": ground-truth object with empty visible_in");
    }
  }
}

Box3D camera_to_global(const Camera& cam, const Box3D& box_local) {
  Box3D out = box_local;
  const double c = std::cos(cam.yaw);
  const double s = std::sin(cam.yaw);
  out.center.x = c * box_local.center.x - s * box_local.center.y + cam.pos.x;
  out.center.y = s * box_local.center.x + c * box_local.center.y + cam.pos.y;
  out.center.z = box_local.center.z + cam.z;
  out.yaw = wrap_angle(box_local.yaw + cam.yaw);
  return out;
}

Box3D global_to_camera(const Camera& cam, const Box3D& box_global) {
  Box3D out = box_global;
  const double c = std::cos(cam.yaw);
  const double s = std::sin(cam.yaw);
  const double dx = box_global.center.x - cam.pos.x;
  const double dy = box_global.center.y - cam.pos.y;
  out.center.x = c * dx + s * dy;
  out.center.y = -s * dx + c * dy;
  out.center.z = box_global.center.z - cam.z;
  out.yaw = wrap_angle(box_global.yaw - cam.yaw);
  return out;
}

namespace {

constexpr const char* kFormatVersion = "1";

ordered_json vec2_json(const Vec2& v) { return ordered_json::array({v.x, v.y}); }
ordered_json vec3_json(const Vec3& v) { return ordered_json::array({v.x, v.y, v.z}); }

Vec2 vec2_from(const ordered_json& j, const std::string& ctx) {
  if (!j.is_array() || j.size() != 2)
    throw ParseError(ctx + ": expected [x, y]");
  return {j[0].get<double>(), j[1].get<double>()};
}

Vec3 vec3_from(const ordered_json& j, const std::string& ctx) {
  if (!j.is_array() || j.size() != 3)
    throw ParseError(ctx + ": expected [x, y, z]");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

template <typename T>
T field(const ordered_json& j, const char* name, const std::string& ctx) {
  auto it = j.find(name);
  if (it == j.end())
    throw ParseError(ctx + ": missing field \"" + name + "\"");
  try {
    return it->get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ParseError(ctx + ": field \"" + name + "\" has wrong type");
  }
}

ordered_json camera_json(const Camera& c) {
  ordered_json j;
  j["id"] = c.id;
  j["fx"] = c.fx;
  j["fy"] = c.fy;
  j["cx"] = c.cx;
  j["cy"] = c.cy;
  j["width"] = c.width;
  j["height"] = c.height;
  j["pos"] = vec2_json(c.pos);
  j["z"] = c.z;
  j["yaw"] = c.yaw;
  j["hfov"] = c.hfov;
  return j;
}

Camera camera_from(const ordered_json& j, const std::string& ctx) {
  Camera c;
  c.id = field<int>(j, "id", ctx);
  c.fx = field<double>(j, "fx", ctx);
  c.fy = field<double>(j, "fy", ctx);
  c.cx = field<double>(j, "cx", ctx);
  c.cy = field<double>(j, "cy", ctx);
  c.width = field<int>(j, "width", ctx);
  c.height = field<int>(j, "height", ctx);
  c.pos = vec2_from(j.at("pos"), ctx + ".pos");
  c.z = field<double>(j, "z", ctx);
  c.yaw = field<double>(j, "yaw", ctx);
  c.hfov = field<double>(j, "hfov", ctx);
  return c;
}

ordered_json box_json(const Box3D& b) {
  ordered_json j;
  j["center"] = vec3_json(b.center);
  j["size"] = vec3_json(b.size);
  j["yaw"] = b.yaw;
  j["score"] = b.score;
  j["class_id"] = b.class_id;
  return j;
}

Box3D box_from(const ordered_json& j, const std::string& ctx) {
  Box3D b;
  b.center = vec3_from(j.at("center"), ctx + ".center");
  b.size = vec3_from(j.at("size"), ctx + ".size");
  b.yaw = field<double>(j, "yaw", ctx);
  b.score = field<double>(j, "score", ctx);
  b.class_id = field<int>(j, "class_id", ctx);
  return b;
}

ordered_json detection_json(const Detection2D& d) {
  ordered_json j;
  j["camera_id"] = d.camera_id;
  j["bbox"] = ordered_json::array({d.bbox.u_min, d.bbox.v_min, d.bbox.u_max, d.bbox.v_max});
  j["score"] = d.score;
  j["class_id"] = d.class_id;
  j["embedding"] = d.embedding;
  j["truncated_left"] = d.truncated_left;
  j["truncated_right"] = d.truncated_right;
  return j;
}

Detection2D detection_from(const ordered_json& j, const std::string& ctx) {
  Detection2D d;
  d.camera_id = field<int>(j, "camera_id", ctx);
  const auto& bb = j.at("bbox");
  if (!bb.is_array() || bb.size() != 4)
    throw ParseError(ctx + ".bbox: expected [u_min, v_min, u_max, v_max]");
  d.bbox = {bb[0].get<double>(), bb[1].get<double>(), bb[2].get<double>(),
            bb[3].get<double>()};
  d.score = field<double>(j, "score", ctx);
  d.class_id = field<int>(j, "class_id", ctx);
  d.embedding = field<std::vector<double>>(j, "embedding", ctx);
  d.truncated_left = field<bool>(j, "truncated_left", ctx);
  d.truncated_right = field<bool>(j, "truncated_right", ctx);
  return d;
}

}  // namespace

std::string scene_to_json_text(const Scene& scene) {
  ordered_json j;
  j["format_version"] = kFormatVersion;
  j["seed"] = scene.seed;
  j["meta"] = scene.meta;
  ordered_json rig;
  rig["cameras"] = ordered_json::array();
  for (const auto& c : scene.rig.cameras) rig["cameras"].push_back(camera_json(c));
  rig["adjacency"] = ordered_json::array();
  for (const auto& [a, b] : scene.rig.adjacency)
    rig["adjacency"].push_back(ordered_json::array({a, b}));
  j["rig"] = std::move(rig);

  j["frames"] = ordered_json::array();
  for (const auto& frame : scene.frames) {
    ordered_json f;
    f["frame_id"] = frame.frame_id;
    f["detections"] = ordered_json::array();
    for (const auto& per_cam : frame.detections) {
      ordered_json list = ordered_json::array();
      for (const auto& d : per_cam) list.push_back(detection_json(d));
      f["detections"].push_back(std::move(list));
    }
    f["lidar"] = ordered_json::array();
    for (const auto& p : frame.lidar) f["lidar"].push_back(vec3_json(p));
    f["ground_truth"] = ordered_json::array();
    for (const auto& gt : frame.ground_truth) {
      ordered_json g;
      g["instance_id"] = gt.instance_id;
      g["box"] = box_json(gt.box);
      g["visible_in"] = gt.visible_in;
      f["ground_truth"].push_back(std::move(g));
    }
    j["frames"].push_back(std::move(f));
  }
  return j.dump(2);
}

Scene scene_from_json_text(const std::string& text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("scene file: ") + e.what());
  }
  if (field<std::string>(j, "format_version", "scene") != kFormatVersion)
    throw ParseError("scene: unsupported format_version");

  Scene scene;
  scene.seed = field<std::uint64_t>(j, "seed", "scene");
  scene.meta = field<std::string>(j, "meta", "scene");
  const auto& rig = j.at("rig");
  std::size_t ci = 0;
  for (const auto& cj : rig.at("cameras"))
    scene.rig.cameras.push_back(camera_from(cj, "rig.cameras[" + std::to_string(ci++) + "]"));
  for (const auto& aj : rig.at("adjacency")) {
    if (!aj.is_array() || aj.size() != 2)
      throw ParseError("rig.adjacency: expected [id, id] pairs");
    scene.rig.adjacency.emplace_back(aj[0].get<int>(), aj[1].get<int>());
  }

  std::size_t fi = 0;
  for (const auto& fj : j.at("frames")) {
    const std::string ctx = "frames[" + std::to_string(fi++) + "]";
    Frame frame;
    frame.frame_id = field<int>(fj, "frame_id", ctx);
    std::size_t li = 0;
    for (const auto& lj : fj.at("detections")) {
      std::vector<Detection2D> per_cam;
      std::size_t di = 0;
      for (const auto& dj : lj)
        per_cam.push_back(detection_from(dj, ctx + ".detections[" + std::to_string(li) +
                                                 "][" + std::to_string(di++) + "]"));
      frame.detections.push_back(std::move(per_cam));
      ++li;
    }
    std::size_t pi = 0;
    for (const auto& pj : fj.at("lidar"))
      frame.lidar.push_back(vec3_from(pj, ctx + ".lidar[" + std::to_string(pi++) + "]"));
    std::size_t gi = 0;
    for (const auto& gj : fj.at("ground_truth")) {
      const std::string gctx = ctx + ".ground_truth[" + std::to_string(gi++) + "]";
      GroundTruthObject gt;
      gt.instance_id = field<int>(gj, "instance_id", gctx);
      gt.box = box_from(gj.at("box"), gctx + ".box");
      gt.visible_in = field<std::vector<int>>(gj, "visible_in", gctx);
      frame.ground_truth.push_back(std::move(gt));
    }
    scene.frames.push_back(std::move(frame));
  }

  scene.validate();
  return scene;
}

Scene load_scene(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open scene file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return scene_from_json_text(buf.str());
}

void save_scene(const Scene& scene, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write scene file: " + path);
  out << scene_to_json_text(scene) << '\n';
  if (!out) throw IoError("failed while writing scene file: " + path);
}

}  // namespace sianms
