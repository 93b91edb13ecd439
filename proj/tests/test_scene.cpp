#include <cstdio>
#include <filesystem>

#include "doctest.h"
#include "sianms/errors.hpp"
#include "sianms/rng.hpp"
#include "sianms/scene.hpp"
#include "sianms/simulator.hpp"

using namespace sianms;

namespace {

Camera test_camera(double yaw, Vec2 pos) {
  return Camera::make(0, 1000, 1000, 800, 450, 1600, 900, pos, 1.5, yaw);
}

}  // namespace

TEST_CASE("camera make derives a consistent hfov") {
  const Camera cam = test_camera(0.0, {0, 0});
  CHECK(cam.hfov == doctest::Approx(2.0 * std::atan2(1600.0, 2000.0)));
  Camera bad = cam;
  bad.hfov += 1e-3;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
}

TEST_CASE("camera_to_global identity pose") {
  const Camera cam = test_camera(0.0, {0, 0});
  Box3D local;
  local.center = {10, 0, 0};
  local.size = {2, 4, 1.5};
  local.yaw = 0.0;
  const Box3D global = camera_to_global(cam, local);
  CHECK(global.center.x == doctest::Approx(10.0));
  CHECK(global.center.y == doctest::Approx(0.0));
  CHECK(global.yaw == doctest::Approx(0.0));
}

TEST_CASE("camera_to_global quarter turn") {
  const Camera cam = test_camera(kPi / 2, {0, 0});
  Box3D local;
  local.center = {10, 0, 0};
  local.size = {2, 4, 1.5};
  local.yaw = 0.1;
  const Box3D global = camera_to_global(cam, local);
  CHECK(global.center.x == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(global.center.y == doctest::Approx(10.0));
  CHECK(global.yaw == doctest::Approx(0.1 + kPi / 2));
}

TEST_CASE("camera_to_global with rotation and translation") {
  // cam yaw=pi/4, pos=(1,2): local (sqrt(2),0,0) -> global (2,3,0).
  const Camera cam = test_camera(kPi / 4, {1, 2});
  Box3D local;
  local.center = {std::sqrt(2.0), 0, 0};
  local.size = {1, 1, 1};
  local.yaw = 0.0;
  const Box3D global = camera_to_global(cam, local);
  CHECK(global.center.x == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(global.center.y == doctest::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("camera_to_global composed with global_to_camera is the identity") {
  Rng rng(3);
  for (int i = 0; i < 200; ++i) {
    const Camera cam = test_camera(rng.uniform(-kPi, kPi),
                                   {rng.uniform(-5, 5), rng.uniform(-5, 5)});
    Box3D box;
    box.center = {rng.uniform(-40, 40), rng.uniform(-40, 40), rng.uniform(0, 3)};
    box.size = {rng.uniform(0.5, 3), rng.uniform(0.5, 6), rng.uniform(0.5, 3)};
    box.yaw = rng.uniform(-kPi, kPi);
    const Box3D round = camera_to_global(cam, global_to_camera(cam, box));
    CHECK(round.center.x == doctest::Approx(box.center.x).epsilon(1e-12));
    CHECK(round.center.y == doctest::Approx(box.center.y).epsilon(1e-12));
    CHECK(round.center.z == doctest::Approx(box.center.z).epsilon(1e-12));
    CHECK(std::cos(round.yaw) == doctest::Approx(std::cos(box.yaw)).epsilon(1e-12));
    CHECK(std::sin(round.yaw) == doctest::Approx(std::sin(box.yaw)).epsilon(1e-12));
    CHECK(round.size.x == box.size.x);
  }
}

TEST_CASE("scene serialization round trip is bit exact") {
  SimConfig cfg;
  cfg.seed = 42;
  cfg.n_frames = 3;
  const Scene scene = generate_scene(cfg);

  const std::string path = std::filesystem::temp_directory_path() / "roundtrip_scene.json";
  save_scene(scene, path);
  const Scene loaded = load_scene(path);

  REQUIRE(loaded.frames.size() == scene.frames.size());
  CHECK(loaded.seed == scene.seed);
  CHECK(loaded.meta == scene.meta);
  REQUIRE(loaded.rig.cameras.size() == scene.rig.cameras.size());
  for (std::size_t i = 0; i < scene.rig.cameras.size(); ++i) {
    CHECK(loaded.rig.cameras[i].yaw == scene.rig.cameras[i].yaw);
    CHECK(loaded.rig.cameras[i].hfov == scene.rig.cameras[i].hfov);
    CHECK(loaded.rig.cameras[i].fx == scene.rig.cameras[i].fx);
  }
  for (std::size_t f = 0; f < scene.frames.size(); ++f) {
    const Frame& a = scene.frames[f];
    const Frame& b = loaded.frames[f];
    REQUIRE(a.lidar.size() == b.lidar.size());
    for (std::size_t p = 0; p < a.lidar.size(); ++p) {
      CHECK(a.lidar[p].x == b.lidar[p].x);
      CHECK(a.lidar[p].y == b.lidar[p].y);
      CHECK(a.lidar[p].z == b.lidar[p].z);
    }
    REQUIRE(a.detections.size() == b.detections.size());
    for (std::size_t c = 0; c < a.detections.size(); ++c) {
      REQUIRE(a.detections[c].size() == b.detections[c].size());
      for (std::size_t d = 0; d < a.detections[c].size(); ++d) {
        CHECK(a.detections[c][d].bbox.u_min == b.detections[c][d].bbox.u_min);
        CHECK(a.detections[c][d].score == b.detections[c][d].score);
        CHECK(a.detections[c][d].embedding == b.detections[c][d].embedding);
      }
    }
    REQUIRE(a.ground_truth.size() == b.ground_truth.size());
    for (std::size_t g = 0; g < a.ground_truth.size(); ++g) {
      CHECK(a.ground_truth[g].instance_id == b.ground_truth[g].instance_id);
      CHECK(a.ground_truth[g].box.center.x == b.ground_truth[g].box.center.x);
      CHECK(a.ground_truth[g].box.yaw == b.ground_truth[g].box.yaw);
      CHECK(a.ground_truth[g].visible_in == b.ground_truth[g].visible_in);
    }
  }

  // Serializing again yields the same bytes.
  CHECK(scene_to_json_text(loaded) == scene_to_json_text(scene));
  std::filesystem::remove(path);
}

TEST_CASE("scene validation rejects empty frames") {
  SimConfig cfg;
  cfg.n_frames = 1;
  Scene scene = generate_scene(cfg);
  scene.frames.clear();
  CHECK_THROWS_AS(scene.validate(), ValidationError);
}

TEST_CASE("scene validation rejects a detection pointing at a missing camera") {
  SimConfig cfg;
  cfg.n_frames = 1;
  Scene scene = generate_scene(cfg);
  REQUIRE(scene.rig.cameras.size() == 6);
  bool patched = false;
  for (auto& per_cam : scene.frames[0].detections) {
    if (!per_cam.empty()) {
      per_cam[0].camera_id = 9;
      patched = true;
      break;
    }
  }
  REQUIRE(patched);
  CHECK_THROWS_AS(scene.validate(), ValidationError);
}

TEST_CASE("malformed scene text raises a parse error with context") {
  CHECK_THROWS_AS(scene_from_json_text("{not json"), ParseError);
  CHECK_THROWS_AS(scene_from_json_text("{\"format_version\": \"1\"}"), ParseError);
  try {
    scene_from_json_text("{\"format_version\": \"1\", \"seed\": 0}");
    CHECK(false);
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("meta") != std::string::npos);
  }
}
