#include "sianms/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "sianms/errors.hpp"

namespace sianms {

using ordered_json = nlohmann::ordered_json;

std::string variant_name(Variant v) {
  switch (v) {
    case Variant::vanilla: return "vanilla";
    case Variant::axis_nms: return "axis_nms";
    case Variant::sianms: return "sianms";
    case Variant::hybrid: return "hybrid";
  }
  return "vanilla";
}

Variant variant_from_name(const std::string& name) {
  if (name == "vanilla") return Variant::vanilla;
  if (name == "axis_nms") return Variant::axis_nms;
  if (name == "sianms") return Variant::sianms;
  if (name == "hybrid") return Variant::hybrid;
  throw ConfigError("unknown variant \"" + name +
                    "\" (expected vanilla|axis_nms|sianms|hybrid)");
}

void PipelineConfig::validate() const {
  association.validate();
  nms.validate();
  fit.validate();
  range.validate();
  eval.validate();
  if (threads < 1) throw ConfigError("threads must be >= 1");
}

namespace {

struct FrameWork {
  std::vector<Box3D> boxes;
  std::vector<DismissedMatch> dismissed;
  std::vector<DroppedFit> dropped;
  std::size_t detections_in = 0;
  std::size_t matches = 0;
};

std::vector<Vec3> points_in_frustum(const Frustum& f, const std::vector<Vec3>& lidar) {
  std::vector<Vec3> out;
  for (const auto& p : lidar)
    if (frustum_contains(f, p)) out.push_back(p);
  return out;
}

void fit_single_view(const Scene& scene, const Frame& frame, std::size_t ci,
                     std::size_t di, const PipelineConfig& cfg, FrameWork& work) {
  const Camera& cam = scene.rig.cameras[ci];
  const Detection2D& det = frame.detections[ci][di];
  const Frustum f = frustum_from_bbox(cam, det.bbox, cfg.range);
  const Ray2 axis = single_axis(cam, det.bbox);
  const auto fitted = fit_box(points_in_frustum(f, frame.lidar), axis, cfg.fit);
  if (!fitted) {
    work.dropped.push_back({frame.frame_id, cam.id, di, "empty_fit"});
    return;
  }
  Box3D box = *fitted;
  box.score = det.score;
  box.class_id = det.class_id;
  work.boxes.push_back(box);
}

FrameWork process_frame(const Scene& scene, std::size_t frame_index,
                        const PipelineConfig& cfg, const ToyEncoder* encoder) {
  const Frame& frame = scene.frames[frame_index];
  FrameWork work;
  for (const auto& per_cam : frame.detections) work.detections_in += per_cam.size();

  const bool associate =
      cfg.variant == Variant::sianms || cfg.variant == Variant::hybrid;

  std::vector<std::vector<bool>> consumed(frame.detections.size());
  for (std::size_t ci = 0; ci < frame.detections.size(); ++ci)
    consumed[ci].assign(frame.detections[ci].size(), false);

  if (associate) {
    for (const auto& pair : scene.rig.adjacency) {
      auto [refs_a, refs_b] = overlap_candidates(scene.rig, frame, pair,
                                                 cfg.association);
      // A detection matched in an earlier pair is no longer available, and
      // candidates need features for the encoder.
      auto usable = [&](const DetectionRef& r) {
        return !consumed[r.camera_index][r.det_index] &&
               !frame.detections[r.camera_index][r.det_index].embedding.empty();
      };
      std::erase_if(refs_a, [&](const DetectionRef& r) { return !usable(r); });
      std::erase_if(refs_b, [&](const DetectionRef& r) { return !usable(r); });
      if (refs_a.empty() || refs_b.empty()) continue;

      auto encode_all = [&](const std::vector<DetectionRef>& refs) {
        std::vector<std::vector<double>> out;
        out.reserve(refs.size());
        for (const auto& r : refs)
          out.push_back(encoder->encode(
              frame.detections[r.camera_index][r.det_index].embedding));
        return out;
      };
      const DistanceMatrix m =
          pairwise_distances(encode_all(refs_a), encode_all(refs_b));
      const MatchResult matched = (cfg.association.mode == MatchMode::greedy)
                                      ? greedy_match(m, cfg.association)
                                      : optimal_match(m, cfg.association);

      for (const auto& mp : matched.pairs) {
        const DetectionRef& ra = refs_a[mp.row];
        const DetectionRef& rb = refs_b[mp.col];
        const Camera& cam_a = scene.rig.cameras[ra.camera_index];
        const Camera& cam_b = scene.rig.cameras[rb.camera_index];
        const Detection2D& det_a = frame.detections[ra.camera_index][ra.det_index];
        const Detection2D& det_b = frame.detections[rb.camera_index][rb.det_index];
        const Frustum fa = frustum_from_bbox(cam_a, det_a.bbox, cfg.range);
        const Frustum fb = frustum_from_bbox(cam_b, det_b.bbox, cfg.range);

        if (!frustums_overlap(fa, fb)) {
          // False-positive association; the detections stay unpaired.
          work.dismissed.push_back({frame.frame_id, cam_a.id, cam_b.id, ra.det_index,
                                    rb.det_index, mp.distance, "disjoint_frustums"});
          continue;
        }

        const Vec2 origin = (cam_a.pos + cam_b.pos) * 0.5;
        Ray2 axis;
        try {
          const auto [p_l, p_r] = circle_boundary_points(fa, fb, cfg.range);
          axis = merged_axis(p_l, p_r, origin);
        } catch (const Error&) {
          // Degenerate construction (coincident boundary points); treat like
          // a dismissed match and keep the single-view route.
          work.dismissed.push_back({frame.frame_id, cam_a.id, cam_b.id, ra.det_index,
                                    rb.det_index, mp.distance, "degenerate_axis"});
          continue;
        }

        ++work.matches;
        consumed[ra.camera_index][ra.det_index] = true;
        consumed[rb.camera_index][rb.det_index] = true;

        const auto points = aggregate_frustum_points(fa, fb, frame.lidar);
        const auto fitted = fit_box(points, axis, cfg.fit);
        if (!fitted) {
          work.dropped.push_back({frame.frame_id, -1, ra.det_index, "empty_fit"});
          continue;
        }
        Box3D box = *fitted;
        box.score = std::max(det_a.score, det_b.score);
        box.class_id = det_a.class_id;
        work.boxes.push_back(box);
      }
    }
  }

  for (std::size_t ci = 0; ci < frame.detections.size(); ++ci)
    for (std::size_t di = 0; di < frame.detections[ci].size(); ++di)
      if (!consumed[ci][di]) fit_single_view(scene, frame, ci, di, cfg, work);

  if (cfg.variant == Variant::axis_nms || cfg.variant == Variant::hybrid)
    work.boxes = greedy_nms(work.boxes, cfg.nms);

  return work;
}

}  // namespace

PipelineResult run_pipeline(const Scene& scene, const PipelineConfig& cfg,
                            const ToyEncoder* encoder) {
  cfg.validate();
  const bool needs_encoder =
      cfg.variant == Variant::sianms || cfg.variant == Variant::hybrid;
  if (needs_encoder && encoder == nullptr)
    throw ConfigError("variant " + variant_name(cfg.variant) +
                      " requires encoder weights");

  const std::size_t n = scene.frames.size();
  std::vector<FrameWork> per_frame(n);

  const std::size_t n_threads =
      std::min<std::size_t>(static_cast<std::size_t>(cfg.threads), std::max<std::size_t>(n, 1));
  if (n_threads <= 1) {
    for (std::size_t f = 0; f < n; ++f)
      per_frame[f] = process_frame(scene, f, cfg, encoder);
  } else {
    std::vector<std::thread> workers;
    std::vector<std::exception_ptr> errors(n_threads);
    for (std::size_t t = 0; t < n_threads; ++t) {
      workers.emplace_back([&, t] {
        try {
          for (std::size_t f = t; f < n; f += n_threads)
            per_frame[f] = process_frame(scene, f, cfg, encoder);
        } catch (...) {
          errors[t] = std::current_exception();
        }
      });
    }
    for (auto& w : workers) w.join();
    for (const auto& e : errors)
      if (e) std::rethrow_exception(e);
  }

  PipelineResult result;
  result.boxes.resize(n);
  result.log.frames = n;
  for (std::size_t f = 0; f < n; ++f) {
    result.boxes[f] = std::move(per_frame[f].boxes);
    result.log.detections_in += per_frame[f].detections_in;
    result.log.boxes_out += result.boxes[f].size();
    result.log.matches += per_frame[f].matches;
    for (auto& d : per_frame[f].dismissed) result.log.dismissed.push_back(d);
    for (auto& d : per_frame[f].dropped) result.log.dropped.push_back(d);
  }
  return result;
}

std::vector<FrameMatchRecord> match_scene(const Scene& scene, const PipelineConfig& cfg,
                                          const ToyEncoder& encoder) {
  cfg.validate();
  std::vector<FrameMatchRecord> records;
  for (const Frame& frame : scene.frames) {
    for (const auto& pair : scene.rig.adjacency) {
      auto [refs_a, refs_b] =
          overlap_candidates(scene.rig, frame, pair, cfg.association);
      auto has_features = [&](const DetectionRef& r) {
        return !frame.detections[r.camera_index][r.det_index].embedding.empty();
      };
      std::erase_if(refs_a, [&](const DetectionRef& r) { return !has_features(r); });
      std::erase_if(refs_b, [&](const DetectionRef& r) { return !has_features(r); });
      if (refs_a.empty() || refs_b.empty()) continue;
      auto encode_all = [&](const std::vector<DetectionRef>& refs) {
        std::vector<std::vector<double>> out;
        for (const auto& r : refs)
          out.push_back(
              encoder.encode(frame.detections[r.camera_index][r.det_index].embedding));
        return out;
      };
      const DistanceMatrix m =
          pairwise_distances(encode_all(refs_a), encode_all(refs_b));
      const MatchResult matched = (cfg.association.mode == MatchMode::greedy)
                                      ? greedy_match(m, cfg.association)
                                      : optimal_match(m, cfg.association);
      for (const auto& mp : matched.pairs) {
        FrameMatchRecord rec;
        rec.frame_id = frame.frame_id;
        rec.camera_a = pair.first;
        rec.camera_b = pair.second;
        rec.det_a = refs_a[mp.row].det_index;
        rec.det_b = refs_b[mp.col].det_index;
        rec.distance = mp.distance;

        const DetectionRef& ra = refs_a[mp.row];
        const DetectionRef& rb = refs_b[mp.col];
        const Camera& cam_a = scene.rig.cameras[ra.camera_index];
        const Camera& cam_b = scene.rig.cameras[rb.camera_index];
        const Frustum fa = frustum_from_bbox(
            cam_a, frame.detections[ra.camera_index][ra.det_index].bbox, cfg.range);
        const Frustum fb = frustum_from_bbox(
            cam_b, frame.detections[rb.camera_index][rb.det_index].bbox, cfg.range);
        rec.frustums_overlap = frustums_overlap(fa, fb);
        if (rec.frustums_overlap) {
          const auto [p_l, p_r] = circle_boundary_points(fa, fb, cfg.range);
          const Ray2 axis = merged_axis(p_l, p_r, (cam_a.pos + cam_b.pos) * 0.5);
          rec.p_l = p_l;
          rec.p_r = p_r;
          rec.p_m = (p_l + p_r) * 0.5;
          rec.axis_yaw = axis.angle;
        }
        records.push_back(rec);
      }
    }
  }
  return records;
}

BenchmarkReport run_benchmark(const Scene& scene,
                              const std::vector<PipelineConfig>& variants,
                              const ToyEncoder* encoder) {
  if (variants.empty()) throw ConfigError("run_benchmark: no variants");
  BenchmarkReport report;
  report.class_id = variants.front().eval.classes.empty()
                        ? 0
                        : variants.front().eval.classes.front();
  for (const auto& cfg : variants) {
    const PipelineResult run = run_pipeline(scene, cfg, encoder);
    for (const EvalRegion region : {EvalRegion::all, EvalRegion::overlap_only}) {
      EvalConfig eval_cfg = cfg.eval;
      eval_cfg.region = region;
      const EvalReport eval = evaluate(scene, run.boxes, eval_cfg);
      const auto it = eval.per_class.find(report.class_id);
      if (it == eval.per_class.end()) continue;
      const std::string region_name =
          region == EvalRegion::all ? "all" : "overlap";
      report.cells[region_name][variant_name(cfg.variant)] = it->second;
    }
  }
  return report;
}

namespace {

ordered_json metrics_json(const ClassMetrics& m) {
  ordered_json j;
  j["ap"] = m.ap ? ordered_json(*m.ap) : ordered_json(nullptr);
  ordered_json per_thr;
  for (const auto& [thr, v] : m.ap_per_threshold) {
    char key[32];
    std::snprintf(key, sizeof(key), "%g", thr);
    per_thr[key] = v;
  }
  j["ap_per_threshold"] = std::move(per_thr);
  j["ate"] = m.ate ? ordered_json(*m.ate) : ordered_json(nullptr);
  j["ase"] = m.ase ? ordered_json(*m.ase) : ordered_json(nullptr);
  j["aoe"] = m.aoe ? ordered_json(*m.aoe) : ordered_json(nullptr);
  j["tp"] = m.tp;
  j["fp"] = m.fp;
  j["fn"] = m.fn;
  j["n_gt"] = m.n_gt;
  return j;
}

ClassMetrics metrics_from_json(const ordered_json& j) {
  ClassMetrics m;
  if (!j.at("ap").is_null()) m.ap = j.at("ap").get<double>();
  for (const auto& [key, v] : j.at("ap_per_threshold").items())
    m.ap_per_threshold[std::stod(key)] = v.get<double>();
  if (!j.at("ate").is_null()) m.ate = j.at("ate").get<double>();
  if (!j.at("ase").is_null()) m.ase = j.at("ase").get<double>();
  if (!j.at("aoe").is_null()) m.aoe = j.at("aoe").get<double>();
  m.tp = j.at("tp").get<std::size_t>();
  m.fp = j.at("fp").get<std::size_t>();
  m.fn = j.at("fn").get<std::size_t>();
  m.n_gt = j.at("n_gt").get<std::size_t>();
  return m;
}

std::string opt_cell(const std::optional<double>& v, const char* format) {
  char buf[32];
  if (v)
    std::snprintf(buf, sizeof(buf), format, *v);
  else
    std::snprintf(buf, sizeof(buf), "    -");
  return buf;
}

}  // namespace

std::string benchmark_to_table(const BenchmarkReport& report) {
  // Canonical column order first, then anything else encountered.
  std::vector<std::string> variants;
  for (const char* name : {"vanilla", "axis_nms", "sianms", "hybrid"})
    for (const auto& [region, row] : report.cells)
      if (row.count(name) &&
          std::find(variants.begin(), variants.end(), name) == variants.end())
        variants.push_back(name);
  for (const auto& [region, row] : report.cells)
    for (const auto& [name, m] : row)
      if (std::find(variants.begin(), variants.end(), name) == variants.end())
        variants.push_back(name);

  constexpr int kCell = 25;  // "  AP    ATE    ASE   AOE "
  std::ostringstream out;
  out << "3D detection performance, class " << report.class_id << "\n";
  char buf[64];
  out << std::string(8, ' ');
  for (const auto& v : variants) {
    std::snprintf(buf, sizeof(buf), " | %-*s", kCell, v.c_str());
    out << buf;
  }
  out << '\n' << "region  ";
  for (std::size_t i = 0; i < variants.size(); ++i)
    out << " |    AP    ATE   ASE    AOE";
  out << '\n';
  for (const char* region : {"all", "overlap"}) {
    const auto row_it = report.cells.find(region);
    if (row_it == report.cells.end()) continue;
    std::snprintf(buf, sizeof(buf), "%-8s", region);
    out << buf;
    for (const auto& v : variants) {
      const auto it = row_it->second.find(v);
      if (it == row_it->second.end()) {
        out << " |" << std::string(kCell + 1, ' ');
        continue;
      }
      const ClassMetrics& m = it->second;
      out << " | " << opt_cell(m.ap, "%5.1f") << "  " << opt_cell(m.ate, "%5.3f") << " "
          << opt_cell(m.ase, "%5.1f") << "  " << opt_cell(m.aoe, "%5.3f");
    }
    out << '\n';
  }
  return out.str();
}

std::string benchmark_to_json_text(const BenchmarkReport& report) {
  ordered_json j;
  j["format_version"] = "1";
  j["class_id"] = report.class_id;
  ordered_json regions;
  for (const auto& [region, row] : report.cells) {
    ordered_json r;
    for (const auto& [name, m] : row) r[name] = metrics_json(m);
    regions[region] = std::move(r);
  }
  j["regions"] = std::move(regions);
  return j.dump(2);
}

BenchmarkReport benchmark_from_json_text(const std::string& text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("benchmark report: ") + e.what());
  }
  BenchmarkReport report;
  report.class_id = j.at("class_id").get<int>();
  for (const auto& [region, row] : j.at("regions").items())
    for (const auto& [name, m] : row.items())
      report.cells[region][name] = metrics_from_json(m);
  return report;
}

void save_detections(const FrameBoxes& boxes, const std::string& path) {
  ordered_json j;
  j["format_version"] = "1";
  j["frames"] = ordered_json::array();
  for (std::size_t f = 0; f < boxes.size(); ++f) {
    ordered_json frame;
    frame["frame_index"] = f;
    frame["boxes"] = ordered_json::array();
    for (const auto& b : boxes[f]) {
      ordered_json bj;
      bj["center"] = ordered_json::array({b.center.x, b.center.y, b.center.z});
      bj["size"] = ordered_json::array({b.size.x, b.size.y, b.size.z});
      bj["yaw"] = b.yaw;
      bj["score"] = b.score;
      bj["class_id"] = b.class_id;
      frame["boxes"].push_back(std::move(bj));
    }
    j["frames"].push_back(std::move(frame));
  }
  std::ofstream out(path);
  if (!out) throw IoError("cannot write detections file: " + path);
  out << j.dump(2) << '\n';
  if (!out) throw IoError("failed while writing detections file: " + path);
}

FrameBoxes load_detections(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open detections file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  ordered_json j;
  try {
    j = ordered_json::parse(buf.str());
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("detections file: ") + e.what());
  }
  if (j.at("format_version").get<std::string>() != "1")
    throw ParseError("detections file: unsupported format_version");
  FrameBoxes boxes;
  for (const auto& fj : j.at("frames")) {
    std::vector<Box3D> frame;
    for (const auto& bj : fj.at("boxes")) {
      Box3D b;
      const auto& c = bj.at("center");
      const auto& s = bj.at("size");
      b.center = {c[0].get<double>(), c[1].get<double>(), c[2].get<double>()};
      b.size = {s[0].get<double>(), s[1].get<double>(), s[2].get<double>()};
      b.yaw = bj.at("yaw").get<double>();
      b.score = bj.at("score").get<double>();
      b.class_id = bj.at("class_id").get<int>();
      frame.push_back(b);
    }
    boxes.push_back(std::move(frame));
  }
  return boxes;
}

std::string run_log_to_json_text(const RunLog& log) {
  ordered_json j;
  j["frames"] = log.frames;
  j["detections_in"] = log.detections_in;
  j["boxes_out"] = log.boxes_out;
  j["matches"] = log.matches;
  j["dismissed"] = ordered_json::array();
  for (const auto& d : log.dismissed) {
    ordered_json dj;
    dj["frame_id"] = d.frame_id;
    dj["camera_a"] = d.camera_a;
    dj["camera_b"] = d.camera_b;
    dj["det_a"] = d.det_a;
    dj["det_b"] = d.det_b;
    dj["distance"] = d.distance;
    dj["reason"] = d.reason;
    j["dismissed"].push_back(std::move(dj));
  }
  j["dropped"] = ordered_json::array();
  for (const auto& d : log.dropped) {
    ordered_json dj;
    dj["frame_id"] = d.frame_id;
    dj["camera_id"] = d.camera_id;
    dj["det_index"] = d.det_index;
    dj["reason"] = d.reason;
    j["dropped"].push_back(std::move(dj));
  }
  return j.dump(2);
}

std::vector<std::pair<double, bool>> labeled_candidate_distances(
    const Scene& scene, const PipelineConfig& cfg, const ToyEncoder& encoder) {
  cfg.validate();
  std::vector<std::pair<double, bool>> labeled;
  for (std::size_t fi = 0; fi < scene.frames.size(); ++fi) {
    const Frame& frame = scene.frames[fi];
    const auto labels = detection_instance_labels(scene, fi);
    for (const auto& pair : scene.rig.adjacency) {
      auto [refs_a, refs_b] =
          overlap_candidates(scene.rig, frame, pair, cfg.association);
      for (const auto& ra : refs_a) {
        const auto& det_a = frame.detections[ra.camera_index][ra.det_index];
        if (det_a.embedding.empty()) continue;
        const auto fa = encoder.encode(det_a.embedding);
        const int la = labels[ra.camera_index][ra.det_index];
        for (const auto& rb : refs_b) {
          const auto& det_b = frame.detections[rb.camera_index][rb.det_index];
          if (det_b.embedding.empty()) continue;
          const auto fb = encoder.encode(det_b.embedding);
          double sq = 0.0;
          for (std::size_t k = 0; k < fa.size(); ++k) {
            const double d = fa[k] - fb[k];
            sq += d * d;
          }
          const int lb = labels[rb.camera_index][rb.det_index];
          labeled.emplace_back(std::sqrt(sq), la >= 0 && la == lb);
        }
      }
    }
  }
  return labeled;
}

}  // namespace sianms
