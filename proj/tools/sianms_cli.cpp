// Command-line frontend: simulate, train-embed, match, pipeline, eval,
// benchmark. Inputs and outputs use the JSON formats documented in
// docs/file_formats.md. Exit code 0 on success; on failure a JSON error
// object with a stable category goes to stderr.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "sianms/errors.hpp"
#include "sianms/pipeline.hpp"
#include "sianms/simulator.hpp"

namespace {

using namespace sianms;
using ordered_json = nlohmann::ordered_json;

struct CommonOpts {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_path;
  int threads = 1;
};

void add_common(CLI::App* cmd, CommonOpts& opts, bool out_required = true) {
  cmd->add_option("--config", opts.config_path, "JSON config file");
  cmd->add_option("--seed", opts.seed, "Override the config seed");
  auto* out = cmd->add_option("--out", opts.out_path, "Output path");
  if (out_required) out->required();
  cmd->add_option("--threads", opts.threads, "Worker threads for frame processing");
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write file: " + path);
  out << text;
  if (!out) throw IoError("failed while writing file: " + path);
}

// Pipeline/association/eval settings shared by match, pipeline, eval and
// benchmark; a flat JSON object, all fields optional, applied over `base`.
PipelineConfig pipeline_config_from_json(const std::string& text,
                                         PipelineConfig cfg = {}) {
  if (text.empty()) return cfg;
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("pipeline config: ") + e.what());
  }
  if (j.contains("variant")) cfg.variant = variant_from_name(j["variant"].get<std::string>());
  if (j.contains("dis_thr")) cfg.association.dis_thr = j["dis_thr"].get<double>();
  if (j.contains("match_mode")) {
    const auto mode = j["match_mode"].get<std::string>();
    if (mode == "greedy")
      cfg.association.mode = MatchMode::greedy;
    else if (mode == "optimal")
      cfg.association.mode = MatchMode::optimal;
    else
      throw ConfigError("match_mode must be greedy|optimal");
  }
  if (j.contains("association_classes")) {
    cfg.association.classes.clear();
    for (const auto& c : j["association_classes"])
      cfg.association.classes.insert(c.get<int>());
  }
  if (j.contains("iou_thr")) cfg.nms.iou_thr = j["iou_thr"].get<double>();
  if (j.contains("nms_mode")) {
    const auto mode = j["nms_mode"].get<std::string>();
    if (mode == "axis_aligned")
      cfg.nms.mode = IouMode::axis_aligned;
    else if (mode == "rotated")
      cfg.nms.mode = IouMode::rotated;
    else
      throw ConfigError("nms_mode must be axis_aligned|rotated");
  }
  if (j.contains("class_agnostic_nms"))
    cfg.nms.class_agnostic = j["class_agnostic_nms"].get<bool>();
  if (j.contains("ground_z_thr")) cfg.fit.ground_z_thr = j["ground_z_thr"].get<double>();
  if (j.contains("cluster_gap")) cfg.fit.cluster_gap = j["cluster_gap"].get<double>();
  if (j.contains("min_points")) cfg.fit.min_points = j["min_points"].get<int>();
  if (j.contains("d_max")) {
    cfg.range.d_max = j["d_max"].get<double>();
    cfg.eval.d_max = cfg.range.d_max;
  }
  if (j.contains("r_min")) cfg.range.r_min = j["r_min"].get<double>();
  if (j.contains("eval_classes")) {
    cfg.eval.classes.clear();
    for (const auto& c : j["eval_classes"]) cfg.eval.classes.push_back(c.get<int>());
  }
  if (j.contains("recall_floor")) cfg.eval.recall_floor = j["recall_floor"].get<double>();
  if (j.contains("tp_metric_threshold"))
    cfg.eval.tp_metric_threshold = j["tp_metric_threshold"].get<double>();
  if (j.contains("aoe_fold_half")) cfg.eval.aoe_fold_half = j["aoe_fold_half"].get<bool>();
  return cfg;
}

TrainConfig train_config_from_json(const std::string& text) {
  TrainConfig cfg;
  if (text.empty()) return cfg;
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("train config: ") + e.what());
  }
  if (j.contains("epochs")) cfg.epochs = j["epochs"].get<int>();
  if (j.contains("batch_size")) cfg.batch_size = j["batch_size"].get<std::size_t>();
  if (j.contains("learning_rate")) cfg.learning_rate = j["learning_rate"].get<double>();
  if (j.contains("lr_decay")) cfg.lr_decay = j["lr_decay"].get<double>();
  if (j.contains("lr_decay_every")) cfg.lr_decay_every = j["lr_decay_every"].get<int>();
  if (j.contains("batches_per_epoch"))
    cfg.batches_per_epoch = j["batches_per_epoch"].get<int>();
  if (j.contains("hidden_dim")) cfg.hidden_dim = j["hidden_dim"].get<int>();
  if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
  if (j.contains("alpha")) cfg.loss.alpha = j["alpha"].get<double>();
  if (j.contains("beta")) cfg.loss.beta = j["beta"].get<double>();
  if (j.contains("embed_dim")) cfg.loss.embed_dim = j["embed_dim"].get<int>();
  return cfg;
}

int find_feature_dim(const std::vector<Scene>& scenes) {
  for (const auto& scene : scenes)
    for (const auto& frame : scene.frames)
      for (const auto& per_cam : frame.detections)
        for (const auto& det : per_cam)
          if (!det.embedding.empty()) return static_cast<int>(det.embedding.size());
  throw ValidationError("scenes carry no detection features");
}

int cmd_simulate(const CommonOpts& opts) {
  SimConfig cfg;
  if (!opts.config_path.empty()) cfg = load_sim_config(opts.config_path);
  if (opts.seed) cfg.seed = *opts.seed;
  const Scene scene = generate_scene(cfg);
  save_scene(scene, opts.out_path);
  std::cout << "wrote scene with " << scene.frames.size() << " frames to "
            << opts.out_path << "\n";
  return 0;
}

int cmd_train_embed(const CommonOpts& opts, const std::vector<std::string>& scene_paths,
                    const std::string& curve_path, bool run_dim_sweep) {
  TrainConfig cfg = train_config_from_json(
      opts.config_path.empty() ? "" : slurp(opts.config_path));
  if (opts.seed) cfg.seed = *opts.seed;
  std::vector<Scene> scenes;
  for (const auto& p : scene_paths) scenes.push_back(load_scene(p));
  if (scenes.empty()) throw ConfigError("train-embed: at least one --scene required");

  const int in_dim = find_feature_dim(scenes);
  Rng init_rng(cfg.seed ^ 0x7f4a7c15ULL);
  ToyEncoder encoder =
      ToyEncoder::random_init(in_dim, cfg.hidden_dim, cfg.loss.embed_dim, init_rng);
  const TrainResult result = train(encoder, scenes, cfg);
  encoder.save(opts.out_path);

  std::ostringstream curve;
  curve << "epoch,mean_loss,positive_margin_rate,negative_margin_rate\n";
  for (const auto& e : result.curve) {
    char line[128];
    std::snprintf(line, sizeof(line), "%d,%.17g,%.6f,%.6f\n", e.epoch, e.mean_loss,
                  e.positive_margin_rate, e.negative_margin_rate);
    curve << line;
  }
  if (!curve_path.empty()) write_file(curve_path, curve.str());

  std::cout << "trained " << cfg.epochs << " epochs; final mean loss "
            << result.curve.back().mean_loss << "; weights in " << opts.out_path << "\n";

  // Threshold sweep on the training split: reports the association distance
  // threshold that maximizes match F1 with this encoder.
  PipelineConfig sweep_cfg;
  std::vector<std::pair<double, bool>> labeled;
  for (const auto& scene : scenes) {
    const auto part = labeled_candidate_distances(scene, sweep_cfg, encoder);
    labeled.insert(labeled.end(), part.begin(), part.end());
  }
  if (!labeled.empty())
    std::cout << "calibrated dis_thr " << calibrate_threshold(labeled)
              << " (default 2 = midpoint of the margins)\n";

  if (run_dim_sweep) {
    TrainConfig sweep_cfg = cfg;
    sweep_cfg.epochs = std::max(1, cfg.epochs / 5);
    const std::vector<int> dims{5, 10, 20, 50, 100, 200, 500, 1000};
    std::cout << "embedding dimension sweep (shortened schedule):\n";
    for (const auto& entry : sweep_embedding_dims(scenes, dims, sweep_cfg))
      std::cout << "  d=" << entry.embed_dim << "  final mean loss "
                << entry.final_mean_loss << "\n";
  }
  return 0;
}

int cmd_match(const CommonOpts& opts, const std::string& scene_path,
              const std::string& weights_path) {
  PipelineConfig cfg = pipeline_config_from_json(
      opts.config_path.empty() ? "" : slurp(opts.config_path));
  const Scene scene = load_scene(scene_path);
  const ToyEncoder encoder = ToyEncoder::load(weights_path);
  const auto records = match_scene(scene, cfg, encoder);

  ordered_json j;
  j["format_version"] = "1";
  j["matches"] = ordered_json::array();
  for (const auto& r : records) {
    ordered_json m;
    m["frame_id"] = r.frame_id;
    m["camera_a"] = r.camera_a;
    m["camera_b"] = r.camera_b;
    m["det_a"] = r.det_a;
    m["det_b"] = r.det_b;
    m["distance"] = r.distance;
    m["frustums_overlap"] = r.frustums_overlap;
    if (r.frustums_overlap) {
      ordered_json g;
      g["p_l"] = ordered_json::array({r.p_l.x, r.p_l.y});
      g["p_r"] = ordered_json::array({r.p_r.x, r.p_r.y});
      g["p_m"] = ordered_json::array({r.p_m.x, r.p_m.y});
      g["axis_yaw"] = r.axis_yaw;
      m["geometry"] = std::move(g);
    }
    j["matches"].push_back(std::move(m));
  }
  write_file(opts.out_path, j.dump(2) + "\n");
  std::cout << records.size() << " matches written to " << opts.out_path << "\n";
  return 0;
}

int cmd_pipeline(const CommonOpts& opts, const std::string& scene_path,
                 const std::string& weights_path, const std::string& variant,
                 const std::string& log_path) {
  PipelineConfig cfg = pipeline_config_from_json(
      opts.config_path.empty() ? "" : slurp(opts.config_path));
  if (!variant.empty()) cfg.variant = variant_from_name(variant);
  cfg.threads = opts.threads;

  const Scene scene = load_scene(scene_path);
  std::optional<ToyEncoder> encoder;
  if (!weights_path.empty()) encoder = ToyEncoder::load(weights_path);
  const PipelineResult result =
      run_pipeline(scene, cfg, encoder ? &*encoder : nullptr);
  save_detections(result.boxes, opts.out_path);
  if (!log_path.empty()) write_file(log_path, run_log_to_json_text(result.log) + "\n");
  std::cout << variant_name(cfg.variant) << ": " << result.log.boxes_out
            << " boxes from " << result.log.detections_in << " detections ("
            << result.log.matches << " matches, " << result.log.dismissed.size()
            << " dismissed) -> " << opts.out_path << "\n";
  return 0;
}

int cmd_eval(const CommonOpts& opts, const std::string& scene_path,
             const std::string& dets_path, const std::string& region) {
  PipelineConfig cfg = pipeline_config_from_json(
      opts.config_path.empty() ? "" : slurp(opts.config_path));
  if (region == "overlap")
    cfg.eval.region = EvalRegion::overlap_only;
  else if (region == "all")
    cfg.eval.region = EvalRegion::all;
  else if (!region.empty())
    throw ConfigError("--region must be all|overlap");

  const Scene scene = load_scene(scene_path);
  const FrameBoxes dets = load_detections(dets_path);
  const EvalReport report = evaluate(scene, dets, cfg.eval);

  ordered_json j;
  j["format_version"] = "1";
  j["region"] = (cfg.eval.region == EvalRegion::all) ? "all" : "overlap";
  ordered_json classes;
  for (const auto& [cls, m] : report.per_class) {
    ordered_json cj;
    cj["ap"] = m.ap ? ordered_json(*m.ap) : ordered_json(nullptr);
    ordered_json per_thr;
    for (const auto& [thr, v] : m.ap_per_threshold) {
      char key[32];
      std::snprintf(key, sizeof(key), "%g", thr);
      per_thr[key] = v;
    }
    cj["ap_per_threshold"] = std::move(per_thr);
    cj["ate"] = m.ate ? ordered_json(*m.ate) : ordered_json(nullptr);
    cj["ase"] = m.ase ? ordered_json(*m.ase) : ordered_json(nullptr);
    cj["aoe"] = m.aoe ? ordered_json(*m.aoe) : ordered_json(nullptr);
    cj["tp"] = m.tp;
    cj["fp"] = m.fp;
    cj["fn"] = m.fn;
    cj["n_gt"] = m.n_gt;
    classes[std::to_string(cls)] = std::move(cj);
  }
  j["classes"] = std::move(classes);
  write_file(opts.out_path, j.dump(2) + "\n");
  std::cout << report_to_table(report);
  return 0;
}

int cmd_benchmark(const CommonOpts& opts, const std::string& scene_path,
                  const std::string& weights_path, const std::string& table_path,
                  const std::vector<std::string>& variant_names) {
  // The geometric fitter estimates orientation modulo pi, so the benchmark
  // folds the orientation error to [0, pi/2] by default; a config file can
  // set "aoe_fold_half": false to compare raw yaw differences instead.
  PipelineConfig defaults;
  defaults.eval.aoe_fold_half = true;
  const PipelineConfig base = pipeline_config_from_json(
      opts.config_path.empty() ? "" : slurp(opts.config_path), defaults);
  const Scene scene = load_scene(scene_path);
  std::optional<ToyEncoder> encoder;
  if (!weights_path.empty()) encoder = ToyEncoder::load(weights_path);

  std::vector<std::string> names = variant_names;
  if (names.empty()) names = {"vanilla", "axis_nms", "sianms", "hybrid"};
  std::vector<PipelineConfig> variants;
  for (const auto& name : names) {
    PipelineConfig cfg = base;
    cfg.variant = variant_from_name(name);
    cfg.threads = opts.threads;
    variants.push_back(cfg);
  }

  const BenchmarkReport report =
      run_benchmark(scene, variants, encoder ? &*encoder : nullptr);
  write_file(opts.out_path, benchmark_to_json_text(report) + "\n");
  const std::string table = benchmark_to_table(report);
  if (!table_path.empty()) write_file(table_path, table);
  std::cout << table;
  return 0;
}

int error_exit_code(const std::string& category) {
  if (category == "config") return 2;
  if (category == "parse") return 3;
  if (category == "validation") return 4;
  if (category == "io") return 5;
  if (category == "geometry") return 6;
  if (category == "dismissal") return 7;
  if (category == "divergence") return 8;
  return 10;
}

void print_error(const std::string& category, const std::string& message) {
  ordered_json j;
  j["error"]["category"] = category;
  j["error"]["message"] = message;
  std::cerr << j.dump() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-camera 3D detection toolkit: synthetic scenes, "
               "embedding re-identification, frustum aggregation, NMS "
               "baselines, and nuScenes-style evaluation"};
  app.require_subcommand(1);

  CommonOpts sim_opts;
  auto* sim = app.add_subcommand("simulate", "Generate a synthetic scene file");
  add_common(sim, sim_opts);

  CommonOpts train_opts;
  std::vector<std::string> train_scenes;
  std::string curve_path;
  bool dim_sweep = false;
  auto* tr = app.add_subcommand("train-embed", "Train the embedding encoder");
  add_common(tr, train_opts);
  tr->add_option("--scene", train_scenes, "Scene file(s)")->required();
  tr->add_option("--curve", curve_path, "CSV loss-curve output path");
  tr->add_flag("--dim-sweep", dim_sweep, "Also run the embedding-dimension sweep");

  CommonOpts match_opts;
  std::string match_scene_path, match_weights;
  auto* ma = app.add_subcommand("match", "Emit per-frame association matches");
  add_common(ma, match_opts);
  ma->add_option("--scene", match_scene_path, "Scene file")->required();
  ma->add_option("--weights", match_weights, "Encoder weights")->required();

  CommonOpts pipe_opts;
  std::string pipe_scene_path, pipe_weights, pipe_variant, pipe_log;
  auto* pi = app.add_subcommand("pipeline", "Run one detection pipeline variant");
  add_common(pi, pipe_opts);
  pi->add_option("--scene", pipe_scene_path, "Scene file")->required();
  pi->add_option("--variant", pipe_variant, "vanilla|axis_nms|sianms|hybrid");
  pi->add_option("--weights", pipe_weights, "Encoder weights (sianms/hybrid)");
  pi->add_option("--log", pipe_log, "Run-log output path");

  CommonOpts eval_opts;
  std::string eval_scene_path, eval_dets, eval_region;
  auto* ev = app.add_subcommand("eval", "Evaluate a detections file");
  add_common(ev, eval_opts);
  ev->add_option("--scene", eval_scene_path, "Scene file")->required();
  ev->add_option("--dets", eval_dets, "Detections file")->required();
  ev->add_option("--region", eval_region, "all|overlap");

  CommonOpts bench_opts;
  std::string bench_scene_path, bench_weights, bench_table;
  std::vector<std::string> bench_variants;
  auto* be = app.add_subcommand("benchmark", "Run all variants and tabulate");
  add_common(be, bench_opts);
  be->add_option("--scene", bench_scene_path, "Scene file")->required();
  be->add_option("--weights", bench_weights, "Encoder weights");
  be->add_option("--table", bench_table, "Text table output path");
  be->add_option("--variants", bench_variants, "Subset of variants to run");

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed()) return cmd_simulate(sim_opts);
    if (tr->parsed()) return cmd_train_embed(train_opts, train_scenes, curve_path, dim_sweep);
    if (ma->parsed()) return cmd_match(match_opts, match_scene_path, match_weights);
    if (pi->parsed())
      return cmd_pipeline(pipe_opts, pipe_scene_path, pipe_weights, pipe_variant, pipe_log);
    if (ev->parsed()) return cmd_eval(eval_opts, eval_scene_path, eval_dets, eval_region);
    if (be->parsed())
      return cmd_benchmark(bench_opts, bench_scene_path, bench_weights, bench_table,
                           bench_variants);
  } catch (const Error& e) {
    print_error(e.category(), e.what());
    return error_exit_code(e.category());
  } catch (const std::exception& e) {
    print_error("internal", e.what());
    return 10;
  }
  return 0;
}
