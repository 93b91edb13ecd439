#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>

#include "sianms/association.hpp"
#include "sianms/contrastive.hpp"
#include "sianms/errors.hpp"
#include "sianms/metrics.hpp"
#include "sianms/pipeline.hpp"
#include "sianms/simulator.hpp"
#include "sianms/suppression.hpp"

namespace py = pybind11;
using namespace sianms;

namespace {

Box3D make_box(std::tuple<double, double, double> center,
               std::tuple<double, double, double> size, double yaw, double score,
               int class_id) {
  Box3D b;
  b.center = {std::get<0>(center), std::get<1>(center), std::get<2>(center)};
  b.size = {std::get<0>(size), std::get<1>(size), std::get<2>(size)};
  b.yaw = yaw;
  b.score = score;
  b.class_id = class_id;
  return b;
}

DistanceMatrix matrix_from_rows(const std::vector<std::vector<double>>& rows) {
  DistanceMatrix m;
  m.rows = rows.size();
  m.cols = rows.empty() ? 0 : rows.front().size();
  for (const auto& r : rows) {
    if (r.size() != m.cols)
      throw ValidationError("matrix rows must have equal length");
    m.values.insert(m.values.end(), r.begin(), r.end());
  }
  return m;
}

py::list pairs_to_list(const MatchResult& r) {
  py::list out;
  for (const auto& p : r.pairs)
    out.append(py::make_tuple(p.row, p.col, p.distance));
  return out;
}

py::dict metrics_to_dict(const ClassMetrics& m) {
  py::dict d;
  d["ap"] = m.ap ? py::object(py::float_(*m.ap)) : py::none();
  py::dict per_thr;
  for (const auto& [thr, v] : m.ap_per_threshold) per_thr[py::float_(thr)] = v;
  d["ap_per_threshold"] = per_thr;
  d["ate"] = m.ate ? py::object(py::float_(*m.ate)) : py::none();
  d["ase"] = m.ase ? py::object(py::float_(*m.ase)) : py::none();
  d["aoe"] = m.aoe ? py::object(py::float_(*m.aoe)) : py::none();
  d["tp"] = m.tp;
  d["fp"] = m.fp;
  d["fn"] = m.fn;
  d["n_gt"] = m.n_gt;
  return d;
}

PairBatch batch_from_py(
    const std::vector<std::tuple<std::vector<double>, std::vector<double>, bool>>& pairs) {
  PairBatch batch;
  for (const auto& [r, c, positive] : pairs)
    batch.push_back({r, c, positive ? PairLabel::positive : PairLabel::negative});
  return batch;
}

}  // namespace

PYBIND11_MODULE(_sianms, m) {
  m.doc() = "Multi-camera 3D detection toolkit: synthetic scenes, embedding "
            "re-identification, frustum aggregation, NMS baselines, and "
            "nuScenes-style evaluation";

  py::register_exception<Error>(m, "SianmsError");

  py::class_<Box3D>(m, "Box3D")
      .def(py::init(&make_box), py::arg("center"), py::arg("size"), py::arg("yaw"),
           py::arg("score") = 0.0, py::arg("class_id") = 0)
      .def_property_readonly("center",
                             [](const Box3D& b) {
                               return py::make_tuple(b.center.x, b.center.y, b.center.z);
                             })
      .def_property_readonly("size",
                             [](const Box3D& b) {
                               return py::make_tuple(b.size.x, b.size.y, b.size.z);
                             })
      .def_readonly("yaw", &Box3D::yaw)
      .def_readonly("score", &Box3D::score)
      .def_readonly("class_id", &Box3D::class_id)
      .def("__repr__", [](const Box3D& b) {
        char buf[160];
        std::snprintf(buf, sizeof(buf),
                      "Box3D(center=(%.3f, %.3f, %.3f), size=(%.3f, %.3f, %.3f), "
                      "yaw=%.3f, score=%.3f, class_id=%d)",
                      b.center.x, b.center.y, b.center.z, b.size.x, b.size.y, b.size.z,
                      b.yaw, b.score, b.class_id);
        return std::string(buf);
      });

  py::class_<SimConfig>(m, "SimConfig")
      .def(py::init<>())
      .def_readwrite("n_cameras", &SimConfig::n_cameras)
      .def_readwrite("hfov", &SimConfig::hfov)
      .def_readwrite("yaw_spacing", &SimConfig::yaw_spacing)
      .def_readwrite("d_max", &SimConfig::d_max)
      .def_readwrite("n_frames", &SimConfig::n_frames)
      .def_readwrite("objects_min", &SimConfig::objects_min)
      .def_readwrite("objects_max", &SimConfig::objects_max)
      .def_readwrite("dropout_prob", &SimConfig::dropout_prob)
      .def_readwrite("embed_noise", &SimConfig::embed_noise)
      .def_readwrite("view_drift", &SimConfig::view_drift)
      .def_readwrite("feature_dim", &SimConfig::feature_dim)
      .def_readwrite("seed", &SimConfig::seed);

  py::class_<Scene>(m, "Scene")
      .def_property_readonly("n_frames",
                             [](const Scene& s) { return s.frames.size(); })
      .def_property_readonly("n_cameras",
                             [](const Scene& s) { return s.rig.cameras.size(); })
      .def_readonly("seed", &Scene::seed)
      .def("ground_truth_boxes",
           [](const Scene& s) {
             std::vector<std::vector<Box3D>> out;
             for (const auto& f : s.frames) {
               std::vector<Box3D> frame;
               for (const auto& gt : f.ground_truth) frame.push_back(gt.box);
               out.push_back(std::move(frame));
             }
             return out;
           })
      .def("save",
           [](const Scene& s, const std::string& path) { save_scene(s, path); },
           py::arg("path"));

  m.def("generate_scene", &generate_scene, py::arg("config"));
  m.def("load_scene", &load_scene, py::arg("path"));
  m.def("save_scene", &save_scene, py::arg("scene"), py::arg("path"));

  m.def("iou_axis_aligned_bev", &iou_axis_aligned_bev, py::arg("a"), py::arg("b"));
  m.def("iou_rotated_bev", &iou_rotated_bev, py::arg("a"), py::arg("b"));
  m.def(
      "greedy_nms",
      [](const std::vector<Box3D>& boxes, double iou_thr, const std::string& mode) {
        NmsConfig cfg;
        cfg.iou_thr = iou_thr;
        cfg.mode = (mode == "rotated") ? IouMode::rotated : IouMode::axis_aligned;
        return greedy_nms(boxes, cfg);
      },
      py::arg("boxes"), py::arg("iou_thr") = 0.3, py::arg("mode") = "axis_aligned");

  m.def(
      "greedy_match",
      [](const std::vector<std::vector<double>>& matrix, double dis_thr) {
        AssociationConfig cfg;
        cfg.dis_thr = dis_thr;
        return pairs_to_list(greedy_match(matrix_from_rows(matrix), cfg));
      },
      py::arg("matrix"), py::arg("dis_thr") = 2.0);
  m.def(
      "optimal_match",
      [](const std::vector<std::vector<double>>& matrix, double dis_thr) {
        AssociationConfig cfg;
        cfg.dis_thr = dis_thr;
        return pairs_to_list(optimal_match(matrix_from_rows(matrix), cfg));
      },
      py::arg("matrix"), py::arg("dis_thr") = 2.0);

  py::class_<ToyEncoder>(m, "Encoder")
      .def_static(
          "random_init",
          [](int in_dim, int hidden_dim, int out_dim, std::uint64_t seed) {
            Rng rng(seed);
            return ToyEncoder::random_init(in_dim, hidden_dim, out_dim, rng);
          },
          py::arg("in_dim"), py::arg("hidden_dim"), py::arg("out_dim"),
          py::arg("seed") = 1)
      .def_static("load", &ToyEncoder::load, py::arg("path"))
      .def("save", &ToyEncoder::save, py::arg("path"))
      .def("encode",
           [](const ToyEncoder& e, const std::vector<double>& x) { return e.encode(x); })
      .def_property_readonly("in_dim", &ToyEncoder::in_dim)
      .def_property_readonly("out_dim", &ToyEncoder::out_dim);

  m.def(
      "contrastive_loss",
      [](const std::vector<std::tuple<std::vector<double>, std::vector<double>, bool>>&
             pairs,
         const ToyEncoder& encoder, double alpha, double beta) {
        LossConfig cfg;
        cfg.alpha = alpha;
        cfg.beta = beta;
        cfg.embed_dim = encoder.out_dim();
        return loss(batch_from_py(pairs), encoder, cfg);
      },
      py::arg("pairs"), py::arg("encoder"), py::arg("alpha") = 1.0,
      py::arg("beta") = 3.0);

  m.def(
      "train_encoder",
      [](const std::vector<Scene>& scenes, int epochs, std::size_t batch_size,
         double learning_rate, int batches_per_epoch, int hidden_dim, int embed_dim,
         std::uint64_t seed) {
        TrainConfig cfg;
        cfg.epochs = epochs;
        cfg.batch_size = batch_size;
        cfg.learning_rate = learning_rate;
        cfg.batches_per_epoch = batches_per_epoch;
        cfg.hidden_dim = hidden_dim;
        cfg.loss.embed_dim = embed_dim;
        cfg.seed = seed;
        int in_dim = 0;
        for (const auto& scene : scenes)
          for (const auto& frame : scene.frames)
            for (const auto& per_cam : frame.detections)
              for (const auto& det : per_cam)
                if (!det.embedding.empty() && !in_dim)
                  in_dim = static_cast<int>(det.embedding.size());
        if (!in_dim) throw ValidationError("scenes carry no detection features");
        Rng rng(seed ^ 0x7f4a7c15ULL);
        ToyEncoder encoder =
            ToyEncoder::random_init(in_dim, hidden_dim, embed_dim, rng);
        const TrainResult result = train(encoder, scenes, cfg);
        std::vector<double> curve;
        for (const auto& e : result.curve) curve.push_back(e.mean_loss);
        return py::make_tuple(encoder, curve);
      },
      py::arg("scenes"), py::arg("epochs") = 25, py::arg("batch_size") = 8,
      py::arg("learning_rate") = 0.01, py::arg("batches_per_epoch") = 64,
      py::arg("hidden_dim") = 64, py::arg("embed_dim") = 100, py::arg("seed") = 1);

  m.def(
      "run_pipeline",
      [](const Scene& scene, const std::string& variant, const ToyEncoder* encoder,
         double dis_thr, double iou_thr, double d_max) {
        PipelineConfig cfg;
        cfg.variant = variant_from_name(variant);
        cfg.association.dis_thr = dis_thr;
        cfg.nms.iou_thr = iou_thr;
        cfg.range.d_max = d_max;
        cfg.eval.d_max = d_max;
        return run_pipeline(scene, cfg, encoder).boxes;
      },
      py::arg("scene"), py::arg("variant"), py::arg("encoder") = nullptr,
      py::arg("dis_thr") = 2.0, py::arg("iou_thr") = 0.3, py::arg("d_max") = 50.0);

  m.def(
      "evaluate",
      [](const Scene& scene, const FrameBoxes& detections, const std::string& region,
         double d_max) {
        EvalConfig cfg;
        cfg.region = (region == "overlap") ? EvalRegion::overlap_only : EvalRegion::all;
        cfg.d_max = d_max;
        const EvalReport report = evaluate(scene, detections, cfg);
        py::dict out;
        for (const auto& [cls, metrics] : report.per_class)
          out[py::int_(cls)] = metrics_to_dict(metrics);
        return out;
      },
      py::arg("scene"), py::arg("detections"), py::arg("region") = "all",
      py::arg("d_max") = 50.0);

  m.def(
      "run_benchmark_json",
      [](const Scene& scene, const ToyEncoder* encoder, double dis_thr,
         double iou_thr, double d_max, bool aoe_fold_half) {
        std::vector<PipelineConfig> variants;
        for (const auto v :
             {Variant::vanilla, Variant::axis_nms, Variant::sianms, Variant::hybrid}) {
          PipelineConfig cfg;
          cfg.variant = v;
          cfg.association.dis_thr = dis_thr;
          cfg.nms.iou_thr = iou_thr;
          cfg.range.d_max = d_max;
          cfg.eval.d_max = d_max;
          cfg.eval.aoe_fold_half = aoe_fold_half;
          variants.push_back(cfg);
        }
        return benchmark_to_json_text(run_benchmark(scene, variants, encoder));
      },
      py::arg("scene"), py::arg("encoder") = nullptr, py::arg("dis_thr") = 2.0,
      py::arg("iou_thr") = 0.3, py::arg("d_max") = 50.0,
      py::arg("aoe_fold_half") = true);
}
