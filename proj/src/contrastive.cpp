#include "sianms/contrastive.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "sianms/errors.hpp"
#include "sianms/frustum.hpp"

namespace sianms {

void LossConfig::validate() const {
  if (!(alpha >= 0.0 && alpha < beta))
    throw ConfigError("loss margins must satisfy 0 <= alpha < beta");
  if (embed_dim <= 0) throw ConfigError("embed_dim must be positive");
}

void TrainConfig::validate() const {
  loss.validate();
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (learning_rate < 0.0) throw ConfigError("learning_rate must be >= 0");
  if (batches_per_epoch < 1) throw ConfigError("batches_per_epoch must be >= 1");
  if (hidden_dim < 1) throw ConfigError("hidden_dim must be >= 1");
}

ToyEncoder::ToyEncoder(int in_dim, int hidden_dim, int out_dim)
    : w1(static_cast<std::size_t>(hidden_dim) * in_dim, 0.0),
      b1(hidden_dim, 0.0),
      w2(static_cast<std::size_t>(out_dim) * hidden_dim, 0.0),
      b2(out_dim, 0.0),
      in_dim_(in_dim),
      hidden_dim_(hidden_dim),
      out_dim_(out_dim) {
  if (in_dim < 1 || hidden_dim < 1 || out_dim < 1)
    throw ConfigError("encoder dimensions must be positive");
}

ToyEncoder ToyEncoder::random_init(int in_dim, int hidden_dim, int out_dim, Rng& rng) {
  ToyEncoder enc(in_dim, hidden_dim, out_dim);
  const double s1 = std::sqrt(6.0 / (in_dim + hidden_dim));
  for (auto& w : enc.w1) w = rng.uniform(-s1, s1);
  const double s2 = std::sqrt(6.0 / (hidden_dim + out_dim));
  for (auto& w : enc.w2) w = rng.uniform(-s2, s2);
  return enc;
}

std::vector<double> ToyEncoder::encode(std::span<const double> x) const {
  if (static_cast<int>(x.size()) != in_dim_)
    throw ValidationError("encoder input dimension mismatch: got " +
                          std::to_string(x.size()) + ", expected " +
                          std::to_string(in_dim_));
  std::vector<double> h(hidden_dim_);
  for (int i = 0; i < hidden_dim_; ++i) {
    double a = b1[i];
    const double* row = &w1[static_cast<std::size_t>(i) * in_dim_];
    for (int j = 0; j < in_dim_; ++j) a += row[j] * x[j];
    h[i] = std::tanh(a);
  }
  std::vector<double> y(out_dim_);
  for (int i = 0; i < out_dim_; ++i) {
    double a = b2[i];
    const double* row = &w2[static_cast<std::size_t>(i) * hidden_dim_];
    for (int j = 0; j < hidden_dim_; ++j) a += row[j] * h[j];
    y[i] = a;
  }
  return y;
}

namespace {

struct Tape {
  std::vector<double> input;
  std::vector<double> hidden;  // post-tanh
  std::vector<double> output;
};

Tape forward_tape(const ToyEncoder& enc, const std::vector<double>& x) {
  Tape t;
  t.input = x;
  t.hidden.resize(enc.hidden_dim());
  for (int i = 0; i < enc.hidden_dim(); ++i) {
    double a = enc.b1[i];
    const double* row = &enc.w1[static_cast<std::size_t>(i) * enc.in_dim()];
    for (int j = 0; j < enc.in_dim(); ++j) a += row[j] * x[j];
    t.hidden[i] = std::tanh(a);
  }
  t.output.resize(enc.out_dim());
  for (int i = 0; i < enc.out_dim(); ++i) {
    double a = enc.b2[i];
    const double* row = &enc.w2[static_cast<std::size_t>(i) * enc.hidden_dim()];
    for (int j = 0; j < enc.hidden_dim(); ++j) a += row[j] * t.hidden[j];
    t.output[i] = a;
  }
  return t;
}

// Accumulates weight gradients for one encoder input given dL/d(output).
void backprop_into(const ToyEncoder& enc, const Tape& tape,
                   const std::vector<double>& dout, LossGradients& g) {
  std::vector<double> dhidden(enc.hidden_dim(), 0.0);
  for (int i = 0; i < enc.out_dim(); ++i) {
    const double gi = dout[i];
    if (gi == 0.0) continue;
    g.db2[i] += gi;
    double* wrow = &g.dw2[static_cast<std::size_t>(i) * enc.hidden_dim()];
    const double* w2row = &enc.w2[static_cast<std::size_t>(i) * enc.hidden_dim()];
    for (int j = 0; j < enc.hidden_dim(); ++j) {
      wrow[j] += gi * tape.hidden[j];
      dhidden[j] += gi * w2row[j];
    }
  }
  for (int i = 0; i < enc.hidden_dim(); ++i) {
    const double da = dhidden[i] * (1.0 - tape.hidden[i] * tape.hidden[i]);
    if (da == 0.0) continue;
    g.db1[i] += da;
    double* wrow = &g.dw1[static_cast<std::size_t>(i) * enc.in_dim()];
    for (int j = 0; j < enc.in_dim(); ++j) wrow[j] += da * tape.input[j];
  }
}

double l2_distance(const std::vector<double>& a, const std::vector<double>& b) {
  double sq = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    sq += d * d;
  }
  return std::sqrt(sq);
}

double pair_term(double dist, PairLabel label, const LossConfig& cfg) {
  if (label == PairLabel::positive) {
    const double v = std::max(dist - cfg.alpha, 0.0);
    return 0.5 * v * v;
  }
  const double v = std::max(cfg.beta - dist, 0.0);
  return 0.5 * v * v;
}

}  // namespace

double loss(const PairBatch& batch, const ToyEncoder& encoder, const LossConfig& cfg) {
  cfg.validate();
  double total = 0.0;
  for (const auto& pair : batch) {
    const auto fr = encoder.encode(pair.reference);
    const auto fc = encoder.encode(pair.candidate);
    total += pair_term(l2_distance(fr, fc), pair.label, cfg);
  }
  return total;
}

LossGradients loss_gradient(const PairBatch& batch, const ToyEncoder& encoder,
                            const LossConfig& cfg) {
  cfg.validate();
  LossGradients g;
  g.dw1.assign(encoder.w1.size(), 0.0);
  g.db1.assign(encoder.b1.size(), 0.0);
  g.dw2.assign(encoder.w2.size(), 0.0);
  g.db2.assign(encoder.b2.size(), 0.0);

  for (const auto& pair : batch) {
    const Tape tr = forward_tape(encoder, pair.reference);
    const Tape tc = forward_tape(encoder, pair.candidate);
    const double dist = l2_distance(tr.output, tc.output);
    g.loss += pair_term(dist, pair.label, cfg);

    // Scale k such that dL/d f(reference) = k * (f(reference) - f(candidate)).
    double k = 0.0;
    if (pair.label == PairLabel::positive) {
      if (dist > cfg.alpha) k = (dist - cfg.alpha) / dist;
    } else {
      // Zero-distance negatives take the zero subgradient.
      if (dist < cfg.beta && dist > 0.0) k = -(cfg.beta - dist) / dist;
    }

    std::vector<double> dref(encoder.out_dim(), 0.0);
    std::vector<double> dcand(encoder.out_dim(), 0.0);
    if (k != 0.0) {
      for (int i = 0; i < encoder.out_dim(); ++i) {
        const double diff = tr.output[i] - tc.output[i];
        dref[i] = k * diff;
        dcand[i] = -k * diff;
      }
      backprop_into(encoder, tr, dref, g);
      backprop_into(encoder, tc, dcand, g);
    }
    g.embedding_grads.emplace_back(std::move(dref), std::move(dcand));
  }
  return g;
}

std::size_t ohem_select_negative(const std::vector<double>& reference,
                                 const std::vector<std::vector<double>>& candidates,
                                 const ToyEncoder& encoder, const LossConfig& cfg) {
  cfg.validate();
  if (candidates.empty())
    throw ValidationError("ohem_select_negative: empty candidate list");
  const auto fr = encoder.encode(reference);
  std::size_t best = 0;
  double best_loss = -1.0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const auto fc = encoder.encode(candidates[i]);
    const double term = pair_term(l2_distance(fr, fc), PairLabel::negative, cfg);
    if (term > best_loss) {
      best_loss = term;
      best = i;
    }
  }
  return best;
}

namespace {

struct Occurrence {
  std::size_t frame_index;
  std::size_t camera_index;
  std::size_t det_index;
};

struct InstanceOccurrences {
  int instance_id = 0;
  std::vector<Occurrence> occurrences;
};

double bbox_iou(const BBox2D& a, const BBox2D& b) {
  const double iw = std::min(a.u_max, b.u_max) - std::max(a.u_min, b.u_min);
  const double ih = std::min(a.v_max, b.v_max) - std::max(a.v_min, b.v_min);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  const double uni = a.width() * a.height() + b.width() * b.height() - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

std::vector<InstanceOccurrences> collect_occurrences(const Scene& scene) {
  std::map<int, std::vector<Occurrence>> by_instance;
  for (std::size_t fi = 0; fi < scene.frames.size(); ++fi) {
    const Frame& frame = scene.frames[fi];
    const auto labels = detection_instance_labels(scene, fi);
    for (std::size_t ci = 0; ci < frame.detections.size(); ++ci)
      for (std::size_t di = 0; di < frame.detections[ci].size(); ++di)
        if (labels[ci][di] >= 0 && !frame.detections[ci][di].embedding.empty())
          by_instance[labels[ci][di]].push_back({fi, ci, di});
  }
  std::vector<InstanceOccurrences> out;
  for (auto& [id, occ] : by_instance) out.push_back({id, std::move(occ)});
  return out;
}

const std::vector<double>& features_of(const Scene& scene, const Occurrence& o) {
  return scene.frames[o.frame_index].detections[o.camera_index][o.det_index].embedding;
}

}  // namespace

std::vector<std::vector<int>> detection_instance_labels(const Scene& scene,
                                                        std::size_t frame_index) {
  constexpr double kMinIou = 0.25;
  const Frame& frame = scene.frames.at(frame_index);
  std::vector<std::vector<int>> labels(frame.detections.size());
  for (std::size_t ci = 0; ci < frame.detections.size(); ++ci)
    labels[ci].assign(frame.detections[ci].size(), -1);

  // Greedy assignment over all (ground truth, detection) overlaps, best IoU
  // first; each detection and each (instance, camera) slot is used once.
  struct Claim {
    double iou;
    std::size_t gt_index;
    std::size_t cam_index;
    std::size_t det_index;
  };
  std::vector<Claim> claims;
  for (std::size_t gi = 0; gi < frame.ground_truth.size(); ++gi) {
    const auto& gt = frame.ground_truth[gi];
    for (const int cam_id : gt.visible_in) {
      const auto ci = scene.rig.index_of(cam_id);
      if (!ci) continue;
      const auto projected = project_box_to_image(scene.rig.cameras[*ci], gt.box);
      if (!projected) continue;
      const auto& dets = frame.detections[*ci];
      for (std::size_t di = 0; di < dets.size(); ++di) {
        const double ov = bbox_iou(projected->bbox, dets[di].bbox);
        if (ov > kMinIou) claims.push_back({ov, gi, *ci, di});
      }
    }
  }
  std::sort(claims.begin(), claims.end(), [](const Claim& a, const Claim& b) {
    if (a.iou != b.iou) return a.iou > b.iou;
    if (a.gt_index != b.gt_index) return a.gt_index < b.gt_index;
    if (a.cam_index != b.cam_index) return a.cam_index < b.cam_index;
    return a.det_index < b.det_index;
  });
  std::set<std::pair<std::size_t, std::size_t>> slot_used;  // (gt, camera)
  for (const auto& c : claims) {
    if (labels[c.cam_index][c.det_index] >= 0) continue;
    if (slot_used.count({c.gt_index, c.cam_index})) continue;
    labels[c.cam_index][c.det_index] = frame.ground_truth[c.gt_index].instance_id;
    slot_used.insert({c.gt_index, c.cam_index});
  }
  return labels;
}

PairBatch sample_pairs(const Scene& scene, std::size_t batch_size, Rng& rng,
                       const ToyEncoder* encoder, const LossConfig& cfg) {
  cfg.validate();
  if (batch_size < 1) throw ValidationError("sample_pairs: batch_size must be >= 1");
  const auto instances = collect_occurrences(scene);

  // Positive sources: a frame where the instance appears in two cameras.
  struct CrossPair {
    std::size_t instance_index;
    Occurrence a, b;
  };
  std::vector<CrossPair> cross;
  for (std::size_t ii = 0; ii < instances.size(); ++ii) {
    const auto& occ = instances[ii].occurrences;
    for (std::size_t i = 0; i < occ.size(); ++i)
      for (std::size_t j = i + 1; j < occ.size(); ++j)
        if (occ[i].frame_index == occ[j].frame_index &&
            occ[i].camera_index != occ[j].camera_index)
          cross.push_back({ii, occ[i], occ[j]});
  }
  if (cross.empty() || instances.size() < 2)
    throw ValidationError(
        "sample_pairs: scene needs at least two instances with cross-camera "
        "occurrences");

  const std::size_t n_pos = (batch_size + 1) / 2;
  const std::size_t n_neg = batch_size / 2;
  PairBatch batch;

  for (std::size_t k = 0; k < n_pos; ++k) {
    const auto& cp = cross[static_cast<std::size_t>(
        rng.uniform_int(0, static_cast<std::int64_t>(cross.size()) - 1))];
    const bool swap = rng.bernoulli(0.5);
    const Occurrence& r = swap ? cp.b : cp.a;
    const Occurrence& p = swap ? cp.a : cp.b;
    batch.push_back({features_of(scene, r), features_of(scene, p), PairLabel::positive});
  }

  for (std::size_t k = 0; k < n_neg; ++k) {
    const auto& cp = cross[static_cast<std::size_t>(
        rng.uniform_int(0, static_cast<std::int64_t>(cross.size()) - 1))];
    const Occurrence& r = cp.a;
    // Another instance in the same scene.
    std::size_t other = cp.instance_index;
    for (int attempt = 0; attempt < 64 && other == cp.instance_index; ++attempt)
      other = static_cast<std::size_t>(
          rng.uniform_int(0, static_cast<std::int64_t>(instances.size()) - 1));
    if (other == cp.instance_index) continue;

    // Candidate occurrences of the other instance, preferring cameras
    // adjacent to the reference's camera.
    const int ref_cam_id = scene.rig.cameras[r.camera_index].id;
    std::vector<std::vector<double>> candidates;
    std::vector<std::vector<double>> fallback;
    for (const auto& o : instances[other].occurrences) {
      const int cam_id = scene.rig.cameras[o.camera_index].id;
      fallback.push_back(features_of(scene, o));
      if (scene.rig.is_adjacent(ref_cam_id, cam_id))
        candidates.push_back(features_of(scene, o));
    }
    if (candidates.empty()) candidates = std::move(fallback);
    if (candidates.empty()) continue;

    std::size_t pick = 0;
    if (encoder != nullptr) {
      pick = ohem_select_negative(features_of(scene, r), candidates, *encoder, cfg);
    } else {
      pick = static_cast<std::size_t>(
          rng.uniform_int(0, static_cast<std::int64_t>(candidates.size()) - 1));
    }
    batch.push_back({features_of(scene, r), candidates[pick], PairLabel::negative});
  }
  return batch;
}

TrainResult train(ToyEncoder& encoder, const std::vector<Scene>& scenes,
                  const TrainConfig& cfg) {
  cfg.validate();
  if (scenes.empty()) throw ValidationError("train: no scenes given");
  Rng rng(cfg.seed);
  TrainResult result;
  double lr = cfg.learning_rate;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (epoch > 0 && cfg.lr_decay_every > 0 && epoch % cfg.lr_decay_every == 0)
      lr *= cfg.lr_decay;

    double loss_sum = 0.0;
    std::size_t pos_total = 0, pos_ok = 0, neg_total = 0, neg_ok = 0;

    for (int b = 0; b < cfg.batches_per_epoch; ++b) {
      const Scene& scene = scenes[static_cast<std::size_t>(
          rng.uniform_int(0, static_cast<std::int64_t>(scenes.size()) - 1))];
      const PairBatch batch =
          sample_pairs(scene, cfg.batch_size, rng, &encoder, cfg.loss);

      const LossGradients g = loss_gradient(batch, encoder, cfg.loss);
      if (!std::isfinite(g.loss))
        throw DivergenceError("training diverged at epoch " + std::to_string(epoch) +
                              ", batch " + std::to_string(b) +
                              " (loss is not finite; lower the learning rate)");
      loss_sum += g.loss;

      for (const auto& pair : batch) {
        const double d =
            l2_distance(encoder.encode(pair.reference), encoder.encode(pair.candidate));
        if (pair.label == PairLabel::positive) {
          ++pos_total;
          if (d <= cfg.loss.alpha) ++pos_ok;
        } else {
          ++neg_total;
          if (d >= cfg.loss.beta) ++neg_ok;
        }
      }

      for (std::size_t i = 0; i < encoder.w1.size(); ++i) encoder.w1[i] -= lr * g.dw1[i];
      for (std::size_t i = 0; i < encoder.b1.size(); ++i) encoder.b1[i] -= lr * g.db1[i];
      for (std::size_t i = 0; i < encoder.w2.size(); ++i) encoder.w2[i] -= lr * g.dw2[i];
      for (std::size_t i = 0; i < encoder.b2.size(); ++i) encoder.b2[i] -= lr * g.db2[i];
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.mean_loss = loss_sum / cfg.batches_per_epoch;
    stats.positive_margin_rate =
        pos_total ? static_cast<double>(pos_ok) / static_cast<double>(pos_total) : 0.0;
    stats.negative_margin_rate =
        neg_total ? static_cast<double>(neg_ok) / static_cast<double>(neg_total) : 0.0;
    result.curve.push_back(stats);
  }
  return result;
}

std::vector<DimSweepEntry> sweep_embedding_dims(const std::vector<Scene>& scenes,
                                                const std::vector<int>& dims,
                                                const TrainConfig& base_cfg) {
  std::vector<DimSweepEntry> out;
  for (const int d : dims) {
    TrainConfig cfg = base_cfg;
    cfg.loss.embed_dim = d;
    cfg.validate();
    if (scenes.empty()) throw ValidationError("sweep_embedding_dims: no scenes");
    int in_dim = 0;
    for (const auto& frame : scenes.front().frames) {
      for (const auto& per_cam : frame.detections)
        for (const auto& det : per_cam)
          if (!det.embedding.empty()) in_dim = static_cast<int>(det.embedding.size());
      if (in_dim) break;
    }
    if (!in_dim) throw ValidationError("sweep_embedding_dims: scenes carry no features");
    Rng rng(base_cfg.seed ^ (0x5d1f00d5ULL + static_cast<std::uint64_t>(d)));
    ToyEncoder enc = ToyEncoder::random_init(in_dim, cfg.hidden_dim, d, rng);
    const TrainResult r = train(enc, scenes, cfg);
    out.push_back({d, r.curve.back().mean_loss});
  }
  return out;
}

void ToyEncoder::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write weights file: " + path);
  out << "sianms-encoder-weights 1\n";
  out << in_dim_ << ' ' << hidden_dim_ << ' ' << out_dim_ << '\n';
  char buf[64];
  auto dump = [&](const std::vector<double>& v, std::size_t row_len) {
    for (std::size_t i = 0; i < v.size(); ++i) {
      std::snprintf(buf, sizeof(buf), "%.17g", v[i]);
      out << buf << (((i + 1) % row_len == 0) ? '\n' : ' ');
    }
  };
  dump(w1, static_cast<std::size_t>(in_dim_));
  dump(b1, static_cast<std::size_t>(hidden_dim_));
  dump(w2, static_cast<std::size_t>(hidden_dim_));
  dump(b2, static_cast<std::size_t>(out_dim_));
  if (!out) throw IoError("failed while writing weights file: " + path);
}

ToyEncoder ToyEncoder::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open weights file: " + path);
  std::string magic;
  int version = 0;
  in >> magic >> version;
  if (magic != "sianms-encoder-weights" || version != 1)
    throw ParseError("weights file " + path + ": bad header");
  int in_dim = 0, hidden = 0, out_dim = 0;
  in >> in_dim >> hidden >> out_dim;
  if (!in || in_dim < 1 || hidden < 1 || out_dim < 1)
    throw ParseError("weights file " + path + ": bad dimensions line");
  ToyEncoder enc(in_dim, hidden, out_dim);
  auto slurp = [&](std::vector<double>& v, const char* what) {
    for (auto& x : v)
      if (!(in >> x))
        throw ParseError("weights file " + path + ": truncated " + what + " block");
  };
  slurp(enc.w1, "w1");
  slurp(enc.b1, "b1");
  slurp(enc.w2, "w2");
  slurp(enc.b2, "b2");
  double extra;
  if (in >> extra) throw ParseError("weights file " + path + ": trailing values");
  for (const auto* block : {&enc.w1, &enc.b1, &enc.w2, &enc.b2})
    for (const double v : *block)
      if (!std::isfinite(v))
        throw ParseError("weights file " + path + ": non-finite weight");
  return enc;
}

}  // namespace sianms
