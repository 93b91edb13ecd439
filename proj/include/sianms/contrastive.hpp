#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sianms/rng.hpp"
#include "sianms/scene.hpp"

namespace sianms {

struct LossConfig {
  double alpha = 1.0;  // lower margin (positive pairs pulled below it)
  double beta = 3.0;   // upper margin (negative pairs pushed above it)
  int embed_dim = 100;

  void validate() const;  // requires 0 <= alpha < beta
};

enum class PairLabel { positive, negative };

struct FeaturePair {
  std::vector<double> reference;
  std::vector<double> candidate;
  PairLabel label = PairLabel::positive;
};

using PairBatch = std::vector<FeaturePair>;

/// Two-layer tanh map from raw detection features to the embedding space.
class ToyEncoder {
 public:
  ToyEncoder() = default;
  ToyEncoder(int in_dim, int hidden_dim, int out_dim);

  static ToyEncoder random_init(int in_dim, int hidden_dim, int out_dim, Rng& rng);

  std::vector<double> encode(std::span<const double> x) const;

  int in_dim() const { return in_dim_; }
  int hidden_dim() const { return hidden_dim_; }
  int out_dim() const { return out_dim_; }

  // Row-major weights; exposed for gradient updates and serialization.
  std::vector<double> w1, b1;  // hidden x in, hidden
  std::vector<double> w2, b2;  // out x hidden, out

  /// Text weights format: header with dimensions, then row-major values in
  /// full precision (see docs/file_formats.md).
  void save(const std::string& path) const;
  static ToyEncoder load(const std::string& path);

 private:
  int in_dim_ = 0, hidden_dim_ = 0, out_dim_ = 0;

  friend struct EncoderTape;
};

/// Per-pair embedding gradients plus weight gradients chained through the
/// encoder.
struct LossGradients {
  double loss = 0.0;
  // Per pair: d L / d f(reference), d L / d f(candidate).
  std::vector<std::pair<std::vector<double>, std::vector<double>>> embedding_grads;
  std::vector<double> dw1, db1, dw2, db2;
};

/// Double-margin contrastive loss over the batch:
///   L = 1/2 * sum_i [ max(||f(r)-f(p)||_2 - alpha, 0)^2     (positive pairs)
///                   + max(beta - ||f(r)-f(n)||_2, 0)^2 ]    (negative pairs)
double loss(const PairBatch& batch, const ToyEncoder& encoder, const LossConfig& cfg);

/// Analytic gradient of the loss. Hinge kinks and the zero-distance negative
/// case use the zero subgradient.
LossGradients loss_gradient(const PairBatch& batch, const ToyEncoder& encoder,
                            const LossConfig& cfg);

/// Index of the candidate negative with the highest negative-term loss
/// against the reference; ties keep the earliest. Throws ValidationError on
/// an empty candidate list.
std::size_t ohem_select_negative(const std::vector<double>& reference,
                                 const std::vector<std::vector<double>>& candidates,
                                 const ToyEncoder& encoder, const LossConfig& cfg);

/// Ground-truth instance id per detection (aligned with frame.detections),
/// -1 where no ground-truth projection matches. Association is by
/// image-plane IoU between the projected 3D box and detection bboxes.
std::vector<std::vector<int>> detection_instance_labels(const Scene& scene,
                                                        std::size_t frame_index);

/// Draws a batch from a scene's cross-camera instance occurrences:
/// ceil(N/2) positives (same instance, two cameras) and floor(N/2) negatives
/// (different instance, OHEM-selected when an encoder is given). Throws
/// ValidationError when the scene has too few cross-camera instances.
PairBatch sample_pairs(const Scene& scene, std::size_t batch_size, Rng& rng,
                       const ToyEncoder* encoder, const LossConfig& cfg);

struct TrainConfig {
  int epochs = 25;
  std::size_t batch_size = 8;
  double learning_rate = 0.01;
  double lr_decay = 0.1;     // multiplicative
  int lr_decay_every = 8;    // epochs
  int batches_per_epoch = 64;
  int hidden_dim = 64;
  std::uint64_t seed = 1;
  LossConfig loss;

  void validate() const;
};

struct EpochStats {
  int epoch = 0;
  double mean_loss = 0.0;
  double positive_margin_rate = 0.0;  // fraction of positives below alpha
  double negative_margin_rate = 0.0;  // fraction of negatives above beta
};

struct TrainResult {
  std::vector<EpochStats> curve;
};

/// Plain gradient descent with step decay on batches drawn from the scenes.
/// Throws DivergenceError when the loss becomes non-finite.
TrainResult train(ToyEncoder& encoder, const std::vector<Scene>& scenes,
                  const TrainConfig& cfg);

struct DimSweepEntry {
  int embed_dim = 0;
  double final_mean_loss = 0.0;
};

/// Trains one encoder per embedding dimension and reports the final epoch's
/// mean loss for each (experiment-shape harness; synthetic data only).
std::vector<DimSweepEntry> sweep_embedding_dims(const std::vector<Scene>& scenes,
                                                const std::vector<int>& dims,
                                                const TrainConfig& base_cfg);

}  // namespace sianms
