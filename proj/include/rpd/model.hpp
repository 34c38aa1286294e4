#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "rpd/features.hpp"
#include "rpd/text.hpp"

namespace rpd {

// Sentinel for an absent label slot; never a valid class index.
inline constexpr int kNullLabel = -1;

// A text with the three-slot label used to train the joint model:
//   y1  true class for standard classification (null on successful adversaries)
//   y2  flipped class predicted for a successful adversary (null otherwise)
//   y3  1 if the row is a successful adversary, else 0
// Exactly one of y1/y2 is set, consistent with y3.
struct AugmentedExample {
  Sentence sentence;
  int y1 = kNullLabel;
  int y2 = kNullLabel;
  int y3 = 0;
};

bool augmented_valid(const AugmentedExample& ex, int class_count);

struct LinearHead {
  int classes = 0;
  std::vector<double> w;  // classes x buckets, row-major
  std::vector<double> b;  // classes

  void init_zero(int class_count, std::uint32_t buckets);
  bool operator==(const LinearHead&) const = default;
};

// Shared featurizer configuration plus three linear softmax heads:
// standard classification, a dummy head that absorbs the adversarial
// objective, and the binary adversarial detector.
struct JointModelParams {
  FeatureConfig features;
  int class_count = 0;
  LinearHead std_head;
  LinearHead adv_head;
  LinearHead det_head;  // classes == 2; class 1 = adversary

  static JointModelParams zeros(const FeatureConfig& cfg, int class_count);
  bool operator==(const JointModelParams&) const = default;
};

struct TrainConfig {
  double learning_rate = 0.1;
  int batch_size = 16;
  int epochs = 5;
  double alpha = 5.0;   // detection loss weight
  double beta = 5.0;    // adversarial loss weight
  double lambda = 1e-5; // L2 coefficient
  std::uint64_t seed = 42;
  int max_tokens = 80;
  // Ablation: apply the adversarial objective to the standard head instead
  // of the dummy head.
  bool vanilla_adv_objective = false;
};

std::vector<double> softmax(std::span<const double> scores);

// Pre-softmax affine scores of one head.
std::vector<double> head_scores(const LinearHead& head, const FeatureVector& f);

struct ForwardResult {
  std::vector<double> p_std;
  std::vector<double> p_adv;
  std::vector<double> p_det;
};

ForwardResult forward(const JointModelParams& params, const FeatureVector& f);

// Per-term values of the aggregated loss
//   total = l_c + alpha * l_d + beta * l_a + lambda * |theta|^2
// l_c: mean cross-entropy of the standard head over rows with y1 set.
// l_a: mean complement-form cross-entropy of the dummy head over rows with
//      y2 set (one-hot plus per-class complement terms).
// l_d: mean complement-form binary cross-entropy of the detector over all rows.
struct LossBreakdown {
  double l_c = 0, l_d = 0, l_a = 0, l2 = 0, total = 0;
};

// Computes the aggregated loss and, when grad is non-null, its exact analytic
// gradient with respect to every parameter. Throws on an empty batch.
LossBreakdown loss(const JointModelParams& params, std::span<const AugmentedExample> batch,
                   const TrainConfig& cfg, JointModelParams* grad = nullptr);

// Mini-batch SGD for cfg.epochs over data shuffled per epoch (Fisher-Yates on
// an mt19937_64 seeded with cfg.seed). Bitwise deterministic given (data, cfg).
JointModelParams train_joint(const std::vector<AugmentedExample>& data, const TrainConfig& cfg,
                             const FeatureConfig& features, int class_count);

// Standard head only, plain cross-entropy on true labels; the detector and
// dummy heads stay zero. Throws on an empty dataset.
JointModelParams train_victim(const Dataset& data, const TrainConfig& cfg,
                              const FeatureConfig& features);

// Adversarial-training baseline: one standard head over naturals plus
// adversaries relabeled with their source truth (y1 must be set on every
// adversary row). The union is canonically ordered before the seeded shuffle,
// so permuting either input list does not change the result.
JointModelParams train_at_baseline(const Dataset& natural,
                                   const std::vector<AugmentedExample>& adversaries,
                                   const TrainConfig& cfg, const FeatureConfig& features);

// Checkpoint format: magic "RPDJ1", then feature config, class count and the
// three weight blocks as little-endian 64-bit floats. Round-trips bitwise.
void save_model(const JointModelParams& params, const std::filesystem::path& path);
JointModelParams load_model(const std::filesystem::path& path);

}  // namespace rpd
