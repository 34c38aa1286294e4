#include "rpd/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <random>

#include "rpd/errors.hpp"

namespace rpd {

bool augmented_valid(const AugmentedExample& ex, int class_count) {
  if (ex.y3 != 0 && ex.y3 != 1) return false;
  if (ex.y3 == 1) {
    return ex.y1 == kNullLabel && ex.y2 >= 0 && ex.y2 < class_count;
  }
  return ex.y2 == kNullLabel && ex.y1 >= 0 && ex.y1 < class_count;
}

void LinearHead::init_zero(int class_count, std::uint32_t buckets) {
  classes = class_count;
  w.assign(static_cast<std::size_t>(class_count) * buckets, 0.0);
  b.assign(static_cast<std::size_t>(class_count), 0.0);
}

JointModelParams JointModelParams::zeros(const FeatureConfig& cfg, int class_count) {
  JointModelParams p;
  p.features = cfg;
  p.class_count = class_count;
  p.std_head.init_zero(class_count, cfg.buckets);
  p.adv_head.init_zero(class_count, cfg.buckets);
  p.det_head.init_zero(2, cfg.buckets);
  return p;
}

std::vector<double> softmax(std::span<const double> scores) {
  std::vector<double> out(scores.size());
  double mx = *std::max_element(scores.begin(), scores.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    out[i] = std::exp(scores[i] - mx);
    sum += out[i];
  }
  for (double& v : out) v /= sum;
  return out;
}

std::vector<double> head_scores(const LinearHead& head, const FeatureVector& f) {
  std::vector<double> z(head.b.begin(), head.b.end());
  const std::size_t buckets = head.classes > 0 ? head.w.size() / head.classes : 0;
  for (int c = 0; c < head.classes; ++c) {
    const double* row = head.w.data() + static_cast<std::size_t>(c) * buckets;
    double acc = 0.0;
    for (const auto& [idx, cnt] : f) acc += row[idx] * cnt;
    z[static_cast<std::size_t>(c)] += acc;
  }
  return z;
}

ForwardResult forward(const JointModelParams& params, const FeatureVector& f) {
  ForwardResult r;
  r.p_std = softmax(head_scores(params.std_head, f));
  r.p_adv = softmax(head_scores(params.adv_head, f));
  r.p_det = softmax(head_scores(params.det_head, f));
  return r;
}

namespace {

constexpr double kProbClamp = 1e-9;

double clamp_prob(double p) { return std::min(1.0 - kProbClamp, std::max(kProbClamp, p)); }

// -sum_i [ t_i log p_i + (1 - t_i) log(1 - p_i) ] with t one-hot at `target`.
double complement_ce(std::span<const double> probs, int target) {
  double l = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    double p = clamp_prob(probs[i]);
    double t = (static_cast<int>(i) == target) ? 1.0 : 0.0;
    l -= t * std::log(p) + (1.0 - t) * std::log1p(-p);
  }
  return l;
}

// d(complement_ce)/d(logit_j) through the softmax.
void complement_dz(std::span<const double> probs, int target, std::span<double> dz) {
  double gsum = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    double p = clamp_prob(probs[i]);
    double t = (static_cast<int>(i) == target) ? 1.0 : 0.0;
    double g = -(t - (1.0 - t) * p / (1.0 - p));
    dz[i] = g;
    gsum += g;
  }
  for (std::size_t j = 0; j < probs.size(); ++j) {
    dz[j] -= probs[j] * gsum;
  }
}

double plain_ce(std::span<const double> probs, int target) {
  return -std::log(std::max(probs[static_cast<std::size_t>(target)], 1e-300));
}

void add_scaled_outer(LinearHead& grad, std::span<const double> dz, const FeatureVector& f,
                      double scale) {
  const std::size_t buckets = grad.classes > 0 ? grad.w.size() / grad.classes : 0;
  for (int c = 0; c < grad.classes; ++c) {
    double g = dz[static_cast<std::size_t>(c)] * scale;
    if (g == 0.0) continue;
    double* row = grad.w.data() + static_cast<std::size_t>(c) * buckets;
    for (const auto& [idx, cnt] : f) row[idx] += g * cnt;
    grad.b[static_cast<std::size_t>(c)] += g;
  }
}

double squared_norm(const JointModelParams& p) {
  auto head_sq = [](const LinearHead& h) {
    double s = 0.0;
    for (double v : h.w) s += v * v;
    for (double v : h.b) s += v * v;
    return s;
  };
  return head_sq(p.std_head) + head_sq(p.adv_head) + head_sq(p.det_head);
}

void add_l2_grad(const LinearHead& head, LinearHead& grad, double lambda) {
  for (std::size_t i = 0; i < head.w.size(); ++i) grad.w[i] += 2.0 * lambda * head.w[i];
  for (std::size_t i = 0; i < head.b.size(); ++i) grad.b[i] += 2.0 * lambda * head.b[i];
}

}  // namespace

LossBreakdown loss(const JointModelParams& params, std::span<const AugmentedExample> batch,
                   const TrainConfig& cfg, JointModelParams* grad) {
  if (batch.empty()) throw std::invalid_argument("loss: empty batch");
  const int C = params.class_count;
  std::size_t n_c = 0, n_a = 0;
  for (const AugmentedExample& ex : batch) {
    if (!augmented_valid(ex, C)) throw std::invalid_argument("loss: invalid augmented example");
    if (ex.y1 != kNullLabel) ++n_c;
    if (ex.y2 != kNullLabel) ++n_a;
  }
  const double n = static_cast<double>(batch.size());

  if (grad) *grad = JointModelParams::zeros(params.features, C);

  LossBreakdown out;
  std::vector<double> dz(static_cast<std::size_t>(std::max(C, 2)));
  for (const AugmentedExample& ex : batch) {
    FeatureVector f = featurize(ex.sentence, params.features);
    std::vector<double> p_std = softmax(head_scores(params.std_head, f));
    std::vector<double> p_det = softmax(head_scores(params.det_head, f));

    if (ex.y1 != kNullLabel) {
      out.l_c += plain_ce(p_std, ex.y1) / static_cast<double>(n_c);
      if (grad) {
        for (int c = 0; c < C; ++c) {
          dz[static_cast<std::size_t>(c)] =
              p_std[static_cast<std::size_t>(c)] - (c == ex.y1 ? 1.0 : 0.0);
        }
        add_scaled_outer(grad->std_head, std::span(dz).first(static_cast<std::size_t>(C)), f,
                         1.0 / static_cast<double>(n_c));
      }
    }

    if (ex.y2 != kNullLabel) {
      const bool vanilla = cfg.vanilla_adv_objective;
      std::vector<double> p_a =
          vanilla ? p_std : softmax(head_scores(params.adv_head, f));
      out.l_a += complement_ce(p_a, ex.y2) / static_cast<double>(n_a);
      if (grad) {
        complement_dz(p_a, ex.y2, std::span(dz).first(static_cast<std::size_t>(C)));
        add_scaled_outer(vanilla ? grad->std_head : grad->adv_head,
                         std::span(dz).first(static_cast<std::size_t>(C)), f,
                         cfg.beta / static_cast<double>(n_a));
      }
    }

    out.l_d += complement_ce(p_det, ex.y3) / n;
    if (grad) {
      complement_dz(p_det, ex.y3, std::span(dz).first(2));
      add_scaled_outer(grad->det_head, std::span(dz).first(2), f, cfg.alpha / n);
    }
  }

  out.l2 = cfg.lambda * squared_norm(params);
  if (grad && cfg.lambda != 0.0) {
    add_l2_grad(params.std_head, grad->std_head, cfg.lambda);
    add_l2_grad(params.adv_head, grad->adv_head, cfg.lambda);
    add_l2_grad(params.det_head, grad->det_head, cfg.lambda);
  }
  out.total = out.l_c + cfg.alpha * out.l_d + cfg.beta * out.l_a + out.l2;
  return out;
}

namespace {

// Rows are canonically ordered by (text, y1, y2, y3) before the seeded
// shuffle, so training never depends on input order.
std::vector<std::size_t> canonical_order(const std::vector<AugmentedExample>& data) {
  struct Key {
    std::string text;
    int y1, y2, y3;
    std::size_t index;
  };
  std::vector<Key> keys;
  keys.reserve(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    keys.push_back({data[i].sentence.text(), data[i].y1, data[i].y2, data[i].y3, i});
  }
  std::sort(keys.begin(), keys.end(), [](const Key& a, const Key& b) {
    return std::tie(a.text, a.y1, a.y2, a.y3) < std::tie(b.text, b.y1, b.y2, b.y3);
  });
  std::vector<std::size_t> order;
  order.reserve(keys.size());
  for (const Key& k : keys) order.push_back(k.index);
  return order;
}

void fisher_yates(std::vector<std::size_t>& idx, std::mt19937_64& rng) {
  for (std::size_t i = idx.size(); i > 1; --i) {
    std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(idx[i - 1], idx[j]);
  }
}

void decay_head(LinearHead& head, double factor) {
  for (double& v : head.w) v *= factor;
  for (double& v : head.b) v *= factor;
}

void apply_update(LinearHead& head, std::span<const double> dz, const FeatureVector& f,
                  double lr_scale) {
  const std::size_t buckets = head.classes > 0 ? head.w.size() / head.classes : 0;
  for (int c = 0; c < head.classes; ++c) {
    double g = dz[static_cast<std::size_t>(c)] * lr_scale;
    if (g == 0.0) continue;
    double* row = head.w.data() + static_cast<std::size_t>(c) * buckets;
    for (const auto& [idx, cnt] : f) row[idx] -= g * cnt;
    head.b[static_cast<std::size_t>(c)] -= g;
  }
}

}  // namespace

JointModelParams train_joint(const std::vector<AugmentedExample>& data, const TrainConfig& cfg,
                             const FeatureConfig& features, int class_count) {
  if (class_count < 1) throw std::invalid_argument("train_joint: class_count must be positive");
  if (cfg.batch_size < 1) throw std::invalid_argument("train_joint: batch_size must be positive");
  FeatureConfig eff = features;
  eff.max_tokens = cfg.max_tokens;
  JointModelParams params = JointModelParams::zeros(eff, class_count);
  if (data.empty() || cfg.epochs <= 0) return params;

  bool any_y1 = false, any_y2 = false;
  for (const AugmentedExample& ex : data) {
    if (!augmented_valid(ex, class_count)) {
      throw std::invalid_argument("train_joint: invalid augmented example");
    }
    any_y1 |= ex.y1 != kNullLabel;
    any_y2 |= ex.y2 != kNullLabel;
  }

  // Heads that never receive a data gradient stay identically zero, so their
  // weight decay is skipped.
  const bool std_active = any_y1 || (cfg.vanilla_adv_objective && cfg.beta != 0.0 && any_y2);
  const bool adv_active = !cfg.vanilla_adv_objective && cfg.beta != 0.0 && any_y2;
  const bool det_active = cfg.alpha != 0.0;

  std::vector<FeatureVector> feats;
  feats.reserve(data.size());
  for (const AugmentedExample& ex : data) feats.push_back(featurize(ex.sentence, eff));

  std::vector<std::size_t> idx = canonical_order(data);
  std::mt19937_64 rng(cfg.seed);
  const int C = class_count;
  const double decay = 1.0 - 2.0 * cfg.learning_rate * cfg.lambda;

  std::vector<double> dz_std, dz_adv, dz_det;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    fisher_yates(idx, rng);
    for (std::size_t start = 0; start < idx.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(idx.size(), start + static_cast<std::size_t>(cfg.batch_size));
      const std::size_t bn = end - start;
      std::size_t n_c = 0, n_a = 0;
      for (std::size_t k = start; k < end; ++k) {
        if (data[idx[k]].y1 != kNullLabel) ++n_c;
        if (data[idx[k]].y2 != kNullLabel) ++n_a;
      }

      // Per-example logit gradients at the pre-step parameters.
      dz_std.assign(bn * static_cast<std::size_t>(C), 0.0);
      dz_adv.assign(bn * static_cast<std::size_t>(C), 0.0);
      dz_det.assign(bn * 2, 0.0);
      for (std::size_t k = 0; k < bn; ++k) {
        const AugmentedExample& ex = data[idx[start + k]];
        const FeatureVector& f = feats[idx[start + k]];
        std::span<double> ds(dz_std.data() + k * static_cast<std::size_t>(C),
                             static_cast<std::size_t>(C));
        std::span<double> da(dz_adv.data() + k * static_cast<std::size_t>(C),
                             static_cast<std::size_t>(C));
        std::span<double> dd(dz_det.data() + k * 2, 2);

        if (ex.y1 != kNullLabel || (cfg.vanilla_adv_objective && ex.y2 != kNullLabel)) {
          std::vector<double> p = softmax(head_scores(params.std_head, f));
          if (ex.y1 != kNullLabel) {
            for (int c = 0; c < C; ++c) {
              ds[static_cast<std::size_t>(c)] +=
                  (p[static_cast<std::size_t>(c)] - (c == ex.y1 ? 1.0 : 0.0)) /
                  static_cast<double>(n_c);
            }
          }
          if (cfg.vanilla_adv_objective && ex.y2 != kNullLabel && cfg.beta != 0.0) {
            std::vector<double> tmp(static_cast<std::size_t>(C));
            complement_dz(p, ex.y2, tmp);
            for (int c = 0; c < C; ++c) {
              ds[static_cast<std::size_t>(c)] +=
                  tmp[static_cast<std::size_t>(c)] * cfg.beta / static_cast<double>(n_a);
            }
          }
        }
        if (adv_active && ex.y2 != kNullLabel) {
          std::vector<double> p = softmax(head_scores(params.adv_head, f));
          complement_dz(p, ex.y2, da);
          for (double& v : da) v *= cfg.beta / static_cast<double>(n_a);
        }
        if (det_active) {
          std::vector<double> p = softmax(head_scores(params.det_head, f));
          complement_dz(p, ex.y3, dd);
          for (double& v : dd) v *= cfg.alpha / static_cast<double>(bn);
        }
      }

      // theta <- theta * (1 - 2 lr lambda) - lr * grad_data(theta)
      if (cfg.lambda != 0.0) {
        if (std_active) decay_head(params.std_head, decay);
        if (adv_active) decay_head(params.adv_head, decay);
        if (det_active) decay_head(params.det_head, decay);
      }
      for (std::size_t k = 0; k < bn; ++k) {
        const FeatureVector& f = feats[idx[start + k]];
        if (std_active) {
          apply_update(params.std_head,
                       std::span(dz_std).subspan(k * static_cast<std::size_t>(C),
                                                 static_cast<std::size_t>(C)),
                       f, cfg.learning_rate);
        }
        if (adv_active) {
          apply_update(params.adv_head,
                       std::span(dz_adv).subspan(k * static_cast<std::size_t>(C),
                                                 static_cast<std::size_t>(C)),
                       f, cfg.learning_rate);
        }
        if (det_active) {
          apply_update(params.det_head, std::span(dz_det).subspan(k * 2, 2), f,
                       cfg.learning_rate);
        }
      }
    }
  }
  return params;
}

namespace {

std::vector<AugmentedExample> as_natural_rows(const Dataset& data) {
  std::vector<AugmentedExample> rows;
  rows.reserve(data.examples.size());
  for (const LabeledExample& ex : data.examples) {
    rows.push_back({ex.sentence, ex.label, kNullLabel, 0});
  }
  return rows;
}

}  // namespace

JointModelParams train_victim(const Dataset& data, const TrainConfig& cfg,
                              const FeatureConfig& features) {
  if (data.examples.empty()) throw std::invalid_argument("train_victim: empty dataset");
  TrainConfig vcfg = cfg;
  vcfg.alpha = 0.0;
  vcfg.beta = 0.0;
  return train_joint(as_natural_rows(data), vcfg, features, data.class_count);
}

JointModelParams train_at_baseline(const Dataset& natural,
                                   const std::vector<AugmentedExample>& adversaries,
                                   const TrainConfig& cfg, const FeatureConfig& features) {
  if (natural.examples.empty()) throw std::invalid_argument("train_at_baseline: empty dataset");
  std::vector<AugmentedExample> rows = as_natural_rows(natural);
  for (const AugmentedExample& adv : adversaries) {
    if (adv.y1 == kNullLabel) {
      throw std::invalid_argument(
          "train_at_baseline: adversary row lacks a usable true label (y1)");
    }
    rows.push_back({adv.sentence, adv.y1, kNullLabel, 0});
  }
  TrainConfig vcfg = cfg;
  vcfg.alpha = 0.0;
  vcfg.beta = 0.0;
  return train_joint(rows, vcfg, features, natural.class_count);
}

namespace {

void put_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFF);
  out.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ostream& out, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFF);
  out.write(reinterpret_cast<const char*>(b), 8);
}

void put_f64(std::ostream& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  put_u64(out, bits);
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw DataError("truncated checkpoint");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

std::uint64_t get_u64(std::istream& in) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8)) throw DataError("truncated checkpoint");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

double get_f64(std::istream& in) {
  std::uint64_t bits = get_u64(in);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

constexpr char kMagic[5] = {'R', 'P', 'D', 'J', '1'};

void save_head(std::ostream& out, const LinearHead& head) {
  put_u32(out, static_cast<std::uint32_t>(head.classes));
  for (double v : head.w) put_f64(out, v);
  for (double v : head.b) put_f64(out, v);
}

LinearHead load_head(std::istream& in, std::uint32_t buckets) {
  LinearHead head;
  std::uint32_t classes = get_u32(in);
  if (classes == 0 || classes > 1u << 16) throw DataError("checkpoint: implausible class count");
  head.classes = static_cast<int>(classes);
  head.w.resize(static_cast<std::size_t>(classes) * buckets);
  for (double& v : head.w) v = get_f64(in);
  head.b.resize(classes);
  for (double& v : head.b) v = get_f64(in);
  return head;
}

}  // namespace

void save_model(const JointModelParams& params, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint: " + path.string());
  out.write(kMagic, 5);
  put_u32(out, static_cast<std::uint32_t>(params.class_count));
  put_u64(out, params.features.buckets);
  put_u32(out, static_cast<std::uint32_t>(params.features.ngram_orders.size()));
  for (int o : params.features.ngram_orders) put_u32(out, static_cast<std::uint32_t>(o));
  put_u32(out, static_cast<std::uint32_t>(params.features.max_tokens));
  save_head(out, params.std_head);
  save_head(out, params.adv_head);
  save_head(out, params.det_head);
  if (!out) throw DataError("write failure on checkpoint: " + path.string());
}

JointModelParams load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint: " + path.string());
  char magic[5];
  if (!in.read(magic, 5)) throw DataError("truncated checkpoint (missing magic): " + path.string());
  if (std::memcmp(magic, kMagic, 4) != 0) {
    throw DataError("not a checkpoint file (bad magic): " + path.string());
  }
  if (magic[4] != kMagic[4]) {
    throw DataError(std::string("unsupported checkpoint version '") + magic[4] +
                    "' (expected '1'): " + path.string());
  }
  JointModelParams p;
  p.class_count = static_cast<int>(get_u32(in));
  p.features.buckets = static_cast<std::uint32_t>(get_u64(in));
  if (p.features.buckets == 0) throw DataError("checkpoint: zero bucket count");
  std::uint32_t n_orders = get_u32(in);
  if (n_orders > 16) throw DataError("checkpoint: implausible n-gram order count");
  p.features.ngram_orders.clear();
  for (std::uint32_t i = 0; i < n_orders; ++i) {
    p.features.ngram_orders.push_back(static_cast<int>(get_u32(in)));
  }
  p.features.max_tokens = static_cast<int>(get_u32(in));
  p.std_head = load_head(in, p.features.buckets);
  p.adv_head = load_head(in, p.features.buckets);
  p.det_head = load_head(in, p.features.buckets);
  if (in.peek() != EOF) throw DataError("checkpoint has trailing bytes: " + path.string());
  return p;
}

}  // namespace rpd
