#pragma once

#include <cmath>
#include <cstdint>
#include <string>

#include <nlohmann/json.hpp>

#include "lntune/data/augment.hpp"
#include "lntune/encoder_spec.hpp"
#include "lntune/errors.hpp"
#include "lntune/hash.hpp"
#include "lntune/losses.hpp"

namespace lntune {

using Json = nlohmann::ordered_json;

inline Json to_json(const EncoderSpec& s) {
  Json j;
  j["backbone"] = to_string(s.backbone);
  j["image_size"] = s.image_size;
  j["patch_size"] = s.patch_size;
  j["width"] = s.width;
  j["depth"] = s.depth;
  j["heads"] = s.heads;
  return j;
}

inline EncoderSpec encoder_spec_from_json(const Json& j) {
  EncoderSpec s;
  s.backbone = parse_backbone(j.value("backbone", to_string(s.backbone)));
  if (s.backbone == Backbone::PretrainedClipVision) s = EncoderSpec::clip_vit_l14();
  s.image_size = j.value("image_size", s.image_size);
  s.patch_size = j.value("patch_size", s.patch_size);
  s.width = j.value("width", s.width);
  s.depth = j.value("depth", s.depth);
  s.heads = j.value("heads", s.heads);
  s.validate();
  return s;
}

inline Json to_json(const ParamPolicy& p) {
  Json j;
  j["kind"] = to_string(p.kind);
  j["rank"] = p.rank;
  return j;
}

inline ParamPolicy policy_from_json(const Json& j) {
  ParamPolicy p;
  p.kind = parse_policy_kind(j.value("kind", to_string(p.kind)));
  p.rank = j.value("rank", p.kind == PolicyKind::LowRank ? 1 : 0);
  p.validate();
  return p;
}

/// Parses "ln_only", "low_rank", "low_rank:4" and similar.
inline ParamPolicy parse_policy(const std::string& text) {
  const auto colon = text.find(':');
  ParamPolicy p;
  p.kind = parse_policy_kind(text.substr(0, colon));
  p.rank = p.kind == PolicyKind::LowRank ? 1 : 0;
  if (colon != std::string::npos) {
    if (p.kind != PolicyKind::LowRank) throw ConfigError("only low_rank takes a rank: " + text);
    p.rank = std::stoi(text.substr(colon + 1));
  }
  p.validate();
  return p;
}

struct TrainConfig {
  int batch_size = 128;
  int extended_batch_size = 1024;
  double lr_min = 1e-5;
  double lr_max = 3e-4;
  int warmup_epochs = 1;
  int decay_epochs = 9;
  int max_cycles = 2;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double weight_decay = 0.0;
  /// Weight decay contradicts the reference recipe; it is accepted only
  /// when this is set.
  bool allow_weight_decay = false;
  Precision precision = Precision::Reduced;
  LossWeights loss_weights{};
  ParamPolicy policy = ParamPolicy::ln_only();
  std::uint64_t seed = 0;

  /// Feature-path switches used by the ablation setups.
  bool l2_normalize = true;
  bool slerp_extension = true;
  /// Draw batches with equal class counts (minority class cycled).
  bool class_balanced = false;

  EncoderSpec encoder = EncoderSpec::tiny_vit();
  /// Seed of the frozen backbone initialization (tiny backbone only), kept
  /// apart from `seed` so runs with different seeds share one backbone.
  std::uint64_t backbone_seed = 0;
  std::string weights_path;
  data::AugmentConfig augment{};
  int eval_batch_size = 256;
  /// Also score the training set after every epoch.
  bool eval_train_auroc = false;

  int cycle_epochs() const { return warmup_epochs + decay_epochs; }
  int total_epochs() const { return max_cycles * cycle_epochs(); }
  int effective_extended_batch() const { return slerp_extension ? extended_batch_size : batch_size; }

  void validate() const {
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (extended_batch_size < batch_size || extended_batch_size % batch_size != 0)
      throw ConfigError("extended_batch_size must be a multiple of batch_size and >= batch_size");
    if (!(lr_min > 0) || !(lr_min < lr_max) || !std::isfinite(lr_max))
      throw ConfigError("learning rates must satisfy 0 < lr_min < lr_max");
    if (warmup_epochs < 1 || decay_epochs < 1 || max_cycles < 1) throw ConfigError("all epoch counts must be >= 1");
    if (!(adam_beta1 >= 0 && adam_beta1 < 1) || !(adam_beta2 >= 0 && adam_beta2 < 1) || !(adam_eps > 0))
      throw ConfigError("invalid Adam hyperparameters");
    if (!(weight_decay >= 0)) throw ConfigError("weight_decay must be >= 0");
    if (weight_decay > 0 && !allow_weight_decay)
      throw ConfigError("weight_decay > 0 requires allow_weight_decay (the recipe trains without weight decay)");
    loss_weights.validate();
    policy.validate();
    encoder.validate();
    augment.validate();
    if (!l2_normalize && (loss_weights.alpha > 0 || loss_weights.beta > 0))
      throw ConfigError("alignment/uniformity losses need l2_normalize");
    if (!l2_normalize && slerp_extension) throw ConfigError("slerp extension needs l2_normalize");
    if (eval_batch_size < 1) throw ConfigError("eval_batch_size must be >= 1");
  }

  Json to_json() const {
    Json j;
    j["batch_size"] = batch_size;
    j["extended_batch_size"] = extended_batch_size;
    j["lr_min"] = lr_min;
    j["lr_max"] = lr_max;
    j["warmup_epochs"] = warmup_epochs;
    j["decay_epochs"] = decay_epochs;
    j["max_cycles"] = max_cycles;
    j["adam_beta1"] = adam_beta1;
    j["adam_beta2"] = adam_beta2;
    j["adam_eps"] = adam_eps;
    j["weight_decay"] = weight_decay;
    j["allow_weight_decay"] = allow_weight_decay;
    j["precision"] = to_string(precision);
    j["loss_weights"] = {{"alpha", loss_weights.alpha}, {"beta", loss_weights.beta}};
    j["policy"] = lntune::to_json(policy);
    j["seed"] = seed;
    j["l2_normalize"] = l2_normalize;
    j["slerp_extension"] = slerp_extension;
    j["class_balanced"] = class_balanced;
    j["encoder"] = lntune::to_json(encoder);
    j["backbone_seed"] = backbone_seed;
    j["weights_path"] = weights_path;
    j["augment"] = augment.to_json();
    j["eval_batch_size"] = eval_batch_size;
    j["eval_train_auroc"] = eval_train_auroc;
    return j;
  }

  /// Missing fields keep their defaults; unknown fields are rejected.
  static TrainConfig from_json(const Json& j) {
    static const char* known[] = {"batch_size", "extended_batch_size", "lr_min", "lr_max", "warmup_epochs",
                                  "decay_epochs", "max_cycles", "adam_beta1", "adam_beta2", "adam_eps",
                                  "weight_decay", "allow_weight_decay", "precision", "loss_weights", "policy",
                                  "seed", "l2_normalize", "slerp_extension", "class_balanced", "encoder",
                                  "backbone_seed", "weights_path", "augment", "eval_batch_size",
                                  "eval_train_auroc"};
    for (auto it = j.begin(); it != j.end(); ++it) {
      bool ok = false;
      for (const char* k : known) ok = ok || it.key() == k;
      if (!ok) throw ConfigError("unknown TrainConfig field '" + it.key() + "'");
    }
    TrainConfig c;
    try {
      c.batch_size = j.value("batch_size", c.batch_size);
      c.extended_batch_size = j.value("extended_batch_size", c.extended_batch_size);
      c.lr_min = j.value("lr_min", c.lr_min);
      c.lr_max = j.value("lr_max", c.lr_max);
      c.warmup_epochs = j.value("warmup_epochs", c.warmup_epochs);
      c.decay_epochs = j.value("decay_epochs", c.decay_epochs);
      c.max_cycles = j.value("max_cycles", c.max_cycles);
      c.adam_beta1 = j.value("adam_beta1", c.adam_beta1);
      c.adam_beta2 = j.value("adam_beta2", c.adam_beta2);
      c.adam_eps = j.value("adam_eps", c.adam_eps);
      c.weight_decay = j.value("weight_decay", c.weight_decay);
      c.allow_weight_decay = j.value("allow_weight_decay", c.allow_weight_decay);
      if (j.contains("precision")) c.precision = parse_precision(j["precision"].get<std::string>());
      if (j.contains("loss_weights")) {
        c.loss_weights.alpha = j["loss_weights"].value("alpha", c.loss_weights.alpha);
        c.loss_weights.beta = j["loss_weights"].value("beta", c.loss_weights.beta);
      }
      if (j.contains("policy"))
        c.policy = j["policy"].is_string() ? parse_policy(j["policy"].get<std::string>()) : policy_from_json(j["policy"]);
      c.seed = j.value("seed", c.seed);
      c.l2_normalize = j.value("l2_normalize", c.l2_normalize);
      c.slerp_extension = j.value("slerp_extension", c.slerp_extension);
      c.class_balanced = j.value("class_balanced", c.class_balanced);
      if (j.contains("encoder")) c.encoder = encoder_spec_from_json(j["encoder"]);
      c.backbone_seed = j.value("backbone_seed", c.backbone_seed);
      c.weights_path = j.value("weights_path", c.weights_path);
      if (j.contains("augment")) c.augment = data::AugmentConfig::from_json(j["augment"]);
      c.eval_batch_size = j.value("eval_batch_size", c.eval_batch_size);
      c.eval_train_auroc = j.value("eval_train_auroc", c.eval_train_auroc);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("TrainConfig: ") + e.what());
    }
    c.validate();
    return c;
  }

  std::string fingerprint() const { return sha256_hex(to_json().dump()); }
};

}  // namespace lntune
