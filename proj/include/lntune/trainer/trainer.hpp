#pragma once

#include <cmath>
#include <filesystem>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "lntune/clock.hpp"
#include "lntune/data/augment.hpp"
#include "lntune/data/frame_store.hpp"
#include "lntune/encoder.hpp"
#include "lntune/evaluator/scoring.hpp"
#include "lntune/losses.hpp"
#include "lntune/schedule.hpp"
#include "lntune/trainer/adam.hpp"
#include "lntune/trainer/checkpoint.hpp"
#include "lntune/trainer/config.hpp"
#include "lntune/trainer/slerp_extend.hpp"

namespace lntune {

/// Builds the model a TrainConfig describes. The backbone comes from
/// backbone_seed (or the weights file); head and adapters are drawn from the
/// run seed.
inline FloatModel make_model(const TrainConfig& cfg) {
  cfg.validate();
  FloatModel m = build_model(cfg.encoder, cfg.policy, cfg.backbone_seed, cfg.weights_path);
  const std::uint64_t head_seed = derive_seed(cfg.seed, "head-init");
  for (auto& p : m.params()) {
    const bool adapter = p.info.role == ParamRole::AdapterDown || p.info.role == ParamRole::AdapterUp;
    if (is_head(p.info.role) || adapter) FloatModel::initialize_param(p, head_seed);
  }
  m.l2_normalize = cfg.l2_normalize;
  m.precision = cfg.precision;
  m.mark_dirty();
  return m;
}

struct StepRecord {
  std::int64_t step = 0;
  int epoch = 0;
  double lr = 0.0;
  LossBreakdown loss;
  double grad_norm = 0.0;
  int batch = 0;
  int extended = 0;
  /// Alignment dropped because no two rows shared a class.
  bool align_skipped = false;
};

struct EpochRecord {
  int epoch = 0;
  std::int64_t step = 0;
  std::optional<double> val_auroc;
  std::optional<double> train_auroc;
  double wall_time_s = 0.0;
};

struct TrainingLog {
  Json config;
  std::vector<StepRecord> steps;
  std::vector<EpochRecord> epochs;
  int best_epoch = -1;
  double best_val_auroc = std::numeric_limits<double>::quiet_NaN();
  std::uint64_t antipodal_fallbacks = 0;
};

inline constexpr int kTrainingLogSchemaVersion = 1;

inline Json to_json(const StepRecord& r) {
  Json j;
  j["type"] = "step";
  j["step"] = r.step;
  j["epoch"] = r.epoch;
  j["lr"] = r.lr;
  j["total"] = r.loss.total;
  j["cross_entropy"] = r.loss.cross_entropy;
  j["align"] = r.loss.align;
  j["uniform"] = r.loss.uniform;
  j["grad_norm"] = r.grad_norm;
  j["batch"] = r.batch;
  j["extended"] = r.extended;
  j["positive_pairs"] = r.loss.pair_counts.positive_pairs;
  j["all_pairs"] = r.loss.pair_counts.all_pairs;
  j["align_skipped"] = r.align_skipped;
  return j;
}

inline Json to_json(const EpochRecord& r) {
  Json j;
  j["type"] = "epoch";
  j["epoch"] = r.epoch;
  j["step"] = r.step;
  j["val_auroc"] = r.val_auroc ? Json(*r.val_auroc) : Json(nullptr);
  j["train_auroc"] = r.train_auroc ? Json(*r.train_auroc) : Json(nullptr);
  j["wall_time_s"] = r.wall_time_s;
  return j;
}

inline EpochRecord epoch_from_json(const Json& j) {
  EpochRecord r;
  r.epoch = j.at("epoch").get<int>();
  r.step = j.at("step").get<std::int64_t>();
  if (!j.at("val_auroc").is_null()) r.val_auroc = j["val_auroc"].get<double>();
  if (!j.at("train_auroc").is_null()) r.train_auroc = j["train_auroc"].get<double>();
  r.wall_time_s = j.value("wall_time_s", 0.0);
  return r;
}

/// Line-delimited log: a header with the resolved config, one line per
/// step and per epoch in order, and a closing summary line.
inline std::string serialize(const TrainingLog& log) {
  Json header;
  header["type"] = "header";
  header["schema"] = "lntune.training_log";
  header["schema_version"] = kTrainingLogSchemaVersion;
  header["tool_version"] = kToolVersion;
  header["config"] = log.config;
  std::string out = header.dump() + "\n";
  std::size_t e = 0;
  for (const auto& s : log.steps) {
    while (e < log.epochs.size() && log.epochs[e].step <= s.step) out += to_json(log.epochs[e++]).dump() + "\n";
    out += to_json(s).dump() + "\n";
  }
  while (e < log.epochs.size()) out += to_json(log.epochs[e++]).dump() + "\n";
  Json summary;
  summary["type"] = "summary";
  summary["best_epoch"] = log.best_epoch;
  summary["best_val_auroc"] = std::isnan(log.best_val_auroc) ? Json(nullptr) : Json(log.best_val_auroc);
  summary["antipodal_fallbacks"] = log.antipodal_fallbacks;
  out += summary.dump() + "\n";
  return out;
}

class Trainer {
 public:
  Trainer(FloatModel& model, const data::FrameStore& train, const data::FrameStore* val, TrainConfig cfg,
          std::filesystem::path out_dir = {})
      : model_(model), train_(train), val_(val), cfg_(std::move(cfg)), out_dir_(std::move(out_dir)) {
    cfg_.validate();
    if (train_.size() == 0) throw ConfigError("training set has no frames");
    if (!(model_.spec() == cfg_.encoder)) throw ConfigError("model encoder differs from the config encoder");
    model_.l2_normalize = cfg_.l2_normalize;
    model_.precision = cfg_.precision;
    model_.mark_dirty();
    adam_.init(model_);
    log_.config = cfg_.to_json();
    const auto& a = cfg_.augment;
    augment_active_ = a.p_flip > 0 || a.p_affine > 0 || a.p_blur > 0 || a.p_color > 0 || a.p_jpeg > 0;
    for (std::size_t i = 0; i < train_.size(); ++i) (train_.frame_label(i) == 0 ? reals_ : fakes_).push_back(i);
    epoch_len_ = cfg_.class_balanced && !reals_.empty() && !fakes_.empty()
                     ? 2 * std::max(reals_.size(), fakes_.size())
                     : train_.size();
    steps_per_epoch_ = static_cast<std::int64_t>((epoch_len_ + static_cast<std::size_t>(cfg_.batch_size) - 1) /
                                                 static_cast<std::size_t>(cfg_.batch_size));
  }

  std::int64_t steps_per_epoch() const { return steps_per_epoch_; }
  std::int64_t total_steps() const { return steps_per_epoch_ * cfg_.total_epochs(); }
  std::int64_t step() const { return step_; }
  const TrainingLog& log() const { return log_; }
  const AdamState& adam() const { return adam_; }
  const TrainConfig& config() const { return cfg_; }

  double lr_for(std::int64_t step) const {
    return lr_at({step, steps_per_epoch_, cfg_.warmup_epochs, cfg_.decay_epochs}, cfg_.lr_min, cfg_.lr_max);
  }

  /// Frame indices of one epoch, in batch order.
  std::vector<std::size_t> epoch_order(int epoch) const {
    Rng rng(derive_seed(cfg_.seed, "epoch-order", static_cast<std::uint64_t>(epoch)));
    if (epoch_len_ == train_.size()) {
      std::vector<std::size_t> order(train_.size());
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
      rng.shuffle(order);
      return order;
    }
    auto r = reals_, f = fakes_;
    rng.shuffle(r);
    rng.shuffle(f);
    std::vector<std::size_t> order;
    const std::size_t half = epoch_len_ / 2;
    for (std::size_t k = 0; k < half; ++k) {
      order.push_back(r[k % r.size()]);
      order.push_back(f[k % f.size()]);
    }
    return order;
  }

  /// One optimizer step at the current global step.
  StepRecord train_step() {
    const std::int64_t s = step_;
    const int epoch = static_cast<int>(s / steps_per_epoch_);
    if (epoch != cached_epoch_) {
      order_ = epoch_order(epoch);
      cached_epoch_ = epoch;
    }
    const std::size_t begin = static_cast<std::size_t>(s % steps_per_epoch_) * static_cast<std::size_t>(cfg_.batch_size);
    const std::size_t end = std::min(order_.size(), begin + static_cast<std::size_t>(cfg_.batch_size));
    const auto B = static_cast<Eigen::Index>(end - begin);
    const auto& spec = model_.spec();

    std::vector<int> labels(static_cast<std::size_t>(B));
    for (Eigen::Index b = 0; b < B; ++b) labels[static_cast<std::size_t>(b)] = train_.frame_label(order_[begin + static_cast<std::size_t>(b)]);

    const bool need_backward = model_.any_encoder_trainable();
    EncoderCache<float> cache;
    Mat<float> cls;
    if (!need_backward && !augment_active_) {
      const auto& all = frozen_cls(train_);
      cls.resize(B, all.cols());
      for (Eigen::Index b = 0; b < B; ++b) cls.row(b) = all.row(static_cast<Eigen::Index>(order_[begin + static_cast<std::size_t>(b)]));
    } else {
      Mat<float> px(B, spec.image_size * spec.image_size * 3);
      Rng aug(derive_seed(cfg_.seed, "augment", static_cast<std::uint64_t>(s)));
      const auto& base = train_.inputs(spec);
      for (Eigen::Index b = 0; b < B; ++b) {
        const std::size_t i = order_[begin + static_cast<std::size_t>(b)];
        if (augment_active_)
          data::to_model_input(data::augment(train_.frames[i], aug, cfg_.augment), spec, px.row(b).data());
        else
          px.row(b) = base.row(static_cast<Eigen::Index>(i));
      }
      cls = model_.encode(px, need_backward ? &cache : nullptr);
    }

    model_.zero_grad();
    const MatrixXd f = cls.cast<double>();
    const MatrixXd z = cfg_.l2_normalize ? normalize_rows(f) : f;
    if (!z.allFinite()) abort_non_finite(partial_record(s, epoch, B), z);
    std::optional<ExtendedBatch> ext;
    const std::int64_t ratio = cfg_.effective_extended_batch() / cfg_.batch_size;
    if (cfg_.slerp_extension && ratio > 1) {
      Rng srng(derive_seed(cfg_.seed, "slerp", static_cast<std::uint64_t>(s)));
      ext = extend_batch_slerp(FeatureBatch(z, labels), B * ratio, srng);
    }
    const MatrixXd& Z = ext ? ext->features : z;
    const std::vector<int>& Y = ext ? ext->labels : labels;

    StepRecord rec;
    rec.step = s;
    rec.epoch = epoch;
    rec.batch = static_cast<int>(B);
    rec.extended = static_cast<int>(Z.rows());
    rec.loss.total = std::numeric_limits<double>::quiet_NaN();
    const MatrixXd logits = head_logits(model_, Z);
    if (!logits.allFinite()) abort_non_finite(rec, Z);
    MatrixXd d_logits;
    MatrixXd dZ = MatrixXd::Zero(Z.rows(), Z.cols());
    const auto& w = cfg_.loss_weights;
    const bool aux = (w.alpha > 0 || w.beta > 0) && Z.rows() >= 2;
    if (!aux) {
      rec.loss.cross_entropy = cross_entropy(logits, Y, &d_logits);
      rec.loss.total = rec.loss.cross_entropy;
    } else {
      const FeatureBatch fb(Z, Y);
      if (count_positive_pairs(Y) > 0) {
        LossGradients g;
        rec.loss = combined_loss(logits, fb, w, &g);
        d_logits = std::move(g.d_logits);
        dZ = std::move(g.d_features);
      } else {
        rec.align_skipped = true;
        MatrixXd gu;
        rec.loss.cross_entropy = cross_entropy(logits, Y, &d_logits);
        rec.loss.uniform = uniformity_loss(fb, &gu);
        rec.loss.total = rec.loss.cross_entropy + w.beta * rec.loss.uniform;
        rec.loss.pair_counts.all_pairs = Z.rows() * (Z.rows() - 1) / 2;
        dZ = w.beta * gu;
      }
    }
    dZ += head_backward(model_, Z, d_logits);
    if (need_backward) {
      const MatrixXd dz = ext ? extend_batch_backward(*ext, z, dZ) : dZ;
      const MatrixXd df = cfg_.l2_normalize ? normalize_rows_backward(f, z, dz) : dz;
      model_.encode_backward(cache, df.cast<float>());
    }

    double sq = 0.0;
    for (const auto& p : model_.params())
      if (p.info.trainable) sq += p.grad.template cast<double>().squaredNorm();
    rec.grad_norm = std::sqrt(sq);
    rec.lr = lr_for(s);
    if (!std::isfinite(rec.loss.total) || !std::isfinite(rec.grad_norm)) abort_non_finite(rec, Z);
    adam_step(model_, adam_, rec.lr, {cfg_.adam_beta1, cfg_.adam_beta2, cfg_.adam_eps, cfg_.weight_decay});
    frozen_cache_valid_ = frozen_cache_valid_ && !need_backward;
    ++step_;
    log_.steps.push_back(rec);
    return rec;
  }

  /// Validation (and optionally training) AUROC after an epoch, best-model
  /// bookkeeping and checkpoints.
  EpochRecord finish_epoch(int epoch) {
    EpochRecord r;
    r.epoch = epoch;
    r.step = step_;
    if (val_) r.val_auroc = video_auroc(collect_videos(*val_, frame_probs(*val_)));
    if (cfg_.eval_train_auroc) r.train_auroc = video_auroc(collect_videos(train_, frame_probs(train_)));
    r.wall_time_s = epoch_watch_.seconds();
    epoch_watch_ = Stopwatch();
    const bool better = log_.best_epoch < 0 || (r.val_auroc && *r.val_auroc > log_.best_val_auroc) || !val_;
    if (better) {
      log_.best_epoch = epoch;
      log_.best_val_auroc = r.val_auroc.value_or(std::numeric_limits<double>::quiet_NaN());
      best_params_.clear();
      for (const auto& p : model_.params()) best_params_.push_back(p.value);
      if (!out_dir_.empty()) save_checkpoint(out_dir_ / "best.ckpt", model_, checkpoint_meta());
    }
    log_.epochs.push_back(r);
    if (!out_dir_.empty()) save_state(out_dir_ / "last.ckpt");
    return r;
  }

  /// Trains to the end of the schedule, then restores the best epoch's
  /// parameters and writes the log.
  const TrainingLog& run() {
    const auto antipodal_before = slerp_antipodal_counter().load();
    while (step_ < total_steps()) {
      train_step();
      if (step_ % steps_per_epoch_ == 0) finish_epoch(static_cast<int>(step_ / steps_per_epoch_) - 1);
    }
    log_.antipodal_fallbacks += slerp_antipodal_counter().load() - antipodal_before;
    restore_best();
    if (!out_dir_.empty()) write_file_bytes(out_dir_ / "training_log.jsonl", serialize(log_));
    return log_;
  }

  void restore_best() {
    if (best_params_.empty()) return;
    for (std::size_t k = 0; k < best_params_.size(); ++k) model_.params()[k].value = best_params_[k];
    model_.mark_dirty();
    frozen_cache_valid_ = false;
  }

  /// Extra fields stored in every checkpoint's metadata.
  Json extra_meta = Json::object();

  Json checkpoint_meta() const {
    Json j = extra_meta;
    j["config"] = cfg_.to_json();
    j["step"] = step_;
    j["steps_per_epoch"] = steps_per_epoch_;
    j["best_epoch"] = log_.best_epoch;
    j["best_val_auroc"] = std::isnan(log_.best_val_auroc) ? Json(nullptr) : Json(log_.best_val_auroc);
    Json epochs = Json::array();
    for (const auto& e : log_.epochs) epochs.push_back(to_json(e));
    j["epochs"] = epochs;
    return j;
  }

  /// Full training state: parameters, Adam moments, step and best-epoch
  /// bookkeeping. Per-step randomness is derived from (seed, step), so no
  /// generator state is needed to resume.
  void save_state(const std::filesystem::path& path) const { save_checkpoint(path, model_, checkpoint_meta(), &adam_); }

  /// Resumes from a save_state checkpoint. Best-epoch parameters are taken
  /// from `best` when given (the run's best.ckpt).
  void load_state(const Checkpoint& ck, const Checkpoint* best = nullptr) {
    if (!(ck.model.spec() == model_.spec()) || !(ck.model.policy() == model_.policy()))
      throw CorruptCheckpoint("checkpoint model differs from the trainer's model");
    if (!ck.adam) throw CorruptCheckpoint("checkpoint has no optimizer state");
    for (std::size_t k = 0; k < model_.params().size(); ++k) model_.params()[k].value = ck.model.params()[k].value;
    model_.mark_dirty();
    frozen_cache_valid_ = false;
    adam_ = *ck.adam;
    step_ = ck.meta.at("step").get<std::int64_t>();
    log_.best_epoch = ck.meta.value("best_epoch", -1);
    log_.best_val_auroc = ck.meta.at("best_val_auroc").is_null() ? std::numeric_limits<double>::quiet_NaN()
                                                                  : ck.meta["best_val_auroc"].get<double>();
    log_.epochs.clear();
    for (const auto& e : ck.meta.value("epochs", Json::array())) log_.epochs.push_back(epoch_from_json(e));
    best_params_.clear();
    if (best)
      for (const auto& p : best->model.params()) best_params_.push_back(p.value);
  }

 private:
  /// Class-token outputs of a frozen encoder, computed once per store.
  const Mat<float>& frozen_cls(const data::FrameStore& store) {
    if (!frozen_cache_valid_) {
      frozen_.clear();
      frozen_cache_valid_ = true;
    }
    auto it = frozen_.find(&store);
    if (it != frozen_.end()) return it->second;
    const auto& x = store.inputs(model_.spec());
    Mat<float> out(x.rows(), model_.spec().width);
    for (Eigen::Index r = 0; r < x.rows(); r += cfg_.eval_batch_size) {
      const Eigen::Index n = std::min<Eigen::Index>(cfg_.eval_batch_size, x.rows() - r);
      out.middleRows(r, n) = model_.encode(Mat<float>(x.middleRows(r, n)));
    }
    return frozen_.emplace(&store, std::move(out)).first->second;
  }

  std::vector<double> frame_probs(const data::FrameStore& store) {
    if (model_.any_encoder_trainable()) return score_frames(model_, store, cfg_.eval_batch_size);
    const MatrixXd logits = head_logits(model_, feature_path(model_, frozen_cls(store)));
    return fake_probabilities(logits);
  }

  StepRecord partial_record(std::int64_t s, int epoch, Eigen::Index B) const {
    StepRecord r;
    r.step = s;
    r.epoch = epoch;
    r.batch = static_cast<int>(B);
    r.loss.total = std::numeric_limits<double>::quiet_NaN();
    return r;
  }

  [[noreturn]] void abort_non_finite(const StepRecord& rec, const MatrixXd& Z) {
    if (!out_dir_.empty()) {
      Json dump = to_json(rec);
      dump["type"] = "non_finite_dump";
      dump["features_finite"] = Z.allFinite();
      Json norms = Json::array();
      for (const auto& p : model_.params())
        if (p.info.trainable) norms.push_back({p.info.name, p.value.template cast<double>().norm(), p.grad.template cast<double>().norm()});
      dump["parameters"] = norms;
      write_file_bytes(out_dir_ / ("non_finite_step_" + std::to_string(rec.step) + ".json"), dump.dump(2));
      write_file_bytes(out_dir_ / "training_log.jsonl", serialize(log_));
    }
    throw NonFiniteLoss("non-finite loss or gradient at step " + std::to_string(rec.step));
  }

  FloatModel& model_;
  const data::FrameStore& train_;
  const data::FrameStore* val_;
  TrainConfig cfg_;
  std::filesystem::path out_dir_;
  AdamState adam_;
  TrainingLog log_;
  std::int64_t step_ = 0;
  std::size_t epoch_len_ = 0;
  std::int64_t steps_per_epoch_ = 1;
  std::vector<std::size_t> reals_, fakes_;
  std::vector<std::size_t> order_;
  int cached_epoch_ = -1;
  bool augment_active_ = false;
  std::vector<Mat<float>> best_params_;
  std::map<const data::FrameStore*, Mat<float>> frozen_;
  bool frozen_cache_valid_ = false;
  Stopwatch epoch_watch_;
};

}  // namespace lntune
