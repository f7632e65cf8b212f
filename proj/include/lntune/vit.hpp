#pragma once

// Pre-LN vision transformer with a class token, written out with explicit
// forward/backward passes. Templated on the scalar type: training runs in
// float, gradient checks instantiate double.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <cstring>
#include <map>
#include <numbers>
#include <string>
#include <unordered_map>
#include <vector>

#include "lntune/encoder_spec.hpp"
#include "lntune/errors.hpp"
#include "lntune/rng.hpp"

namespace lntune {

template <class Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class Scalar>
using ColVec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Rounds to the nearest bfloat16 value (ties to even), kept in float storage.
inline float round_to_bf16(float x) {
  if (!std::isfinite(x)) return x;
  std::uint32_t bits;
  std::memcpy(&bits, &x, sizeof bits);
  const std::uint32_t lsb = (bits >> 16) & 1u;
  bits += 0x7fffu + lsb;
  bits &= 0xffff0000u;
  float out;
  std::memcpy(&out, &bits, sizeof out);
  return out;
}

template <class Scalar>
struct Parameter {
  ParamInfo info;
  Mat<Scalar> value;
  Mat<Scalar> grad;
};

namespace detail {

struct LinearSlots {
  int weight = -1, bias = -1, down = -1, up = -1;
};
struct LnSlots {
  int scale = -1, shift = -1;
};
struct BlockSlots {
  LnSlots ln1, ln2;
  LinearSlots q, k, v, out, fc1, fc2;
};

template <class Scalar>
struct LnCache {
  Mat<Scalar> xhat;
  ColVec<Scalar> rstd;
};

template <class Scalar>
struct BlockCache {
  LnCache<Scalar> ln1, ln2;
  Mat<Scalar> h1, q, k, v, probs, attn, h2, u, act;
  Mat<Scalar> q_down, k_down, v_down, out_down, fc1_down, fc2_down;
};

}  // namespace detail

template <class Scalar>
struct EncoderCache {
  Eigen::Index batch = 0;
  Mat<Scalar> patches;
  detail::LnCache<Scalar> ln_pre;
  std::vector<detail::BlockCache<Scalar>> blocks;
  detail::LnCache<Scalar> ln_post;
};

/// Encoder + linear head. Owns all parameters and their gradient buffers.
template <class Scalar>
class Model {
 public:
  using MatS = Mat<Scalar>;

  Model(const EncoderSpec& spec, const ParamPolicy& policy) : spec_(spec), policy_(policy) {
    for (auto& info : parameter_layout(spec, policy)) {
      Parameter<Scalar> p;
      p.value = MatS::Zero(info.rows, info.cols);
      p.grad = MatS::Zero(info.rows, info.cols);
      p.info = std::move(info);
      index_[p.info.name] = static_cast<int>(params_.size());
      params_.push_back(std::move(p));
    }
    bind_slots();
  }

  const EncoderSpec& spec() const { return spec_; }
  const ParamPolicy& policy() const { return policy_; }

  std::vector<Parameter<Scalar>>& params() { return params_; }
  const std::vector<Parameter<Scalar>>& params() const { return params_; }

  bool has_param(const std::string& name) const { return index_.count(name) != 0; }
  Parameter<Scalar>& param(const std::string& name) { return params_.at(slot(name)); }
  const Parameter<Scalar>& param(const std::string& name) const { return params_.at(slot(name)); }

  /// Whether features are projected onto the unit sphere before the head.
  bool l2_normalize = true;
  Precision precision = Precision::Full;

  std::map<std::string, bool> trainable_mask() const {
    std::map<std::string, bool> m;
    for (const auto& p : params_) m[p.info.name] = p.info.trainable;
    return m;
  }

  ParamCounts counts() const {
    std::vector<ParamInfo> infos;
    infos.reserve(params_.size());
    for (const auto& p : params_) infos.push_back(p.info);
    return count_parameters(infos);
  }

  bool any_encoder_trainable() const {
    for (const auto& p : params_)
      if (p.info.trainable && !is_head(p.info.role)) return true;
    return false;
  }

  void zero_grad() {
    for (auto& p : params_)
      if (p.info.trainable) p.grad.setZero();
  }

  /// Must be called after parameter values change in reduced precision.
  void mark_dirty() { reduced_valid_ = false; }

  /// Deterministic initialization. Each parameter draws from its own stream
  /// keyed by name, so a given seed yields the same backbone under every
  /// policy (adapters included or not).
  void initialize(std::uint64_t seed) {
    seed_ = seed;
    for (auto& p : params_) initialize_param(p, seed);
    mark_dirty();
  }

  std::uint64_t seed() const { return seed_; }
  void set_seed(std::uint64_t s) { seed_ = s; }

  static void initialize_param(Parameter<Scalar>& p, std::uint64_t seed) {
    Rng rng(derive_seed(seed, "init:" + p.info.name));
    auto& v = p.value;
    auto fill_normal = [&](double sd) {
      for (Eigen::Index i = 0; i < v.size(); ++i) v.data()[i] = static_cast<Scalar>(rng.normal(0.0, sd));
    };
    switch (p.info.role) {
      case ParamRole::Weight:
      case ParamRole::AdapterDown: fill_normal(1.0 / std::sqrt(static_cast<double>(p.info.rows))); break;
      case ParamRole::Embedding: fill_normal(0.02); break;
      case ParamRole::HeadWeight: fill_normal(0.01); break;
      case ParamRole::LnScale: v.setOnes(); break;
      case ParamRole::Bias:
      case ParamRole::LnShift:
      case ParamRole::AdapterUp:
      case ParamRole::HeadBias: v.setZero(); break;
    }
  }

  /// pixels: B x (S*S*3), HWC order, already normalized.
  /// Returns the class-token state after the final layer norm (B x D).
  MatS encode(const MatS& pixels, EncoderCache<Scalar>* cache = nullptr) const {
    const auto& s = spec_;
    const Eigen::Index B = pixels.rows();
    const int S = s.image_size, P = s.patch_size, G = s.grid(), N = s.num_patches(), T = s.num_tokens();
    const int D = s.width;
    if (pixels.cols() != static_cast<Eigen::Index>(S) * S * 3)
      throw ShapeMismatch("encode: expected " + std::to_string(S) + "x" + std::to_string(S) + "x3 inputs");
    refresh_reduced();
    EncoderCache<Scalar> local;
    EncoderCache<Scalar>& c = cache ? *cache : local;
    c.batch = B;
    c.blocks.resize(static_cast<std::size_t>(s.depth));

    // patchify: row (b*N + n), column (py*P + px)*3 + ch
    c.patches.resize(B * N, s.patch_dim());
    for (Eigen::Index b = 0; b < B; ++b)
      for (int gy = 0; gy < G; ++gy)
        for (int gx = 0; gx < G; ++gx) {
          Scalar* dst = c.patches.row(b * N + gy * G + gx).data();
          for (int py = 0; py < P; ++py) {
            const Scalar* src = pixels.row(b).data() + ((gy * P + py) * S + gx * P) * 3;
            std::memcpy(dst + py * P * 3, src, sizeof(Scalar) * P * 3);
          }
        }
    MatS emb = per_sample_product(c.patches, w(patch_w_), N);
    if (patch_b_ >= 0) emb.rowwise() += w(patch_b_).row(0);

    MatS x(B * T, D);
    const auto& pos = w(pos_);
    for (Eigen::Index b = 0; b < B; ++b) {
      x.row(b * T) = w(cls_).row(0) + pos.row(0);
      x.block(b * T + 1, 0, N, D) = emb.block(b * N, 0, N, D) + pos.bottomRows(N);
    }
    if (ln_pre_.scale >= 0) x = ln_forward(x, ln_pre_, c.ln_pre);

    for (int i = 0; i < s.depth; ++i) block_forward(x, blocks_[i], c.blocks[i], B);

    MatS cls(B, D);
    for (Eigen::Index b = 0; b < B; ++b) cls.row(b) = x.row(b * T);
    return ln_forward(cls, ln_post_, c.ln_post);
  }

  /// Accumulates parameter gradients given dL/d(encode output).
  void encode_backward(const EncoderCache<Scalar>& c, const MatS& d_out) {
    const auto& s = spec_;
    const Eigen::Index B = c.batch;
    const int G = s.grid(), N = s.num_patches(), T = s.num_tokens(), D = s.width;
    (void)G;
    MatS d_cls = ln_backward(d_out, ln_post_, c.ln_post);
    MatS dx = MatS::Zero(B * T, D);
    for (Eigen::Index b = 0; b < B; ++b) dx.row(b * T) = d_cls.row(b);
    for (int i = s.depth - 1; i >= 0; --i) block_backward(dx, blocks_[i], c.blocks[i], B);
    if (ln_pre_.scale >= 0) dx = ln_backward(dx, ln_pre_, c.ln_pre);

    if (trainable(pos_)) {
      auto& g = params_[pos_].grad;
      for (Eigen::Index b = 0; b < B; ++b) g += dx.block(b * T, 0, T, D);
    }
    if (trainable(cls_)) {
      auto& g = params_[cls_].grad;
      for (Eigen::Index b = 0; b < B; ++b) g.row(0) += dx.row(b * T);
    }
    const bool need_w = trainable(patch_w_), need_b = patch_b_ >= 0 && trainable(patch_b_);
    if (need_w || need_b) {
      MatS d_emb(B * N, D);
      for (Eigen::Index b = 0; b < B; ++b) d_emb.block(b * N, 0, N, D) = dx.block(b * T + 1, 0, N, D);
      if (need_w) params_[patch_w_].grad.noalias() += c.patches.transpose() * d_emb;
      if (need_b) params_[patch_b_].grad.row(0) += d_emb.colwise().sum();
    }
  }

  int slot(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw ConfigError("unknown parameter '" + name + "'");
    return it->second;
  }

 private:
  // Weight as seen by the forward pass: bf16-rounded in reduced precision.
  const MatS& w(int i) const { return precision == Precision::Reduced ? reduced_[i] : params_[i].value; }
  bool trainable(int i) const { return i >= 0 && params_[i].info.trainable; }

  void refresh_reduced() const {
    if (precision != Precision::Reduced || reduced_valid_) return;
    reduced_.resize(params_.size());
    for (std::size_t i = 0; i < params_.size(); ++i) {
      reduced_[i] = params_[i].value;
      if (is_head(params_[i].info.role)) continue;
      for (Eigen::Index k = 0; k < reduced_[i].size(); ++k)
        reduced_[i].data()[k] = static_cast<Scalar>(round_to_bf16(static_cast<float>(reduced_[i].data()[k])));
    }
    reduced_valid_ = true;
  }

  void bind_slots() {
    auto opt = [&](const std::string& n) { return has_param(n) ? slot(n) : -1; };
    auto lin = [&](const std::string& p) {
      return detail::LinearSlots{slot(p + ".weight"), slot(p + ".bias"), opt(p + ".lora_down"), opt(p + ".lora_up")};
    };
    auto ln = [&](const std::string& p) { return detail::LnSlots{slot(p + ".weight"), slot(p + ".bias")}; };
    patch_w_ = slot("embed.patch.weight");
    patch_b_ = opt("embed.patch.bias");
    cls_ = slot("embed.cls");
    pos_ = slot("embed.pos");
    if (spec_.has_ln_pre()) ln_pre_ = ln("ln_pre");
    for (int i = 0; i < spec_.depth; ++i) {
      const std::string b = "blocks." + std::to_string(i);
      detail::BlockSlots bs;
      bs.ln1 = ln(b + ".ln1");
      bs.ln2 = ln(b + ".ln2");
      bs.q = lin(b + ".attn.q");
      bs.k = lin(b + ".attn.k");
      bs.v = lin(b + ".attn.v");
      bs.out = lin(b + ".attn.out");
      bs.fc1 = lin(b + ".mlp.fc1");
      bs.fc2 = lin(b + ".mlp.fc2");
      blocks_.push_back(bs);
    }
    ln_post_ = ln("ln_post");
  }

  MatS ln_forward(const MatS& x, const detail::LnSlots& sl, detail::LnCache<Scalar>& c) const {
    const Eigen::Index n = x.rows(), d = x.cols();
    const Scalar eps = static_cast<Scalar>(spec_.ln_eps());
    c.xhat.resize(n, d);
    c.rstd.resize(n);
    for (Eigen::Index r = 0; r < n; ++r) {
      const Scalar mean = x.row(r).mean();
      const auto centered = x.row(r).array() - mean;
      const Scalar var = centered.square().mean();
      const Scalar rstd = Scalar(1) / std::sqrt(var + eps);
      c.rstd[r] = rstd;
      c.xhat.row(r) = centered * rstd;
    }
    MatS y = c.xhat.array().rowwise() * w(sl.scale).row(0).array();
    y.rowwise() += w(sl.shift).row(0);
    return y;
  }

  MatS ln_backward(const MatS& dy, const detail::LnSlots& sl, const detail::LnCache<Scalar>& c) {
    if (trainable(sl.scale)) params_[sl.scale].grad.row(0) += (dy.array() * c.xhat.array()).colwise().sum().matrix();
    if (trainable(sl.shift)) params_[sl.shift].grad.row(0) += dy.colwise().sum();
    const MatS dxhat = dy.array().rowwise() * w(sl.scale).row(0).array();
    MatS dx(dy.rows(), dy.cols());
    for (Eigen::Index r = 0; r < dy.rows(); ++r) {
      const Scalar m1 = dxhat.row(r).mean();
      const Scalar m2 = (dxhat.row(r).array() * c.xhat.row(r).array()).mean();
      dx.row(r) = c.rstd[r] * (dxhat.row(r).array() - m1 - c.xhat.row(r).array() * m2);
    }
    return dx;
  }

  // Vectorized GEMM kernels can round a row differently depending on its
  // position in the panel; multiplying each sample's rows separately keeps a
  // sample's output independent of the rest of the batch.
  static MatS per_sample_product(const MatS& x, const MatS& weight, Eigen::Index rows_per_sample) {
    MatS y(x.rows(), weight.cols());
    for (Eigen::Index r = 0; r < x.rows(); r += rows_per_sample)
      y.middleRows(r, rows_per_sample) = MatS(x.middleRows(r, rows_per_sample)) * weight;
    return y;
  }

  MatS linear_forward(const MatS& x, const detail::LinearSlots& sl, MatS& down) const {
    const Eigen::Index T = spec_.num_tokens();
    MatS y = per_sample_product(x, w(sl.weight), T);
    y.rowwise() += w(sl.bias).row(0);
    if (sl.down >= 0) {
      down = per_sample_product(x, w(sl.down), T);
      y.noalias() += per_sample_product(down, w(sl.up), T);
    }
    return y;
  }

  MatS linear_backward(const MatS& x, const MatS& dy, const detail::LinearSlots& sl, const MatS& down) {
    if (trainable(sl.weight)) params_[sl.weight].grad.noalias() += x.transpose() * dy;
    if (trainable(sl.bias)) params_[sl.bias].grad.row(0) += dy.colwise().sum();
    MatS dx = dy * w(sl.weight).transpose();
    if (sl.down >= 0) {
      const MatS d_down = dy * w(sl.up).transpose();
      if (trainable(sl.up)) params_[sl.up].grad.noalias() += down.transpose() * dy;
      if (trainable(sl.down)) params_[sl.down].grad.noalias() += x.transpose() * d_down;
      dx.noalias() += d_down * w(sl.down).transpose();
    }
    return dx;
  }

  Scalar act(Scalar u) const {
    if (spec_.activation() == Activation::QuickGelu) return u / (Scalar(1) + std::exp(Scalar(-1.702) * u));
    return Scalar(0.5) * u * (Scalar(1) + std::erf(u * Scalar((1.0 / std::numbers::sqrt2))));
  }

  Scalar act_grad(Scalar u) const {
    if (spec_.activation() == Activation::QuickGelu) {
      const Scalar sg = Scalar(1) / (Scalar(1) + std::exp(Scalar(-1.702) * u));
      return sg + Scalar(1.702) * u * sg * (Scalar(1) - sg);
    }
    const Scalar cdf = Scalar(0.5) * (Scalar(1) + std::erf(u * Scalar((1.0 / std::numbers::sqrt2))));
    const Scalar pdf = std::exp(Scalar(-0.5) * u * u) * Scalar(std::numbers::inv_sqrtpi * (1.0 / std::numbers::sqrt2));
    return cdf + u * pdf;
  }

  void block_forward(MatS& x, const detail::BlockSlots& sl, detail::BlockCache<Scalar>& c, Eigen::Index B) const {
    const int T = spec_.num_tokens(), H = spec_.heads, dh = spec_.head_dim();
    const Scalar scale = Scalar(1) / std::sqrt(static_cast<Scalar>(dh));
    c.h1 = ln_forward(x, sl.ln1, c.ln1);
    c.q = linear_forward(c.h1, sl.q, c.q_down);
    c.k = linear_forward(c.h1, sl.k, c.k_down);
    c.v = linear_forward(c.h1, sl.v, c.v_down);
    c.probs.resize(B * H * T, T);
    c.attn.resize(B * T, spec_.width);
    for (Eigen::Index b = 0; b < B; ++b)
      for (int h = 0; h < H; ++h) {
        auto qb = c.q.block(b * T, h * dh, T, dh);
        auto kb = c.k.block(b * T, h * dh, T, dh);
        auto vb = c.v.block(b * T, h * dh, T, dh);
        auto pb = c.probs.block((b * H + h) * T, 0, T, T);
        // Aligned scratch keeps the row reductions identical for every sample.
        MatS p = (MatS(qb) * MatS(kb).transpose()) * scale;
        for (int r = 0; r < T; ++r) {
          const Scalar m = p.row(r).maxCoeff();
          p.row(r) = (p.row(r).array() - m).exp();
          p.row(r) /= p.row(r).sum();
        }
        pb = p;
        c.attn.block(b * T, h * dh, T, dh).noalias() = p * MatS(vb);
      }
    x += linear_forward(c.attn, sl.out, c.out_down);
    c.h2 = ln_forward(x, sl.ln2, c.ln2);
    c.u = linear_forward(c.h2, sl.fc1, c.fc1_down);
    c.act = c.u.unaryExpr([this](Scalar u) { return act(u); });
    x += linear_forward(c.act, sl.fc2, c.fc2_down);
  }

  void block_backward(MatS& dx, const detail::BlockSlots& sl, const detail::BlockCache<Scalar>& c, Eigen::Index B) {
    const int T = spec_.num_tokens(), H = spec_.heads, dh = spec_.head_dim();
    const Scalar scale = Scalar(1) / std::sqrt(static_cast<Scalar>(dh));
    // MLP branch
    MatS d_act = linear_backward(c.act, dx, sl.fc2, c.fc2_down);
    MatS d_u = d_act.cwiseProduct(c.u.unaryExpr([this](Scalar u) { return act_grad(u); }));
    MatS d_h2 = linear_backward(c.h2, d_u, sl.fc1, c.fc1_down);
    dx += ln_backward(d_h2, sl.ln2, c.ln2);
    // attention branch
    MatS d_attn = linear_backward(c.attn, dx, sl.out, c.out_down);
    MatS dq(B * T, spec_.width), dk(B * T, spec_.width), dv(B * T, spec_.width);
    MatS dp(T, T);
    for (Eigen::Index b = 0; b < B; ++b)
      for (int h = 0; h < H; ++h) {
        auto qb = c.q.block(b * T, h * dh, T, dh);
        auto kb = c.k.block(b * T, h * dh, T, dh);
        auto vb = c.v.block(b * T, h * dh, T, dh);
        auto pb = c.probs.block((b * H + h) * T, 0, T, T);
        auto dob = d_attn.block(b * T, h * dh, T, dh);
        dv.block(b * T, h * dh, T, dh).noalias() = pb.transpose() * dob;
        dp.noalias() = dob * vb.transpose();
        // softmax backward: ds = p * (dp - rowsum(dp * p))
        for (int r = 0; r < T; ++r) {
          const Scalar dot = (dp.row(r).array() * pb.row(r).array()).sum();
          dp.row(r) = pb.row(r).array() * (dp.row(r).array() - dot);
        }
        dq.block(b * T, h * dh, T, dh).noalias() = (dp * kb) * scale;
        dk.block(b * T, h * dh, T, dh).noalias() = (dp.transpose() * qb) * scale;
      }
    MatS d_h1 = linear_backward(c.h1, dq, sl.q, c.q_down);
    d_h1 += linear_backward(c.h1, dk, sl.k, c.k_down);
    d_h1 += linear_backward(c.h1, dv, sl.v, c.v_down);
    dx += ln_backward(d_h1, sl.ln1, c.ln1);
  }

  EncoderSpec spec_;
  ParamPolicy policy_;
  std::vector<Parameter<Scalar>> params_;
  std::unordered_map<std::string, int> index_;

  int patch_w_ = -1, patch_b_ = -1, cls_ = -1, pos_ = -1;
  detail::LnSlots ln_pre_, ln_post_;
  std::vector<detail::BlockSlots> blocks_;

  std::uint64_t seed_ = 0;
  mutable std::vector<MatS> reduced_;
  mutable bool reduced_valid_ = false;
};

}  // namespace lntune
