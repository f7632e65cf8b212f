#pragma once

// Model-level surface: construction under a parameter policy, the
// L2-normalized feature path and linear head, low-rank adapters, pretrained
// weight loading and the parameter audit file.

#include <Eigen/Dense>

#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

#include "lntune/encoder_spec.hpp"
#include "lntune/errors.hpp"
#include "lntune/hypersphere.hpp"
#include "lntune/safetensors.hpp"
#include "lntune/vit.hpp"

namespace lntune {

using FloatModel = Model<float>;

/// Per-image output: the (normalized) feature and its (real, fake) logits.
struct ModelOutputs {
  MatrixXd features;  // B x D, unit rows when the model normalizes
  MatrixXd logits;    // B x 2, column 1 = fake
};

/// Row-wise projection onto the unit sphere.
inline MatrixXd normalize_rows(const MatrixXd& f, double eps_norm = kEpsNorm) {
  MatrixXd z(f.rows(), f.cols());
  for (Index r = 0; r < f.rows(); ++r) {
    const double n = f.row(r).norm();
    if (!(n > eps_norm)) throw ZeroVector("normalize_rows: degenerate encoder output in row " + std::to_string(r));
    z.row(r) = f.row(r) / n;
  }
  return z;
}

/// Backward of normalize_rows: df = (dz - z (z . dz)) / ||f||.
inline MatrixXd normalize_rows_backward(const MatrixXd& f, const MatrixXd& z, const MatrixXd& dz) {
  MatrixXd df(f.rows(), f.cols());
  for (Index r = 0; r < f.rows(); ++r) {
    const double n = f.row(r).norm();
    df.row(r) = (dz.row(r) - z.row(r) * z.row(r).dot(dz.row(r))) / n;
  }
  return df;
}

template <class Scalar>
MatrixXd head_weight(const Model<Scalar>& m) {
  return m.param("head.weight").value.template cast<double>();
}

template <class Scalar>
MatrixXd head_logits(const Model<Scalar>& m, const MatrixXd& features) {
  MatrixXd logits = features * head_weight(m);
  logits.rowwise() += m.param("head.bias").value.template cast<double>().row(0);
  return logits;
}

/// Accumulates head gradients and returns dL/dfeatures from the logits path.
template <class Scalar>
MatrixXd head_backward(Model<Scalar>& m, const MatrixXd& features, const MatrixXd& d_logits) {
  auto& w = m.param("head.weight");
  auto& b = m.param("head.bias");
  w.grad += (features.transpose() * d_logits).template cast<Scalar>();
  b.grad.row(0) += d_logits.colwise().sum().template cast<Scalar>();
  return d_logits * head_weight(m).transpose();
}

template <class Scalar>
MatrixXd feature_path(const Model<Scalar>& m, const Mat<Scalar>& cls) {
  MatrixXd f = cls.template cast<double>();
  return m.l2_normalize ? normalize_rows(f) : f;
}

/// Full inference pass.
template <class Scalar>
ModelOutputs forward(const Model<Scalar>& m, const Mat<Scalar>& pixels) {
  ModelOutputs out;
  out.features = feature_path(m, m.encode(pixels));
  out.logits = head_logits(m, out.features);
  return out;
}

/// Fake-class softmax probability per row.
inline std::vector<double> fake_probabilities(const MatrixXd& logits) {
  std::vector<double> p(static_cast<std::size_t>(logits.rows()));
  for (Index r = 0; r < logits.rows(); ++r) {
    const double d = logits(r, 0) - logits(r, 1);
    p[static_cast<std::size_t>(r)] = 1.0 / (1.0 + std::exp(d));
  }
  return p;
}

/// Copies a model into the layout of another policy. Parameters present in
/// both layouts keep their values; new ones are initialized from the
/// model's seed.
template <class Scalar>
Model<Scalar> rebind_policy(const Model<Scalar>& src, const ParamPolicy& policy) {
  Model<Scalar> out(src.spec(), policy);
  for (auto& p : out.params()) {
    if (src.has_param(p.info.name))
      p.value = src.param(p.info.name).value;
    else
      Model<Scalar>::initialize_param(p, src.seed());
  }
  out.l2_normalize = src.l2_normalize;
  out.precision = src.precision;
  out.set_seed(src.seed());
  return out;
}

/// Adds rank-r adapters (down ~ N(0, 1/in), up = 0) to every attention and
/// MLP matrix; only adapters and head stay trainable.
template <class Scalar>
Model<Scalar> apply_low_rank(const Model<Scalar>& model, int rank) {
  if (rank < 1) throw UnsupportedPolicy("apply_low_rank: rank must be >= 1");
  if (model.policy().kind == PolicyKind::LowRank) throw UnsupportedPolicy("apply_low_rank: adapters already present");
  return rebind_policy(model, ParamPolicy::low_rank(rank));
}

template <class Scalar>
void load_pretrained(Model<Scalar>& model, const std::filesystem::path& path);

/// Builds a model under a policy. Pretrained backbones need a weights file.
inline FloatModel build_model(const EncoderSpec& spec, const ParamPolicy& policy, std::uint64_t seed,
                              const std::filesystem::path& weights = {}) {
  spec.validate();
  policy.validate();
  if (policy.kind == PolicyKind::LowRank) {
    auto base = build_model(spec, ParamPolicy::head_only(), seed, weights);
    return apply_low_rank(base, policy.rank);
  }
  FloatModel m(spec, policy);
  m.initialize(seed);
  if (spec.backbone == Backbone::PretrainedClipVision) {
    if (weights.empty()) throw WeightsUnavailable("pretrained_clip_vision requires a weights file");
    load_pretrained(m, weights);
  } else if (!weights.empty()) {
    load_pretrained(m, weights);
  }
  return m;
}

/// Maps Hugging Face CLIP vision names onto ours. Returns "" for tensors we
/// do not use (text tower, projection, ...).
inline std::string map_clip_name(const std::string& hf) {
  static const std::regex layer(R"(^(?:.*\.)?vision_model\.encoder\.layers\.(\d+)\.(.*)$)");
  std::smatch m;
  const auto pos = hf.find("vision_model.");
  if (pos == std::string::npos) return {};
  const std::string tail = hf.substr(pos + std::string("vision_model.").size());
  if (tail == "embeddings.class_embedding") return "embed.cls";
  if (tail == "embeddings.patch_embedding.weight") return "embed.patch.weight";
  if (tail == "embeddings.position_embedding.weight") return "embed.pos";
  if (tail == "pre_layrnorm.weight") return "ln_pre.weight";
  if (tail == "pre_layrnorm.bias") return "ln_pre.bias";
  if (tail == "post_layernorm.weight") return "ln_post.weight";
  if (tail == "post_layernorm.bias") return "ln_post.bias";
  if (std::regex_match(hf, m, layer)) {
    const std::string b = "blocks." + m[1].str() + ".";
    static const std::vector<std::pair<std::string, std::string>> table = {
        {"layer_norm1.", "ln1."},         {"layer_norm2.", "ln2."},         {"self_attn.q_proj.", "attn.q."},
        {"self_attn.k_proj.", "attn.k."}, {"self_attn.v_proj.", "attn.v."}, {"self_attn.out_proj.", "attn.out."},
        {"mlp.fc1.", "mlp.fc1."},         {"mlp.fc2.", "mlp.fc2."}};
    const std::string rest = m[2].str();
    for (const auto& [from, to] : table)
      if (rest.rfind(from, 0) == 0) return b + to + rest.substr(from.size());
  }
  return {};
}

/// Loads encoder weights from a safetensors file, either in our own naming or
/// in Hugging Face CLIPVisionModel naming. Every encoder parameter (adapters
/// excepted) must be present with a matching shape.
template <class Scalar>
void load_pretrained(Model<Scalar>& model, const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw WeightsUnavailable("weights file not found: " + path.string());
  std::unique_ptr<SafetensorsFile> file;
  try {
    file = std::make_unique<SafetensorsFile>(path);
  } catch (const std::exception& e) {
    throw WeightsUnavailable(std::string("cannot read weights: ") + e.what());
  }
  const auto& spec = model.spec();
  std::map<std::string, bool> loaded;
  for (const auto& [name, entry] : file->entries()) {
    std::string ours = model.has_param(name) ? name : map_clip_name(name);
    if (ours.empty() || !model.has_param(ours)) continue;
    const bool hf = ours != name;
    auto& p = model.param(ours);
    const auto data = file->read_f32(name);
    if (static_cast<std::int64_t>(data.size()) != p.info.size())
      throw WeightsUnavailable("shape mismatch for " + name + " -> " + ours);
    auto& v = p.value;
    if (!hf || p.info.role == ParamRole::LnScale || p.info.role == ParamRole::LnShift ||
        p.info.role == ParamRole::Bias || p.info.role == ParamRole::Embedding) {
      for (std::int64_t i = 0; i < p.info.size(); ++i) v.data()[i] = static_cast<Scalar>(data[static_cast<std::size_t>(i)]);
    } else if (ours == "embed.patch.weight") {
      // [out, 3, P, P] -> row (py*P + px)*3 + c, column out
      const int P = spec.patch_size, D = spec.width;
      for (int o = 0; o < D; ++o)
        for (int c = 0; c < 3; ++c)
          for (int py = 0; py < P; ++py)
            for (int px = 0; px < P; ++px)
              v((py * P + px) * 3 + c, o) =
                  static_cast<Scalar>(data[static_cast<std::size_t>(((o * 3 + c) * P + py) * P + px)]);
    } else {
      // torch Linear stores [out, in]; we store [in, out]
      const Eigen::Index in = p.info.rows, out = p.info.cols;
      for (Eigen::Index o = 0; o < out; ++o)
        for (Eigen::Index i = 0; i < in; ++i) v(i, o) = static_cast<Scalar>(data[static_cast<std::size_t>(o * in + i)]);
    }
    loaded[ours] = true;
  }
  for (const auto& p : model.params()) {
    const auto role = p.info.role;
    if (is_head(role) || role == ParamRole::AdapterDown || role == ParamRole::AdapterUp) continue;
    if (!loaded.count(p.info.name)) throw WeightsUnavailable("weights file lacks " + p.info.name);
  }
  model.mark_dirty();
}

/// Text audit: one line per parameter with name, shape, role and trainable flag.
template <class Scalar>
std::string parameter_audit(const Model<Scalar>& model) {
  std::ostringstream os;
  const auto c = model.counts();
  os << "# backbone " << to_string(model.spec().backbone) << " policy " << model.policy().label() << "\n";
  os << "# total " << c.total << " trainable " << c.trainable << " encoder_trainable " << c.encoder_trainable
     << " head " << c.head << "\n";
  for (const auto& p : model.params())
    os << p.info.name << "\t" << p.info.rows << "x" << p.info.cols << "\t" << (p.info.trainable ? "trainable" : "frozen")
       << "\n";
  return os.str();
}

template <class Scalar>
void write_parameter_audit(const Model<Scalar>& model, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write audit file " + path.string());
  out << parameter_audit(model);
}

}  // namespace lntune
