#pragma once

// Training objective: cross-entropy on logits plus alignment and uniformity
// on unit features. Batch estimators use every unordered pair x < y (no
// self-pairs); alignment restricts to same-class pairs.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "lntune/errors.hpp"
#include "lntune/hypersphere.hpp"

namespace lntune {

struct LossWeights {
  double alpha = 0.1;  // alignment
  double beta = 0.5;   // uniformity

  void validate() const {
    if (!(std::isfinite(alpha) && alpha >= 0.0) || !(std::isfinite(beta) && beta >= 0.0))
      throw ConfigError("LossWeights: alpha and beta must be finite and >= 0");
  }
};

struct PairCounts {
  std::int64_t positive_pairs = 0;
  std::int64_t all_pairs = 0;
};

struct LossBreakdown {
  double total = 0.0;
  double cross_entropy = 0.0;
  double align = 0.0;
  double uniform = 0.0;
  PairCounts pair_counts;
};

struct LossGradients {
  MatrixXd d_logits;    // B x 2
  MatrixXd d_features;  // B x D
};

/// Mean negative log-softmax of the true class. Optionally writes dL/dlogits.
inline double cross_entropy(const MatrixXd& logits, std::span<const int> labels, MatrixXd* d_logits = nullptr) {
  if (logits.cols() != 2 || logits.rows() != static_cast<Index>(labels.size()))
    throw ShapeMismatch("cross_entropy: expected B x 2 logits matching labels");
  if (!logits.allFinite()) throw InvalidFeature("cross_entropy: non-finite logits");
  const Index n = logits.rows();
  if (d_logits) d_logits->setZero(n, 2);
  double sum = 0.0;
  for (Index i = 0; i < n; ++i) {
    const int y = labels[static_cast<std::size_t>(i)];
    if (y != 0 && y != 1) throw InvalidFeature("cross_entropy: label outside {0,1}");
    const double m = logits.row(i).maxCoeff();
    const double e0 = std::exp(logits(i, 0) - m), e1 = std::exp(logits(i, 1) - m);
    const double lse = m + std::log(e0 + e1);
    sum += lse - logits(i, y);
    if (d_logits) {
      const double inv = 1.0 / (e0 + e1);
      (*d_logits)(i, 0) = e0 * inv - (y == 0 ? 1.0 : 0.0);
      (*d_logits)(i, 1) = e1 * inv - (y == 1 ? 1.0 : 0.0);
    }
  }
  if (d_logits) *d_logits /= static_cast<double>(n);
  return sum / static_cast<double>(n);
}

inline std::int64_t count_positive_pairs(std::span<const int> labels) {
  std::int64_t n0 = 0, n1 = 0;
  for (int y : labels) (y == 0 ? n0 : n1)++;
  return n0 * (n0 - 1) / 2 + n1 * (n1 - 1) / 2;
}

/// Mean ||z_x - z_y||^2 over unordered same-class pairs.
inline double alignment_loss(const FeatureBatch& batch, MatrixXd* d_features = nullptr) {
  const auto& z = batch.features();
  const auto& y = batch.labels();
  const std::int64_t pairs = count_positive_pairs(y);
  if (pairs == 0) throw NoPositivePairs("alignment_loss: no two rows share a class");
  const MatrixXd d = pairwise_sq_dists(z);
  const Index n = z.rows();
  double sum = 0.0;
  for (Index x = 0; x < n; ++x)
    for (Index w = x + 1; w < n; ++w)
      if (y[x] == y[w]) sum += d(x, w);
  const double inv = 1.0 / static_cast<double>(pairs);
  if (d_features) {
    // d/dz_x sum_{pairs} ||z_x - z_w||^2 = 2 sum_{w same class} (z_x - z_w)
    d_features->setZero(n, z.cols());
    for (int cls = 0; cls < 2; ++cls) {
      VectorXd class_sum = VectorXd::Zero(z.cols());
      Index count = 0;
      for (Index x = 0; x < n; ++x)
        if (y[x] == cls) {
          class_sum += z.row(x).transpose();
          ++count;
        }
      for (Index x = 0; x < n; ++x)
        if (y[x] == cls)
          d_features->row(x) = (2.0 * inv) * (static_cast<double>(count) * z.row(x) - class_sum.transpose());
    }
  }
  return sum * inv;
}

/// log mean exp(-2 ||z_x - z_y||^2) over all unordered pairs, class-agnostic.
inline double uniformity_loss(const FeatureBatch& batch, MatrixXd* d_features = nullptr) {
  const auto& z = batch.features();
  const Index n = z.rows();
  if (n < 2) throw ConfigError("uniformity_loss: need at least two rows");
  const MatrixXd d = pairwise_sq_dists(z);
  double m = -std::numeric_limits<double>::infinity();
  for (Index x = 0; x < n; ++x)
    for (Index w = x + 1; w < n; ++w) m = std::max(m, -2.0 * d(x, w));
  MatrixXd k = MatrixXd::Zero(n, n);
  double s = 0.0;
  for (Index x = 0; x < n; ++x)
    for (Index w = x + 1; w < n; ++w) {
      const double e = std::exp(-2.0 * d(x, w) - m);
      k(x, w) = e;
      k(w, x) = e;
      s += e;
    }
  const double pairs = 0.5 * static_cast<double>(n) * static_cast<double>(n - 1);
  const double loss = m + std::log(s) - std::log(pairs);
  if (d_features) {
    // dL/dd_xw = -2 k_xw / s ; dd_xw/dz_x = 2 (z_x - z_w)
    const MatrixXd wts = k / s;
    const VectorXd row_sum = wts.rowwise().sum();
    *d_features = -4.0 * (row_sum.asDiagonal() * z - wts * z);
  }
  return loss;
}

/// total = CE + alpha * align + beta * uniform, with optional gradients.
inline LossBreakdown combined_loss(const MatrixXd& logits, const FeatureBatch& batch, const LossWeights& weights,
                                   LossGradients* grads = nullptr) {
  weights.validate();
  if (logits.rows() != batch.size()) throw ShapeMismatch("combined_loss: logits/batch size mismatch");
  LossBreakdown out;
  MatrixXd g_align, g_unif;
  out.cross_entropy = cross_entropy(logits, batch.labels(), grads ? &grads->d_logits : nullptr);
  out.align = alignment_loss(batch, grads ? &g_align : nullptr);
  out.uniform = uniformity_loss(batch, grads ? &g_unif : nullptr);
  out.total = out.cross_entropy + weights.alpha * out.align + weights.beta * out.uniform;
  out.pair_counts.positive_pairs = count_positive_pairs(batch.labels());
  out.pair_counts.all_pairs = batch.size() * (batch.size() - 1) / 2;
  if (grads) grads->d_features = weights.alpha * g_align + weights.beta * g_unif;
  return out;
}

}  // namespace lntune
