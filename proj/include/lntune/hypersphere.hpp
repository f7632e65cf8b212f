#pragma once

// Geometry on the unit hypersphere: projection, spherical interpolation and
// the pairwise squared distances consumed by the alignment/uniformity losses.
// Everything here runs in double regardless of the encoder precision.

#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "lntune/errors.hpp"

namespace lntune {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using RowMatrixXd = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline constexpr double kEpsNorm = 1e-12;
inline constexpr double kEpsAcos = 1e-7;
inline constexpr double kThetaMin = 1e-4;
inline constexpr double kUnitTolerance = 1e-5;

/// Number of slerp calls that hit the antipodal fallback since process start.
inline std::atomic<std::uint64_t>& slerp_antipodal_counter() {
  static std::atomic<std::uint64_t> counter{0};
  return counter;
}

/// A feature vector on the unit sphere. Construction always projects.
class UnitFeature {
 public:
  const VectorXd& values() const { return values_; }
  Index dim() const { return values_.size(); }
  double operator[](Index i) const { return values_[i]; }

  friend UnitFeature l2_normalize(const Eigen::Ref<const VectorXd>& v, double eps_norm);

 private:
  explicit UnitFeature(VectorXd v) : values_(std::move(v)) {}
  VectorXd values_;
};

/// Projects v onto the unit sphere. Throws ZeroVector when ||v|| <= eps_norm.
inline UnitFeature l2_normalize(const Eigen::Ref<const VectorXd>& v, double eps_norm = kEpsNorm) {
  if (!v.allFinite()) throw InvalidFeature("l2_normalize: non-finite input");
  const double n = v.norm();
  if (!(n > eps_norm)) throw ZeroVector("l2_normalize: norm " + std::to_string(n) + " <= eps");
  return UnitFeature(v / n);
}

struct SlerpOptions {
  double eps_acos = kEpsAcos;
  double theta_min = kThetaMin;
};

enum class SlerpRegime { Geodesic, Linear, Antipodal };

namespace detail {

struct SlerpPlan {
  SlerpRegime regime;
  double cos_raw;
  double theta;
};

inline SlerpPlan plan_slerp(const Eigen::Ref<const VectorXd>& a, const Eigen::Ref<const VectorXd>& b,
                            const SlerpOptions& opt) {
  const double c = a.dot(b);
  const double cc = std::clamp(c, -1.0 + opt.eps_acos, 1.0 - opt.eps_acos);
  const double theta = std::acos(cc);
  // The clamp alone bounds theta to [acos(1-eps), pi-acos(1-eps)], so an
  // active clamp also selects the fallback paths.
  if (c >= 1.0 - opt.eps_acos || theta < opt.theta_min) return {SlerpRegime::Linear, c, theta};
  if (c <= -1.0 + opt.eps_acos || theta > std::numbers::pi - opt.theta_min)
    return {SlerpRegime::Antipodal, c, theta};
  return {SlerpRegime::Geodesic, c, theta};
}

// Unit direction orthogonal to a, pointing towards b when that is defined.
inline VectorXd antipodal_direction(const Eigen::Ref<const VectorXd>& a,
                                    const Eigen::Ref<const VectorXd>& b, double c) {
  VectorXd p = b - c * a;
  double n = p.norm();
  if (n < 1e-12) {
    Index k = 0;
    a.cwiseAbs().minCoeff(&k);
    p = -a[k] * a;
    p[k] += 1.0;
    n = p.norm();
  }
  return p / n;
}

}  // namespace detail

/// Spherical interpolation between two unit rows; writes into out.
/// Returns the regime that was taken.
inline SlerpRegime slerp_into(const Eigen::Ref<const VectorXd>& a, const Eigen::Ref<const VectorXd>& b,
                              double t, Eigen::Ref<VectorXd> out, const SlerpOptions& opt = {}) {
  const auto plan = detail::plan_slerp(a, b, opt);
  switch (plan.regime) {
    case SlerpRegime::Geodesic: {
      const double s = std::sin(plan.theta);
      out = (std::sin((1.0 - t) * plan.theta) / s) * a + (std::sin(t * plan.theta) / s) * b;
      break;
    }
    case SlerpRegime::Linear: {
      VectorXd w = (1.0 - t) * a + t * b;
      out = w / w.norm();
      break;
    }
    case SlerpRegime::Antipodal: {
      slerp_antipodal_counter().fetch_add(1, std::memory_order_relaxed);
      const VectorXd p = detail::antipodal_direction(a, b, plan.cos_raw);
      const double theta = std::atan2((b - plan.cos_raw * a).norm(), plan.cos_raw);
      const VectorXd w = std::cos(t * theta) * a + std::sin(t * theta) * p;
      out = w / w.norm();
      break;
    }
  }
  return plan.regime;
}

/// Vector-Jacobian product of slerp_into with respect to both endpoints.
/// grad_a and grad_b are accumulated into (+=).
///
/// The antipodal fallback propagates only through its a-term; same-class
/// features essentially never land there.
inline void slerp_backward(const Eigen::Ref<const VectorXd>& a, const Eigen::Ref<const VectorXd>& b,
                           double t, const Eigen::Ref<const VectorXd>& grad_out,
                           Eigen::Ref<VectorXd> grad_a, Eigen::Ref<VectorXd> grad_b,
                           const SlerpOptions& opt = {}) {
  const auto plan = detail::plan_slerp(a, b, opt);
  switch (plan.regime) {
    case SlerpRegime::Geodesic: {
      const double th = plan.theta;
      const double s = std::sin(th), c = std::cos(th);
      const double wa = std::sin((1.0 - t) * th) / s;
      const double wb = std::sin(t * th) / s;
      const double dwa = ((1.0 - t) * std::cos((1.0 - t) * th) * s - std::sin((1.0 - t) * th) * c) / (s * s);
      const double dwb = (t * std::cos(t * th) * s - std::sin(t * th) * c) / (s * s);
      // d theta / d cos = -1 / sin(theta)
      const double g_theta = dwa * grad_out.dot(a) + dwb * grad_out.dot(b);
      const double g_cos = -g_theta / s;
      grad_a += wa * grad_out + g_cos * b;
      grad_b += wb * grad_out + g_cos * a;
      break;
    }
    case SlerpRegime::Linear: {
      const VectorXd w = (1.0 - t) * a + t * b;
      const double n = w.norm();
      const VectorXd u = w / n;
      const VectorXd gw = (grad_out - u * u.dot(grad_out)) / n;
      grad_a += (1.0 - t) * gw;
      grad_b += t * gw;
      break;
    }
    case SlerpRegime::Antipodal: {
      grad_a += std::cos(t * std::numbers::pi) * grad_out;
      break;
    }
  }
}

/// slerp(z_i, z_j; t) = sin((1-t)theta)/sin(theta) z_i + sin(t theta)/sin(theta) z_j.
inline UnitFeature slerp(const UnitFeature& zi, const UnitFeature& zj, double t, const SlerpOptions& opt = {}) {
  if (zi.dim() != zj.dim()) throw ShapeMismatch("slerp: dimension mismatch");
  if (!(t >= 0.0 && t <= 1.0)) throw ConfigError("slerp: t outside [0, 1]");
  VectorXd out(zi.dim());
  slerp_into(zi.values(), zj.values(), t, out, opt);
  return l2_normalize(out);
}

/// Rows of unit features with {0 = real, 1 = fake} labels.
class FeatureBatch {
 public:
  FeatureBatch() = default;
  FeatureBatch(MatrixXd features, std::vector<int> labels)
      : features_(std::move(features)), labels_(std::move(labels)) {
    validate();
  }

  const MatrixXd& features() const { return features_; }
  const std::vector<int>& labels() const { return labels_; }
  Index size() const { return features_.rows(); }
  Index dim() const { return features_.cols(); }

  void validate() const {
    if (static_cast<Index>(labels_.size()) != features_.rows())
      throw ShapeMismatch("FeatureBatch: labels/rows mismatch");
    if (!features_.allFinite()) throw InvalidFeature("FeatureBatch: non-finite feature");
    for (int y : labels_)
      if (y != 0 && y != 1) throw InvalidFeature("FeatureBatch: label outside {0,1}");
    for (Index r = 0; r < features_.rows(); ++r) {
      const double n = features_.row(r).norm();
      if (std::abs(n - 1.0) > kUnitTolerance)
        throw InvalidFeature("FeatureBatch: row " + std::to_string(r) + " is not unit norm");
    }
  }

 private:
  MatrixXd features_;
  std::vector<int> labels_;
};

/// Symmetric B x B matrix of ||z_x - z_y||^2, zero diagonal, clamped to [0, 4].
inline MatrixXd pairwise_sq_dists(const MatrixXd& z) {
  const VectorXd sq = z.rowwise().squaredNorm();
  MatrixXd gram = MatrixXd::Zero(z.rows(), z.rows());
  gram.selfadjointView<Eigen::Lower>().rankUpdate(z);
  MatrixXd d = -2.0 * MatrixXd(gram.selfadjointView<Eigen::Lower>());
  for (Index x = 0; x < d.rows(); ++x)
    for (Index y = 0; y < d.cols(); ++y) d(x, y) += sq[x] + sq[y];
  d = d.cwiseMax(0.0).cwiseMin(4.0);
  d.diagonal().setZero();
  return d;
}

inline MatrixXd pairwise_sq_dists(const FeatureBatch& batch) { return pairwise_sq_dists(batch.features()); }

/// Angle between two unit vectors with a NaN-safe arccos.
inline double angle_between(const Eigen::Ref<const VectorXd>& a, const Eigen::Ref<const VectorXd>& b) {
  return std::acos(std::clamp(a.dot(b) / (a.norm() * b.norm()), -1.0, 1.0));
}

}  // namespace lntune
