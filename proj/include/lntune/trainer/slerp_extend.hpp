#pragma once

#include <array>
#include <vector>

#include "lntune/hypersphere.hpp"
#include "lntune/rng.hpp"

namespace lntune {

/// Where one synthetic row came from: slerp(z_i, z_j, t).
struct SlerpSource {
  Index i = 0;
  Index j = 0;
  double t = 0.0;
};

struct ExtendedBatch {
  MatrixXd features;
  std::vector<int> labels;
  /// One entry per synthetic row, in row order after the originals.
  std::vector<SlerpSource> sources;
  std::int64_t originals = 0;
};

struct ExtendOptions {
  /// Raise ClassMissing unless both classes are present.
  bool require_both_classes = false;
  SlerpOptions slerp{};
};

/// Synthetic-slot counts per class: proportional to the class counts,
/// rounded by largest remainder (ties go to the lower class index).
inline std::array<std::int64_t, 2> allocate_synthetic(const std::array<std::int64_t, 2>& counts, std::int64_t extra) {
  const std::int64_t total = counts[0] + counts[1];
  std::array<std::int64_t, 2> quota{0, 0};
  if (total == 0 || extra == 0) return quota;
  std::array<std::int64_t, 2> rem{};
  std::int64_t given = 0;
  for (int c = 0; c < 2; ++c) {
    quota[static_cast<std::size_t>(c)] = extra * counts[static_cast<std::size_t>(c)] / total;
    rem[static_cast<std::size_t>(c)] = extra * counts[static_cast<std::size_t>(c)] % total;
    given += quota[static_cast<std::size_t>(c)];
  }
  for (std::int64_t left = extra - given; left > 0; --left) {
    const int c = rem[1] > rem[0] ? 1 : 0;
    ++quota[static_cast<std::size_t>(c)];
    rem[static_cast<std::size_t>(c)] = -1;
  }
  return quota;
}

/// Extends a batch of unit features to `target` rows. Originals come first;
/// each synthetic row of class c interpolates a source row of c (cycling
/// through them in batch order) with a uniformly drawn other row of c, at
/// t ~ U(0, 1).
inline ExtendedBatch extend_batch_slerp(const FeatureBatch& batch, std::int64_t target, Rng& rng,
                                        const ExtendOptions& opt = {}) {
  const auto& z = batch.features();
  const auto& y = batch.labels();
  const std::int64_t B = z.rows();
  if (target < B) throw ConfigError("extend_batch_slerp: target smaller than the batch");
  std::array<std::vector<Index>, 2> rows;
  for (Index r = 0; r < B; ++r) rows[static_cast<std::size_t>(y[static_cast<std::size_t>(r)])].push_back(r);
  if (opt.require_both_classes && (rows[0].empty() || rows[1].empty()))
    throw ClassMissing("extend_batch_slerp: batch lacks a class");
  if (B == 0 && target > 0) throw ClassMissing("extend_batch_slerp: empty batch");

  const auto quota = allocate_synthetic({static_cast<std::int64_t>(rows[0].size()), static_cast<std::int64_t>(rows[1].size())},
                                        target - B);
  ExtendedBatch out;
  out.originals = B;
  out.features.resize(target, z.cols());
  out.features.topRows(B) = z;
  out.labels = y;
  out.labels.reserve(static_cast<std::size_t>(target));
  Index row = B;
  Eigen::VectorXd tmp(z.cols());
  for (int c = 0; c < 2; ++c) {
    const auto& rc = rows[static_cast<std::size_t>(c)];
    const auto n = static_cast<std::int64_t>(rc.size());
    for (std::int64_t k = 0; k < quota[static_cast<std::size_t>(c)]; ++k) {
      const Index i = rc[static_cast<std::size_t>(k % n)];
      Index j = i;
      if (n > 1) {
        const auto pick = static_cast<std::int64_t>(rng.uniform_index(static_cast<std::uint64_t>(n - 1)));
        j = rc[static_cast<std::size_t>(pick >= k % n ? pick + 1 : pick)];
      }
      const double t = rng.uniform();
      slerp_into(z.row(i).transpose(), z.row(j).transpose(), t, tmp, opt.slerp);
      out.features.row(row) = tmp.transpose();
      out.labels.push_back(c);
      out.sources.push_back({i, j, t});
      ++row;
    }
  }
  return out;
}

/// Backpropagates gradients of the extended rows onto the original rows.
inline MatrixXd extend_batch_backward(const ExtendedBatch& ext, const MatrixXd& original, const MatrixXd& d_ext,
                                      const SlerpOptions& opt = {}) {
  MatrixXd d = d_ext.topRows(ext.originals);
  Eigen::VectorXd ga(original.cols()), gb(original.cols());
  for (std::size_t s = 0; s < ext.sources.size(); ++s) {
    const auto& src = ext.sources[s];
    ga.setZero();
    gb.setZero();
    slerp_backward(original.row(src.i).transpose(), original.row(src.j).transpose(), src.t,
                   d_ext.row(ext.originals + static_cast<Index>(s)).transpose(), ga, gb, opt);
    d.row(src.i) += ga.transpose();
    d.row(src.j) += gb.transpose();
  }
  return d;
}

}  // namespace lntune
