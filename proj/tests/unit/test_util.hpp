#pragma once

#include <Eigen/Dense>

#include <vector>

#include "lntune/rng.hpp"

namespace lntune::testing {

inline Eigen::VectorXd random_vector(Rng& rng, Eigen::Index d) {
  Eigen::VectorXd v(d);
  for (Eigen::Index i = 0; i < d; ++i) v[i] = rng.normal();
  return v;
}

inline Eigen::VectorXd random_unit(Rng& rng, Eigen::Index d) {
  Eigen::VectorXd v = random_vector(rng, d);
  return v / v.norm();
}

inline Eigen::MatrixXd random_unit_rows(Rng& rng, Eigen::Index n, Eigen::Index d) {
  Eigen::MatrixXd m(n, d);
  for (Eigen::Index r = 0; r < n; ++r) m.row(r) = random_unit(rng, d).transpose();
  return m;
}

inline std::vector<int> random_labels(Rng& rng, Eigen::Index n) {
  std::vector<int> y(static_cast<std::size_t>(n));
  for (auto& v : y) v = static_cast<int>(rng.uniform_index(2));
  // keep both classes with at least two members each
  if (n >= 4) {
    y[0] = y[1] = 0;
    y[2] = y[3] = 1;
  }
  return y;
}

}  // namespace lntune::testing
