#pragma once

#include <Eigen/Dense>

#include "bscen/random.hpp"

namespace testing {

inline Eigen::MatrixXd random_spd(Eigen::Index n, bscen::Rng& rng, double ridge = 0.5) {
  Eigen::MatrixXd G(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) G(i, j) = rng.normal();
  return G * G.transpose() / static_cast<double>(n) + ridge * Eigen::MatrixXd::Identity(n, n);
}

inline Eigen::MatrixXd random_matrix(Eigen::Index r, Eigen::Index c, bscen::Rng& rng) {
  Eigen::MatrixXd M(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) M(i, j) = rng.normal();
  return M;
}

// Conditional law of block a given block b of a joint Gaussian, by explicit
// inversion of the b block.
struct Partitioned {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

inline Partitioned condition_on_tail(const Eigen::VectorXd& m, const Eigen::MatrixXd& S, Eigen::Index na,
                                     const Eigen::VectorXd& xb) {
  const Eigen::Index nb = m.size() - na;
  const Eigen::MatrixXd Sbb_inv = S.bottomRightCorner(nb, nb).inverse();
  const Eigen::MatrixXd Sab = S.topRightCorner(na, nb);
  Partitioned out;
  out.mean = m.head(na) + Sab * Sbb_inv * (xb - m.tail(nb));
  out.cov = S.topLeftCorner(na, na) - Sab * Sbb_inv * Sab.transpose();
  return out;
}

}  // namespace testing
