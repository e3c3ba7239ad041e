#pragma once

#include <vector>

#include <Eigen/Dense>

#include "bscen/random.hpp"
#include "bscen/restrictions.hpp"

namespace bscen {

// y_t = c + A x_t + eps_t with eps_t ~ N(0, Sigma) and fixed parameters.
struct LinearSystem {
  Eigen::MatrixXd A;        // n x np
  Eigen::VectorXd c;        // n
  Eigen::MatrixXd Sigma;    // n x n
  Eigen::MatrixXd H_inv;    // impact factor, Sigma = H_inv H_inv'
  Eigen::VectorXd x_init;   // lag stack at the forecast origin (y_tau', ..., y_{tau-p+1}')'

  Eigen::Index n() const { return A.rows(); }
  Eigen::Index k() const { return A.cols(); }
  int p() const { return static_cast<int>(A.cols() / A.rows()); }

  Eigen::MatrixXd companion() const;
  bool stable() const;
  // Phi_0..Phi_{count-1}: Phi_0 = I, Phi_h the top-left block of companion^h.
  std::vector<Eigen::MatrixXd> ma_coefficients(int count) const;
};

// Joint Gaussian law of the stacked path (y_{tau+1}', ..., y_{tau+H}')'.
struct GaussianPath {
  Eigen::VectorXd mean;  // Hn
  Eigen::MatrixXd cov;   // Hn x Hn
  Eigen::Index n = 0;

  int H() const { return n > 0 ? static_cast<int>(mean.size() / n) : 0; }
  Eigen::MatrixXd mean_matrix() const;  // H x n
  Eigen::MatrixXd sd_matrix() const;    // H x n marginal standard deviations
  // Marginal quantile at probability `prob` for every (h, variable).
  Eigen::MatrixXd quantile(double prob) const;
};

GaussianPath unconditional_path(const LinearSystem& sys, int H);

// Exact law of the path given every restriction in `set`, conditioned jointly
// through the stacked reduced-form errors.
GaussianPath closed_form_conditional_forecast(const LinearSystem& sys, const RestrictionSet& set, int H);

// Rows h = 1..H hold d Phi_{h-1} H_inv e_j.
Eigen::MatrixXd closed_form_irf(const LinearSystem& sys, Eigen::Index j, double d, int H);

struct StationaryMoments {
  Eigen::VectorXd mean;  // n
  Eigen::MatrixXd cov;   // n x n
};

StationaryMoments stationary_moments(const LinearSystem& sys);

// T observations after `burn` discarded periods, started at the stationary mean.
Eigen::MatrixXd simulate_linear(const LinearSystem& sys, Eigen::Index T, Rng& rng, Eigen::Index burn = 200);

double standard_normal_quantile(double prob);

}  // namespace bscen
