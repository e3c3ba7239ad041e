#pragma once

#include <vector>

#include <Eigen/Dense>

#include "bscen/random.hpp"

namespace bscen {

// Shape of the a_i conditional: `sample_size` uses (nu + T)/2, `conjugate` the
// standard (nu + n)/2.
enum class HyperShape { sample_size, conjugate };

// Sigma ~ IW(nu + n - 1, 2 nu diag(1/a)),  a_i ~ IG(1/2, 1/A_i^2).
struct CovarianceState {
  Eigen::MatrixXd Sigma;
  Eigen::VectorXd a;
  double nu = 2.0;
  Eigen::VectorXd A_scale;
  HyperShape shape = HyperShape::conjugate;

  Eigen::MatrixXd chol;       // lower P with Sigma = P P'
  Eigen::MatrixXd precision;  // Sigma^{-1}

  static CovarianceState initial(const Eigen::MatrixXd& Sigma, double nu = 2.0, double A = 10.0,
                                 HyperShape shape = HyperShape::conjugate);

  Eigen::Index n() const { return Sigma.rows(); }
  double s0() const { return nu + static_cast<double>(n()) - 1.0; }
  Eigen::MatrixXd S0() const;

  // Symmetrizes, refreshes the Cholesky factor and precision. Throws
  // NumericalError when Sigma is not positive definite.
  void set_sigma(const Eigen::MatrixXd& S);
};

// Bartlett draw of Sigma ~ IW(df, scale), density proportional to
// |Sigma|^{-(df+n+1)/2} exp(-tr(scale Sigma^{-1})/2).
Eigen::MatrixXd sample_inverse_wishart(double df, const Eigen::MatrixXd& scale, Rng& rng);

// `scaled_residuals` rows are eps_t / s_t.
void sample_sigma(const Eigen::MatrixXd& scaled_residuals, CovarianceState& state, Rng& rng);

// T is the number of observations entering the `sample_size` shape.
void sample_scale_hyper(CovarianceState& state, Eigen::Index T, Rng& rng);

struct OutlierState {
  std::vector<int> s;  // scale per period, 1 = regular
  int s_bar = 6;
  double p_out = 1.0 / 51.0;
  double a_p = 1.0;
  double b_p = 50.0;

  static OutlierState initial(Eigen::Index T, int s_bar = 6, double a_p = 1.0, double b_p = 50.0);
  int count_outliers() const;
};

// T x s_bar matrix; column c holds Pr(s_t = c + 1 | eps_t).
Eigen::MatrixXd outlier_probabilities(const Eigen::MatrixXd& residuals, const Eigen::MatrixXd& Sigma, double p_out,
                                      int s_bar);

std::vector<int> sample_outliers(const Eigen::MatrixXd& residuals, const Eigen::MatrixXd& Sigma, double p_out,
                                 int s_bar, Rng& rng);

double sample_outlier_prob(const std::vector<int>& s, double a_p, double b_p, Rng& rng);

}  // namespace bscen
