#pragma once

#include <Eigen/Dense>

#include "bscen/mean_function.hpp"
#include "bscen/random.hpp"

namespace bscen {

// Reduced-form VAR coefficients: F(x) = A x + c.
struct VarCoefficients {
  Eigen::MatrixXd A;          // n x k
  Eigen::VectorXd intercept;  // n; zero when the intercept is disabled
  bool has_intercept = true;

  static VarCoefficients zeros(Eigen::Index n, Eigen::Index k, bool intercept = true);
};

Eigen::VectorXd predict_linear(const VarCoefficients& coef, const Eigen::Ref<const Eigen::VectorXd>& x);

class LinearMean final : public MeanFunction {
 public:
  explicit LinearMean(VarCoefficients coef);

  Eigen::VectorXd predict(const Eigen::Ref<const Eigen::VectorXd>& x) const override {
    return predict_linear(coef_, x);
  }
  Eigen::Index n() const override { return coef_.A.rows(); }
  Eigen::Index k() const override { return coef_.A.cols(); }
  const VarCoefficients& coefficients() const { return coef_; }

 private:
  VarCoefficients coef_;
};

// Horseshoe prior with one global scale for all slopes, written with
// inverse-gamma auxiliaries:
//   a_ij ~ N(0, lambda2_ij * tau2),  lambda2_ij ~ IG(1/2, 1/nu_ij),  nu_ij ~ IG(1/2, 1)
//   tau2 ~ IG(1/2, 1/xi),  xi ~ IG(1/2, 1)
struct HorseshoeState {
  Eigen::MatrixXd lambda2;  // n x k local scales (squared)
  Eigen::MatrixXd nu;       // n x k auxiliaries
  double tau2 = 1.0;
  double xi = 1.0;

  static HorseshoeState initial(Eigen::Index n, Eigen::Index k);
  bool valid() const;
};

// Gaussian posterior of a weighted regression with independent Gaussian prior:
//   precision = X' W X + diag(prior_precision),  W = diag(1 / variances)
//   mean      = precision^{-1} X' W target
struct GaussianPosterior {
  Eigen::VectorXd mean;
  Eigen::MatrixXd precision;
  Eigen::MatrixXd precision_chol;  // lower factor L with precision = L L'
};

GaussianPosterior weighted_gaussian_posterior(const Eigen::MatrixXd& design, const Eigen::VectorXd& target,
                                              const Eigen::VectorXd& variances,
                                              const Eigen::VectorXd& prior_precision);

Eigen::VectorXd draw_from_posterior(const GaussianPosterior& post, Rng& rng);

// Updates row i of coef (slopes and intercept) given the single-equation
// regression target y_i - mu_tilde_i with per-period variances, then refreshes
// the local scales of row i and the global scale.
void sample_var_equation(Eigen::Index i, const Eigen::MatrixXd& X, const Eigen::VectorXd& target,
                         const Eigen::VectorXd& variances, VarCoefficients& coef, HorseshoeState& hs, Rng& rng,
                         double intercept_variance = 1e4);

// Global scale update given all current slopes.
void sample_global_shrinkage(const VarCoefficients& coef, HorseshoeState& hs, Rng& rng);

}  // namespace bscen
