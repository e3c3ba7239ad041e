#include "bscen/linear_mean.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "bscen/errors.hpp"

namespace bscen {

namespace {
// Keeps scale draws finite and strictly positive over long chains.
constexpr double kScaleFloor = 1e-12;
constexpr double kScaleCeiling = 1e12;

double clamp_scale(double v) { return std::clamp(v, kScaleFloor, kScaleCeiling); }
}  // namespace

VarCoefficients VarCoefficients::zeros(Eigen::Index n, Eigen::Index k, bool intercept) {
  return VarCoefficients{Eigen::MatrixXd::Zero(n, k), Eigen::VectorXd::Zero(n), intercept};
}

Eigen::VectorXd predict_linear(const VarCoefficients& coef, const Eigen::Ref<const Eigen::VectorXd>& x) {
  if (x.size() != coef.A.cols()) {
    throw InputError("predict_linear: x has length " + std::to_string(x.size()) + ", expected " +
                     std::to_string(coef.A.cols()));
  }
  Eigen::VectorXd out = coef.A * x;
  if (coef.has_intercept) out += coef.intercept;
  return out;
}

LinearMean::LinearMean(VarCoefficients coef) : coef_(std::move(coef)) {
  if (coef_.intercept.size() != coef_.A.rows()) coef_.intercept = Eigen::VectorXd::Zero(coef_.A.rows());
}

HorseshoeState HorseshoeState::initial(Eigen::Index n, Eigen::Index k) {
  return HorseshoeState{Eigen::MatrixXd::Ones(n, k), Eigen::MatrixXd::Ones(n, k), 1.0, 1.0};
}

bool HorseshoeState::valid() const {
  auto positive = [](const Eigen::MatrixXd& m) { return (m.array() > 0.0).all() && m.allFinite(); };
  return positive(lambda2) && positive(nu) && tau2 > 0.0 && xi > 0.0 && std::isfinite(tau2) && std::isfinite(xi);
}

GaussianPosterior weighted_gaussian_posterior(const Eigen::MatrixXd& design, const Eigen::VectorXd& target,
                                              const Eigen::VectorXd& variances,
                                              const Eigen::VectorXd& prior_precision) {
  if (design.rows() != target.size() || design.rows() != variances.size()) {
    throw InputError("weighted regression: design, target and variances disagree in length");
  }
  if (design.cols() != prior_precision.size()) throw InputError("weighted regression: prior precision size mismatch");
  if ((variances.array() <= 0.0).any()) throw InputError("weighted regression: variances must be positive");

  const Eigen::VectorXd w = variances.cwiseInverse();
  GaussianPosterior post;
  post.precision = design.transpose() * w.asDiagonal() * design;
  post.precision.diagonal() += prior_precision;

  Eigen::LLT<Eigen::MatrixXd> llt(post.precision);
  if (llt.info() != Eigen::Success) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(post.precision, Eigen::EigenvaluesOnly);
    std::ostringstream msg;
    msg << "posterior precision is not positive definite (eigenvalue range " << eig.eigenvalues().minCoeff()
        << " to " << eig.eigenvalues().maxCoeff() << ")";
    throw NumericalError(msg.str());
  }
  post.precision_chol = llt.matrixL();
  post.mean = llt.solve(design.transpose() * w.cwiseProduct(target));
  return post;
}

Eigen::VectorXd draw_from_posterior(const GaussianPosterior& post, Rng& rng) {
  // L' z has covariance precision^{-1} when solved: draw = mean + L'^{-1} z
  const Eigen::VectorXd z = rng.normal_vector(post.mean.size());
  return post.mean + post.precision_chol.transpose().triangularView<Eigen::Upper>().solve(z);
}

void sample_var_equation(Eigen::Index i, const Eigen::MatrixXd& X, const Eigen::VectorXd& target,
                         const Eigen::VectorXd& variances, VarCoefficients& coef, HorseshoeState& hs, Rng& rng,
                         double intercept_variance) {
  const Eigen::Index k = X.cols();
  const Eigen::Index dim = coef.has_intercept ? k + 1 : k;

  Eigen::MatrixXd design(X.rows(), dim);
  design.leftCols(k) = X;
  if (coef.has_intercept) design.col(k).setOnes();

  Eigen::VectorXd prior_precision(dim);
  for (Eigen::Index j = 0; j < k; ++j) prior_precision[j] = 1.0 / (hs.lambda2(i, j) * hs.tau2);
  if (coef.has_intercept) prior_precision[k] = 1.0 / intercept_variance;

  const auto post = weighted_gaussian_posterior(design, target, variances, prior_precision);
  const Eigen::VectorXd draw = draw_from_posterior(post, rng);
  coef.A.row(i) = draw.head(k).transpose();
  if (coef.has_intercept) coef.intercept[i] = draw[k];

  for (Eigen::Index j = 0; j < k; ++j) {
    const double b2 = coef.A(i, j) * coef.A(i, j);
    hs.lambda2(i, j) = clamp_scale(rng.inv_gamma(1.0, 1.0 / hs.nu(i, j) + b2 / (2.0 * hs.tau2)));
    hs.nu(i, j) = clamp_scale(rng.inv_gamma(1.0, 1.0 + 1.0 / hs.lambda2(i, j)));
  }
  sample_global_shrinkage(coef, hs, rng);
}

void sample_global_shrinkage(const VarCoefficients& coef, HorseshoeState& hs, Rng& rng) {
  const double count = static_cast<double>(coef.A.size());
  const double ss = (coef.A.array().square() / hs.lambda2.array()).sum();
  hs.tau2 = clamp_scale(rng.inv_gamma(0.5 * (count + 1.0), 1.0 / hs.xi + 0.5 * ss));
  hs.xi = clamp_scale(rng.inv_gamma(1.0, 1.0 + 1.0 / hs.tau2));
}

}  // namespace bscen
