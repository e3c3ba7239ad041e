#include "bscen/covariance.hpp"

#include <cmath>
#include <limits>

#include "bscen/errors.hpp"

namespace bscen {

CovarianceState CovarianceState::initial(const Eigen::MatrixXd& Sigma, double nu, double A, HyperShape shape) {
  if (!(nu > 0.0)) throw InputError("covariance prior: nu must be positive");
  if (!(A > 0.0)) throw InputError("covariance prior: A must be positive");
  CovarianceState st;
  st.nu = nu;
  st.shape = shape;
  st.A_scale = Eigen::VectorXd::Constant(Sigma.rows(), A);
  st.a = Eigen::VectorXd::Ones(Sigma.rows());
  st.set_sigma(Sigma);
  return st;
}

Eigen::MatrixXd CovarianceState::S0() const { return (2.0 * nu * a.cwiseInverse()).asDiagonal(); }

void CovarianceState::set_sigma(const Eigen::MatrixXd& S) {
  const Eigen::MatrixXd sym = 0.5 * (S + S.transpose());
  Eigen::LLT<Eigen::MatrixXd> llt(sym);
  if (llt.info() != Eigen::Success || !sym.allFinite()) throw NumericalError("covariance draw is not positive definite");
  Sigma = sym;
  chol = llt.matrixL();
  precision = llt.solve(Eigen::MatrixXd::Identity(sym.rows(), sym.cols()));
  precision = 0.5 * (precision + precision.transpose()).eval();
}

Eigen::MatrixXd sample_inverse_wishart(double df, const Eigen::MatrixXd& scale, Rng& rng) {
  const Eigen::Index n = scale.rows();
  if (!(df > static_cast<double>(n) - 1.0)) throw InputError("inverse-Wishart: degrees of freedom must exceed n - 1");
  Eigen::LLT<Eigen::MatrixXd> llt(0.5 * (scale + scale.transpose()));
  if (llt.info() != Eigen::Success) throw NumericalError("inverse-Wishart scale matrix is not positive definite");
  const Eigen::MatrixXd C = llt.matrixL();

  // Sigma^{-1} = C^{-T} B B' C^{-1} with B the Bartlett factor, so
  // Sigma = M M' where M = C B^{-T}.
  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    B(i, i) = std::sqrt(rng.chi_squared(df - static_cast<double>(i)));
    for (Eigen::Index j = 0; j < i; ++j) B(i, j) = rng.normal();
  }
  const Eigen::MatrixXd Binv_t =
      B.triangularView<Eigen::Lower>().solve(Eigen::MatrixXd::Identity(n, n)).transpose();
  const Eigen::MatrixXd M = C * Binv_t;
  return M * M.transpose();
}

void sample_sigma(const Eigen::MatrixXd& scaled_residuals, CovarianceState& state, Rng& rng) {
  if (scaled_residuals.cols() != state.n()) throw InputError("sample_sigma: residual width does not match Sigma");
  const double df = state.s0() + static_cast<double>(scaled_residuals.rows());
  const Eigen::MatrixXd scale = state.S0() + scaled_residuals.transpose() * scaled_residuals;
  state.set_sigma(sample_inverse_wishart(df, scale, rng));
}

void sample_scale_hyper(CovarianceState& state, Eigen::Index T, Rng& rng) {
  const double count = state.shape == HyperShape::sample_size ? static_cast<double>(T) : static_cast<double>(state.n());
  const double shape = 0.5 * (state.nu + count);
  for (Eigen::Index i = 0; i < state.n(); ++i) {
    const double rate = 1.0 / (state.A_scale[i] * state.A_scale[i]) + state.nu * state.precision(i, i);
    state.a[i] = rng.inv_gamma(shape, rate);
  }
}

OutlierState OutlierState::initial(Eigen::Index T, int s_bar, double a_p, double b_p) {
  if (s_bar < 1) throw InputError("outlier model: s_bar must be at least 1");
  if (!(a_p > 0.0 && b_p > 0.0)) throw InputError("outlier model: Beta prior parameters must be positive");
  OutlierState st;
  st.s.assign(static_cast<std::size_t>(T), 1);
  st.s_bar = s_bar;
  st.a_p = a_p;
  st.b_p = b_p;
  st.p_out = a_p / (a_p + b_p);
  return st;
}

int OutlierState::count_outliers() const {
  int c = 0;
  for (int v : s) c += v != 1;
  return c;
}

Eigen::MatrixXd outlier_probabilities(const Eigen::MatrixXd& residuals, const Eigen::MatrixXd& Sigma, double p_out,
                                      int s_bar) {
  if (residuals.cols() != Sigma.rows()) throw InputError("outlier probabilities: residual width does not match Sigma");
  if (s_bar < 1) throw InputError("outlier probabilities: s_bar must be at least 1");
  Eigen::LLT<Eigen::MatrixXd> llt(Sigma);
  if (llt.info() != Eigen::Success) throw NumericalError("outlier probabilities: Sigma is not positive definite");
  const double n = static_cast<double>(Sigma.rows());

  Eigen::VectorXd log_prior(s_bar);
  log_prior[0] = std::log1p(-p_out);
  for (int c = 1; c < s_bar; ++c) log_prior[c] = std::log(p_out / static_cast<double>(s_bar - 1));

  const Eigen::MatrixXd z = llt.matrixL().solve(residuals.transpose());
  Eigen::MatrixXd out(residuals.rows(), s_bar);
  Eigen::VectorXd lp(s_bar);
  for (Eigen::Index t = 0; t < residuals.rows(); ++t) {
    const double q = z.col(t).squaredNorm();
    for (int c = 0; c < s_bar; ++c) {
      const double s = c + 1.0;
      lp[c] = log_prior[c] - n * std::log(s) - 0.5 * q / (s * s);
    }
    const double m = lp.maxCoeff();
    const Eigen::VectorXd w = (lp.array() - m).exp();
    const double total = w.sum();
    if (!std::isfinite(m) || !(total > 0.0) || !std::isfinite(total)) {
      throw NumericalError("outlier probabilities degenerate at t = " + std::to_string(t));
    }
    out.row(t) = (w / total).transpose();
  }
  return out;
}

std::vector<int> sample_outliers(const Eigen::MatrixXd& residuals, const Eigen::MatrixXd& Sigma, double p_out,
                                 int s_bar, Rng& rng) {
  const Eigen::MatrixXd probs = outlier_probabilities(residuals, Sigma, p_out, s_bar);
  std::vector<int> s(static_cast<std::size_t>(residuals.rows()));
  for (Eigen::Index t = 0; t < probs.rows(); ++t) {
    const Eigen::VectorXd row = probs.row(t).transpose();
    s[static_cast<std::size_t>(t)] = static_cast<int>(rng.categorical(row)) + 1;
  }
  return s;
}

double sample_outlier_prob(const std::vector<int>& s, double a_p, double b_p, Rng& rng) {
  double outliers = 0.0;
  for (int v : s) outliers += v != 1;
  return rng.beta(a_p + outliers, b_p + static_cast<double>(s.size()) - outliers);
}

}  // namespace bscen
