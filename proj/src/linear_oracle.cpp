#include "bscen/linear_oracle.hpp"

#include <cmath>
#include <numbers>

#include <boost/math/special_functions/erf.hpp>

#include <Eigen/Eigenvalues>

#include "bscen/errors.hpp"

namespace bscen {

Eigen::MatrixXd LinearSystem::companion() const {
  const Eigen::Index n_ = n();
  const Eigen::Index k_ = k();
  Eigen::MatrixXd F = Eigen::MatrixXd::Zero(k_, k_);
  F.topRows(n_) = A;
  if (k_ > n_) F.bottomLeftCorner(k_ - n_, k_ - n_).setIdentity();
  return F;
}

bool LinearSystem::stable() const {
  Eigen::EigenSolver<Eigen::MatrixXd> es(companion(), false);
  return es.eigenvalues().cwiseAbs().maxCoeff() < 1.0 - 1e-10;
}

std::vector<Eigen::MatrixXd> LinearSystem::ma_coefficients(int count) const {
  std::vector<Eigen::MatrixXd> out;
  const Eigen::MatrixXd F = companion();
  Eigen::MatrixXd power = Eigen::MatrixXd::Identity(k(), k());
  for (int h = 0; h < count; ++h) {
    out.push_back(power.topLeftCorner(n(), n()));
    power = F * power;
  }
  return out;
}

Eigen::MatrixXd GaussianPath::mean_matrix() const {
  Eigen::MatrixXd out(H(), n);
  for (int h = 0; h < H(); ++h) out.row(h) = mean.segment(h * n, n).transpose();
  return out;
}

Eigen::MatrixXd GaussianPath::sd_matrix() const {
  Eigen::MatrixXd out(H(), n);
  for (int h = 0; h < H(); ++h)
    for (Eigen::Index i = 0; i < n; ++i) out(h, i) = std::sqrt(std::max(cov(h * n + i, h * n + i), 0.0));
  return out;
}

Eigen::MatrixXd GaussianPath::quantile(double prob) const {
  return mean_matrix() + standard_normal_quantile(prob) * sd_matrix();
}

namespace {

struct PathOperator {
  Eigen::VectorXd m;    // unconditional path mean
  Eigen::MatrixXd Psi;  // Hn x Hn map from stacked errors to the path
  Eigen::MatrixXd P;    // I_H kron Sigma
};

PathOperator path_operator(const LinearSystem& sys, int H) {
  if (sys.x_init.size() != sys.k()) throw InputError("linear system: x_init has the wrong length");
  if (sys.k() % sys.n() != 0) throw InputError("linear system: A must be n x np");
  const Eigen::Index n = sys.n();
  const Eigen::Index N = n * H;
  const auto phi = sys.ma_coefficients(H);

  PathOperator op;
  op.m.resize(N);
  Eigen::VectorXd x = sys.x_init;
  for (int h = 0; h < H; ++h) {
    const Eigen::VectorXd y = sys.c + sys.A * x;
    op.m.segment(h * n, n) = y;
    if (sys.k() > n) x.tail(sys.k() - n) = x.head(sys.k() - n).eval();
    x.head(n) = y;
  }
  op.Psi = Eigen::MatrixXd::Zero(N, N);
  op.P = Eigen::MatrixXd::Zero(N, N);
  for (int h = 0; h < H; ++h) {
    op.P.block(h * n, h * n, n, n) = sys.Sigma;
    for (int j = 0; j <= h; ++j) op.Psi.block(h * n, j * n, n, n) = phi[static_cast<std::size_t>(h - j)];
  }
  return op;
}

}  // namespace

GaussianPath unconditional_path(const LinearSystem& sys, int H) {
  const auto op = path_operator(sys, H);
  return GaussianPath{op.m, op.Psi * op.P * op.Psi.transpose(), sys.n()};
}

GaussianPath closed_form_conditional_forecast(const LinearSystem& sys, const RestrictionSet& set, int H) {
  if (set.H() != H) throw InputError("restriction set length does not match the horizon");
  set.validate(sys.n());
  const Eigen::Index n = sys.n();
  const Eigen::Index N = n * H;
  const auto op = path_operator(sys, H);

  Eigen::Index rows = 0;
  for (int h = 1; h <= H; ++h) rows += set.at(h).obs.rows() + set.at(h).shock.rows();
  if (rows == 0) return GaussianPath{op.m, op.Psi * op.P * op.Psi.transpose(), n};
  if (set.any_shock() && sys.H_inv.size() == 0) throw InputError("shock restrictions require H_inv");
  const Eigen::MatrixXd Hmat = set.any_shock() ? StructuralFactor::from_impact(sys.H_inv).H : Eigen::MatrixXd();

  // z = G eps + g ~ N(target, Omega) written in terms of the stacked errors.
  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(rows, N);
  Eigen::VectorXd innov(rows);
  Eigen::MatrixXd Omega = Eigen::MatrixXd::Zero(rows, rows);
  Eigen::Index at = 0;
  for (int h = 1; h <= H; ++h) {
    const auto& c = set.at(h);
    const Eigen::Index i0 = (h - 1) * n;
    if (!c.obs.empty()) {
      const Eigen::Index m = c.obs.rows();
      G.middleRows(at, m) = c.obs.R * op.Psi.middleRows(i0, n);
      innov.segment(at, m) = c.obs.r - c.obs.R * op.m.segment(i0, n);
      Omega.block(at, at, m, m) = c.obs.Omega;
      at += m;
    }
    if (!c.shock.empty()) {
      const Eigen::Index m = c.shock.rows();
      G.block(at, i0, m, n) = c.shock.R * Hmat;
      innov.segment(at, m) = c.shock.r;
      Omega.block(at, at, m, m) = c.shock.Omega;
      at += m;
    }
  }

  const Eigen::MatrixXd GP = G * op.P;
  Eigen::LLT<Eigen::MatrixXd> llt(GP * G.transpose() + Omega);
  if (llt.info() != Eigen::Success) throw NumericalError("joint restriction covariance is not positive definite");
  const Eigen::MatrixXd Kt = llt.solve(GP);  // (P G' S^{-1})'
  const Eigen::VectorXd eps_mean = Kt.transpose() * innov;
  Eigen::MatrixXd eps_cov = op.P - Kt.transpose() * GP;
  eps_cov = 0.5 * (eps_cov + eps_cov.transpose()).eval();

  GaussianPath out{op.m + op.Psi * eps_mean, op.Psi * eps_cov * op.Psi.transpose(), n};
  out.cov = 0.5 * (out.cov + out.cov.transpose()).eval();
  return out;
}

Eigen::MatrixXd closed_form_irf(const LinearSystem& sys, Eigen::Index j, double d, int H) {
  if (j < 0 || j >= sys.n()) throw InputError("shock index out of range");
  if (sys.H_inv.rows() != sys.n()) throw InputError("closed_form_irf requires H_inv");
  const auto phi = sys.ma_coefficients(H);
  const Eigen::VectorXd beta0 = sys.H_inv.col(j);
  Eigen::MatrixXd out(H, sys.n());
  for (int h = 0; h < H; ++h) out.row(h) = (d * phi[static_cast<std::size_t>(h)] * beta0).transpose();
  return out;
}

StationaryMoments stationary_moments(const LinearSystem& sys) {
  if (!sys.stable()) throw DomainError("stationary moments require a stable system");
  const Eigen::Index n = sys.n();
  const Eigen::Index k = sys.k();
  const Eigen::MatrixXd F = sys.companion();

  Eigen::VectorXd cc = Eigen::VectorXd::Zero(k);
  cc.head(n) = sys.c;
  const Eigen::VectorXd mean = (Eigen::MatrixXd::Identity(k, k) - F).partialPivLu().solve(cc);

  // V = F V F' + Q by doubling: V <- V + Fm V Fm', Fm <- Fm^2.
  Eigen::MatrixXd V = Eigen::MatrixXd::Zero(k, k);
  V.topLeftCorner(n, n) = sys.Sigma;
  Eigen::MatrixXd Fm = F;
  for (int it = 0; it < 64; ++it) {
    const Eigen::MatrixXd add = Fm * V * Fm.transpose();
    V += add;
    Fm = (Fm * Fm).eval();
    if (add.cwiseAbs().maxCoeff() <= 1e-15 * V.cwiseAbs().maxCoeff()) break;
  }
  return StationaryMoments{mean.head(n), V.topLeftCorner(n, n)};
}

Eigen::MatrixXd simulate_linear(const LinearSystem& sys, Eigen::Index T, Rng& rng, Eigen::Index burn) {
  const Eigen::Index n = sys.n();
  const Eigen::Index k = sys.k();
  Eigen::LLT<Eigen::MatrixXd> llt(sys.Sigma);
  if (llt.info() != Eigen::Success) throw InputError("simulate: Sigma is not positive definite");
  const Eigen::MatrixXd L = llt.matrixL();
  Eigen::VectorXd x(k);
  const Eigen::VectorXd start = sys.stable() ? stationary_moments(sys).mean : Eigen::VectorXd::Zero(n);
  for (int l = 0; l < sys.p(); ++l) x.segment(l * n, n) = start;

  Eigen::MatrixXd out(T, n);
  for (Eigen::Index t = -burn; t < T; ++t) {
    const Eigen::VectorXd y = sys.c + sys.A * x + L * rng.normal_vector(n);
    if (k > n) x.tail(k - n) = x.head(k - n).eval();
    x.head(n) = y;
    if (t >= 0) out.row(t) = y.transpose();
  }
  return out;
}

double standard_normal_quantile(double prob) {
  if (!(prob > 0.0 && prob < 1.0)) throw InputError("quantile probability must lie in (0, 1)");
  return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * prob);
}

}  // namespace bscen
