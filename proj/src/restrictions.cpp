#include "bscen/restrictions.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "bscen/errors.hpp"

namespace bscen {

namespace {

Eigen::LLT<Eigen::MatrixXd> factor_or_throw(const Eigen::MatrixXd& S) {
  Eigen::LLT<Eigen::MatrixXd> llt(S);
  if (llt.info() != Eigen::Success) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(S, Eigen::EigenvaluesOnly);
    const auto& ev = eig.eigenvalues();
    std::ostringstream msg;
    msg << "restriction covariance R Sigma R' + Omega is numerically singular (condition number "
        << ev.cwiseAbs().maxCoeff() / std::max(ev.cwiseAbs().minCoeff(), 1e-300) << ")";
    throw NumericalError(msg.str());
  }
  return llt;
}

Eigen::MatrixXd block_diag(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(a.rows() + b.rows(), a.cols() + b.cols());
  out.topLeftCorner(a.rows(), a.cols()) = a;
  out.bottomRightCorner(b.rows(), b.cols()) = b;
  return out;
}

}  // namespace

void RestrictionBlock::append(const Eigen::RowVectorXd& weights, double target, double variance) {
  const Eigen::Index m = rows();
  if (m > 0 && weights.size() != R.cols()) throw InputError("restriction weights have inconsistent width");
  R.conservativeResize(m + 1, weights.size());
  R.row(m) = weights;
  r.conservativeResize(m + 1);
  r[m] = target;
  Eigen::MatrixXd O = Eigen::MatrixXd::Zero(m + 1, m + 1);
  if (m > 0) O.topLeftCorner(m, m) = Omega;
  O(m, m) = variance;
  Omega = std::move(O);
}

void RestrictionBlock::validate(Eigen::Index n, const std::string& what) const {
  if (empty()) return;
  if (R.cols() != n) throw InputError(what + ": R has " + std::to_string(R.cols()) + " columns, expected " + std::to_string(n));
  if (r.size() != R.rows() || Omega.rows() != R.rows() || Omega.cols() != R.rows()) {
    throw InputError(what + ": R, r and Omega disagree in size");
  }
  if (!R.allFinite() || !r.allFinite() || !Omega.allFinite()) throw InputError(what + ": non-finite entries");
  if ((Omega - Omega.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, Omega.cwiseAbs().maxCoeff())) {
    throw InputError(what + ": Omega is not symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(Omega, Eigen::EigenvaluesOnly);
  if (eig.eigenvalues().minCoeff() < 0.0) throw InputError(what + ": Omega is not positive semidefinite");
  Eigen::FullPivLU<Eigen::MatrixXd> lu(R);
  if (lu.rank() < R.rows()) throw InputError(what + ": R does not have full row rank");
}

RestrictionSet RestrictionSet::none(int H) {
  RestrictionSet set;
  set.horizons.resize(static_cast<std::size_t>(std::max(H, 0)));
  return set;
}

bool RestrictionSet::any_shock() const {
  return std::any_of(horizons.begin(), horizons.end(), [](const auto& c) { return !c.shock.empty(); });
}

bool RestrictionSet::empty() const {
  return std::all_of(horizons.begin(), horizons.end(), [](const auto& c) { return c.empty(); });
}

void RestrictionSet::validate(Eigen::Index n) const {
  for (int h = 1; h <= H(); ++h) {
    at(h).obs.validate(n, "observable restriction at h=" + std::to_string(h));
    at(h).shock.validate(n, "shock restriction at h=" + std::to_string(h));
  }
}

StructuralFactor StructuralFactor::recursive(const Eigen::MatrixXd& Sigma) {
  Eigen::LLT<Eigen::MatrixXd> llt(Sigma);
  if (llt.info() != Eigen::Success) throw NumericalError("recursive identification: Sigma is not positive definite");
  return from_impact(llt.matrixL());
}

StructuralFactor StructuralFactor::from_impact(const Eigen::MatrixXd& H_inv) {
  Eigen::FullPivLU<Eigen::MatrixXd> lu(H_inv);
  if (!lu.isInvertible()) throw InputError("structural impact matrix is singular");
  return StructuralFactor{H_inv, lu.inverse()};
}

StackedRestriction stack(const HorizonRestriction& c, const StructuralFactor* factor, const Eigen::VectorXd& mu) {
  const Eigen::Index n = mu.size();
  if (!c.shock.empty() && factor == nullptr) throw InputError("shock restrictions require a structural factor");
  const Eigen::Index my = c.obs.rows();
  const Eigen::Index mu_rows = c.shock.rows();

  StackedRestriction out;
  out.R.resize(my + mu_rows, n);
  out.r.resize(my + mu_rows);
  if (my > 0) {
    out.R.topRows(my) = c.obs.R;
    out.r.head(my) = c.obs.r;
  }
  if (mu_rows > 0) {
    const Eigen::MatrixXd RuH = c.shock.R * factor->H;
    out.R.bottomRows(mu_rows) = RuH;
    out.r.tail(mu_rows) = c.shock.r + RuH * mu;
  }
  out.Omega = block_diag(my > 0 ? c.obs.Omega : Eigen::MatrixXd(0, 0), mu_rows > 0 ? c.shock.Omega : Eigen::MatrixXd(0, 0));
  return out;
}

GaussianMoments joint_moments(const StackedRestriction& s, const Eigen::VectorXd& mu, const Eigen::MatrixXd& Sigma) {
  const Eigen::Index n = mu.size();
  const Eigen::Index m = s.rows();
  GaussianMoments out;
  out.mean.resize(n + m);
  out.mean.head(n) = mu;
  out.mean.tail(m) = s.R * mu;
  out.cov.resize(n + m, n + m);
  out.cov.topLeftCorner(n, n) = Sigma;
  out.cov.topRightCorner(n, m) = Sigma * s.R.transpose();
  out.cov.bottomLeftCorner(m, n) = s.R * Sigma;
  out.cov.bottomRightCorner(m, m) = s.R * Sigma * s.R.transpose() + s.Omega;
  return out;
}

GaussianMoments conditional_moments(const StackedRestriction& s, const Eigen::VectorXd& mu,
                                    const Eigen::MatrixXd& Sigma) {
  if (s.rows() == 0) return GaussianMoments{mu, Sigma};
  const Eigen::MatrixXd RS = s.R * Sigma;
  const Eigen::MatrixXd S = RS * s.R.transpose() + s.Omega;
  const auto llt = factor_or_throw(S);
  const Eigen::MatrixXd Kt = llt.solve(RS);  // K' = S^{-1} R Sigma
  GaussianMoments out;
  out.mean = mu + Kt.transpose() * (s.r - s.R * mu);
  out.cov = Sigma - Kt.transpose() * RS;
  out.cov = 0.5 * (out.cov + out.cov.transpose()).eval();
  return out;
}

Eigen::MatrixXd psd_factor(const Eigen::MatrixXd& M) {
  Eigen::LLT<Eigen::MatrixXd> llt(M);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(M);
  const Eigen::VectorXd root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * root.asDiagonal();
}

PreparedHorizon::PreparedHorizon(const HorizonRestriction& c, const StructuralFactor* factor,
                                 const Eigen::MatrixXd& Sigma) {
  const Eigen::Index n = Sigma.rows();
  if (c.empty()) {
    cov_ = Sigma;
    cov_factor_ = psd_factor(Sigma);
    return;
  }
  const StackedRestriction s = stack(c, factor, Eigen::VectorXd::Zero(n));
  R_ = s.R;
  obs_rows_ = c.obs.rows();
  r_fixed_.resize(s.rows());
  if (obs_rows_ > 0) r_fixed_.head(obs_rows_) = c.obs.r;
  if (c.shock.rows() > 0) r_fixed_.tail(c.shock.rows()) = c.shock.r;

  const Eigen::MatrixXd RS = R_ * Sigma;
  const Eigen::MatrixXd S = RS * R_.transpose() + s.Omega;
  const auto llt = factor_or_throw(S);
  S_chol_ = llt.matrixL();
  log_det_S_ = 2.0 * S_chol_.diagonal().array().log().sum();
  K_ = llt.solve(RS).transpose();

  // Joseph form keeps the conditional covariance PSD under near-hard rows.
  const Eigen::MatrixXd IKR = Eigen::MatrixXd::Identity(n, n) - K_ * R_;
  cov_ = IKR * Sigma * IKR.transpose() + K_ * s.Omega * K_.transpose();
  cov_ = 0.5 * (cov_ + cov_.transpose()).eval();
  cov_factor_ = psd_factor(cov_);
}

Eigen::VectorXd PreparedHorizon::innovation(const Eigen::VectorXd& mu) const {
  Eigen::VectorXd v = r_fixed_;
  if (obs_rows_ > 0) v.head(obs_rows_) -= R_.topRows(obs_rows_) * mu;
  return v;
}

Eigen::VectorXd PreparedHorizon::conditional_mean(const Eigen::VectorXd& mu) const {
  if (empty()) return mu;
  return mu + K_ * innovation(mu);
}

Eigen::VectorXd PreparedHorizon::draw(const Eigen::VectorXd& mu, Rng& rng) const {
  return draw(mu, rng.normal_vector(mu.size()));
}

Eigen::VectorXd PreparedHorizon::draw(const Eigen::VectorXd& mu, const Eigen::VectorXd& z) const {
  return conditional_mean(mu) + cov_factor_ * z;
}

double PreparedHorizon::log_weight(const Eigen::VectorXd& mu) const {
  if (empty()) return 0.0;
  const Eigen::VectorXd e = S_chol_.triangularView<Eigen::Lower>().solve(innovation(mu));
  const double m = static_cast<double>(R_.rows());
  return -0.5 * (m * std::log(2.0 * std::numbers::pi) + log_det_S_ + e.squaredNorm());
}

RestrictionBlock structural_impact(Eigen::Index n, Eigen::Index j, double d0, double d, bool pin_others, double hard) {
  if (j < 0 || j >= n) throw InputError("shock index " + std::to_string(j) + " out of range");
  RestrictionBlock b;
  b.R = Eigen::MatrixXd::Identity(n, n);
  b.r = Eigen::VectorXd::Zero(n);
  b.r[j] = d0 + d;
  b.Omega = Eigen::MatrixXd::Identity(n, n) * (pin_others ? hard : 1.0);
  b.Omega(j, j) = hard;
  return b;
}

RestrictionBlock pin_non_driving(Eigen::Index n, const std::vector<Eigen::Index>& driving, double variance) {
  RestrictionBlock b;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (std::find(driving.begin(), driving.end(), i) != driving.end()) continue;
    b.append(Eigen::RowVectorXd::Unit(n, i), 0.0, variance);
  }
  return b;
}

RestrictionSet lucas_robust(int H, Eigen::Index n, Eigen::Index j, double d0, double d, double hard) {
  RestrictionSet set = RestrictionSet::none(H);
  if (H < 1) return set;
  set.at(1).shock = structural_impact(n, j, d0, d, false, hard);
  for (int h = 2; h <= H; ++h) {
    RestrictionBlock b;
    b.R = Eigen::MatrixXd::Identity(n, n);
    b.r = Eigen::VectorXd::Zero(n);
    b.Omega = Eigen::MatrixXd::Identity(n, n) * hard;
    set.at(h).shock = b;
  }
  return set;
}

RestrictionSet RestrictionTemplate::resolve(const std::vector<std::string>& names, const Eigen::MatrixXd& Sigma,
                                            const Eigen::VectorXd& last) const {
  const auto n = static_cast<Eigen::Index>(names.size());
  RestrictionSet set = RestrictionSet::none(horizon);
  for (std::size_t e = 0; e < entries.size(); ++e) {
    const auto& entry = entries[e];
    const std::string where = "restriction entry " + std::to_string(e + 1);
    Eigen::RowVectorXd w = Eigen::RowVectorXd::Zero(n);
    for (const auto& [name, weight] : entry.weights) {
      const auto it = std::find(names.begin(), names.end(), name);
      if (it == names.end()) throw InputError(where + ": unknown variable '" + name + "'");
      w[it - names.begin()] += weight;
    }
    if (entry.targets.size() != 1 && entry.targets.size() != entry.horizons.size()) {
      throw InputError(where + ": give one target or one per horizon");
    }
    double variance = hard_variance;
    if (entry.hardness == Hardness::soft) variance = entry.variance;
    if (entry.hardness == Hardness::sd_scaled) {
      variance = entry.scale * (entry.on_shocks ? w.squaredNorm() : (w * Sigma * w.transpose())(0, 0));
    }
    if (!(variance > 0.0)) throw InputError(where + ": restriction variance must be positive");
    for (std::size_t i = 0; i < entry.horizons.size(); ++i) {
      const int h = entry.horizons[i];
      if (h < 1 || h > horizon) throw InputError(where + ": horizon " + std::to_string(h) + " outside 1.." + std::to_string(horizon));
      double target = entry.targets.size() == 1 ? entry.targets[0] : entry.targets[i];
      if (entry.relative_to_last) {
        if (entry.on_shocks) throw InputError(where + ": shock targets cannot be relative to the last observation");
        target += w.dot(last);
      }
      auto& block = entry.on_shocks ? set.at(h).shock : set.at(h).obs;
      block.append(w, target, variance);
    }
  }
  set.validate(n);
  return set;
}

bool RestrictionTemplate::any_shock() const {
  return std::any_of(entries.begin(), entries.end(), [](const auto& e) { return e.on_shocks; });
}

}  // namespace bscen
