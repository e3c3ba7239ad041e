#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bscen/random.hpp"

namespace bscen {

inline constexpr double kHardVariance = 1e-8;

// R y ~ N(r, Omega) on observables, or R u ~ N(r, Omega) on structural shocks.
struct RestrictionBlock {
  Eigen::MatrixXd R;
  Eigen::VectorXd r;
  Eigen::MatrixXd Omega;

  Eigen::Index rows() const { return R.rows(); }
  bool empty() const { return R.rows() == 0; }
  void append(const Eigen::RowVectorXd& weights, double target, double variance);
  void validate(Eigen::Index n, const std::string& what) const;
};

struct HorizonRestriction {
  RestrictionBlock obs;
  RestrictionBlock shock;

  bool empty() const { return obs.empty() && shock.empty(); }
};

// C_1..C_H; horizons[h - 1] holds C_h.
struct RestrictionSet {
  std::vector<HorizonRestriction> horizons;

  static RestrictionSet none(int H);
  int H() const { return static_cast<int>(horizons.size()); }
  HorizonRestriction& at(int h) { return horizons.at(static_cast<std::size_t>(h - 1)); }
  const HorizonRestriction& at(int h) const { return horizons.at(static_cast<std::size_t>(h - 1)); }
  bool any_shock() const;
  bool empty() const;
  void validate(Eigen::Index n) const;
};

// eps = H_inv u with u ~ N(0, I), so Sigma = H_inv H_inv'.
struct StructuralFactor {
  Eigen::MatrixXd H_inv;
  Eigen::MatrixXd H;

  static StructuralFactor recursive(const Eigen::MatrixXd& Sigma);
  static StructuralFactor from_impact(const Eigen::MatrixXd& H_inv);
};

struct StackedRestriction {
  Eigen::MatrixXd R;
  Eigen::VectorXd r;
  Eigen::MatrixXd Omega;

  Eigen::Index rows() const { return R.rows(); }
};

// Observable rows followed by shock rows mapped to observables through H:
//   R = [R_y; R_u H],  r = [r_y; r_u + R_u H mu],  Omega = bdiag(Omega_y, Omega_u)
StackedRestriction stack(const HorizonRestriction& c, const StructuralFactor* factor, const Eigen::VectorXd& mu);

struct GaussianMoments {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

// Joint law of (y, r): mean [mu; R mu], covariance [[Sigma, Sigma R'], [R Sigma, R Sigma R' + Omega]].
GaussianMoments joint_moments(const StackedRestriction& s, const Eigen::VectorXd& mu, const Eigen::MatrixXd& Sigma);

// Law of y given the restriction: mean mu + K (r - R mu), covariance Sigma - K R Sigma
// with K = Sigma R' (R Sigma R' + Omega)^{-1}.
GaussianMoments conditional_moments(const StackedRestriction& s, const Eigen::VectorXd& mu,
                                    const Eigen::MatrixXd& Sigma);

// Per-horizon quantities that do not depend on the particle's conditional
// mean, so one factorization serves every particle at that horizon.
class PreparedHorizon {
 public:
  PreparedHorizon(const HorizonRestriction& c, const StructuralFactor* factor, const Eigen::MatrixXd& Sigma);

  bool empty() const { return R_.rows() == 0; }
  // Proposal mean for a particle with one-step mean mu.
  Eigen::VectorXd conditional_mean(const Eigen::VectorXd& mu) const;
  Eigen::VectorXd draw(const Eigen::VectorXd& mu, Rng& rng) const;
  Eigen::VectorXd draw(const Eigen::VectorXd& mu, const Eigen::VectorXd& z) const;
  // log N(r; R mu, R Sigma R' + Omega); zero when empty.
  double log_weight(const Eigen::VectorXd& mu) const;
  const Eigen::MatrixXd& cov_factor() const { return cov_factor_; }
  const Eigen::MatrixXd& conditional_cov() const { return cov_; }

 private:
  Eigen::VectorXd innovation(const Eigen::VectorXd& mu) const;

  Eigen::MatrixXd R_;
  Eigen::VectorXd r_fixed_;      // r_y and r_u; the H mu shift cancels in r - R mu for shock rows
  Eigen::Index obs_rows_ = 0;
  Eigen::MatrixXd K_;
  Eigen::MatrixXd S_chol_;       // lower factor of R Sigma R' + Omega
  double log_det_S_ = 0.0;
  Eigen::MatrixXd cov_;
  Eigen::MatrixXd cov_factor_;
};

// Lower factor of a symmetric PSD matrix: Cholesky when possible, otherwise
// an eigen-decomposition with negative eigenvalues clipped at zero.
Eigen::MatrixXd psd_factor(const Eigen::MatrixXd& M);

// Shock block at impact: R = I, r = (d0 + d) e_j, Omega = diag(1, ..., hard at j, ..., 1).
// With `pin_others` the other shocks are hard-pinned at 0 as well.
RestrictionBlock structural_impact(Eigen::Index n, Eigen::Index j, double d0, double d, bool pin_others = false,
                                   double hard = kHardVariance);

// Shock rows keeping every shock outside `driving` at its unconditional
// mean: r = 0 with Omega = variance (1 leaves it at its unconditional law).
RestrictionBlock pin_non_driving(Eigen::Index n, const std::vector<Eigen::Index>& driving, double variance = 1.0);

// Impact shock at h = 1, every structural shock hard-pinned to zero at h > 1:
// offsetting shocks are allowed only on impact.
RestrictionSet lucas_robust(int H, Eigen::Index n, Eigen::Index j, double d0, double d, double hard = kHardVariance);

enum class Hardness { hard, soft, sd_scaled };

// One user-facing restriction line: sum_i w_i z_i = target, where z are
// observables or structural shocks, imposed at each listed horizon.
struct RestrictionEntry {
  bool on_shocks = false;
  std::vector<int> horizons;
  std::vector<std::pair<std::string, double>> weights;
  std::vector<double> targets;  // one per horizon, or a single value for all
  Hardness hardness = Hardness::hard;
  double variance = 1.0;        // soft
  double scale = 1.0;           // sd-scaled: Omega = scale * w' Sigma w
  bool relative_to_last = false;
};

struct RestrictionTemplate {
  std::vector<RestrictionEntry> entries;
  int horizon = 0;
  double hard_variance = kHardVariance;

  // Builds C_1..C_H for a draw with covariance Sigma. `last` holds the final
  // observation for targets given relative to it.
  RestrictionSet resolve(const std::vector<std::string>& names, const Eigen::MatrixXd& Sigma,
                         const Eigen::VectorXd& last) const;
  bool any_shock() const;
};

}  // namespace bscen
