#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "bscen/bart.hpp"
#include "bscen/covariance.hpp"
#include "bscen/data.hpp"
#include "bscen/linear_mean.hpp"
#include "bscen/pgas.hpp"
#include "bscen/random.hpp"

namespace bscen {

enum class Backend { bart, linear };

struct SamplerConfig {
  int n_burn = 2000;
  int n_save = 3000;
  int thin = 1;
  std::uint64_t seed = 1;
  Backend backend = Backend::bart;
  bool heteroskedastic = true;

  // BART
  int trees = 250;
  TreePrior tree_prior;
  double leaf_k = 1.96;

  // linear
  bool intercept = true;
  double intercept_variance = 1e4;

  // covariance and outliers
  double nu = 2.0;
  double A = 10.0;
  HyperShape hyper_shape = HyperShape::conjugate;
  int s_bar = 6;
  double a_p = 1.0;
  double b_p = 50.0;

  bool progress = false;

  void validate() const;
};

// Moments of y_it given the other equations' errors at time t:
//   var = 1 / (Sigma_t^{-1})_ii,  mu = -var * sum_{j != i} (Sigma_t^{-1})_ij (y_jt - F_j(x_t))
struct ConditionalMoments {
  double mu_tilde = 0.0;
  double varsigma2 = 0.0;
};

ConditionalMoments conditional_equation_moments(Eigen::Index i, const Eigen::VectorXd& y, const Eigen::VectorXd& F,
                                                const Eigen::MatrixXd& Sigma_t);

// All t at once for equation i, with Sigma_t = s_t^2 Sigma given through the
// precision of Sigma. Returns (mu_tilde, varsigma2) as T-vectors.
std::pair<Eigen::VectorXd, Eigen::VectorXd> conditional_equation_moments(Eigen::Index i, const Eigen::MatrixXd& Y,
                                                                         const Eigen::MatrixXd& fit,
                                                                         const Eigen::MatrixXd& precision,
                                                                         const Eigen::VectorXd& scale);

struct LinearBackend {
  VarCoefficients coef;
  HorseshoeState shrinkage;
};

struct BartBackend {
  std::vector<Forest> forests;  // one per equation
  std::vector<LeafPrior> leaf_priors;
  SplitRanges ranges;
  ForestSweepStats stats;
};

// The full parameter vector of one chain.
struct ModelState {
  SamplerConfig config;
  std::variant<LinearBackend, BartBackend> mean;
  CovarianceState cov;
  OutlierState outlier;  // one scale per observed period
  Eigen::MatrixXd fit;   // F(x_t) at every row the last sweep used
  long sweep_index = 0;

  bool is_linear() const { return std::holds_alternative<LinearBackend>(mean); }
  std::shared_ptr<const MeanFunction> mean_function() const;
  ForecastModel snapshot() const;
  // s_t for rows 0..T-1; rows past the observed sample get 1.
  Eigen::VectorXd scales(Eigen::Index T) const;
};

ModelState initialize_state(const SamplerConfig& config, const Panel& panel);

// Recomputes the fitted means (and per-tree caches) at the rows of X.
void refresh_fit(ModelState& state, const Eigen::MatrixXd& X);

// One sweep: mean equation by equation, then Sigma, a, s_t and the outlier
// probability. `panel` may carry appended restricted rows.
void gibbs_sweep(ModelState& state, const Panel& panel, Rng& rng);

// Panel with `path` (H x n) appended as observations after the last row.
Panel augment_with_restricted_draws(const Panel& panel, const Eigen::MatrixXd& path);

struct ChainTask {
  // Called after every sweep when set; the returned path is appended to the
  // data for the next sweep.
  std::function<Eigen::MatrixXd(const ModelState&, Rng&)> augment;
  // Called after each retained sweep with the draw index 0..n_save-1.
  std::function<void(int, const ModelState&, Rng&)> on_draw;
};

// Burn-in, then n_save retained sweeps spaced `thin` apart. Returns the final state.
ModelState run_chain(const SamplerConfig& config, const Panel& panel, const ChainTask& task = {});

}  // namespace bscen
