#pragma once

#include <memory>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "bscen/mean_function.hpp"
#include "bscen/random.hpp"
#include "bscen/restrictions.hpp"

namespace bscen {

// one_step scores the reference's next value only; lag_window multiplies the
// densities of every reference value whose lag stack still reaches back into
// the candidate ancestor's history (p values), including shock-restriction terms.
enum class AncestorWeighting { one_step, lag_window };

struct PgasOptions {
  int particles = 10;
  AncestorWeighting ancestor = AncestorWeighting::lag_window;
  bool simulate_future_outliers = false;
  bool keep_particles = false;  // retain the particle cloud in each Trajectory
};

// Parameters of one retained MCMC draw as seen by the forecaster.
struct ForecastModel {
  std::shared_ptr<const MeanFunction> mean;
  Eigen::MatrixXd Sigma;
  StructuralFactor factor;
  double p_out = 0.0;
  int s_bar = 1;

  // Recursive factor from Sigma.
  static ForecastModel make(std::shared_ptr<const MeanFunction> mean, const Eigen::MatrixXd& Sigma,
                            double p_out = 0.0, int s_bar = 1);
  Eigen::Index n() const { return Sigma.rows(); }
  Eigen::Index k() const { return mean->k(); }
};

// x_{h+1} from x_h and y_h: (y_h', leading k - n entries of x_h)'.
Eigen::VectorXd shift_lag_stack(const Eigen::VectorXd& x, const Eigen::VectorXd& y);

struct Trajectory {
  Eigen::MatrixXd path;           // H x n traced draw
  Eigen::MatrixXd smoothed_mean;  // H x n expectation under smoothing weights
  // Populated with PgasOptions::keep_particles: particles[h] is n x V and
  // smoothing.row(h) the matching weights.
  std::vector<Eigen::MatrixXd> particles;
  Eigen::MatrixXd smoothing;
};

class ParticleSystem {
 public:
  ParticleSystem(const ForecastModel& model, const RestrictionSet& set, const PgasOptions& options);

  // h = 1: V - 1 fresh particles (V without a reference) from the one-step or
  // restricted proposal, reference in the last slot.
  void initialize(const Eigen::VectorXd& x_init, const Eigen::MatrixXd* reference, Rng& rng);
  void step(int h, Rng& rng);
  Trajectory finalize(Rng& rng) const;
  Trajectory run(const Eigen::VectorXd& x_init, const Eigen::MatrixXd* reference, Rng& rng);

  int V() const { return V_; }
  int H() const { return H_; }
  const Eigen::MatrixXd& particles(int h) const { return y_[static_cast<std::size_t>(h - 1)]; }
  const Eigen::MatrixXd& lag_stacks(int h) const { return x_[static_cast<std::size_t>(h - 1)]; }
  Eigen::VectorXd weights(int h) const { return w_.row(h - 1).transpose(); }
  Eigen::VectorXd log_weights(int h) const { return logw_.row(h - 1).transpose(); }
  const Eigen::MatrixXi& ancestors() const { return a_; }  // row h-1; row 0 unused
  Eigen::MatrixXd smoothing_weights() const;               // H x V
  bool has_reference() const { return reference_ != nullptr; }

 private:
  const PreparedHorizon& prepared(int h, int s) const;
  int draw_scale(Rng& rng) const;
  double log_transition(const Eigen::VectorXd& y, const Eigen::VectorXd& mu) const;
  double shock_log_density(int h, const Eigen::VectorXd& y, const Eigen::VectorXd& mu) const;
  double ancestor_log_weight(int h, int v, const Eigen::VectorXd& mu_v) const;
  void normalize(int h);

  const ForecastModel& model_;
  const RestrictionSet& set_;
  PgasOptions options_;
  int V_ = 0;
  int H_ = 0;
  Eigen::Index n_ = 0;
  Eigen::Index k_ = 0;
  const Eigen::MatrixXd* reference_ = nullptr;

  mutable std::vector<std::vector<std::unique_ptr<PreparedHorizon>>> prepared_;  // [h-1][s-1]
  Eigen::VectorXd log_scale_prior_;
  Eigen::LLT<Eigen::MatrixXd> sigma_llt_;
  double sigma_log_det_ = 0.0;

  std::vector<Eigen::MatrixXd> y_;  // per h: n x V
  std::vector<Eigen::MatrixXd> x_;  // per h: k x V stack that produced y
  Eigen::MatrixXd logw_;
  Eigen::MatrixXd w_;
  Eigen::MatrixXi a_;
};

// Stateful conditional forecaster: the trajectory of the previous call is the
// reference of the next. The first call seeds the reference with one pass of
// the same particle filter run without a reference.
class ConditionalForecaster {
 public:
  ConditionalForecaster(PgasOptions options, int H) : options_(options), H_(H) {}

  Trajectory draw(const ForecastModel& model, const Eigen::VectorXd& x_init, const RestrictionSet& set, Rng& rng);
  void reset() { reference_.reset(); }
  const std::optional<Eigen::MatrixXd>& reference() const { return reference_; }
  void set_reference(Eigen::MatrixXd path) { reference_ = std::move(path); }
  const PgasOptions& options() const { return options_; }
  int H() const { return H_; }

 private:
  PgasOptions options_;
  int H_;
  std::optional<Eigen::MatrixXd> reference_;
};

// Direct forward simulation of y_{tau+1:tau+H} without restrictions.
Eigen::MatrixXd simulate_path(const ForecastModel& model, const Eigen::VectorXd& x_init, int H, Rng& rng,
                              bool future_outliers = false);

struct ForecastDraws {
  std::vector<Eigen::MatrixXd> paths;     // per retained draw, H x n
  std::vector<Eigen::MatrixXd> smoothed;  // per retained draw, H x n
  std::vector<Trajectory> clouds;         // only with keep_particles
};

// Runs the conditional forecaster once per model, in order.
ForecastDraws forecast(const std::vector<ForecastModel>& models, const Eigen::VectorXd& x_init,
                       const RestrictionSet& set, const PgasOptions& options, Rng& rng);

// Type-7 sample quantile of `values`; the input is copied.
double sample_quantile(std::vector<double> values, double prob);

// Per-(h, variable) quantiles across draws: result[q] is H x n.
std::vector<Eigen::MatrixXd> path_quantiles(const std::vector<Eigen::MatrixXd>& draws, const std::vector<double>& probs);

// Quantiles of the mixture of weighted particle clouds (equal mass per draw).
std::vector<Eigen::MatrixXd> cloud_quantiles(const std::vector<Trajectory>& clouds, const std::vector<double>& probs);

}  // namespace bscen
