#include "bscen/pgas.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "bscen/errors.hpp"

namespace bscen {

ForecastModel ForecastModel::make(std::shared_ptr<const MeanFunction> mean, const Eigen::MatrixXd& Sigma, double p_out,
                                  int s_bar) {
  if (!mean) throw InputError("forecast model requires a mean function");
  if (mean->n() != Sigma.rows()) throw InputError("mean function and Sigma disagree in dimension");
  return ForecastModel{std::move(mean), Sigma, StructuralFactor::recursive(Sigma), p_out, std::max(s_bar, 1)};
}

Eigen::VectorXd shift_lag_stack(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  const Eigen::Index k = x.size();
  const Eigen::Index n = y.size();
  Eigen::VectorXd out(k);
  out.head(n) = y;
  if (k > n) out.tail(k - n) = x.head(k - n);
  return out;
}

ParticleSystem::ParticleSystem(const ForecastModel& model, const RestrictionSet& set, const PgasOptions& options)
    : model_(model), set_(set), options_(options), V_(options.particles), H_(set.H()), n_(model.n()), k_(model.k()) {
  if (V_ < 1) throw InputError("particle count must be positive");
  if (H_ < 1) throw InputError("forecast horizon must be positive");
  if (k_ % n_ != 0) throw InputError("lag stack length must be a multiple of n");
  set.validate(n_);

  const int scales = options_.simulate_future_outliers ? model.s_bar : 1;
  prepared_.resize(static_cast<std::size_t>(H_));
  for (auto& row : prepared_) row.resize(static_cast<std::size_t>(scales));
  log_scale_prior_.resize(scales);
  if (scales == 1) {
    log_scale_prior_[0] = 0.0;
  } else {
    log_scale_prior_[0] = std::log1p(-model.p_out);
    for (int s = 1; s < scales; ++s) log_scale_prior_[s] = std::log(model.p_out / (scales - 1));
  }
  sigma_llt_.compute(model.Sigma);
  if (sigma_llt_.info() != Eigen::Success) throw NumericalError("forecast Sigma is not positive definite");
  sigma_log_det_ = 2.0 * Eigen::MatrixXd(sigma_llt_.matrixL()).diagonal().array().log().sum();

  y_.assign(static_cast<std::size_t>(H_), Eigen::MatrixXd(n_, V_));
  x_.assign(static_cast<std::size_t>(H_), Eigen::MatrixXd(k_, V_));
  logw_ = Eigen::MatrixXd::Zero(H_, V_);
  w_ = Eigen::MatrixXd::Zero(H_, V_);
  a_ = Eigen::MatrixXi::Zero(H_, V_);
}

const PreparedHorizon& ParticleSystem::prepared(int h, int s) const {
  auto& slot = prepared_[static_cast<std::size_t>(h - 1)][static_cast<std::size_t>(s - 1)];
  if (!slot) {
    const double sc = static_cast<double>(s);
    if (s == 1) {
      slot = std::make_unique<PreparedHorizon>(set_.at(h), &model_.factor, model_.Sigma);
    } else {
      const StructuralFactor f = StructuralFactor::from_impact(sc * model_.factor.H_inv);
      slot = std::make_unique<PreparedHorizon>(set_.at(h), &f, sc * sc * model_.Sigma);
    }
  }
  return *slot;
}

int ParticleSystem::draw_scale(Rng& rng) const {
  if (log_scale_prior_.size() == 1) return 1;
  const Eigen::VectorXd probs = log_scale_prior_.array().exp();
  return static_cast<int>(rng.categorical(probs)) + 1;
}

double ParticleSystem::log_transition(const Eigen::VectorXd& y, const Eigen::VectorXd& mu) const {
  const double q = sigma_llt_.matrixL().solve(y - mu).squaredNorm();
  const double n = static_cast<double>(n_);
  const double base = -0.5 * (n * std::log(2.0 * std::numbers::pi) + sigma_log_det_);
  if (log_scale_prior_.size() == 1) return base - 0.5 * q;
  Eigen::VectorXd terms(log_scale_prior_.size());
  for (Eigen::Index s = 0; s < terms.size(); ++s) {
    const double sc = static_cast<double>(s + 1);
    terms[s] = log_scale_prior_[s] - n * std::log(sc) - 0.5 * q / (sc * sc);
  }
  const double m = terms.maxCoeff();
  return base + m + std::log((terms.array() - m).exp().sum());
}

double ParticleSystem::shock_log_density(int h, const Eigen::VectorXd& y, const Eigen::VectorXd& mu) const {
  const auto& b = set_.at(h).shock;
  if (b.empty()) return 0.0;
  const Eigen::VectorXd e = b.R * model_.factor.H * (y - mu) - b.r;
  Eigen::LLT<Eigen::MatrixXd> llt(b.Omega);
  const Eigen::MatrixXd L = llt.matrixL();
  const double q = L.triangularView<Eigen::Lower>().solve(e).squaredNorm();
  return -0.5 * (q + 2.0 * L.diagonal().array().log().sum());
}

double ParticleSystem::ancestor_log_weight(int h, int v, const Eigen::VectorXd& mu_v) const {
  const auto& ref = *reference_;
  const double base = logw_(h - 2, v);
  if (options_.ancestor == AncestorWeighting::one_step) {
    return base + log_transition(ref.row(h - 1).transpose(), mu_v);
  }
  const int p = static_cast<int>(k_ / n_);
  const int last = std::min(H_, h + p - 1);
  double total = base;
  Eigen::VectorXd x = shift_lag_stack(x_[static_cast<std::size_t>(h - 2)].col(v), y_[static_cast<std::size_t>(h - 2)].col(v));
  Eigen::VectorXd mu = mu_v;
  for (int j = h; j <= last; ++j) {
    if (j > h) mu = model_.mean->predict(x);
    const Eigen::VectorXd yj = ref.row(j - 1).transpose();
    total += log_transition(yj, mu) + shock_log_density(j, yj, mu);
    x = shift_lag_stack(x, yj);
  }
  return total;
}

void ParticleSystem::normalize(int h) {
  const Eigen::RowVectorXd lw = logw_.row(h - 1);
  const double m = lw.maxCoeff();
  if (!std::isfinite(m)) {
    throw NumericalError("particle weights degenerate at h=" + std::to_string(h) + "; restrictions may be inconsistent");
  }
  const Eigen::RowVectorXd e = (lw.array() - m).exp();
  w_.row(h - 1) = e / e.sum();
}

void ParticleSystem::initialize(const Eigen::VectorXd& x_init, const Eigen::MatrixXd* reference, Rng& rng) {
  if (x_init.size() != k_) throw InputError("initial lag stack has length " + std::to_string(x_init.size()) + ", expected " + std::to_string(k_));
  if (reference && (reference->rows() != H_ || reference->cols() != n_)) throw InputError("reference path has wrong shape");
  if (reference && V_ < 2) throw InputError("conditioning on a reference needs at least 2 particles");
  reference_ = reference;
  const int fresh = reference_ ? V_ - 1 : V_;
  const Eigen::VectorXd mu = model_.mean->predict(x_init);
  for (int v = 0; v < V_; ++v) x_[0].col(v) = x_init;
  for (int v = 0; v < fresh; ++v) {
    const auto& prep = prepared(1, draw_scale(rng));
    y_[0].col(v) = prep.draw(mu, rng);
    logw_(0, v) = prep.log_weight(mu);
  }
  if (reference_) {
    y_[0].col(V_ - 1) = reference_->row(0).transpose();
    logw_(0, V_ - 1) = prepared(1, 1).log_weight(mu);
  }
  normalize(1);
}

void ParticleSystem::step(int h, Rng& rng) {
  if (h < 2 || h > H_) throw InputError("step horizon out of range");
  const auto hp = static_cast<std::size_t>(h - 2);
  const auto hc = static_cast<std::size_t>(h - 1);

  std::vector<Eigen::VectorXd> xnext(static_cast<std::size_t>(V_));
  std::vector<Eigen::VectorXd> mu(static_cast<std::size_t>(V_));
  for (int v = 0; v < V_; ++v) {
    xnext[static_cast<std::size_t>(v)] = shift_lag_stack(x_[hp].col(v), y_[hp].col(v));
    mu[static_cast<std::size_t>(v)] = model_.mean->predict(xnext[static_cast<std::size_t>(v)]);
  }

  const int fresh = reference_ ? V_ - 1 : V_;
  const Eigen::VectorXd parent_w = w_.row(h - 2).transpose();
  for (int v = 0; v < fresh; ++v) a_(h - 1, v) = static_cast<int>(rng.categorical(parent_w));
  if (reference_) {
    Eigen::VectorXd pi(V_);
    for (int v = 0; v < V_; ++v) pi[v] = ancestor_log_weight(h, v, mu[static_cast<std::size_t>(v)]);
    const double m = pi.maxCoeff();
    if (!std::isfinite(m)) throw NumericalError("ancestor weights degenerate at h=" + std::to_string(h));
    Eigen::VectorXd probs = (pi.array() - m).exp();
    probs /= probs.sum();
    a_(h - 1, V_ - 1) = static_cast<int>(rng.categorical(probs));
  }

  for (int v = 0; v < fresh; ++v) {
    const auto a = static_cast<std::size_t>(a_(h - 1, v));
    const auto& prep = prepared(h, draw_scale(rng));
    x_[hc].col(v) = xnext[a];
    y_[hc].col(v) = prep.draw(mu[a], rng);
    logw_(h - 1, v) = prep.log_weight(mu[a]);
  }
  if (reference_) {
    const auto a = static_cast<std::size_t>(a_(h - 1, V_ - 1));
    x_[hc].col(V_ - 1) = xnext[a];
    y_[hc].col(V_ - 1) = reference_->row(h - 1).transpose();
    logw_(h - 1, V_ - 1) = prepared(h, 1).log_weight(mu[a]);
  }
  normalize(h);
}

Eigen::MatrixXd ParticleSystem::smoothing_weights() const {
  Eigen::MatrixXd s(H_, V_);
  s.row(H_ - 1) = w_.row(H_ - 1);
  for (int h = H_ - 1; h >= 1; --h) {
    Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(V_);
    for (int j = 0; j < V_; ++j) acc[a_(h, j)] += s(h, j);
    s.row(h - 1) = acc / acc.sum();
  }
  return s;
}

Trajectory ParticleSystem::finalize(Rng& rng) const {
  Trajectory out;
  out.path.resize(H_, n_);
  const Eigen::VectorXd last_w = w_.row(H_ - 1).transpose();
  int v = static_cast<int>(rng.categorical(last_w));
  for (int h = H_; h >= 1; --h) {
    out.path.row(h - 1) = y_[static_cast<std::size_t>(h - 1)].col(v).transpose();
    if (h > 1) v = a_(h - 1, v);
  }
  const Eigen::MatrixXd s = smoothing_weights();
  out.smoothed_mean.resize(H_, n_);
  for (int h = 0; h < H_; ++h) out.smoothed_mean.row(h) = (y_[static_cast<std::size_t>(h)] * s.row(h).transpose()).transpose();
  if (options_.keep_particles) {
    out.particles = y_;
    out.smoothing = s;
  }
  return out;
}

Trajectory ParticleSystem::run(const Eigen::VectorXd& x_init, const Eigen::MatrixXd* reference, Rng& rng) {
  initialize(x_init, reference, rng);
  for (int h = 2; h <= H_; ++h) step(h, rng);
  return finalize(rng);
}

namespace {

// A reference path that misses a hard target of the current set (observable
// or structural-shock rows under the current model) has no density under the
// conditional distribution and would survive only through equal weights.
bool violates_hard_targets(const ForecastModel& model, const Eigen::VectorXd& x_init, const RestrictionSet& set,
                           const Eigen::MatrixXd& path) {
  Eigen::VectorXd x = x_init;
  for (int h = 1; h <= set.H(); ++h) {
    const HorizonRestriction& c = set.at(h);
    const Eigen::VectorXd y = path.row(h - 1).transpose();
    if (!c.obs.empty() || !c.shock.empty()) {
      const StackedRestriction st = stack(c, &model.factor, model.mean->predict(x));
      for (Eigen::Index i = 0; i < st.rows(); ++i) {
        if (st.Omega(i, i) > 1e-6) continue;
        if (std::abs(st.R.row(i).dot(y) - st.r[i]) > 20.0 * std::sqrt(st.Omega(i, i))) return true;
      }
    }
    x = shift_lag_stack(x, y);
  }
  return false;
}

}  // namespace

Trajectory ConditionalForecaster::draw(const ForecastModel& model, const Eigen::VectorXd& x_init,
                                       const RestrictionSet& set, Rng& rng) {
  if (set.H() != H_) throw InputError("restriction set covers " + std::to_string(set.H()) + " horizons, expected " + std::to_string(H_));
  if (options_.particles < 2) throw InputError("the conditional forecaster needs at least 2 particles");
  if (reference_ && violates_hard_targets(model, x_init, set, *reference_)) reference_.reset();
  if (!reference_) {
    ParticleSystem boot(model, set, options_);
    reference_ = boot.run(x_init, nullptr, rng).path;
  }
  ParticleSystem sys(model, set, options_);
  Trajectory out = sys.run(x_init, &*reference_, rng);
  reference_ = out.path;
  return out;
}

Eigen::MatrixXd simulate_path(const ForecastModel& model, const Eigen::VectorXd& x_init, int H, Rng& rng,
                              bool future_outliers) {
  const Eigen::Index n = model.n();
  Eigen::LLT<Eigen::MatrixXd> llt(model.Sigma);
  if (llt.info() != Eigen::Success) throw NumericalError("forecast Sigma is not positive definite");
  const Eigen::MatrixXd L = llt.matrixL();
  Eigen::MatrixXd out(H, n);
  Eigen::VectorXd x = x_init;
  for (int h = 0; h < H; ++h) {
    double s = 1.0;
    if (future_outliers && model.s_bar > 1 && rng.uniform() < model.p_out) {
      s = 2.0 + static_cast<double>(static_cast<int>(rng.uniform() * (model.s_bar - 1)));
    }
    const Eigen::VectorXd y = model.mean->predict(x) + s * (L * rng.normal_vector(n));
    out.row(h) = y.transpose();
    x = shift_lag_stack(x, y);
  }
  return out;
}

ForecastDraws forecast(const std::vector<ForecastModel>& models, const Eigen::VectorXd& x_init,
                       const RestrictionSet& set, const PgasOptions& options, Rng& rng) {
  ForecastDraws out;
  ConditionalForecaster fc(options, set.H());
  for (const auto& m : models) {
    Trajectory t = fc.draw(m, x_init, set, rng);
    out.paths.push_back(t.path);
    out.smoothed.push_back(t.smoothed_mean);
    if (options.keep_particles) out.clouds.push_back(std::move(t));
  }
  return out;
}

double sample_quantile(std::vector<double> values, double prob) {
  if (values.empty()) throw InputError("quantile of an empty sample");
  if (!(prob >= 0.0 && prob <= 1.0)) throw InputError("quantile probability must lie in [0, 1]");
  std::sort(values.begin(), values.end());
  const double pos = prob * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

std::vector<Eigen::MatrixXd> path_quantiles(const std::vector<Eigen::MatrixXd>& draws, const std::vector<double>& probs) {
  if (draws.empty()) throw InputError("no draws to summarize");
  const Eigen::Index H = draws.front().rows();
  const Eigen::Index n = draws.front().cols();
  std::vector<Eigen::MatrixXd> out(probs.size(), Eigen::MatrixXd(H, n));
  std::vector<double> buf(draws.size());
  for (Eigen::Index h = 0; h < H; ++h) {
    for (Eigen::Index i = 0; i < n; ++i) {
      for (std::size_t d = 0; d < draws.size(); ++d) buf[d] = draws[d](h, i);
      std::sort(buf.begin(), buf.end());
      for (std::size_t q = 0; q < probs.size(); ++q) {
        const double pos = probs[q] * static_cast<double>(buf.size() - 1);
        const auto lo = static_cast<std::size_t>(std::floor(pos));
        const std::size_t hi = std::min(lo + 1, buf.size() - 1);
        out[q](h, i) = buf[lo] + (pos - static_cast<double>(lo)) * (buf[hi] - buf[lo]);
      }
    }
  }
  return out;
}

std::vector<Eigen::MatrixXd> cloud_quantiles(const std::vector<Trajectory>& clouds, const std::vector<double>& probs) {
  if (clouds.empty() || clouds.front().particles.empty()) throw InputError("no particle clouds to summarize");
  const auto H = static_cast<Eigen::Index>(clouds.front().particles.size());
  const Eigen::Index n = clouds.front().particles.front().rows();
  const double per_draw = 1.0 / static_cast<double>(clouds.size());
  std::vector<Eigen::MatrixXd> out(probs.size(), Eigen::MatrixXd(H, n));
  std::vector<std::pair<double, double>> pts;
  for (Eigen::Index h = 0; h < H; ++h) {
    for (Eigen::Index i = 0; i < n; ++i) {
      pts.clear();
      for (const auto& c : clouds) {
        const auto& y = c.particles[static_cast<std::size_t>(h)];
        for (Eigen::Index v = 0; v < y.cols(); ++v) {
          const double w = c.smoothing(h, v) * per_draw;
          if (w > 0.0) pts.emplace_back(y(i, v), w);
        }
      }
      std::sort(pts.begin(), pts.end());
      for (std::size_t q = 0; q < probs.size(); ++q) {
        double cum = 0.0;
        double value = pts.back().first;
        for (const auto& [x, w] : pts) {
          cum += w;
          if (cum >= probs[q]) {
            value = x;
            break;
          }
        }
        out[q](h, i) = value;
      }
    }
  }
  return out;
}

}  // namespace bscen
