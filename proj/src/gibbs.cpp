#include "bscen/gibbs.hpp"

#include <cmath>
#include <iostream>

#include "bscen/errors.hpp"

namespace bscen {

void SamplerConfig::validate() const {
  if (n_burn < 0) throw InputError("n_burn must be non-negative");
  if (n_save < 1) throw InputError("n_save must be at least 1");
  if (thin < 1) throw InputError("thin must be at least 1");
  if (backend == Backend::bart) {
    if (trees < 1) throw InputError("tree count must be positive");
    tree_prior.validate();
    if (!(leaf_k > 0.0)) throw InputError("leaf prior constant must be positive");
  }
  if (!(intercept_variance > 0.0)) throw InputError("intercept variance must be positive");
  if (!(nu > 0.0) || !(A > 0.0)) throw InputError("covariance prior parameters must be positive");
  if (s_bar < 1) throw InputError("s_bar must be at least 1");
  if (!(a_p > 0.0) || !(b_p > 0.0)) throw InputError("outlier Beta prior parameters must be positive");
}

ConditionalMoments conditional_equation_moments(Eigen::Index i, const Eigen::VectorXd& y, const Eigen::VectorXd& F,
                                                const Eigen::MatrixXd& Sigma_t) {
  if (i < 0 || i >= Sigma_t.rows()) throw InputError("equation index out of range");
  Eigen::LLT<Eigen::MatrixXd> llt(Sigma_t);
  if (llt.info() != Eigen::Success) throw NumericalError("Sigma_t is not positive definite");
  const Eigen::VectorXd q = llt.solve(Eigen::VectorXd::Unit(Sigma_t.rows(), i));  // row i of the precision
  const Eigen::VectorXd e = y - F;
  ConditionalMoments out;
  out.varsigma2 = 1.0 / q[i];
  double acc = 0.0;
  for (Eigen::Index j = 0; j < e.size(); ++j)
    if (j != i) acc += q[j] * e[j];
  out.mu_tilde = -out.varsigma2 * acc;
  return out;
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> conditional_equation_moments(Eigen::Index i, const Eigen::MatrixXd& Y,
                                                                         const Eigen::MatrixXd& fit,
                                                                         const Eigen::MatrixXd& precision,
                                                                         const Eigen::VectorXd& scale) {
  const double qii = precision(i, i);
  Eigen::RowVectorXd q = precision.row(i);
  q[i] = 0.0;
  const Eigen::VectorXd mu = -((Y - fit) * q.transpose()) / qii;
  const Eigen::VectorXd var = scale.array().square() / qii;
  return {mu, var};
}

std::shared_ptr<const MeanFunction> ModelState::mean_function() const {
  if (const auto* lin = std::get_if<LinearBackend>(&mean)) return std::make_shared<LinearMean>(lin->coef);
  const auto& bart = std::get<BartBackend>(mean);
  return std::make_shared<ForestMean>(bart.forests, static_cast<Eigen::Index>(bart.ranges.lo.size()));
}

ForecastModel ModelState::snapshot() const {
  return ForecastModel::make(mean_function(), cov.Sigma, outlier.p_out, config.heteroskedastic ? outlier.s_bar : 1);
}

Eigen::VectorXd ModelState::scales(Eigen::Index T) const {
  Eigen::VectorXd s = Eigen::VectorXd::Ones(T);
  const auto observed = std::min<Eigen::Index>(T, static_cast<Eigen::Index>(outlier.s.size()));
  for (Eigen::Index t = 0; t < observed; ++t) s[t] = outlier.s[static_cast<std::size_t>(t)];
  return s;
}

namespace {

Eigen::MatrixXd initial_sigma(const Eigen::MatrixXd& Y) {
  const Eigen::Index n = Y.cols();
  if (Y.rows() > n + 1) {
    const Eigen::MatrixXd c = Y.rowwise() - Y.colwise().mean();
    Eigen::MatrixXd S = c.transpose() * c / static_cast<double>(Y.rows() - 1);
    if (Eigen::LLT<Eigen::MatrixXd>(S).info() == Eigen::Success) return S;
    return Eigen::MatrixXd(S.diagonal().cwiseMax(1e-6).asDiagonal());
  }
  return Eigen::MatrixXd::Identity(n, n);
}

}  // namespace

void refresh_fit(ModelState& state, const Eigen::MatrixXd& X) {
  const Eigen::Index T = X.rows();
  if (auto* lin = std::get_if<LinearBackend>(&state.mean)) {
    state.fit = X * lin->coef.A.transpose();
    if (lin->coef.has_intercept) state.fit.rowwise() += lin->coef.intercept.transpose();
    return;
  }
  auto& bart = std::get<BartBackend>(state.mean);
  state.fit.resize(T, static_cast<Eigen::Index>(bart.forests.size()));
  for (std::size_t i = 0; i < bart.forests.size(); ++i) {
    bart.forests[i].refresh(X);
    state.fit.col(static_cast<Eigen::Index>(i)) = bart.forests[i].fit;
  }
}

ModelState initialize_state(const SamplerConfig& config, const Panel& panel) {
  config.validate();
  const Eigen::Index n = panel.n();
  const Eigen::Index T = panel.T();
  if (T < 1) throw InputError("panel has no observations");

  ModelState st;
  st.config = config;
  if (config.backend == Backend::linear) {
    st.mean = LinearBackend{VarCoefficients::zeros(n, panel.k(), config.intercept), HorseshoeState::initial(n, panel.k())};
  } else {
    BartBackend b;
    b.ranges = SplitRanges::from_design(panel.x);
    for (Eigen::Index i = 0; i < n; ++i) {
      b.forests.push_back(Forest::stumps(config.trees, T));
      b.leaf_priors.push_back(
          LeafPrior::calibrate(panel.y.col(i).minCoeff(), panel.y.col(i).maxCoeff(), config.trees, config.leaf_k));
    }
    st.mean = std::move(b);
  }
  st.cov = CovarianceState::initial(initial_sigma(panel.y), config.nu, config.A, config.hyper_shape);
  st.outlier = OutlierState::initial(T, config.s_bar, config.a_p, config.b_p);
  if (!config.heteroskedastic) st.outlier.p_out = 0.0;
  refresh_fit(st, panel.x);
  return st;
}

void gibbs_sweep(ModelState& state, const Panel& panel, Rng& rng) {
  const Eigen::MatrixXd& X = panel.x;
  const Eigen::MatrixXd& Y = panel.y;
  const Eigen::Index T = Y.rows();
  const Eigen::Index n = Y.cols();
  if (n != state.cov.n()) throw InputError("panel width does not match the model state");
  if (state.fit.rows() != T) refresh_fit(state, X);

  const Eigen::VectorXd s = state.scales(T);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto [mu, var] = conditional_equation_moments(i, Y, state.fit, state.cov.precision, s);
    const Eigen::VectorXd target = Y.col(i) - mu;
    if (auto* lin = std::get_if<LinearBackend>(&state.mean)) {
      sample_var_equation(i, X, target, var, lin->coef, lin->shrinkage, rng, state.config.intercept_variance);
      state.fit.col(i) = X * lin->coef.A.row(i).transpose();
      if (lin->coef.has_intercept) state.fit.col(i).array() += lin->coef.intercept[i];
    } else {
      auto& bart = std::get<BartBackend>(state.mean);
      const auto iu = static_cast<std::size_t>(i);
      update_forest(bart.forests[iu], X, target, var, state.config.tree_prior, bart.leaf_priors[iu], bart.ranges, rng,
                    bart.stats);
      state.fit.col(i) = bart.forests[iu].fit;
    }
  }

  const Eigen::MatrixXd resid = Y - state.fit;
  const Eigen::MatrixXd scaled = s.cwiseInverse().asDiagonal() * resid;
  sample_sigma(scaled, state.cov, rng);
  sample_scale_hyper(state.cov, T, rng);

  if (state.config.heteroskedastic) {
    const auto observed = std::min<Eigen::Index>(T, static_cast<Eigen::Index>(state.outlier.s.size()));
    auto drawn = sample_outliers(resid.topRows(observed), state.cov.Sigma, state.outlier.p_out, state.outlier.s_bar, rng);
    std::copy(drawn.begin(), drawn.end(), state.outlier.s.begin());
    state.outlier.p_out = sample_outlier_prob(state.outlier.s, state.outlier.a_p, state.outlier.b_p, rng);
  }
  ++state.sweep_index;
}

Panel augment_with_restricted_draws(const Panel& panel, const Eigen::MatrixXd& path) {
  if (path.rows() == 0) return panel;
  if (path.cols() != panel.n()) throw InputError("restricted path width does not match the panel");
  Panel out = panel;
  const Eigen::Index T = panel.T();
  const Eigen::Index H = path.rows();
  out.y.conservativeResize(T + H, Eigen::NoChange);
  out.y.bottomRows(H) = path;
  out.x.conservativeResize(T + H, Eigen::NoChange);
  Eigen::VectorXd x = panel.lag_stack(T - 1);
  for (Eigen::Index h = 0; h < H; ++h) {
    out.x.row(T + h) = x.transpose();
    x = shift_lag_stack(x, path.row(h).transpose());
  }
  Quarter d = panel.dates.empty() ? Quarter{} : panel.dates.back();
  for (Eigen::Index h = 0; h < H; ++h) {
    d = d.next();
    out.dates.push_back(d);
  }
  return out;
}

namespace {

template <typename E>
[[noreturn]] void rethrow_at(const E& e, long sweep) {
  throw E("sweep " + std::to_string(sweep) + ": " + e.what());
}

}  // namespace

ModelState run_chain(const SamplerConfig& config, const Panel& panel, const ChainTask& task) {
  ModelState state = initialize_state(config, panel);
  Rng rng(config.seed);
  const long total = static_cast<long>(config.n_burn) + static_cast<long>(config.n_save) * config.thin;
  Panel augmented;
  const Panel* current = &panel;
  int saved = 0;
  for (long sweep = 1; sweep <= total; ++sweep) {
    try {
      gibbs_sweep(state, *current, rng);
      if (task.augment) {
        augmented = augment_with_restricted_draws(panel, task.augment(state, rng));
        current = &augmented;
      }
      const long after_burn = sweep - config.n_burn;
      if (after_burn > 0 && after_burn % config.thin == 0) {
        if (task.on_draw) task.on_draw(saved, state, rng);
        ++saved;
      }
    } catch (const NumericalError& e) {
      rethrow_at(e, sweep);
    } catch (const DomainError& e) {
      rethrow_at(e, sweep);
    } catch (const InputError& e) {
      rethrow_at(e, sweep);
    }
    if (config.progress && (sweep % std::max(1L, total / 20) == 0 || sweep == total)) {
      std::cerr << "sweep " << sweep << "/" << total << "\n";
    }
  }
  return state;
}

}  // namespace bscen
