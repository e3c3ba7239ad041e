#include "bscen/girf.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <iostream>
#include <mutex>
#include <thread>

#include "bscen/errors.hpp"

namespace bscen {

void GirfSpec::validate(Eigen::Index n, Eigen::Index T) const {
  if (H < 1) throw InputError("GIRF horizon must be positive");
  if (sizes.empty()) throw InputError("GIRF needs at least one shock size");
  if (variant != GirfVariant::ugirf && (shock < 0 || shock >= n)) {
    throw InputError("shock index " + std::to_string(shock) + " out of range");
  }
  for (Eigen::Index o : origins) {
    if (o < -1 || o >= T) throw InputError("GIRF origin " + std::to_string(o) + " outside the sample");
  }
  if (!cumulate.empty() && static_cast<Eigen::Index>(cumulate.size()) != n) {
    throw InputError("cumulation flags need one entry per variable");
  }
  if (variant == GirfVariant::rgirf) {
    if (restricted.rows() > 0 && restricted.cols() != n) throw InputError("restricted rows must have one weight per variable");
    for (Eigen::Index d : driving) {
      if (d < 0 || d >= n) throw InputError("driving shock index out of range");
    }
  }
  if (variant == GirfVariant::ugirf) {
    if (scenario.horizon != H) throw InputError("scenario restrictions must cover the GIRF horizon");
    if (!baseline.entries.empty() && baseline.horizon != H) throw InputError("baseline restrictions must cover the GIRF horizon");
  }
  if (threads < 1) throw InputError("thread count must be positive");
}

std::vector<Eigen::MatrixXd> GirfResult::quantiles(std::size_t size_index, const std::vector<double>& probs) const {
  return path_quantiles(averaged.at(size_index), probs);
}

Eigen::MatrixXd GirfResult::mean(std::size_t size_index) const {
  const auto& d = averaged.at(size_index);
  if (d.empty()) throw InputError("GIRF result holds no draws");
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(d.front().rows(), d.front().cols());
  for (const auto& x : d) m += x;
  return m / static_cast<double>(d.size());
}

Eigen::MatrixXd GirfResult::standard_error(std::size_t size_index) const {
  const auto& d = averaged.at(size_index);
  const Eigen::MatrixXd m = mean(size_index);
  Eigen::MatrixXd ss = Eigen::MatrixXd::Zero(m.rows(), m.cols());
  for (const auto& x : d) ss += (x - m).cwiseAbs2();
  const double N = static_cast<double>(d.size());
  return (ss / std::max(N - 1.0, 1.0) / N).cwiseSqrt();
}

RestrictionSet sgirf_restrictions(Eigen::Index n, Eigen::Index j, double d0, double d, int H, bool expectation,
                                  double hard, bool free_others) {
  RestrictionSet set = RestrictionSet::none(H);
  if (free_others && !expectation) {
    set.at(1).shock.append(Eigen::RowVectorXd::Unit(n, j), d0 + d, hard);
  } else {
    set.at(1).shock = structural_impact(n, j, d0, d, expectation, hard);
  }
  if (expectation) {
    for (int h = 2; h <= H; ++h) {
      set.at(h).shock.R = Eigen::MatrixXd::Identity(n, n);
      set.at(h).shock.r = Eigen::VectorXd::Zero(n);
      set.at(h).shock.Omega = Eigen::MatrixXd::Identity(n, n) * hard;
    }
  }
  return set;
}

Eigen::MatrixXd cumulate_responses(const Eigen::MatrixXd& delta, const std::vector<bool>& flags) {
  Eigen::MatrixXd out = delta;
  for (Eigen::Index i = 0; i < out.cols(); ++i) {
    if (static_cast<std::size_t>(i) >= flags.size() || !flags[static_cast<std::size_t>(i)]) continue;
    for (Eigen::Index h = 1; h < out.rows(); ++h) out(h, i) += out(h - 1, i);
  }
  return out;
}

namespace {

Eigen::MatrixXd recursive_response(const ForecastModel& model, const Eigen::VectorXd& x, Eigen::Index j, double d0,
                                   double d, int H, bool shared, bool expectation, Rng& rng) {
  const Eigen::Index n = model.n();
  const Eigen::MatrixXd& Hinv = model.factor.H_inv;
  Eigen::VectorXd ub = expectation ? Eigen::VectorXd::Zero(n) : rng.normal_vector(n);
  ub[j] = d0;
  Eigen::VectorXd us = ub;
  us[j] = d0 + d;

  Eigen::MatrixXd delta(H, n);
  const Eigen::VectorXd mu = model.mean->predict(x);
  Eigen::VectorXd xs = shift_lag_stack(x, mu + Hinv * us);
  Eigen::VectorXd xb = shift_lag_stack(x, mu + Hinv * ub);
  delta.row(0) = (Hinv * (us - ub)).transpose();
  for (int h = 2; h <= H; ++h) {
    const Eigen::VectorXd Fs = model.mean->predict(xs);
    const Eigen::VectorXd Fb = model.mean->predict(xb);
    delta.row(h - 1) = (Fs - Fb).transpose();
    if (expectation) {
      us.setZero();
      ub.setZero();
    } else if (shared) {
      us = rng.normal_vector(n);
      ub = us;
    } else {
      us = rng.normal_vector(n);
      ub = rng.normal_vector(n);
    }
    xs = shift_lag_stack(xs, Fs + Hinv * us);
    xb = shift_lag_stack(xb, Fb + Hinv * ub);
  }
  return delta;
}

bool is_driving(const GirfSpec& spec, Eigen::Index i) {
  return std::find(spec.driving.begin(), spec.driving.end(), i) != spec.driving.end();
}

// Shock restrictions of a restricted GIRF. In expectation mode the non-driving
// shocks are fixed at zero while the driving shocks stay free to meet the
// observable targets.
RestrictionSet rgirf_restrictions(const GirfSpec& spec, Eigen::Index n, double d) {
  RestrictionSet set = RestrictionSet::none(spec.H);
  if (spec.expectation) {
    RestrictionBlock impact;
    impact.append(Eigen::RowVectorXd::Unit(n, spec.shock), spec.d0 + d, spec.hard_variance);
    for (Eigen::Index i = 0; i < n; ++i) {
      if (i != spec.shock && !is_driving(spec, i)) impact.append(Eigen::RowVectorXd::Unit(n, i), 0.0, spec.hard_variance);
    }
    set.at(1).shock = impact;
  } else if (spec.free_other_shocks) {
    set.at(1).shock.append(Eigen::RowVectorXd::Unit(n, spec.shock), spec.d0 + d, spec.hard_variance);
  } else {
    set.at(1).shock = structural_impact(n, spec.shock, spec.d0, d, false, spec.hard_variance);
  }
  if (spec.pin_non_driving || spec.expectation) {
    const RestrictionBlock later =
        pin_non_driving(n, spec.driving, spec.expectation ? spec.hard_variance : spec.non_driving_variance);
    if (!later.empty()) {
      for (int h = 2; h <= spec.H; ++h) set.at(h).shock = later;
    }
  }
  return set;
}

}  // namespace

struct GirfEngine::OriginState {
  Eigen::Index tau = 0;
  Eigen::VectorXd x_init;
  Eigen::VectorXd last;
  std::unique_ptr<ConditionalForecaster> baseline;
  std::vector<ConditionalForecaster> scenario;
};

GirfEngine::GirfEngine(GirfSpec spec, const Panel& panel, PgasOptions options, std::uint64_t seed)
    : spec_(std::move(spec)), panel_(&panel), options_(options), seed_(seed) {
  if (spec_.origins.empty()) spec_.origins.push_back(panel.T() - 1);
  if (spec_.variant == GirfVariant::ugirf) {
    spec_.sizes = {1.0};
    spec_.scale_by_size = false;
  }
  if (spec_.variant == GirfVariant::rgirf && spec_.driving.empty()) {
    for (Eigen::Index i = 0; i < spec_.restricted.cols(); ++i) {
      if ((spec_.restricted.col(i).array() != 0.0).any()) spec_.driving.push_back(i);
    }
  }
  spec_.validate(panel.n(), panel.T());
  options_.keep_particles = false;

  const Eigen::MatrixXd all = panel.full_y();
  for (Eigen::Index tau : spec_.origins) {
    auto st = std::make_unique<OriginState>();
    st->tau = tau;
    st->x_init = panel.lag_stack(tau);
    st->last = all.row(tau + panel.p).transpose();
    st->baseline = std::make_unique<ConditionalForecaster>(options_, spec_.H);
    st->scenario.assign(spec_.sizes.size(), ConditionalForecaster(options_, spec_.H));
    origins_.push_back(std::move(st));
  }

  result_.sizes = spec_.sizes;
  result_.origins = spec_.origins;
  result_.H = spec_.H;
  result_.n = panel.n();
  result_.scaled = spec_.scale_by_size;
  result_.cumulative = !spec_.cumulate.empty();
  result_.averaged.resize(spec_.sizes.size());
  result_.violation.resize(spec_.sizes.size());
  if (spec_.keep_origins) {
    result_.per_origin.assign(spec_.sizes.size(), std::vector<std::vector<Eigen::MatrixXd>>(spec_.origins.size()));
  }
}

GirfEngine::~GirfEngine() = default;
GirfEngine::GirfEngine(GirfEngine&&) noexcept = default;
GirfEngine& GirfEngine::operator=(GirfEngine&&) noexcept = default;

void GirfEngine::process_origin(std::size_t o, const ForecastModel& model, int draw,
                                std::vector<Eigen::MatrixXd>& delta, std::vector<double>& violation) {
  OriginState& st = *origins_[o];
  const Eigen::Index n = model.n();
  const int H = spec_.H;
  const std::uint64_t seed = derive_seed(seed_, static_cast<std::uint64_t>(st.tau + 1), static_cast<std::uint64_t>(draw));
  const std::size_t S = spec_.sizes.size();

  if (spec_.mode == GirfMode::recursive && spec_.variant == GirfVariant::sgirf) {
    for (std::size_t s = 0; s < S; ++s) {
      Rng rng(seed);
      delta[s] = recursive_response(model, st.x_init, spec_.shock, spec_.d0, spec_.sizes[s], H, spec_.shared_noise,
                                    spec_.expectation, rng);
    }
    return;
  }

  // A reference carried over from the previous parameter draw shifts differently
  // under each shock size; starting every draw from a reference-free pass on the
  // shared seed keeps scenario and baseline paths on common noise.
  st.baseline->reset();
  for (auto& fc : st.scenario) fc.reset();

  const bool unrestricted = spec_.variant == GirfVariant::rgirf && spec_.restricted.rows() == 0;
  switch (unrestricted ? GirfVariant::sgirf : spec_.variant) {
    case GirfVariant::ugirf: {
      const RestrictionSet scen = spec_.scenario.resolve(panel_->names, model.Sigma, st.last);
      const RestrictionSet base = spec_.baseline.entries.empty() ? RestrictionSet::none(H)
                                                                 : spec_.baseline.resolve(panel_->names, model.Sigma, st.last);
      Rng rb(seed);
      const Trajectory tb = st.baseline->draw(model, st.x_init, base, rb);
      Rng rs(seed);
      const Trajectory ts = st.scenario[0].draw(model, st.x_init, scen, rs);
      delta[0] = ts.smoothed_mean - tb.smoothed_mean;
      return;
    }
    case GirfVariant::sgirf: {
      Rng rb(seed);
      const RestrictionSet base = sgirf_restrictions(n, spec_.shock, spec_.d0, 0.0, H, spec_.expectation, spec_.hard_variance,
                                                     spec_.free_other_shocks);
      const Trajectory tb = st.baseline->draw(model, st.x_init, base, rb);
      for (std::size_t s = 0; s < S; ++s) {
        Rng rs(seed);
        const RestrictionSet scen =
            sgirf_restrictions(n, spec_.shock, spec_.d0, spec_.sizes[s], H, spec_.expectation, spec_.hard_variance,
                               spec_.free_other_shocks);
        const Trajectory ts = st.scenario[s].draw(model, st.x_init, scen, rs);
        delta[s] = ts.smoothed_mean - tb.smoothed_mean;
      }
      return;
    }
    case GirfVariant::rgirf: {
      Rng rb(seed);
      const Trajectory tb = st.baseline->draw(model, st.x_init, rgirf_restrictions(spec_, n, 0.0), rb);
      for (std::size_t s = 0; s < S; ++s) {
        RestrictionSet scen = rgirf_restrictions(spec_, n, spec_.sizes[s]);
        for (int h = 1; h <= H; ++h) {
          const Eigen::VectorXd target = spec_.restricted * tb.path.row(h - 1).transpose();
          for (Eigen::Index r = 0; r < spec_.restricted.rows(); ++r) {
            scen.at(h).obs.append(spec_.restricted.row(r), target[r], spec_.hard_variance);
          }
        }
        Rng rs(seed);
        const Trajectory ts = st.scenario[s].draw(model, st.x_init, scen, rs);
        delta[s] = ts.smoothed_mean - tb.smoothed_mean;
        double v = 0.0;
        for (int h = 0; h < H; ++h) {
          v = std::max(v, (spec_.restricted * (ts.path.row(h) - tb.path.row(h)).transpose()).cwiseAbs().maxCoeff());
        }
        violation[s] = std::max(violation[s], v);
      }
      return;
    }
  }
}

void GirfEngine::process(const ForecastModel& model) {
  const int draw = draw_++;
  const std::size_t O = origins_.size();
  const std::size_t S = spec_.sizes.size();
  std::vector<std::vector<Eigen::MatrixXd>> delta(O, std::vector<Eigen::MatrixXd>(S));
  std::vector<std::vector<double>> viol(O, std::vector<double>(S, 0.0));

  const int workers = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(spec_.threads), O));
  if (workers <= 1) {
    for (std::size_t o = 0; o < O; ++o) process_origin(o, model, draw, delta[o], viol[o]);
  } else {
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t o = next++; o < O; o = next++) {
          try {
            process_origin(o, model, draw, delta[o], viol[o]);
          } catch (...) {
            std::lock_guard lock(failure_mutex);
            if (!failure) failure = std::current_exception();
          }
        }
      });
    }
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
  }

  for (std::size_t s = 0; s < S; ++s) {
    const double d = spec_.sizes[s];
    const double factor = spec_.scale_by_size && d != 0.0 ? 1.0 / d : 1.0;
    Eigen::MatrixXd avg = Eigen::MatrixXd::Zero(spec_.H, result_.n);
    double worst = 0.0;
    for (std::size_t o = 0; o < O; ++o) {
      Eigen::MatrixXd r = delta[o][s] * factor;
      if (!spec_.cumulate.empty()) r = cumulate_responses(r, spec_.cumulate);
      avg += r;
      worst = std::max(worst, viol[o][s]);
      if (spec_.keep_origins) result_.per_origin[s][o].push_back(std::move(r));
    }
    result_.averaged[s].push_back(avg / static_cast<double>(O));
    result_.violation[s].push_back(worst);
  }
}

GirfResult GirfEngine::result() const { return result_; }

namespace {

GirfResult run_engine(GirfSpec spec, const std::vector<ForecastModel>& models, const Panel& panel,
                      const PgasOptions& options, std::uint64_t seed) {
  GirfEngine engine(std::move(spec), panel, options, seed);
  for (const auto& m : models) engine.process(m);
  return engine.result();
}

}  // namespace

GirfResult ugirf(const GirfSpec& spec, const std::vector<ForecastModel>& models, const Panel& panel,
                 const PgasOptions& options, std::uint64_t seed) {
  GirfSpec s = spec;
  s.variant = GirfVariant::ugirf;
  s.mode = GirfMode::pgas;
  return run_engine(std::move(s), models, panel, options, seed);
}

GirfResult sgirf(const GirfSpec& spec, const std::vector<ForecastModel>& models, const Panel& panel,
                 const PgasOptions& options, std::uint64_t seed) {
  GirfSpec s = spec;
  s.variant = GirfVariant::sgirf;
  s.mode = GirfMode::pgas;
  return run_engine(std::move(s), models, panel, options, seed);
}

GirfResult sgirf_recursive(const GirfSpec& spec, const std::vector<ForecastModel>& models, const Panel& panel,
                           std::uint64_t seed) {
  GirfSpec s = spec;
  s.variant = GirfVariant::sgirf;
  s.mode = GirfMode::recursive;
  return run_engine(std::move(s), models, panel, PgasOptions{}, seed);
}

GirfResult rgirf(const GirfSpec& spec, const std::vector<ForecastModel>& models, const Panel& panel,
                 const PgasOptions& options, std::uint64_t seed) {
  GirfSpec s = spec;
  s.variant = GirfVariant::rgirf;
  s.mode = GirfMode::pgas;
  return run_engine(std::move(s), models, panel, options, seed);
}

GirfResult average_over_time(const GirfResult& result) {
  if (result.per_origin.empty()) throw InputError("time averaging needs per-origin responses");
  GirfResult out = result;
  if (result.origins.size() == 1) {
    std::cerr << "warning: time averaging over a single origin leaves the responses unchanged\n";
  }
  for (std::size_t s = 0; s < result.per_origin.size(); ++s) {
    const auto& po = result.per_origin[s];
    const std::size_t draws = po.empty() ? 0 : po.front().size();
    out.averaged[s].assign(draws, Eigen::MatrixXd::Zero(result.H, result.n));
    for (std::size_t m = 0; m < draws; ++m) {
      for (const auto& origin : po) out.averaged[s][m] += origin[m];
      out.averaged[s][m] /= static_cast<double>(po.size());
    }
  }
  return out;
}

}  // namespace bscen
