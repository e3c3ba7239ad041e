#include "commands.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "bscen/errors.hpp"
#include "bscen/io.hpp"
#include "bscen/linear_mean.hpp"
#include "bscen/linear_oracle.hpp"
#include "bscen/verification.hpp"

#ifndef BSCEN_VERSION
#define BSCEN_VERSION "unknown"
#endif

namespace bscen::cli {

namespace {

std::string fmt(double v) {
  if (v == 0.0) return "0";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string quantile_label(double q) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "q%g", std::round(q * 1e8) / 1e6);
  return buf;
}

class Csv {
 public:
  explicit Csv(const std::vector<std::string>& header) { line(header); }

  void line(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << cells[i];
    out_ << '\n';
  }

  std::string str() const { return out_.str(); }

 private:
  std::ostringstream out_;
};

struct Outputs {
  std::filesystem::path dir;
  std::vector<std::string> files;

  void write(const std::string& name, const std::string& text) {
    write_text_file(dir / name, text);
    files.push_back(name);
  }
};

struct Run {
  std::string command;
  RunConfig config;
  std::uint64_t seed = 1;
  int chains = 1;
  int threads = 1;
  bool dump_draws = false;
  Outputs out;
};

std::uint64_t chain_seed(std::uint64_t base, int chain) {
  return chain == 0 ? base : derive_seed(base, static_cast<std::uint64_t>(chain), 0);
}

// Runs job(chain) for every chain on up to `threads` workers.
template <typename Job>
void for_each_chain(int chains, int threads, Job job) {
  const int workers = std::max(1, std::min(chains, threads));
  if (workers == 1) {
    for (int c = 0; c < chains; ++c) job(c);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex mutex;
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (int c = next++; c < chains; c = next++) {
        try {
          job(c);
        } catch (...) {
          std::lock_guard lock(mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

Panel load_panel(const RunConfig& cfg) {
  if (cfg.data.path.empty()) throw InputError("config: data.path is required");
  if (!std::filesystem::exists(cfg.data.path)) throw InputError("data file not found: " + cfg.data.path.string());
  return load_csv(cfg.data.path, cfg.data.transforms, cfg.data.p);
}

SamplerConfig chain_config(const Run& run, int chain) {
  SamplerConfig s = run.config.sampler;
  s.seed = chain_seed(run.seed, chain);
  s.progress = s.progress && run.chains == 1;
  return s;
}

std::vector<std::string> regressor_names(const Panel& panel, bool intercept) {
  std::vector<std::string> out;
  for (int l = 1; l <= panel.p; ++l) {
    for (const auto& name : panel.names) out.push_back(name + "_L" + std::to_string(l));
  }
  if (intercept) out.push_back("const");
  return out;
}

void write_manifest(Run& run, const nlohmann::json& extra) {
  nlohmann::json m;
  m["command"] = run.command;
  m["version"] = BSCEN_VERSION;
  m["config_hash"] = "fnv1a64:" + fnv1a_hex(run.config.canonical);
  m["seed"] = run.seed;
  m["chains"] = run.chains;
  m["eigen"] = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
               std::to_string(EIGEN_MINOR_VERSION);
#if defined(__clang__)
  m["compiler"] = std::string("clang ") + __clang_version__;
#elif defined(__GNUC__)
  m["compiler"] = std::string("gcc ") + __VERSION__;
#endif
  for (auto it = extra.begin(); it != extra.end(); ++it) m[it.key()] = it.value();
  std::vector<std::string> files = run.out.files;
  std::sort(files.begin(), files.end());
  m["outputs"] = files;
  write_text_file(run.out.dir / "manifest.json", m.dump(2) + "\n");
}

// ---------------------------------------------------------------- estimate

struct EstimateChain {
  std::vector<Eigen::MatrixXd> coef;   // linear: n x (k [+1])
  std::vector<Eigen::MatrixXd> sigma;  // n x n
  Eigen::VectorXd outlier_hits;        // per t
  Eigen::VectorXd scale_sum;           // per t
  Eigen::MatrixXd resid_stats;         // n x 3: sum of mean, sd, rmse over draws
  ForestSweepStats stats;
  std::string checkpoint;
  int trees = 0;
};

void cmd_estimate(Run& run) {
  const Panel panel = load_panel(run.config);
  const Eigen::Index T = panel.T(), n = panel.n();
  std::vector<EstimateChain> chains(static_cast<std::size_t>(run.chains));

  for_each_chain(run.chains, run.threads, [&](int c) {
    EstimateChain& ec = chains[static_cast<std::size_t>(c)];
    ec.outlier_hits = Eigen::VectorXd::Zero(T);
    ec.scale_sum = Eigen::VectorXd::Zero(T);
    ec.resid_stats = Eigen::MatrixXd::Zero(n, 3);
    ChainTask task;
    task.on_draw = [&](int, const ModelState& st, Rng&) {
      if (const auto* lin = std::get_if<LinearBackend>(&st.mean)) {
        const auto& coef = lin->coef;
        Eigen::MatrixXd m(n, coef.A.cols() + (coef.has_intercept ? 1 : 0));
        m.leftCols(coef.A.cols()) = coef.A;
        if (coef.has_intercept) m.col(coef.A.cols()) = coef.intercept;
        ec.coef.push_back(std::move(m));
      }
      ec.sigma.push_back(st.cov.Sigma);
      const Eigen::VectorXd s = st.scales(T);
      for (Eigen::Index t = 0; t < T; ++t) {
        if (s[t] != 1.0) ec.outlier_hits[t] += 1.0;
        ec.scale_sum[t] += s[t];
      }
      const Eigen::MatrixXd resid = panel.y - st.fit.topRows(T);
      for (Eigen::Index i = 0; i < n; ++i) {
        const double mean = resid.col(i).mean();
        const double sd = std::sqrt((resid.col(i).array() - mean).square().sum() / std::max<double>(1.0, static_cast<double>(T - 1)));
        ec.resid_stats(i, 0) += mean;
        ec.resid_stats(i, 1) += sd;
        ec.resid_stats(i, 2) += std::sqrt(resid.col(i).squaredNorm() / static_cast<double>(T));
      }
    };
    const ModelState final_state = run_chain(chain_config(run, c), panel, task);
    if (const auto* bart = std::get_if<BartBackend>(&final_state.mean)) {
      ec.stats = bart->stats;
      ec.trees = bart->forests.empty() ? 0 : bart->forests.front().size();
    }
    ec.checkpoint = save_checkpoint(final_state);
  });

  std::vector<Eigen::MatrixXd> coef, sigma;
  Eigen::VectorXd hits = Eigen::VectorXd::Zero(T), scale = Eigen::VectorXd::Zero(T);
  Eigen::MatrixXd resid = Eigen::MatrixXd::Zero(n, 3);
  ForestSweepStats stats;
  for (const auto& ec : chains) {
    coef.insert(coef.end(), ec.coef.begin(), ec.coef.end());
    sigma.insert(sigma.end(), ec.sigma.begin(), ec.sigma.end());
    hits += ec.outlier_hits;
    scale += ec.scale_sum;
    resid += ec.resid_stats;
    stats += ec.stats;
  }
  const double draws = static_cast<double>(sigma.size());
  const std::vector<double> probs{0.025, 0.5, 0.975};

  if (!coef.empty()) {
    const auto names = regressor_names(panel, run.config.sampler.intercept);
    const auto q = path_quantiles(coef, probs);
    Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(coef[0].rows(), coef[0].cols());
    for (const auto& m : coef) mean += m;
    mean /= draws;
    Eigen::MatrixXd var = Eigen::MatrixXd::Zero(mean.rows(), mean.cols());
    for (const auto& m : coef) var += (m - mean).cwiseAbs2();
    var /= std::max(1.0, draws - 1.0);
    Csv csv({"equation", "regressor", "mean", "sd", "q2.5", "q50", "q97.5"});
    for (Eigen::Index i = 0; i < mean.rows(); ++i) {
      for (Eigen::Index j = 0; j < mean.cols(); ++j) {
        csv.line({panel.names[static_cast<std::size_t>(i)], names[static_cast<std::size_t>(j)], fmt(mean(i, j)),
                  fmt(std::sqrt(var(i, j))), fmt(q[0](i, j)), fmt(q[1](i, j)), fmt(q[2](i, j))});
      }
    }
    run.out.write("coefficients.csv", csv.str());
    if (run.dump_draws) {
      Csv d({"draw", "equation", "regressor", "value"});
      for (std::size_t m = 0; m < coef.size(); ++m) {
        for (Eigen::Index i = 0; i < coef[m].rows(); ++i) {
          for (Eigen::Index j = 0; j < coef[m].cols(); ++j) {
            d.line({std::to_string(m), panel.names[static_cast<std::size_t>(i)], names[static_cast<std::size_t>(j)], fmt(coef[m](i, j))});
          }
        }
      }
      run.out.write("coefficient_draws.csv", d.str());
    }
  }

  {
    const auto q = path_quantiles(sigma, probs);
    Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(n, n);
    for (const auto& m : sigma) mean += m;
    mean /= draws;
    Csv csv({"row", "col", "mean", "q2.5", "q50", "q97.5"});
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) {
        csv.line({panel.names[static_cast<std::size_t>(i)], panel.names[static_cast<std::size_t>(j)], fmt(mean(i, j)),
                  fmt(q[0](i, j)), fmt(q[1](i, j)), fmt(q[2](i, j))});
      }
    }
    run.out.write("sigma.csv", csv.str());
    if (run.dump_draws) {
      Csv d({"draw", "row", "col", "value"});
      for (std::size_t m = 0; m < sigma.size(); ++m) {
        for (Eigen::Index i = 0; i < n; ++i) {
          for (Eigen::Index j = 0; j < n; ++j) {
            d.line({std::to_string(m), panel.names[static_cast<std::size_t>(i)], panel.names[static_cast<std::size_t>(j)], fmt(sigma[m](i, j))});
          }
        }
      }
      run.out.write("sigma_draws.csv", d.str());
    }
  }

  {
    Csv csv({"date", "prob_outlier", "mean_scale"});
    for (Eigen::Index t = 0; t < T; ++t) {
      csv.line({panel.dates[static_cast<std::size_t>(t)].str(), fmt(hits[t] / draws), fmt(scale[t] / draws)});
    }
    run.out.write("outliers.csv", csv.str());
  }
  {
    Csv csv({"variable", "mean", "sd", "rmse"});
    for (Eigen::Index i = 0; i < n; ++i) {
      csv.line({panel.names[static_cast<std::size_t>(i)], fmt(resid(i, 0) / draws), fmt(resid(i, 1) / draws), fmt(resid(i, 2) / draws)});
    }
    run.out.write("residuals.csv", csv.str());
  }
  nlohmann::json extra;
  extra["draws"] = sigma.size();
  extra["backend"] = run.config.sampler.backend == Backend::linear ? "linear" : "bart";
  if (run.config.sampler.backend == Backend::bart) {
    static const char* moves[] = {"grow", "prune", "change", "swap"};
    Csv csv({"move", "proposed", "accepted", "rate"});
    for (int m = 0; m < 4; ++m) {
      const auto p = stats.proposed[static_cast<std::size_t>(m)], a = stats.accepted[static_cast<std::size_t>(m)];
      csv.line({moves[m], std::to_string(p), std::to_string(a), fmt(p ? static_cast<double>(a) / static_cast<double>(p) : 0.0)});
    }
    csv.line({"all", std::to_string(stats.proposed[0] + stats.proposed[1] + stats.proposed[2] + stats.proposed[3]),
              std::to_string(stats.accepted[0] + stats.accepted[1] + stats.accepted[2] + stats.accepted[3]), fmt(stats.acceptance_rate())});
    run.out.write("bart_acceptance.csv", csv.str());
    extra["trees"] = chains.front().trees;
    extra["acceptance_rate"] = stats.acceptance_rate();
  }
  for (int c = 0; c < run.chains; ++c) {
    run.out.write(c == 0 ? "checkpoint.json" : "checkpoint_chain" + std::to_string(c) + ".json",
                  chains[static_cast<std::size_t>(c)].checkpoint);
  }
  write_manifest(run, extra);
}

// ---------------------------------------------------------------- forecast

struct ForecastChain {
  std::vector<Eigen::MatrixXd> paths;
  std::vector<Eigen::MatrixXd> smoothed;
  std::vector<std::vector<std::pair<double, double>>> gaps;  // per draw and observable row: |R y - r| and its z-score
};

void cmd_forecast(Run& run) {
  const RunConfig& cfg = run.config;
  if (cfg.forecast.horizon < 1) throw InputError("config: a forecast block with a positive horizon is required");
  const Panel panel = load_panel(cfg);
  const int H = cfg.forecast.horizon;
  const Eigen::Index T = panel.T(), n = panel.n();
  const Eigen::VectorXd x_init = panel.lag_stack(T - 1);
  const Eigen::VectorXd last = panel.y.row(T - 1).transpose();
  const auto& tmpl = cfg.forecast.restrictions;
  if (tmpl) tmpl->resolve(panel.names, Eigen::MatrixXd::Identity(n, n), last);

  struct Row {
    int h;
    Eigen::Index row;
    bool hard;
  };
  std::vector<Row> rows;
  std::vector<ForecastChain> chains(static_cast<std::size_t>(run.chains));

  for_each_chain(run.chains, run.threads, [&](int c) {
    ForecastChain& fc = chains[static_cast<std::size_t>(c)];
    ConditionalForecaster forecaster(cfg.pgas, H);
    std::optional<Trajectory> latest;
    auto draw = [&](const ModelState& st, Rng& rng) {
      const ForecastModel model = st.snapshot();
      const RestrictionSet set = tmpl ? tmpl->resolve(panel.names, model.Sigma, last) : RestrictionSet::none(H);
      latest = forecaster.draw(model, x_init, set, rng);
      return set;
    };
    ChainTask task;
    std::optional<RestrictionSet> latest_set;
    if (cfg.forecast.augment && tmpl) {
      task.augment = [&](const ModelState& st, Rng& rng) {
        latest_set = draw(st, rng);
        return latest->path;
      };
    }
    task.on_draw = [&](int, const ModelState& st, Rng& rng) {
      if (!task.augment) latest_set = draw(st, rng);
      fc.paths.push_back(latest->path);
      fc.smoothed.push_back(latest->smoothed_mean);
      std::vector<std::pair<double, double>> g;
      for (int h = 1; h <= H; ++h) {
        const RestrictionBlock& obs = latest_set->at(h).obs;
        for (Eigen::Index i = 0; i < obs.rows(); ++i) {
          const double gap = obs.R.row(i).dot(latest->path.row(h - 1)) - obs.r[i];
          g.emplace_back(std::abs(gap), std::abs(gap) / std::sqrt(obs.Omega(i, i)));
          if (c == 0 && fc.paths.size() == 1) rows.push_back({h, i, obs.Omega(i, i) <= 10.0 * tmpl->hard_variance});
        }
      }
      fc.gaps.push_back(std::move(g));
    };
    run_chain(chain_config(run, c), panel, task);
  });

  std::vector<Eigen::MatrixXd> paths, smoothed;
  std::vector<std::vector<std::pair<double, double>>> gaps;
  for (auto& fc : chains) {
    paths.insert(paths.end(), fc.paths.begin(), fc.paths.end());
    smoothed.insert(smoothed.end(), fc.smoothed.begin(), fc.smoothed.end());
    gaps.insert(gaps.end(), fc.gaps.begin(), fc.gaps.end());
  }
  const auto q = path_quantiles(paths, cfg.quantiles);
  Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(H, n), smean = Eigen::MatrixXd::Zero(H, n);
  for (std::size_t m = 0; m < paths.size(); ++m) {
    mean += paths[m];
    smean += smoothed[m];
  }
  mean /= static_cast<double>(paths.size());
  smean /= static_cast<double>(paths.size());

  std::vector<std::string> header{"horizon", "date", "variable", "mean", "smoothed_mean"};
  for (double p : cfg.quantiles) header.push_back(quantile_label(p));
  Csv csv(header);
  Quarter date = panel.dates.back();
  for (int h = 1; h <= H; ++h) {
    date = date.next();
    for (Eigen::Index i = 0; i < n; ++i) {
      std::vector<std::string> line{std::to_string(h), date.str(), panel.names[static_cast<std::size_t>(i)],
                                    fmt(mean(h - 1, i)), fmt(smean(h - 1, i))};
      for (const auto& qm : q) line.push_back(fmt(qm(h - 1, i)));
      csv.line(line);
    }
  }
  run.out.write("forecast.csv", csv.str());

  if (!rows.empty()) {
    Csv check({"horizon", "row", "kind", "max_abs_gap", "share_within_4sd"});
    for (std::size_t r = 0; r < rows.size(); ++r) {
      double worst = 0.0, within = 0.0;
      for (const auto& g : gaps) {
        worst = std::max(worst, g[r].first);
        if (g[r].second <= 4.0) within += 1.0;
      }
      check.line({std::to_string(rows[r].h), std::to_string(rows[r].row), rows[r].hard ? "hard" : "soft", fmt(worst),
                  fmt(within / static_cast<double>(gaps.size()))});
    }
    run.out.write("restriction_check.csv", check.str());
  }

  if (run.dump_draws) {
    Csv d({"draw", "horizon", "variable", "value"});
    for (std::size_t m = 0; m < paths.size(); ++m) {
      for (int h = 1; h <= H; ++h) {
        for (Eigen::Index i = 0; i < n; ++i) {
          d.line({std::to_string(m), std::to_string(h), panel.names[static_cast<std::size_t>(i)], fmt(paths[m](h - 1, i))});
        }
      }
    }
    run.out.write("forecast_draws.csv", d.str());
  }
  nlohmann::json extra;
  extra["draws"] = paths.size();
  extra["horizon"] = H;
  extra["conditional"] = static_cast<bool>(tmpl);
  write_manifest(run, extra);
}

// ---------------------------------------------------------------- girf

void cmd_girf(Run& run) {
  const RunConfig& cfg = run.config;
  const Panel panel = load_panel(cfg);
  GirfSpec spec = resolve_girf_task(cfg.girf, panel, cfg.data);
  spec.threads = std::max(1, run.threads / std::max(1, std::min(run.chains, run.threads)));
  const Eigen::Index n = panel.n();

  std::vector<GirfResult> results(static_cast<std::size_t>(run.chains));
  for_each_chain(run.chains, run.threads, [&](int c) {
    GirfEngine engine(spec, panel, cfg.pgas, derive_seed(chain_seed(run.seed, c), 0x9e3779b9ULL, 1));
    ChainTask task;
    task.on_draw = [&](int, const ModelState& st, Rng&) { engine.process(st.snapshot()); };
    run_chain(chain_config(run, c), panel, task);
    results[static_cast<std::size_t>(c)] = engine.result();
  });

  GirfResult pooled = results.front();
  for (std::size_t c = 1; c < results.size(); ++c) {
    for (std::size_t s = 0; s < pooled.sizes.size(); ++s) {
      auto& dst = pooled.averaged[s];
      dst.insert(dst.end(), results[c].averaged[s].begin(), results[c].averaged[s].end());
      pooled.violation[s].insert(pooled.violation[s].end(), results[c].violation[s].begin(), results[c].violation[s].end());
      if (!pooled.per_origin.empty()) {
        for (std::size_t o = 0; o < pooled.origins.size(); ++o) {
          auto& po = pooled.per_origin[s][o];
          po.insert(po.end(), results[c].per_origin[s][o].begin(), results[c].per_origin[s][o].end());
        }
      }
    }
  }

  std::vector<std::string> stats{"mean"};
  for (double p : cfg.quantiles) stats.push_back(quantile_label(p));
  Csv csv({"size", "origin", "horizon", "variable", "statistic", "value"});
  auto emit = [&](double size, const std::string& origin, const std::vector<Eigen::MatrixXd>& draws) {
    Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(spec.H, n);
    for (const auto& d : draws) mean += d;
    mean /= static_cast<double>(draws.size());
    const auto q = path_quantiles(draws, cfg.quantiles);
    for (int h = 1; h <= spec.H; ++h) {
      for (Eigen::Index i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < stats.size(); ++k) {
          const double v = k == 0 ? mean(h - 1, i) : q[k - 1](h - 1, i);
          csv.line({fmt(size), origin, std::to_string(h), panel.names[static_cast<std::size_t>(i)], stats[k], fmt(v)});
        }
      }
    }
  };
  for (std::size_t s = 0; s < pooled.sizes.size(); ++s) {
    emit(pooled.sizes[s], "average", pooled.averaged[s]);
    if (!pooled.per_origin.empty()) {
      for (std::size_t o = 0; o < pooled.origins.size(); ++o) {
        emit(pooled.sizes[s], panel.dates[static_cast<std::size_t>(pooled.origins[o])].str(), pooled.per_origin[s][o]);
      }
    }
  }
  run.out.write("girf.csv", csv.str());

  if (spec.variant == GirfVariant::rgirf) {
    Csv v({"size", "draw", "max_violation"});
    for (std::size_t s = 0; s < pooled.sizes.size(); ++s) {
      for (std::size_t m = 0; m < pooled.violation[s].size(); ++m) {
        v.line({fmt(pooled.sizes[s]), std::to_string(m), fmt(pooled.violation[s][m])});
      }
    }
    run.out.write("girf_violations.csv", v.str());
  }
  if (run.dump_draws) {
    Csv d({"size", "draw", "horizon", "variable", "value"});
    for (std::size_t s = 0; s < pooled.sizes.size(); ++s) {
      for (std::size_t m = 0; m < pooled.averaged[s].size(); ++m) {
        for (int h = 1; h <= spec.H; ++h) {
          for (Eigen::Index i = 0; i < n; ++i) {
            d.line({fmt(pooled.sizes[s]), std::to_string(m), std::to_string(h), panel.names[static_cast<std::size_t>(i)],
                    fmt(pooled.averaged[s][m](h - 1, i))});
          }
        }
      }
    }
    run.out.write("girf_draws.csv", d.str());
  }
  static const char* variants[] = {"ugirf", "sgirf", "rgirf"};
  nlohmann::json extra;
  extra["variant"] = variants[static_cast<int>(spec.variant)];
  extra["mode"] = spec.mode == GirfMode::pgas ? "pgas" : "recursive";
  extra["draws"] = pooled.draws();
  extra["origins"] = pooled.origins.size();
  extra["scaled"] = pooled.scaled;
  extra["cumulated"] = pooled.cumulative;
  write_manifest(run, extra);
}

// ---------------------------------------------------------------- verify

void cmd_verify(Run& run) {
  const VerifyTask& v = run.config.verify;
  const Benchmark bench = make_benchmark(v.data_seed, v.T, v.H);

  Csv bands({"particles", "estimator", "max_deviation", "max_median_deviation", "median_abs_deviation", "threshold", "pass"});
  Csv runtime({"particles", "draws", "seconds"});
  for (int V : v.particles) {
    PgasOptions options = run.config.pgas;
    options.particles = V;
    const PgasBenchmarkRun r = run_pgas_benchmark(bench, options, v.draws, v.burn, derive_seed(run.seed, static_cast<std::uint64_t>(V), 0));
    const double threshold = V >= 10 ? 0.05 : 0.10;
    for (const auto& [name, dev] : {std::pair<std::string, const BandDeviation*>{"traced", &r.traced}, {"weighted", &r.weighted}}) {
      bands.line({std::to_string(V), name, fmt(dev->max()), fmt(dev->max_median()), fmt(dev->median_abs()), fmt(threshold),
                  dev->max() <= threshold ? "yes" : "no"});
    }
    char secs[32];
    std::snprintf(secs, sizeof secs, "%.3f", r.seconds);
    runtime.line({std::to_string(V), std::to_string(v.draws), secs});
    std::cerr << "verify: V=" << V << " done in " << secs << " s\n";
  }
  run.out.write("verify_bands.csv", bands.str());
  write_text_file(run.out.dir / "verify_runtime.csv", runtime.str());

  const Panel panel = panel_from_matrix(bench.data, static_cast<int>(bench.sys.p()), bench.names);
  auto mean = std::make_shared<LinearMean>(VarCoefficients{bench.sys.A, bench.sys.c, true});
  const std::vector<ForecastModel> models(static_cast<std::size_t>(v.irf_draws), ForecastModel::make(mean, bench.sys.Sigma));
  const Eigen::MatrixXd exact = closed_form_irf(bench.sys, 0, 1.0, v.H);
  GirfSpec spec;
  spec.shock = 0;
  spec.H = v.H;

  struct Method {
    std::string name;
    bool recursive;
    bool expectation;
    bool shared;
    double tolerance;  // 0 = Monte Carlo estimate, reported only
  };
  const std::vector<Method> methods{{"pgas_expectation", false, true, true, 1e-6},
                                    {"recursive_shared", true, false, true, 1e-10},
                                    {"recursive_independent", true, false, false, 0.0},
                                    {"pgas", false, false, true, 0.0}};
  Csv irf({"method", "horizon", "variable", "mean", "exact", "abs_error"});
  Csv summary({"method", "max_abs_error", "tolerance", "pass"});
  for (const auto& m : methods) {
    GirfSpec s = spec;
    s.expectation = m.expectation;
    s.shared_noise = m.shared;
    const GirfResult r = m.recursive ? sgirf_recursive(s, models, panel, run.seed)
                                     : sgirf(s, models, panel, run.config.pgas, run.seed);
    const Eigen::MatrixXd avg = r.mean(0);
    for (int h = 1; h <= v.H; ++h) {
      for (Eigen::Index i = 0; i < avg.cols(); ++i) {
        irf.line({m.name, std::to_string(h), bench.names[static_cast<std::size_t>(i)], fmt(avg(h - 1, i)), fmt(exact(h - 1, i)),
                  fmt(std::abs(avg(h - 1, i) - exact(h - 1, i)))});
      }
    }
    const double err = (avg - exact).cwiseAbs().maxCoeff();
    summary.line({m.name, fmt(err), m.tolerance > 0 ? fmt(m.tolerance) : "-", m.tolerance > 0 ? (err <= m.tolerance ? "yes" : "no") : "-"});
  }
  run.out.write("verify_irf.csv", irf.str());
  run.out.write("verify_irf_summary.csv", summary.str());

  nlohmann::json extra;
  extra["draws"] = v.draws;
  extra["particles"] = v.particles;
  extra["T"] = v.T;
  extra["horizon"] = v.H;
  extra["data_seed"] = v.data_seed;
  extra["runtime_table"] = "verify_runtime.csv";
  write_manifest(run, extra);
}

}  // namespace

int thread_budget() {
  if (const char* env = std::getenv("BSCEN_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || v < 1) throw InputError("BSCEN_THREADS must be a positive integer");
    return static_cast<int>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

void run_command(const std::string& command, const CommandOptions& options) {
  Run run;
  run.command = command;
  run.config = load_run_config(options.config);
  if (!run.config.command.empty() && run.config.command != command) {
    throw InputError("config is written for '" + run.config.command + "', not '" + command + "'");
  }
  run.seed = options.seed.value_or(run.config.sampler.seed);
  if (options.chains < 1) throw InputError("--chains must be at least 1");
  run.chains = options.chains;
  run.threads = options.threads > 0 ? options.threads : thread_budget();
  run.dump_draws = options.dump_draws;
  run.out.dir = options.out.value_or(run.config.output);
  std::filesystem::create_directories(run.out.dir);

  if (command == "estimate") {
    cmd_estimate(run);
  } else if (command == "forecast") {
    cmd_forecast(run);
  } else if (command == "girf") {
    cmd_girf(run);
  } else if (command == "verify") {
    cmd_verify(run);
  } else {
    throw InputError("unknown command '" + command + "'");
  }
}

}  // namespace bscen::cli
