#include "bscen/verification.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "bscen/linear_mean.hpp"

namespace bscen {

LinearSystem benchmark_system() {
  const Eigen::Index n = 5;
  const int p = 5;
  std::vector<Eigen::MatrixXd> lag(p, Eigen::MatrixXd::Zero(n, n));
  // own dynamics
  lag[0].diagonal() << 0.30, 0.50, 0.45, 0.90, 0.05;
  lag[1].diagonal() << 0.10, 0.15, 0.15, -0.05, 0.00;
  lag[2].diagonal() << 0.05, 0.10, 0.05, 0.00, 0.00;
  lag[3].diagonal() << 0.00, 0.05, 0.00, 0.00, 0.00;
  lag[4].diagonal() << 0.00, 0.05, 0.00, 0.00, 0.00;
  // spillovers
  lag[0](0, 4) = 0.05;   // stock returns -> output
  lag[0](0, 3) = -0.30;  // rate -> output
  lag[0](1, 0) = 0.08;   // output -> inflation
  lag[0](2, 0) = 0.25;   // output -> employment
  lag[0](3, 0) = 0.03;   // output -> rate
  lag[0](3, 1) = 0.05;   // inflation -> rate
  lag[0](4, 3) = -1.00;  // rate -> stock returns
  lag[1](2, 0) = 0.10;
  lag[1](0, 2) = 0.05;

  LinearSystem sys;
  sys.A.resize(n, n * p);
  Eigen::MatrixXd lag_sum = Eigen::MatrixXd::Zero(n, n);
  for (int l = 0; l < p; ++l) {
    sys.A.middleCols(l * n, n) = lag[static_cast<std::size_t>(l)];
    lag_sum += lag[static_cast<std::size_t>(l)];
  }
  Eigen::VectorXd mean(n);
  mean << 2.5, 2.5, 1.5, 4.0, 2.0;
  sys.c = (Eigen::MatrixXd::Identity(n, n) - lag_sum) * mean;

  Eigen::VectorXd sd(n);
  sd << 3.0, 2.0, 2.0, 0.6, 8.0;
  Eigen::MatrixXd corr = Eigen::MatrixXd::Identity(n, n);
  auto set = [&corr](int i, int j, double v) { corr(i, j) = corr(j, i) = v; };
  set(0, 1, 0.10);
  set(0, 2, 0.60);
  set(0, 3, 0.20);
  set(0, 4, 0.30);
  set(1, 3, 0.20);
  set(2, 4, 0.20);
  set(3, 4, -0.10);
  sys.Sigma = sd.asDiagonal() * corr * sd.asDiagonal();
  sys.H_inv = Eigen::LLT<Eigen::MatrixXd>(sys.Sigma).matrixL();
  sys.x_init = Eigen::VectorXd::Zero(n * p);
  for (int l = 0; l < p; ++l) sys.x_init.segment(l * n, n) = mean;
  return sys;
}

RestrictionSet benchmark_restrictions(const Eigen::VectorXd& last, const Eigen::VectorXd& mean,
                                      const Eigen::VectorXd& sd, int H) {
  const Eigen::Index n = last.size();
  RestrictionSet set = RestrictionSet::none(H);
  set.at(1).obs.append(Eigen::RowVectorXd::Unit(n, 3), last[3] + sd[3], kHardVariance);
  for (int h = 9; h <= std::min(12, H); ++h) set.at(h).obs.append(Eigen::RowVectorXd::Unit(n, 1), mean[1], kHardVariance);
  if (H >= 20) set.at(20).obs.append(Eigen::RowVectorXd::Unit(n, 0), last[0] + sd[0], kHardVariance);
  return set;
}

Benchmark make_benchmark(std::uint64_t seed, Eigen::Index T, int H) {
  Benchmark b;
  b.sys = benchmark_system();
  b.names = {"output", "inflation", "employment", "rate", "stock_returns"};
  b.H = H;
  Rng rng(seed);
  b.data = simulate_linear(b.sys, T, rng);
  const Eigen::Index n = b.sys.n();
  const int p = b.sys.p();
  for (int l = 0; l < p; ++l) b.sys.x_init.segment(l * n, n) = b.data.row(T - 1 - l).transpose();
  b.stationary = stationary_moments(b.sys);
  b.uncond_sd = b.stationary.cov.diagonal().cwiseSqrt();
  b.restrictions = benchmark_restrictions(b.data.row(T - 1).transpose(), b.stationary.mean, b.uncond_sd, H);
  return b;
}

double BandDeviation::max() const {
  return std::max({median.maxCoeff(), lower.maxCoeff(), upper.maxCoeff()});
}

double BandDeviation::median_abs() const {
  std::vector<double> all;
  for (const auto* m : {&median, &lower, &upper})
    for (Eigen::Index i = 0; i < m->size(); ++i) all.push_back(m->data()[i]);
  return sample_quantile(all, 0.5);
}

BandDeviation compare_bands(const std::vector<Eigen::MatrixXd>& q, const GaussianPath& exact,
                            const Eigen::VectorXd& uncond_sd) {
  const Eigen::RowVectorXd inv_sd = uncond_sd.cwiseInverse().transpose();
  auto dev = [&](const Eigen::MatrixXd& est, double prob) {
    Eigen::MatrixXd d = (est - exact.quantile(prob)).cwiseAbs();
    return Eigen::MatrixXd(d.array().rowwise() * inv_sd.array());
  };
  return BandDeviation{dev(q[1], 0.5), dev(q[0], 0.16), dev(q[2], 0.84)};
}

PgasBenchmarkRun run_pgas_benchmark(const Benchmark& bench, const PgasOptions& options, int draws, int burn,
                                    std::uint64_t seed) {
  const auto mean = std::make_shared<LinearMean>(VarCoefficients{bench.sys.A, bench.sys.c, true});
  const ForecastModel model = ForecastModel::make(mean, bench.sys.Sigma);
  PgasOptions opts = options;
  opts.keep_particles = true;

  const auto start = std::chrono::steady_clock::now();
  Rng rng(seed);
  ConditionalForecaster fc(opts, bench.H);
  std::vector<Eigen::MatrixXd> paths;
  std::vector<Trajectory> clouds;
  for (int s = 0; s < burn + draws; ++s) {
    Trajectory t = fc.draw(model, bench.sys.x_init, bench.restrictions, rng);
    if (s < burn) continue;
    paths.push_back(t.path);
    clouds.push_back(std::move(t));
  }
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  const GaussianPath exact = closed_form_conditional_forecast(bench.sys, bench.restrictions, bench.H);
  const std::vector<double> probs{0.16, 0.5, 0.84};
  PgasBenchmarkRun out;
  out.particles = options.particles;
  out.draws = draws;
  out.seconds = seconds;
  out.traced = compare_bands(path_quantiles(paths, probs), exact, bench.uncond_sd);
  out.weighted = compare_bands(cloud_quantiles(clouds, probs), exact, bench.uncond_sd);
  return out;
}

}  // namespace bscen
