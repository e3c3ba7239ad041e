#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bscen/linear_oracle.hpp"
#include "bscen/pgas.hpp"
#include "bscen/restrictions.hpp"

namespace bscen {

// Five-variable, five-lag linear system (output, inflation, employment,
// interest rate, stock returns) used to check the particle sampler against
// closed-form answers.
struct Benchmark {
  LinearSystem sys;
  std::vector<std::string> names;
  Eigen::MatrixXd data;         // simulated sample, T x n
  StationaryMoments stationary;
  Eigen::VectorXd uncond_sd;
  RestrictionSet restrictions;  // conditioning-on-observables scenario
  int H = 20;
};

LinearSystem benchmark_system();

// T observations simulated with `seed`; the last p of them form the origin.
Benchmark make_benchmark(std::uint64_t seed, Eigen::Index T = 1000, int H = 20);

// Rate one unconditional SD above its last value at h = 1, inflation at its
// unconditional mean for h = 9..12, output one SD above its last value at h = 20.
RestrictionSet benchmark_restrictions(const Eigen::VectorXd& last, const Eigen::VectorXd& mean,
                                      const Eigen::VectorXd& sd, int H);

struct BandDeviation {
  Eigen::MatrixXd median;  // H x n, |estimate - exact| / unconditional SD
  Eigen::MatrixXd lower;   // 16% quantile
  Eigen::MatrixXd upper;   // 84% quantile

  double max() const;
  double max_median() const { return median.maxCoeff(); }
  double median_abs() const;  // median of all deviations
};

// `q` holds the 16%, 50% and 84% quantile matrices.
BandDeviation compare_bands(const std::vector<Eigen::MatrixXd>& q, const GaussianPath& exact,
                            const Eigen::VectorXd& uncond_sd);

struct PgasBenchmarkRun {
  int particles = 0;
  int draws = 0;
  double seconds = 0.0;
  BandDeviation traced;    // quantiles of the traced trajectories
  BandDeviation weighted;  // quantiles of the smoothing-weighted particle clouds
};

PgasBenchmarkRun run_pgas_benchmark(const Benchmark& bench, const PgasOptions& options, int draws, int burn,
                                    std::uint64_t seed);

}  // namespace bscen
