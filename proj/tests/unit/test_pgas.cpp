#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "bscen/errors.hpp"
#include "bscen/linear_mean.hpp"
#include "bscen/linear_oracle.hpp"
#include "bscen/pgas.hpp"
#include "fixtures.hpp"

using namespace bscen;

namespace {

struct Fixture {
  LinearSystem sys;
  ForecastModel model;
};

Fixture linear_fixture(std::uint64_t seed, Eigen::Index n = 2, int p = 2) {
  Rng rng(seed);
  Fixture f;
  f.sys.A = 0.3 * testing::random_matrix(n, n * p, rng) / std::sqrt(static_cast<double>(n * p));
  f.sys.c = 0.1 * testing::random_matrix(n, 1, rng);
  f.sys.Sigma = testing::random_spd(n, rng);
  f.sys.H_inv = f.sys.Sigma.llt().matrixL();
  f.sys.x_init = testing::random_matrix(n * p, 1, rng);
  VarCoefficients coef{f.sys.A, f.sys.c, true};
  f.model = ForecastModel::make(std::make_shared<LinearMean>(coef), f.sys.Sigma);
  return f;
}

// Two-sample Kolmogorov-Smirnov statistic.
double ks_statistic(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / a.size() - static_cast<double>(j) / b.size()));
  }
  return d;
}

}  // namespace

TEST_SUITE("pgas") {

TEST_CASE("unrestricted first horizon has equal weights") {
  auto f = linear_fixture(1);
  const RestrictionSet set = RestrictionSet::none(3);
  PgasOptions opt;
  opt.particles = 7;
  ParticleSystem ps(f.model, set, opt);
  Rng rng(1);
  ps.initialize(f.sys.x_init, nullptr, rng);
  CHECK(ps.weights(1).isConstant(1.0 / 7.0, 1e-15));
}

TEST_CASE("hard restriction pins fresh particles") {
  auto f = linear_fixture(2);
  RestrictionSet set = RestrictionSet::none(2);
  set.at(1).obs.append(Eigen::RowVector2d(1.0, 0.0), 1.25, kHardVariance);
  const Eigen::MatrixXd reference = Eigen::MatrixXd::Constant(2, 2, 9.0);
  PgasOptions opt;
  opt.particles = 20;
  ParticleSystem ps(f.model, set, opt);
  Rng rng(2);
  ps.initialize(f.sys.x_init, &reference, rng);
  for (int v = 0; v < 19; ++v) CHECK(std::abs(ps.particles(1)(0, v) - 1.25) < 3e-4);
  CHECK(ps.particles(1).col(19) == reference.row(0).transpose());
}

TEST_CASE("two particles with a reference leave one fresh slot") {
  auto f = linear_fixture(3);
  const RestrictionSet set = RestrictionSet::none(4);
  Rng rng(3);
  const Eigen::MatrixXd reference = simulate_path(f.model, f.sys.x_init, 4, rng);
  PgasOptions opt;
  opt.particles = 2;
  ParticleSystem ps(f.model, set, opt);
  ps.initialize(f.sys.x_init, &reference, rng);
  for (int h = 2; h <= 4; ++h) ps.step(h, rng);
  for (int h = 1; h <= 4; ++h) {
    CHECK(ps.particles(h).col(1) == reference.row(h - 1).transpose());
    CHECK(ps.particles(h).col(0) != reference.row(h - 1).transpose());
  }
  opt.particles = 1;
  ParticleSystem lonely(f.model, set, opt);
  CHECK_THROWS_AS(lonely.initialize(f.sys.x_init, &reference, rng), InputError);
}

TEST_CASE("weights normalize and lag stacks follow the ancestry") {
  auto f = linear_fixture(4, 3, 2);
  RestrictionSet set = RestrictionSet::none(6);
  set.at(2).obs.append(Eigen::RowVector3d(1.0, 0.0, 0.0), 0.5, 0.3);
  set.at(5).obs.append(Eigen::RowVector3d(0.0, 1.0, -1.0), -0.2, 0.1);
  set.at(3).shock = structural_impact(3, 1, 0.0, 1.0);
  Rng rng(4);
  const Eigen::MatrixXd reference = simulate_path(f.model, f.sys.x_init, 6, rng);
  PgasOptions opt;
  opt.particles = 12;
  ParticleSystem ps(f.model, set, opt);
  ps.initialize(f.sys.x_init, &reference, rng);
  for (int h = 2; h <= 6; ++h) ps.step(h, rng);

  for (int h = 1; h <= 6; ++h) {
    CHECK(std::abs(ps.weights(h).sum() - 1.0) < 1e-12);
    CHECK((ps.weights(h).array() >= 0.0).all());
  }
  for (int v = 0; v < 12; ++v) CHECK(ps.lag_stacks(1).col(v) == f.sys.x_init);
  for (int h = 1; h < 6; ++h) {
    for (int v = 0; v < 12; ++v) {
      const int a = ps.ancestors()(h, v);
      REQUIRE(a >= 0);
      REQUIRE(a < 12);
      const Eigen::VectorXd expected = shift_lag_stack(ps.lag_stacks(h).col(a), ps.particles(h).col(a));
      CHECK(ps.lag_stacks(h + 1).col(v) == expected);
    }
  }
  const Eigen::MatrixXd s = ps.smoothing_weights();
  for (int h = 0; h < 6; ++h) CHECK(std::abs(s.row(h).sum() - 1.0) < 1e-12);
}

TEST_CASE("single horizon smoothed mean is the weighted particle average") {
  auto f = linear_fixture(5);
  RestrictionSet set = RestrictionSet::none(1);
  set.at(1).obs.append(Eigen::RowVector2d(1.0, 1.0), 0.3, 0.5);
  Rng rng(5);
  const Eigen::MatrixXd reference = Eigen::MatrixXd::Constant(1, 2, 0.4);
  PgasOptions opt;
  opt.particles = 2;
  opt.keep_particles = true;
  ParticleSystem ps(f.model, set, opt);
  ps.initialize(f.sys.x_init, &reference, rng);
  const Trajectory t = ps.finalize(rng);
  const Eigen::VectorXd w = ps.weights(1);
  const Eigen::VectorXd expected = w[0] * ps.particles(1).col(0) + w[1] * ps.particles(1).col(1);
  CHECK((t.smoothed_mean.row(0).transpose() - expected).cwiseAbs().maxCoeff() < 1e-14);
  CHECK(t.particles.size() == 1);
  CHECK(t.smoothing.row(0) == w.transpose());
}

TEST_CASE("traced paths come from stored particles") {
  auto f = linear_fixture(6);
  RestrictionSet set = RestrictionSet::none(5);
  set.at(3).obs.append(Eigen::RowVector2d(0.0, 1.0), 1.0, 0.2);
  Rng rng(6);
  PgasOptions opt;
  opt.particles = 6;
  ParticleSystem ps(f.model, set, opt);
  const Trajectory t = ps.run(f.sys.x_init, nullptr, rng);
  for (int h = 1; h <= 5; ++h) {
    bool found = false;
    for (int v = 0; v < 6; ++v) found = found || ps.particles(h).col(v) == t.path.row(h - 1).transpose();
    CHECK(found);
  }
}

TEST_CASE("smoothing weights collapse on a single lineage") {
  auto f = linear_fixture(7);
  const RestrictionSet set = RestrictionSet::none(3);
  PgasOptions opt;
  opt.particles = 4;
  ParticleSystem ps(f.model, set, opt);
  Rng rng(7);
  ps.initialize(f.sys.x_init, nullptr, rng);
  for (int h = 2; h <= 3; ++h) ps.step(h, rng);
  const Eigen::MatrixXd s = ps.smoothing_weights();
  CHECK(s.row(2).isConstant(0.25, 1e-15));
  // Backward recursion: each ancestor collects the weight of its children.
  for (int h = 2; h >= 1; --h) {
    Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(4);
    for (int j = 0; j < 4; ++j) acc[ps.ancestors()(h, j)] += s(h, j);
    CHECK((s.row(h - 1) - acc / acc.sum()).cwiseAbs().maxCoeff() < 1e-15);
  }
}

TEST_CASE("unrestricted forecasts match the closed form predictive") {
  auto f = linear_fixture(8);
  const int H = 4, N = 4000;
  const RestrictionSet set = RestrictionSet::none(H);
  const auto exact = unconditional_path(f.sys, H);
  std::vector<ForecastModel> models(N, f.model);
  PgasOptions opt;
  opt.particles = 5;
  Rng rng(8);
  const auto draws = forecast(models, f.sys.x_init, set, opt, rng);
  REQUIRE(draws.paths.size() == static_cast<std::size_t>(N));

  Rng direct_rng(80);
  for (int h = 1; h <= H; ++h) {
    for (Eigen::Index i = 0; i < 2; ++i) {
      std::vector<double> pg, direct;
      double mean = 0.0;
      for (int d = 0; d < N; ++d) {
        pg.push_back(draws.paths[static_cast<std::size_t>(d)](h - 1, i));
        mean += pg.back() / N;
      }
      for (int d = 0; d < N; ++d) direct.push_back(simulate_path(f.model, f.sys.x_init, H, direct_rng)(h - 1, i));
      const double sd = std::sqrt(exact.cov((h - 1) * 2 + i, (h - 1) * 2 + i));
      CHECK(std::abs(mean - exact.mean[(h - 1) * 2 + i]) < 4.0 * sd / std::sqrt(N / 2.0));
      CHECK(ks_statistic(pg, direct) < 1.63 * std::sqrt(2.0 / (N / 2.0)));
    }
  }
}

TEST_CASE("one step draws follow the one step density") {
  auto f = linear_fixture(9);
  const int N = 3000;
  std::vector<ForecastModel> models(N, f.model);
  PgasOptions opt;
  opt.particles = 10;
  Rng rng(9);
  const auto draws = forecast(models, f.sys.x_init, RestrictionSet::none(1), opt, rng);
  const Eigen::VectorXd mu = f.sys.c + f.sys.A * f.sys.x_init;
  for (Eigen::Index i = 0; i < 2; ++i) {
    std::vector<double> z;
    for (const auto& p : draws.paths) z.push_back((p(0, i) - mu[i]) / std::sqrt(f.sys.Sigma(i, i)));
    std::sort(z.begin(), z.end());
    double d = 0.0;
    for (std::size_t k = 0; k < z.size(); ++k) {
      const double cdf = 0.5 * std::erfc(-z[k] / std::sqrt(2.0));
      d = std::max({d, std::abs(cdf - static_cast<double>(k) / N), std::abs(cdf - static_cast<double>(k + 1) / N)});
    }
    CHECK(d < 1.36 / std::sqrt(N / 2.0));
  }
}

TEST_CASE("restrictions hold along every retained draw") {
  auto f = linear_fixture(10);
  const int H = 6, N = 300;
  RestrictionSet set = RestrictionSet::none(H);
  for (int h = 1; h <= H; ++h) set.at(h).obs.append(Eigen::RowVector2d(1.0, 0.0), 0.1 * h, kHardVariance);
  set.at(4).obs.append(Eigen::RowVector2d(0.0, 1.0), 2.0, 0.05);
  std::vector<ForecastModel> models(N, f.model);
  PgasOptions opt;
  Rng rng(10);
  const auto draws = forecast(models, f.sys.x_init, set, opt, rng);
  int soft_ok = 0;
  for (const auto& p : draws.paths) {
    for (int h = 1; h <= H; ++h) CHECK(std::abs(p(h - 1, 0) - 0.1 * h) <= 1e-3);
    soft_ok += std::abs(p(3, 1) - 2.0) <= 4.0 * std::sqrt(0.05);
  }
  CHECK(soft_ok >= 0.99 * N);
  const auto q = path_quantiles(draws.paths, {0.25, 0.75});
  CHECK((q[1].col(0) - q[0].col(0)).cwiseAbs().maxCoeff() < 1e-3);
}

TEST_CASE("reference conditioned kernel keeps the predictive invariant") {
  auto f = linear_fixture(11);
  const int H = 3, N = 500;
  const auto exact = unconditional_path(f.sys, H);
  ConditionalForecaster fc(PgasOptions{}, H);
  Rng rng(11);
  fc.set_reference(simulate_path(f.model, f.sys.x_init, H, rng));
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(2 * H);
  Eigen::VectorXd sq = Eigen::VectorXd::Zero(2 * H);
  for (int it = 0; it < N; ++it) {
    const Trajectory t = fc.draw(f.model, f.sys.x_init, RestrictionSet::none(H), rng);
    for (int h = 0; h < H; ++h) {
      const Eigen::VectorXd d = t.path.row(h).transpose() - exact.mean.segment(h * 2, 2);
      sum.segment(h * 2, 2) += d;
      sq.segment(h * 2, 2) += d.cwiseProduct(d);
    }
  }
  for (Eigen::Index e = 0; e < 2 * H; ++e) {
    const double var = exact.cov(e, e);
    CHECK(std::abs(sum[e] / N) < 4.0 * std::sqrt(var / N));
    CHECK(std::abs(sq[e] / N / var - 1.0) < 4.0 * std::sqrt(2.0 / N));
  }
}

TEST_CASE("lag stack shifting and quantiles") {
  Eigen::VectorXd x(6);
  x << 1, 2, 3, 4, 5, 6;
  Eigen::VectorXd expected(6);
  expected << 9, 8, 1, 2, 3, 4;
  CHECK(shift_lag_stack(x, Eigen::Vector2d(9, 8)) == expected);

  CHECK(sample_quantile({3.0, 1.0, 2.0, 4.0}, 0.5) == 2.5);
  CHECK(sample_quantile({3.0, 1.0, 2.0, 4.0}, 0.0) == 1.0);
  CHECK(sample_quantile({3.0, 1.0, 2.0, 4.0}, 1.0 / 3.0) == doctest::Approx(2.0));
  CHECK_THROWS_AS(sample_quantile({}, 0.5), InputError);

  std::vector<Eigen::MatrixXd> draws;
  for (int d = 0; d < 5; ++d) draws.push_back(Eigen::MatrixXd::Constant(2, 1, d));
  const auto q = path_quantiles(draws, {0.16, 0.5, 0.84});
  CHECK(q[1](0, 0) == 2.0);
  CHECK(q[0](1, 0) <= q[1](1, 0));
  CHECK(q[1](1, 0) <= q[2](1, 0));
}

}
