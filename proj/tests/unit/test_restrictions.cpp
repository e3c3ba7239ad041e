#include <doctest.h>

#include <cmath>
#include <numbers>

#include "bscen/errors.hpp"
#include "bscen/restrictions.hpp"
#include "fixtures.hpp"

using namespace bscen;

namespace {

double max_abs(const Eigen::MatrixXd& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

// Joint (y, r) assembled by hand, then conditioned on r through explicit inversion.
testing::Partitioned oracle(const StackedRestriction& s, const Eigen::VectorXd& mu, const Eigen::MatrixXd& Sigma) {
  const Eigen::Index n = mu.size(), m = s.rows();
  Eigen::VectorXd mean(n + m);
  mean << mu, s.R * mu;
  Eigen::MatrixXd cov(n + m, n + m);
  cov << Sigma, Sigma * s.R.transpose(), s.R * Sigma, s.R * Sigma * s.R.transpose() + s.Omega;
  return testing::condition_on_tail(mean, cov, n, s.r);
}

StackedRestriction random_stack(Eigen::Index n, Eigen::Index m, Rng& rng) {
  StackedRestriction s;
  s.R = testing::random_matrix(m, n, rng);
  s.r = testing::random_matrix(m, 1, rng);
  s.Omega = testing::random_spd(m, rng, 0.1);
  return s;
}

}  // namespace

TEST_SUITE("restrictions") {

TEST_CASE("recursive factor reproduces the covariance") {
  Rng rng(1);
  const Eigen::MatrixXd Sigma = testing::random_spd(4, rng);
  const auto f = StructuralFactor::recursive(Sigma);
  CHECK(max_abs(f.H * f.H_inv - Eigen::MatrixXd::Identity(4, 4)) < 1e-10);
  CHECK(max_abs(f.H_inv * f.H_inv.transpose() - Sigma) < 1e-12);
  CHECK(max_abs(Eigen::MatrixXd(f.H_inv.triangularView<Eigen::StrictlyUpper>())) == 0.0);
}

TEST_CASE("shock rows map through the structural factor") {
  Rng rng(2);
  const Eigen::MatrixXd Sigma = testing::random_spd(3, rng);
  const auto f = StructuralFactor::recursive(Sigma);
  const Eigen::VectorXd mu = testing::random_matrix(3, 1, rng);

  HorizonRestriction shocks;
  shocks.shock.R = Eigen::MatrixXd::Identity(3, 3);
  shocks.shock.r = Eigen::VectorXd::Zero(3);
  shocks.shock.Omega = 0.5 * Eigen::MatrixXd::Identity(3, 3);
  const auto s = stack(shocks, &f, mu);
  CHECK(max_abs(s.R - f.H) == 0.0);
  CHECK(max_abs(s.r - f.H * mu) < 1e-14);
  CHECK(s.Omega == shocks.shock.Omega);
  CHECK_THROWS_AS(stack(shocks, nullptr, mu), InputError);

  HorizonRestriction obs;
  obs.obs.append(Eigen::RowVector3d(1.0, -1.0, 0.0), 0.7, 0.2);
  const auto o = stack(obs, nullptr, mu);
  CHECK(o.R == obs.obs.R);
  CHECK(o.r == obs.obs.r);
  CHECK(o.Omega == obs.obs.Omega);
}

TEST_CASE("mixed observable and shock rows stack in blocks") {
  Eigen::Matrix2d H_inv;
  H_inv << 2.0, 0.0, 1.0, 0.5;
  const auto f = StructuralFactor::from_impact(H_inv);
  Eigen::Matrix2d H;
  H << 0.5, 0.0, -1.0, 2.0;
  const Eigen::Vector2d mu(1.0, 3.0);
  HorizonRestriction c;
  c.obs.append(Eigen::RowVector2d(1.0, 1.0), 4.0, 0.3);
  c.shock.append(Eigen::RowVector2d(0.0, 1.0), -1.0, 0.7);
  const auto s = stack(c, &f, mu);
  Eigen::Matrix2d R;
  R << 1.0, 1.0, H(1, 0), H(1, 1);
  const Eigen::Vector2d r(4.0, -1.0 + H.row(1).dot(mu));
  Eigen::Matrix2d Omega;
  Omega << 0.3, 0.0, 0.0, 0.7;
  CHECK(max_abs(s.R - R) < 1e-14);
  CHECK(max_abs(s.r - r) < 1e-14);
  CHECK(s.Omega == Omega);
}

TEST_CASE("joint moments") {
  Rng rng(3);
  const Eigen::MatrixXd Sigma = testing::random_spd(3, rng);
  const Eigen::VectorXd mu = testing::random_matrix(3, 1, rng);

  StackedRestriction zero;
  zero.R = Eigen::MatrixXd::Zero(2, 3);
  zero.r = Eigen::VectorXd::Zero(2);
  zero.Omega = testing::random_spd(2, rng);
  const auto jz = joint_moments(zero, mu, Sigma);
  CHECK(max_abs(jz.cov.bottomRightCorner(2, 2) - zero.Omega) == 0.0);
  CHECK(max_abs(jz.cov.topRightCorner(3, 2)) == 0.0);

  StackedRestriction eye;
  eye.R = Eigen::MatrixXd::Identity(3, 3);
  eye.r = Eigen::VectorXd::Zero(3);
  eye.Omega = Eigen::MatrixXd::Zero(3, 3);
  const auto je = joint_moments(eye, mu, Sigma);
  CHECK(max_abs(je.cov.topLeftCorner(3, 3) - je.cov.bottomRightCorner(3, 3)) == 0.0);
  CHECK(max_abs(je.cov.topRightCorner(3, 3) - Sigma) == 0.0);
  CHECK(je.mean.tail(3) == mu);

  const auto s = random_stack(3, 3, rng);
  const auto j = joint_moments(s, mu, Sigma);
  Eigen::MatrixXd cov(6, 6);
  cov << Sigma, Sigma * s.R.transpose(), s.R * Sigma, s.R * Sigma * s.R.transpose() + s.Omega;
  CHECK(max_abs(j.cov - cov) < 1e-14);
}

TEST_CASE("conditioning matches partitioned Gaussian oracle on random fixtures") {
  Rng rng(4);
  double worst = 0.0;
  for (int rep = 0; rep < 100; ++rep) {
    const Eigen::Index n = 2 + rep % 5;
    const Eigen::Index m = 1 + rep % n;
    const Eigen::MatrixXd Sigma = testing::random_spd(n, rng);
    const Eigen::VectorXd mu = testing::random_matrix(n, 1, rng);
    const auto s = random_stack(n, m, rng);
    const auto got = conditional_moments(s, mu, Sigma);
    const auto want = oracle(s, mu, Sigma);
    worst = std::max({worst, max_abs(got.mean - want.mean), max_abs(got.cov - want.cov)});
  }
  CHECK(worst < 1e-10);
}

TEST_CASE("consistent restriction keeps the mean and shrinks the covariance") {
  Rng rng(5);
  const Eigen::MatrixXd Sigma = testing::random_spd(3, rng);
  const Eigen::VectorXd mu = testing::random_matrix(3, 1, rng);
  auto s = random_stack(3, 2, rng);
  s.r = s.R * mu;
  const auto c = conditional_moments(s, mu, Sigma);
  CHECK(max_abs(c.mean - mu) < 1e-13);
  const Eigen::VectorXd ev = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(Sigma - c.cov).eigenvalues();
  CHECK(ev.minCoeff() > -1e-12);
  CHECK(c.cov == c.cov.transpose());
}

TEST_CASE("hard pin on one variable") {
  Rng rng(6);
  const Eigen::MatrixXd Sigma = testing::random_spd(3, rng);
  const Eigen::VectorXd mu = testing::random_matrix(3, 1, rng);
  HorizonRestriction c;
  c.obs.append(Eigen::RowVector3d(1.0, 0.0, 0.0), 2.5, kHardVariance);
  const auto m = conditional_moments(stack(c, nullptr, mu), mu, Sigma);
  CHECK(std::abs(m.mean[0] - 2.5) < 1e-3);
  const double kappa = Sigma(0, 0) / (Sigma(0, 0) + kHardVariance);
  CHECK(m.cov(0, 0) <= kHardVariance * (1.0 + kappa));
}

TEST_CASE("bivariate conditioning with measurement noise") {
  Eigen::Matrix2d Sigma;
  Sigma << 2.0, 0.6, 0.6, 1.0;
  const Eigen::Vector2d mu(0.5, -1.0);
  const double omega = 0.4, r = 1.7;
  StackedRestriction s;
  s.R = Eigen::RowVector2d(1.0, 0.0);
  s.r = Eigen::VectorXd::Constant(1, r);
  s.Omega = Eigen::MatrixXd::Constant(1, 1, omega);
  const auto c = conditional_moments(s, mu, Sigma);
  const double g = Sigma(0, 0) + omega;
  CHECK(c.mean[0] == doctest::Approx(mu[0] + Sigma(0, 0) / g * (r - mu[0])).epsilon(1e-14));
  CHECK(c.mean[1] == doctest::Approx(mu[1] + Sigma(1, 0) / g * (r - mu[0])).epsilon(1e-14));
  CHECK(c.cov(0, 0) == doctest::Approx(Sigma(0, 0) - Sigma(0, 0) * Sigma(0, 0) / g).epsilon(1e-14));
  CHECK(c.cov(1, 1) == doctest::Approx(Sigma(1, 1) - Sigma(1, 0) * Sigma(1, 0) / g).epsilon(1e-14));
  CHECK(c.cov(0, 1) == doctest::Approx(Sigma(0, 1) - Sigma(0, 0) * Sigma(0, 1) / g).epsilon(1e-14));
}

TEST_CASE("tighter restriction variance never widens restricted combinations") {
  Rng rng(7);
  for (int rep = 0; rep < 20; ++rep) {
    const Eigen::MatrixXd Sigma = testing::random_spd(4, rng);
    const Eigen::VectorXd mu = testing::random_matrix(4, 1, rng);
    auto s = random_stack(4, 2, rng);
    const auto loose = conditional_moments(s, mu, Sigma);
    s.Omega *= 0.3;
    const auto tight = conditional_moments(s, mu, Sigma);
    const Eigen::VectorXd vl = (s.R * loose.cov * s.R.transpose()).diagonal();
    const Eigen::VectorXd vt = (s.R * tight.cov * s.R.transpose()).diagonal();
    CHECK((vt.array() <= vl.array() + 1e-12).all());
  }
}

TEST_CASE("empty restriction returns the one step moments") {
  Rng rng(8);
  const Eigen::MatrixXd Sigma = testing::random_spd(3, rng);
  const Eigen::VectorXd mu = testing::random_matrix(3, 1, rng);
  const auto c = conditional_moments(stack(HorizonRestriction{}, nullptr, mu), mu, Sigma);
  CHECK(c.mean == mu);
  CHECK(c.cov == Sigma);
  const PreparedHorizon prep(HorizonRestriction{}, nullptr, Sigma);
  CHECK(prep.empty());
  CHECK(prep.conditional_mean(mu) == mu);
  CHECK(prep.log_weight(mu) == 0.0);
}

TEST_CASE("prepared horizon agrees with per particle stacking") {
  Rng rng(9);
  const Eigen::MatrixXd Sigma = testing::random_spd(3, rng);
  const auto f = StructuralFactor::recursive(Sigma);
  HorizonRestriction c;
  c.obs.append(Eigen::RowVector3d(0.0, 1.0, 1.0), 0.4, 0.05);
  c.shock = structural_impact(3, 0, 0.0, 1.5);
  const PreparedHorizon prep(c, &f, Sigma);
  for (int rep = 0; rep < 5; ++rep) {
    const Eigen::VectorXd mu = testing::random_matrix(3, 1, rng);
    const auto s = stack(c, &f, mu);
    const auto want = oracle(s, mu, Sigma);
    CHECK(max_abs(prep.conditional_mean(mu) - want.mean) < 1e-9);
    CHECK(max_abs(prep.conditional_cov() - want.cov) < 1e-9);

    const Eigen::MatrixXd S = s.R * Sigma * s.R.transpose() + s.Omega;
    const Eigen::VectorXd e = s.r - s.R * mu;
    const double lw = -0.5 * (static_cast<double>(s.rows()) * std::log(2.0 * std::numbers::pi) +
                              std::log(S.determinant()) + e.dot(S.inverse() * e));
    CHECK(prep.log_weight(mu) == doctest::Approx(lw).epsilon(1e-9));
  }
  const Eigen::MatrixXd F = prep.cov_factor();
  CHECK(max_abs(F * F.transpose() - prep.conditional_cov()) < 1e-10);
}

TEST_CASE("impact and pinning builders") {
  const auto b = structural_impact(3, 1, 0.5, 2.0);
  CHECK(b.R == Eigen::MatrixXd::Identity(3, 3));
  CHECK(b.r == Eigen::Vector3d(0.0, 2.5, 0.0));
  CHECK(b.Omega.diagonal() == Eigen::Vector3d(1.0, kHardVariance, 1.0));
  const auto pinned = structural_impact(3, 1, 0.0, 1.0, true);
  CHECK(pinned.Omega.diagonal() == Eigen::Vector3d::Constant(kHardVariance));
  CHECK_THROWS_AS(structural_impact(3, 3, 0.0, 1.0), InputError);

  const auto nd = pin_non_driving(4, {1, 3}, 0.25);
  REQUIRE(nd.rows() == 2);
  CHECK(nd.R.row(0) == Eigen::RowVector4d(1, 0, 0, 0));
  CHECK(nd.R.row(1) == Eigen::RowVector4d(0, 0, 1, 0));
  CHECK(nd.r.isZero(0.0));
  CHECK(nd.Omega.diagonal() == Eigen::Vector2d::Constant(0.25));
}

TEST_CASE("offsetting shocks only on impact") {
  const auto set = lucas_robust(5, 3, 2, 0.0, 1.0);
  REQUIRE(set.H() == 5);
  CHECK(set.at(1).shock.r == Eigen::Vector3d(0.0, 0.0, 1.0));
  CHECK(set.at(1).shock.Omega(0, 0) == 1.0);
  for (int h = 2; h <= 5; ++h) {
    const auto& b = set.at(h).shock;
    CHECK(b.R == Eigen::MatrixXd::Identity(3, 3));
    CHECK(b.r.isZero(0.0));
    CHECK(b.Omega == Eigen::MatrixXd::Identity(3, 3) * kHardVariance);
    CHECK(set.at(h).obs.empty());
  }
  CHECK(set.any_shock());
}

TEST_CASE("validation rejects inconsistent blocks") {
  RestrictionSet set = RestrictionSet::none(2);
  CHECK(set.empty());
  set.at(1).obs.append(Eigen::RowVector2d(1.0, 0.0), 1.0, 1.0);
  CHECK_NOTHROW(set.validate(2));
  CHECK_THROWS_AS(set.validate(3), InputError);
  set.at(2).obs.append(Eigen::RowVector2d(1.0, 0.0), 1.0, -1.0);
  CHECK_THROWS_AS(set.validate(2), InputError);
}

TEST_CASE("templates resolve names, scaling and relative targets") {
  const std::vector<std::string> names{"gdp", "infl", "rate"};
  Eigen::Matrix3d Sigma;
  Sigma << 1.0, 0.2, 0.0, 0.2, 2.0, 0.1, 0.0, 0.1, 3.0;
  const Eigen::Vector3d last(1.0, 2.0, 4.0);

  RestrictionTemplate t;
  t.horizon = 4;
  RestrictionEntry hard;
  hard.horizons = {1, 2};
  hard.weights = {{"rate", 1.0}};
  hard.targets = {5.0, 5.5};
  RestrictionEntry sd;
  sd.horizons = {4};
  sd.weights = {{"gdp", 1.0}, {"infl", -1.0}};
  sd.targets = {0.5};
  sd.hardness = Hardness::sd_scaled;
  sd.scale = 0.25;
  sd.relative_to_last = true;
  RestrictionEntry shock;
  shock.on_shocks = true;
  shock.horizons = {1};
  shock.weights = {{"infl", 1.0}};
  shock.targets = {-1.0};
  shock.hardness = Hardness::soft;
  shock.variance = 0.5;
  t.entries = {hard, sd, shock};

  const auto set = t.resolve(names, Sigma, last);
  CHECK(set.at(1).obs.r[0] == 5.0);
  CHECK(set.at(2).obs.r[0] == 5.5);
  CHECK(set.at(1).obs.Omega(0, 0) == kHardVariance);
  CHECK(set.at(3).empty());
  CHECK(set.at(4).obs.r[0] == doctest::Approx(0.5 + 1.0 - 2.0));
  CHECK(set.at(4).obs.Omega(0, 0) == doctest::Approx(0.25 * (1.0 + 2.0 - 0.4)));
  CHECK(set.at(1).shock.R.row(0) == Eigen::RowVector3d(0, 1, 0));
  CHECK(set.at(1).shock.Omega(0, 0) == 0.5);
  CHECK(t.any_shock());

  RestrictionTemplate bad = t;
  bad.entries[0].weights = {{"unknown", 1.0}};
  CHECK_THROWS_AS(bad.resolve(names, Sigma, last), InputError);
  bad = t;
  bad.entries[0].horizons = {1, 9};
  CHECK_THROWS_AS(bad.resolve(names, Sigma, last), InputError);
  bad = t;
  bad.entries[0].targets = {1.0, 2.0, 3.0};
  CHECK_THROWS_AS(bad.resolve(names, Sigma, last), InputError);
}

}
