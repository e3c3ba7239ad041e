#include <doctest.h>

#include <cmath>

#include "bscen/errors.hpp"
#include "bscen/girf.hpp"
#include "bscen/linear_mean.hpp"
#include "bscen/linear_oracle.hpp"
#include "fixtures.hpp"

using namespace bscen;

namespace {

double max_abs(const Eigen::MatrixXd& m) { return m.cwiseAbs().maxCoeff(); }

class Squashed final : public MeanFunction {
 public:
  explicit Squashed(Eigen::MatrixXd A) : A_(std::move(A)) {}
  Eigen::VectorXd predict(const Eigen::Ref<const Eigen::VectorXd>& x) const override {
    return (A_ * x).array().tanh().matrix() + 0.3 * x.head(A_.rows()).cwiseAbs();
  }
  Eigen::Index n() const override { return A_.rows(); }
  Eigen::Index k() const override { return A_.cols(); }

 private:
  Eigen::MatrixXd A_;
};

struct Fixture {
  LinearSystem sys;
  Panel panel;
  ForecastModel model;
};

Fixture linear_fixture(std::uint64_t seed) {
  Rng rng(seed);
  Fixture f;
  f.sys.A.resize(3, 6);
  f.sys.A << 0.5, 0.1, 0.0, 0.1, 0.0, 0.0,
             0.2, 0.4, -0.1, 0.0, 0.1, 0.0,
             0.0, 0.3, 0.6, 0.0, 0.0, -0.1;
  f.sys.c = Eigen::Vector3d(0.1, 0.0, 0.2);
  f.sys.Sigma = testing::random_spd(3, rng);
  f.sys.H_inv = f.sys.Sigma.llt().matrixL();
  f.panel = panel_from_matrix(simulate_linear(f.sys, 60, rng), 2);
  f.model = ForecastModel::make(std::make_shared<LinearMean>(VarCoefficients{f.sys.A, f.sys.c, true}), f.sys.Sigma);
  return f;
}

Fixture nonlinear_fixture(std::uint64_t seed) {
  Fixture f = linear_fixture(seed);
  f.model = ForecastModel::make(std::make_shared<Squashed>(f.sys.A), f.sys.Sigma);
  return f;
}

GirfSpec base_spec(int H) {
  GirfSpec s;
  s.H = H;
  s.shock = 1;
  return s;
}

}  // namespace

TEST_SUITE("girf") {

TEST_CASE("zero shock gives zero response") {
  auto f = linear_fixture(1);
  GirfSpec spec = base_spec(5);
  spec.sizes = {0.0};
  const auto res = sgirf(spec, std::vector<ForecastModel>(10, f.model), f.panel, PgasOptions{}, 1);
  for (const auto& d : res.averaged[0]) CHECK(max_abs(d) == 0.0);
}

TEST_CASE("impact equals the scaled structural column") {
  auto f = nonlinear_fixture(2);
  GirfSpec spec = base_spec(4);
  spec.sizes = {-2.0, 3.0};
  spec.scale_by_size = false;
  spec.expectation = true;
  spec.origins = {10, 30, 57};
  spec.keep_origins = true;
  const auto res = sgirf(spec, std::vector<ForecastModel>(5, f.model), f.panel, PgasOptions{}, 2);
  for (std::size_t s = 0; s < 2; ++s)
    for (const auto& origin : res.per_origin[s])
      for (const auto& d : origin) CHECK(max_abs(d.row(0).transpose() - spec.sizes[s] * f.sys.H_inv.col(1)) < 1e-3);

  GirfSpec rec = spec;
  rec.mode = GirfMode::recursive;
  rec.expectation = false;
  rec.shared_noise = false;
  const auto r = sgirf_recursive(rec, std::vector<ForecastModel>(5, f.model), f.panel, 3);
  for (std::size_t s = 0; s < 2; ++s)
    for (const auto& d : r.averaged[s]) CHECK(max_abs(d.row(0).transpose() - rec.sizes[s] * f.sys.H_inv.col(1)) < 1e-12);
}

TEST_CASE("linear responses scale with the shock size and match the closed form") {
  auto f = linear_fixture(3);
  GirfSpec spec = base_spec(8);
  spec.sizes = {-3.0, -1.0, 1.0, 3.0, 6.0};
  spec.origins = {20, 40, 57};
  spec.keep_origins = true;
  const auto res = sgirf(spec, std::vector<ForecastModel>(20, f.model), f.panel, PgasOptions{}, 4);
  for (std::size_t s = 1; s < spec.sizes.size(); ++s)
    for (std::size_t m = 0; m < 20; ++m) CHECK(max_abs(res.averaged[s][m] - res.averaged[0][m]) < 1e-10);

  const Eigen::MatrixXd exact = closed_form_irf(f.sys, 1, 1.0, 8);
  CHECK(max_abs(res.mean(0).row(0) - exact.row(0)) < 1e-6);
  CHECK(max_abs(res.mean(0) - exact) < 5.0 * res.standard_error(0).maxCoeff() + 1e-6);
}

TEST_CASE("expectation mode reproduces the exact linear response at every origin") {
  auto f = linear_fixture(4);
  GirfSpec spec = base_spec(10);
  spec.sizes = {1.0, 6.0};
  spec.expectation = true;
  spec.origins = {5, 33, 57};
  spec.keep_origins = true;
  const auto res = sgirf(spec, std::vector<ForecastModel>(3, f.model), f.panel, PgasOptions{}, 5);
  const Eigen::MatrixXd exact = closed_form_irf(f.sys, 1, 1.0, 10);
  for (std::size_t s = 0; s < 2; ++s)
    for (const auto& origin : res.per_origin[s])
      for (const auto& d : origin) CHECK(max_abs(d - exact) < 1e-6);
}

TEST_CASE("recursive substitution with shared noise is exact") {
  auto f = linear_fixture(5);
  GirfSpec spec = base_spec(12);
  spec.mode = GirfMode::recursive;
  spec.sizes = {-1.0, 2.0};
  spec.origins = {-1, 57};
  const auto res = sgirf_recursive(spec, std::vector<ForecastModel>(4, f.model), f.panel, 6);
  const Eigen::MatrixXd exact = closed_form_irf(f.sys, 1, 1.0, 12);
  for (std::size_t s = 0; s < 2; ++s)
    for (const auto& d : res.averaged[s]) CHECK(max_abs(d - exact) < 1e-10);
}

TEST_CASE("recursive and particle responses agree for a nonlinear mean") {
  auto f = nonlinear_fixture(6);
  GirfSpec spec = base_spec(4);
  spec.sizes = {2.0};
  spec.free_other_shocks = true;
  const std::vector<ForecastModel> models(600, f.model);
  const auto pg = sgirf(spec, models, f.panel, PgasOptions{}, 7);
  GirfSpec rec = spec;
  rec.mode = GirfMode::recursive;
  rec.shared_noise = false;
  const auto rr = sgirf_recursive(rec, models, f.panel, 8);
  const Eigen::MatrixXd se = (pg.standard_error(0).cwiseAbs2() + rr.standard_error(0).cwiseAbs2()).cwiseSqrt();
  for (int h = 0; h < 4; ++h)
    for (Eigen::Index i = 0; i < 3; ++i)
      CHECK(std::abs(pg.mean(0)(h, i) - rr.mean(0)(h, i)) <= 3.0 * se(h, i) + 1e-9);
}

TEST_CASE("identical scenario and baseline give no response") {
  auto f = linear_fixture(7);
  GirfSpec spec = base_spec(4);
  spec.variant = GirfVariant::ugirf;
  RestrictionEntry e;
  e.horizons = {1};
  e.weights = {{"y1", 1.0}};
  e.targets = {1.0};
  spec.scenario.horizon = 4;
  spec.scenario.entries = {e};
  spec.baseline = spec.scenario;
  const auto res = ugirf(spec, std::vector<ForecastModel>(10, f.model), f.panel, PgasOptions{}, 9);
  for (const auto& d : res.averaged[0]) CHECK(max_abs(d) == 0.0);
}

TEST_CASE("observable scenario matches the closed form mean gap") {
  auto f = linear_fixture(8);
  const int H = 5;
  GirfSpec spec = base_spec(H);
  spec.variant = GirfVariant::ugirf;
  RestrictionEntry e;
  e.horizons = {1};
  e.weights = {{"y1", 1.0}};
  e.targets = {2.0};
  spec.scenario.horizon = H;
  spec.scenario.entries = {e};
  const auto res = ugirf(spec, std::vector<ForecastModel>(400, f.model), f.panel, PgasOptions{}, 10);

  LinearSystem sys = f.sys;
  sys.x_init = f.panel.lag_stack(f.panel.T() - 1);
  RestrictionSet set = RestrictionSet::none(H);
  set.at(1).obs.append(Eigen::RowVector3d(1.0, 0.0, 0.0), 2.0, kHardVariance);
  const Eigen::MatrixXd gap = closed_form_conditional_forecast(sys, set, H).mean_matrix() - unconditional_path(sys, H).mean_matrix();
  const Eigen::MatrixXd se = res.standard_error(0);
  for (int h = 0; h < H; ++h)
    for (Eigen::Index i = 0; i < 3; ++i) CHECK(std::abs(res.mean(0)(h, i) - gap(h, i)) <= 3.5 * se(h, i) + 1e-3);
}

TEST_CASE("restricted paths match the baseline path in a linear model") {
  auto f = linear_fixture(9);
  GirfSpec spec = base_spec(5);
  spec.variant = GirfVariant::rgirf;
  spec.sizes = {1.0};
  spec.restricted = Eigen::MatrixXd::Zero(2, 3);
  spec.restricted(0, 0) = 1.0;
  spec.restricted(1, 2) = 1.0;
  const auto res = rgirf(spec, std::vector<ForecastModel>(300, f.model), f.panel, PgasOptions{}, 11);
  for (double v : res.violation[0]) CHECK(v < 1e-3);
  const Eigen::MatrixXd m = res.mean(0), se = res.standard_error(0);
  for (int h = 0; h < 5; ++h) {
    CHECK(std::abs(m(h, 0)) <= 3.5 * se(h, 0) + 1e-6);
    CHECK(std::abs(m(h, 2)) <= 3.5 * se(h, 2) + 1e-6);
  }
}

TEST_CASE("restricted dimensions respond by zero in expectation") {
  auto f = nonlinear_fixture(10);
  GirfSpec spec = base_spec(4);
  spec.variant = GirfVariant::rgirf;
  spec.sizes = {1.0};
  spec.restricted = Eigen::RowVector3d(0.0, 0.0, 1.0);
  const auto res = rgirf(spec, std::vector<ForecastModel>(400, f.model), f.panel, PgasOptions{}, 12);
  const Eigen::MatrixXd m = res.mean(0), se = res.standard_error(0);
  for (int h = 0; h < 4; ++h) CHECK(std::abs(m(h, 2)) <= 3.0 * se(h, 2) + 1e-6);
  for (double v : res.violation[0]) CHECK(v < 1e-3);
}

TEST_CASE("no restricted dimensions reduces to the structural response") {
  auto f = nonlinear_fixture(11);
  GirfSpec spec = base_spec(4);
  spec.sizes = {1.0, -2.0};
  const std::vector<ForecastModel> models(15, f.model);
  const auto a = sgirf(spec, models, f.panel, PgasOptions{}, 13);
  spec.variant = GirfVariant::rgirf;
  const auto b = rgirf(spec, models, f.panel, PgasOptions{}, 13);
  for (std::size_t s = 0; s < 2; ++s)
    for (std::size_t m = 0; m < 15; ++m) CHECK(a.averaged[s][m] == b.averaged[s][m]);
}

TEST_CASE("results do not depend on the thread count") {
  auto f = nonlinear_fixture(12);
  GirfSpec spec = base_spec(3);
  spec.origins = {10, 20, 30, 40};
  const std::vector<ForecastModel> models(6, f.model);
  const auto one = sgirf(spec, models, f.panel, PgasOptions{}, 14);
  spec.threads = 3;
  const auto many = sgirf(spec, models, f.panel, PgasOptions{}, 14);
  for (std::size_t m = 0; m < 6; ++m) CHECK(one.averaged[0][m] == many.averaged[0][m]);
}

TEST_CASE("time averaging") {
  GirfResult r;
  r.sizes = {1.0};
  r.H = 2;
  r.n = 1;
  r.origins = {0, 1, 2};
  const Eigen::MatrixXd a = Eigen::Vector2d(1.0, 2.0), b = Eigen::Vector2d(-1.0, 5.0), c = Eigen::Vector2d(3.0, -4.0);
  r.averaged = {{a}};

  r.per_origin = {{{a}, {a}, {a}}};
  CHECK(average_over_time(r).averaged[0][0] == a);

  r.per_origin = {{{a}, {Eigen::MatrixXd(-a)}}};
  r.origins = {0, 1};
  CHECK(average_over_time(r).averaged[0][0].isZero(0.0));

  r.per_origin = {{{a}, {b}, {c}}};
  r.origins = {0, 1, 2};
  const Eigen::MatrixXd avg = average_over_time(r).averaged[0][0];
  CHECK(avg(0, 0) == doctest::Approx(1.0));
  CHECK(avg(1, 0) == doctest::Approx(1.0));

  r.per_origin = {{{b}}};
  r.origins = {0};
  CHECK(average_over_time(r).averaged[0][0] == b);
  r.per_origin.clear();
  CHECK_THROWS_AS(average_over_time(r), InputError);
}

TEST_CASE("cumulated responses are partial sums of flagged variables") {
  Eigen::MatrixXd d(3, 2);
  d << 1, 1, 2, 2, 3, 3;
  const Eigen::MatrixXd c = cumulate_responses(d, {true, false});
  CHECK(c.col(0) == Eigen::Vector3d(1, 3, 6));
  CHECK(c.col(1) == d.col(1));
}

TEST_CASE("structural impact restrictions") {
  const auto set = sgirf_restrictions(3, 2, 0.5, 1.0, 4, false);
  CHECK(set.at(1).shock.r == Eigen::Vector3d(0, 0, 1.5));
  CHECK(set.at(1).shock.Omega.diagonal() == Eigen::Vector3d(1.0, 1.0, kHardVariance));
  for (int h = 2; h <= 4; ++h) CHECK(set.at(h).empty());
  const auto pinned = sgirf_restrictions(3, 2, 0.0, 1.0, 4, true);
  CHECK(pinned.at(1).shock.Omega.diagonal() == Eigen::Vector3d::Constant(kHardVariance));
  for (int h = 2; h <= 4; ++h) CHECK(pinned.at(h).shock.Omega == Eigen::MatrixXd::Identity(3, 3) * kHardVariance);
  const auto free = sgirf_restrictions(3, 2, 0.0, 1.0, 4, false, kHardVariance, true);
  REQUIRE(free.at(1).shock.rows() == 1);
  CHECK(free.at(1).shock.R == Eigen::RowVector3d(0, 0, 1));
  CHECK(free.at(1).shock.r[0] == 1.0);
}

TEST_CASE("invalid response settings are rejected") {
  GirfSpec s;
  CHECK_NOTHROW(s.validate(3, 50));
  s.shock = 3;
  CHECK_THROWS_AS(s.validate(3, 50), InputError);
  s = GirfSpec{};
  s.origins = {50};
  CHECK_THROWS_AS(s.validate(3, 50), InputError);
  s = GirfSpec{};
  s.sizes.clear();
  CHECK_THROWS_AS(s.validate(3, 50), InputError);
  s = GirfSpec{};
  s.cumulate = {true};
  CHECK_THROWS_AS(s.validate(3, 50), InputError);
  s = GirfSpec{};
  s.variant = GirfVariant::rgirf;
  s.restricted = Eigen::MatrixXd::Ones(1, 2);
  CHECK_THROWS_AS(s.validate(3, 50), InputError);
}

}
