#include <doctest.h>

#include <filesystem>

#include "bscen/errors.hpp"
#include "bscen/io.hpp"
#include "bscen/linear_oracle.hpp"
#include "fixtures.hpp"

using namespace bscen;

TEST_SUITE("io") {

TEST_CASE("restriction entries") {
  const auto t = parse_restrictions(R"({
    "horizon": 6,
    "hard_variance": 1e-6,
    "restrictions": [
      {"weights": "rate", "horizons": {"from": 2, "to": 4}, "target": [1, 2, 3]},
      {"kind": "shock", "weights": {"output": 0.5, "rate": -1}, "horizons": [1, 6], "target": 0,
       "hardness": "soft", "variance": 0.25},
      {"weights": {"inflation": 1}, "horizons": 5, "target": 0.5, "hardness": "sd-scaled", "scale": 2,
       "relative_to_last": true}
    ]})");
  CHECK(t.horizon == 6);
  CHECK(t.hard_variance == 1e-6);
  REQUIRE(t.entries.size() == 3);
  CHECK(t.entries[0].horizons == std::vector<int>{2, 3, 4});
  CHECK(t.entries[0].weights == std::vector<std::pair<std::string, double>>{{"rate", 1.0}});
  CHECK(t.entries[0].hardness == Hardness::hard);
  CHECK(t.entries[1].on_shocks);
  CHECK(t.entries[1].horizons == std::vector<int>{1, 6});
  CHECK(t.entries[1].hardness == Hardness::soft);
  CHECK(t.entries[1].variance == 0.25);
  CHECK(t.entries[2].hardness == Hardness::sd_scaled);
  CHECK(t.entries[2].scale == 2.0);
  CHECK(t.entries[2].relative_to_last);
  CHECK(t.any_shock());
}

TEST_CASE("restriction file errors") {
  CHECK_THROWS_AS(parse_restrictions("{"), InputError);
  CHECK_THROWS_AS(parse_restrictions(R"({"restrictions": []})"), InputError);
  CHECK_NOTHROW(parse_restrictions(R"({"restrictions": []})", 4));
  CHECK_THROWS_AS(parse_restrictions(R"({"horizon": 3, "extra": 1})"), InputError);
  CHECK_THROWS_AS(parse_restrictions(R"({"horizon": 3, "restrictions": [{"weights": "a", "horizons": [4], "target": 1}]})"),
                  InputError);
  CHECK_THROWS_AS(parse_restrictions(R"({"horizon": 3, "restrictions": [{"weights": "a", "target": 1}]})"), InputError);
  CHECK_THROWS_AS(parse_restrictions(R"({"horizon": 3, "restrictions": [{"kind": "x", "weights": "a", "horizons": 1, "target": 1}]})"),
                  InputError);
  CHECK_THROWS_AS(parse_restrictions(R"({"horizon": 3, "restrictions": [{"weights": {}, "horizons": 1, "target": 1}]})"),
                  InputError);
  CHECK_THROWS_AS(parse_restrictions(R"({"horizon": 3, "restrictions": [{"weights": "a", "horizons": {"from": 3, "to": 1}, "target": 1}]})"),
                  InputError);
  CHECK_THROWS_AS(parse_restrictions(R"({"horizon": 3, "hard_variance": 0})"), InputError);
}

TEST_CASE("run configuration") {
  const auto c = parse_run_config(R"({
    "command": "forecast",
    "data": {"path": "d.csv", "transforms": {"gdp": 1}, "p": 3},
    "model": {"backend": "linear", "heteroskedastic": false, "hyper_shape": "sample_size"},
    "sampler": {"n_burn": 5, "n_save": 7, "thin": 2, "seed": 99, "particles": 4, "ancestor": "one_step"},
    "forecast": {"horizon": 2, "restrictions": {"restrictions": [{"weights": "gdp", "horizons": 1, "target": 1}]}},
    "quantiles": [0.9, 0.1],
    "output": "res"
  })", "/base");
  CHECK(c.command == "forecast");
  CHECK(c.data.path == std::filesystem::path("/base/d.csv"));
  CHECK(c.data.transforms.at("gdp") == 1);
  CHECK(c.data.p == 3);
  CHECK(c.sampler.backend == Backend::linear);
  CHECK_FALSE(c.sampler.heteroskedastic);
  CHECK(c.sampler.hyper_shape == HyperShape::sample_size);
  CHECK(c.sampler.n_burn == 5);
  CHECK(c.sampler.thin == 2);
  CHECK(c.sampler.seed == 99);
  CHECK(c.pgas.particles == 4);
  CHECK(c.pgas.ancestor == AncestorWeighting::one_step);
  REQUIRE(c.forecast.restrictions);
  CHECK(c.forecast.restrictions->horizon == 2);
  CHECK(c.quantiles == std::vector<double>{0.1, 0.9});
  CHECK(c.output == std::filesystem::path("/base/res"));
}

TEST_CASE("run configuration rejects unknown keys and bad values") {
  CHECK_THROWS_AS(parse_run_config(R"({"command": "estimate", "typo": 1})"), InputError);
  CHECK_THROWS_AS(parse_run_config(R"({"model": {"trees": 10, "treez": 1}})"), InputError);
  CHECK_THROWS_AS(parse_run_config(R"({"model": {"backend": "spline"}})"), InputError);
  CHECK_THROWS_AS(parse_run_config(R"({"sampler": {"particles": 1}})"), InputError);
  CHECK_THROWS_AS(parse_run_config(R"({"data": {"p": 0}})"), InputError);
  CHECK_THROWS_AS(parse_run_config(R"({"quantiles": [1.5]})"), InputError);
  CHECK_THROWS_AS(parse_run_config(R"({"girf": {"variant": "sgirf"}})"), InputError);
  CHECK_THROWS_AS(parse_run_config(R"({"girf": {"variant": "ugirf", "shock": "a"}})"), InputError);
  CHECK_THROWS_AS(parse_run_config(R"({"forecast": {"horizon": 3, "restrictions": {"horizon": 4}}})"), InputError);
  CHECK_THROWS_AS(parse_run_config(R"({"verify": {"horizon": 10}})"), InputError);
}

TEST_CASE("fnv1a digests") {
  CHECK(fnv1a_hex("") == "cbf29ce484222325");
  CHECK(fnv1a_hex("a") == "af63dc4c8601ec8c");
  CHECK(fnv1a_hex("foobar") == "85944171f73967e8");
}

TEST_CASE("text files") {
  const auto path = std::filesystem::temp_directory_path() / "bscen_io_test" / "nested" / "x.txt";
  write_text_file(path, "abc\n1,2\n");
  CHECK(read_text_file(path) == "abc\n1,2\n");
  std::filesystem::remove_all(path.parent_path().parent_path());
  CHECK_THROWS_AS(read_text_file(path), InputError);
}

TEST_CASE("checkpoints round trip") {
  Rng rng(3);
  LinearSystem sys;
  sys.A = Eigen::MatrixXd::Identity(2, 2) * 0.5;
  sys.c = Eigen::Vector2d(0.1, -0.1);
  sys.Sigma = testing::random_spd(2, rng);
  sys.H_inv = sys.Sigma.llt().matrixL();
  const Panel panel = panel_from_matrix(simulate_linear(sys, 80, rng), 1);

  for (Backend backend : {Backend::linear, Backend::bart}) {
    CAPTURE(static_cast<int>(backend));
    SamplerConfig config;
    config.backend = backend;
    config.trees = 5;
    ModelState st = initialize_state(config, panel);
    for (int i = 0; i < 5; ++i) gibbs_sweep(st, panel, rng);
    const std::string text = save_checkpoint(st);
    const ModelState back = load_checkpoint(text, panel);
    CHECK(save_checkpoint(back) == text);
    CHECK(back.sweep_index == st.sweep_index);
    CHECK(back.is_linear() == st.is_linear());
    CHECK((back.fit - st.fit).cwiseAbs().maxCoeff() < 1e-12);
    const Eigen::Vector2d x(0.3, -0.7);
    CHECK((back.mean_function()->predict(x) - st.mean_function()->predict(x)).cwiseAbs().maxCoeff() < 1e-12);
  }

  const Panel wrong = panel_from_matrix(simulate_linear(sys, 80, rng), 2);
  SamplerConfig config;
  config.backend = Backend::linear;
  const std::string text = save_checkpoint(initialize_state(config, panel));
  CHECK_THROWS_AS(load_checkpoint(text, wrong), InputError);
  CHECK_THROWS_AS(load_checkpoint("{\"format\": \"other\"}", panel), InputError);
}

}
