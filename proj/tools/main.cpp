#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "bscen/errors.hpp"
#include "commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Bayesian scenario analysis: estimation, conditional forecasts and impulse responses"};
  app.require_subcommand(1);

  bscen::cli::CommandOptions options;
  std::uint64_t seed = 0;
  std::string out;
  for (const char* name : {"estimate", "forecast", "girf", "verify"}) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--config", options.config, "JSON run configuration")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "override sampler.seed");
    sub->add_option("--chains", options.chains, "independent chains, pooled")->check(CLI::PositiveNumber);
    sub->add_option("--out", out, "output directory (overrides the config)");
    sub->add_flag("--dump-draws", options.dump_draws, "also write every retained draw");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }
  const CLI::App* sub = app.get_subcommands().front();
  if (sub->count("--seed")) options.seed = seed;
  if (!out.empty()) options.out = out;

  try {
    bscen::cli::run_command(sub->get_name(), options);
  } catch (const bscen::InputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const bscen::DomainError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
