#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

namespace bscen::cli {

struct CommandOptions {
  std::filesystem::path config;
  std::optional<std::uint64_t> seed;
  int chains = 1;
  std::optional<std::filesystem::path> out;
  bool dump_draws = false;
  int threads = 0;  // 0 = BSCEN_THREADS or the hardware concurrency
};

// Runs estimate, forecast, girf or verify and writes its tables under the
// output directory. Throws the library's error types.
void run_command(const std::string& command, const CommandOptions& options);

// Worker thread budget: BSCEN_THREADS when set, otherwise the hardware count.
int thread_budget();

}  // namespace bscen::cli
