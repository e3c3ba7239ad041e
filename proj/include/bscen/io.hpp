#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "bscen/data.hpp"
#include "bscen/gibbs.hpp"
#include "bscen/girf.hpp"
#include "bscen/pgas.hpp"
#include "bscen/restrictions.hpp"

namespace bscen {

// Restriction file: {"horizon": H, "hard_variance": v, "restrictions": [entry, ...]}.
// See docs/restrictions.md for the entry format.
RestrictionTemplate parse_restrictions(const std::string& text, int default_horizon = 0);
RestrictionTemplate load_restrictions(const std::filesystem::path& path, int default_horizon = 0);

struct DataConfig {
  std::filesystem::path path;
  std::map<std::string, int> transforms;
  int p = 4;
};

struct ForecastTask {
  int horizon = 0;
  std::optional<RestrictionTemplate> restrictions;  // none = unconditional
  bool augment = false;  // condition parameter draws on the restricted path
};

// Names are resolved against the panel when the run starts.
struct GirfTask {
  GirfSpec spec;
  std::string shock;
  std::vector<std::string> cumulate;
  bool cumulate_differenced = true;  // used when `cumulate` is absent
  bool cumulate_given = false;
  std::vector<std::vector<std::pair<std::string, double>>> restricted;
  std::vector<std::string> driving;
  std::string origins = "last";  // "last", "all" or "FROM:TO" in quarter labels
};

struct VerifyTask {
  std::vector<int> particles{5, 10, 25, 50};
  int draws = 3000;
  int burn = 300;
  int T = 1000;
  int H = 20;
  std::uint64_t data_seed = 20240601;
  int irf_draws = 200;
};

struct RunConfig {
  std::string command;  // estimate | forecast | girf | verify
  DataConfig data;
  SamplerConfig sampler;
  PgasOptions pgas;
  ForecastTask forecast;
  GirfTask girf;
  VerifyTask verify;
  std::vector<double> quantiles{0.16, 0.25, 0.5, 0.75, 0.84};
  std::filesystem::path output = "out";
  std::filesystem::path base_dir;  // relative paths resolve against the config file
  std::string canonical;           // normalized JSON of the parsed input
};

RunConfig parse_run_config(const std::string& text, const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::filesystem::path& path);

// 64-bit FNV-1a, hex encoded.
std::string fnv1a_hex(const std::string& bytes);

GirfSpec resolve_girf_task(const GirfTask& task, const Panel& panel, const DataConfig& data);

std::string save_checkpoint(const ModelState& state);
ModelState load_checkpoint(const std::string& text, const Panel& panel);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace bscen
