#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "bscen/data.hpp"
#include "bscen/pgas.hpp"
#include "bscen/restrictions.hpp"

namespace bscen {

enum class GirfVariant { ugirf, sgirf, rgirf };
enum class GirfMode { pgas, recursive };

struct GirfSpec {
  GirfVariant variant = GirfVariant::sgirf;
  GirfMode mode = GirfMode::pgas;
  Eigen::Index shock = 0;
  std::vector<double> sizes{1.0};
  double d0 = 0.0;
  std::vector<Eigen::Index> origins;  // panel rows the forecast starts after; empty = last row
  int H = 20;
  bool scale_by_size = true;
  std::vector<bool> cumulate;  // per variable partial sums over h; empty = none
  double hard_variance = kHardVariance;

  // Every shock other than `shock` is hard-pinned at zero on impact and every
  // shock at h > 1, so the response is the expectation along one shock path.
  bool expectation = false;
  // Recursive mode: scenario and baseline share the random numbers after impact.
  bool shared_noise = true;
  // Drop the N(0, 1) impact rows of the other shocks. Through the conditioning
  // update those rows leave the shocks with variance 1/2; without them they
  // keep their N(0, 1) law, as in the recursive simulation.
  bool free_other_shocks = false;

  // RGIRF: rows of R^(y), applied at every horizon, and the driving shocks.
  // Shocks outside `driving` get r = 0 with variance `non_driving_variance` for h > 1.
  Eigen::MatrixXd restricted;
  std::vector<Eigen::Index> driving;
  bool pin_non_driving = true;
  double non_driving_variance = 1.0;

  // UGIRF scenario and baseline (baseline empty = unconditional forecast).
  RestrictionTemplate scenario;
  RestrictionTemplate baseline;

  bool keep_origins = false;  // store per-origin responses, not only the time average
  int threads = 1;            // worker threads across origins

  void validate(Eigen::Index n, Eigen::Index T) const;
};

// delta(size, draw) is H x n. Per-origin responses are kept when requested.
struct GirfResult {
  std::vector<double> sizes;
  std::vector<Eigen::Index> origins;
  int H = 0;
  Eigen::Index n = 0;
  bool scaled = false;
  bool cumulative = false;

  std::vector<std::vector<Eigen::MatrixXd>> averaged;                 // [size][draw]
  std::vector<std::vector<std::vector<Eigen::MatrixXd>>> per_origin;  // [size][origin][draw]
  std::vector<std::vector<double>> violation;                         // RGIRF: [size][draw] max |R(y_s - y_b)| of traced paths

  int draws() const { return averaged.empty() ? 0 : static_cast<int>(averaged.front().size()); }
  // Across-draw quantiles of the time-averaged response: [q] is H x n.
  std::vector<Eigen::MatrixXd> quantiles(std::size_t size_index, const std::vector<double>& probs) const;
  Eigen::MatrixXd mean(std::size_t size_index) const;
  // Across-draw Monte Carlo standard error of the mean (naive, iid).
  Eigen::MatrixXd standard_error(std::size_t size_index) const;
};

// Impact-only scenario set for SGIRFs: shock j at d0 + d, C_h empty for h > 1
// unless `expectation` pins every shock.
RestrictionSet sgirf_restrictions(Eigen::Index n, Eigen::Index j, double d0, double d, int H, bool expectation,
                                  double hard = kHardVariance, bool free_others = false);

// Streams retained draws through per-origin forecasters. Scenario and baseline
// of one (origin, draw) pair use the same random numbers.
class GirfEngine {
 public:
  GirfEngine(GirfSpec spec, const Panel& panel, PgasOptions options, std::uint64_t seed);
  ~GirfEngine();
  GirfEngine(GirfEngine&&) noexcept;
  GirfEngine& operator=(GirfEngine&&) noexcept;

  void process(const ForecastModel& model);
  GirfResult result() const;
  const GirfSpec& spec() const { return spec_; }

 private:
  struct OriginState;
  void process_origin(std::size_t o, const ForecastModel& model, int draw,
                      std::vector<Eigen::MatrixXd>& delta, std::vector<double>& violation);

  GirfSpec spec_;
  const Panel* panel_;
  PgasOptions options_;
  std::uint64_t seed_;
  int draw_ = 0;
  std::vector<std::unique_ptr<OriginState>> origins_;
  GirfResult result_;
};

GirfResult ugirf(const GirfSpec& spec, const std::vector<ForecastModel>& models, const Panel& panel,
                 const PgasOptions& options, std::uint64_t seed);
GirfResult sgirf(const GirfSpec& spec, const std::vector<ForecastModel>& models, const Panel& panel,
                 const PgasOptions& options, std::uint64_t seed);
GirfResult sgirf_recursive(const GirfSpec& spec, const std::vector<ForecastModel>& models, const Panel& panel,
                           std::uint64_t seed);
GirfResult rgirf(const GirfSpec& spec, const std::vector<ForecastModel>& models, const Panel& panel,
                 const PgasOptions& options, std::uint64_t seed);

// Mean over the stored per-origin responses, draw by draw.
GirfResult average_over_time(const GirfResult& result);

// Partial sums over h for flagged variables.
Eigen::MatrixXd cumulate_responses(const Eigen::MatrixXd& delta, const std::vector<bool>& flags);

}  // namespace bscen
