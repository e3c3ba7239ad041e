#pragma once

#include <cstdint>
#include <random>
#include <span>

#include <Eigen/Dense>

namespace bscen {

// Seedable random source shared by every sampler in the library. All draws go
// through one 64-bit Mersenne twister so that a seed fixes an entire chain.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 1) : engine_(seed) {}

  double uniform();  // open interval (0, 1)
  double normal() { return normal_(engine_); }
  double gamma(double shape, double scale);
  double inv_gamma(double shape, double rate);
  double beta(double a, double b);
  double chi_squared(double df) { return gamma(0.5 * df, 2.0); }

  Eigen::VectorXd normal_vector(Eigen::Index n);

  // Inverse-CDF draw from normalized probabilities; ties resolve to the
  // lowest index and rounding slack at the top goes to the last index.
  std::size_t categorical(std::span<const double> probs);
  std::size_t categorical(const Eigen::Ref<const Eigen::VectorXd>& probs);

  std::uint64_t next_seed() { return engine_(); }
  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

// Deterministic seed derivation for independent streams (chains, origins,
// per-draw common random numbers).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0);

}  // namespace bscen
