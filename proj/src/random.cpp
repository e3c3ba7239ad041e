#include "bscen/random.hpp"

#include <array>
#include <cmath>

#include "bscen/errors.hpp"

namespace bscen {

double Rng::uniform() {
  // generate_canonical can return exactly 0; reject so that log(u) is finite.
  double u = 0.0;
  do {
    u = std::generate_canonical<double, 53>(engine_);
  } while (u <= 0.0 || u >= 1.0);
  return u;
}

double Rng::gamma(double shape, double scale) {
  if (!(shape > 0.0) || !(scale > 0.0) || !std::isfinite(shape) || !std::isfinite(scale)) {
    throw NumericalError("gamma draw with invalid shape " + std::to_string(shape) + " or scale " +
                         std::to_string(scale));
  }
  std::gamma_distribution<double> dist(shape, scale);
  return dist(engine_);
}

double Rng::inv_gamma(double shape, double rate) { return 1.0 / gamma(shape, 1.0 / rate); }

double Rng::beta(double a, double b) {
  const double x = gamma(a, 1.0);
  const double y = gamma(b, 1.0);
  return x / (x + y);
}

Eigen::VectorXd Rng::normal_vector(Eigen::Index n) {
  Eigen::VectorXd z(n);
  for (Eigen::Index i = 0; i < n; ++i) z[i] = normal();
  return z;
}

std::size_t Rng::categorical(std::span<const double> probs) {
  const double u = uniform();
  double cum = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    cum += probs[i];
    if (u < cum) return i;
  }
  return probs.size() - 1;
}

std::size_t Rng::categorical(const Eigen::Ref<const Eigen::VectorXd>& probs) {
  return categorical(std::span<const double>(probs.data(), static_cast<std::size_t>(probs.size())));
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b) {
  auto lo = [](std::uint64_t v) { return static_cast<std::uint32_t>(v & 0xffffffffULL); };
  auto hi = [](std::uint64_t v) { return static_cast<std::uint32_t>(v >> 32); };
  std::seed_seq seq{lo(base), hi(base), lo(a), hi(a), lo(b), hi(b)};
  std::array<std::uint32_t, 2> out{};
  seq.generate(out.begin(), out.end());
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

}  // namespace bscen
