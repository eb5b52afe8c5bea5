#pragma once

#include <cstdint>
#include <random>

namespace stcov {

// Inverse of the standard normal CDF (Wichura's PPND16 rational
// approximations), |relative error| < 1e-15 on (0,1).
double inverse_normal_cdf(double p);

// Deterministic random stream: mt19937_64 with uniforms mapped to (0,1)
// and normals drawn by inversion, so identical seeds give bit-identical
// output on every platform. Substreams are derived by a splitmix64 hash
// of (seed, stream) which keeps parallel replicates reproducible
// independently of thread count.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  static std::uint64_t mix(std::uint64_t seed, std::uint64_t stream);
  static Rng substream(std::uint64_t seed, std::uint64_t stream) {
    return Rng(mix(seed, stream));
  }

  // Uniform on the open interval (0,1), 53 significant bits.
  double uniform() {
    return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1p-53;
  }

  double normal() { return inverse_normal_cdf(uniform()); }

  // Gamma(shape, 1) by Marsaglia-Tsang squeeze (deterministic draw order).
  double gamma(double shape);

 private:
  std::mt19937_64 engine_;
};

}  // namespace stcov
