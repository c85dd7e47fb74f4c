#pragma once

#include <cmath>
#include <cstdint>
#include <random>

// Deterministic samplers for synthetic count data. mt19937_64 output is fully
// specified by the standard, and the transforms below are hand-rolled, so the
// streams are reproducible across platforms and toolchains (the std::*
// distribution classes are not).
namespace synth {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  double uniform() {  // [0, 1)
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  double positive_uniform() {
    double u = uniform();
    while (u <= 0.0) u = uniform();
    return u;
  }

  double normal() {  // Box-Muller, a fresh pair per call
    double u1 = positive_uniform();
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  double gamma(double shape, double scale) {  // Marsaglia-Tsang
    if (shape < 1.0)
      return gamma(shape + 1.0, scale) * std::pow(positive_uniform(), 1.0 / shape);
    double d = shape - 1.0 / 3.0;
    double c = 1.0 / std::sqrt(9.0 * d);
    while (true) {
      double x = normal();
      double v = 1.0 + c * x;
      if (v <= 0.0) continue;
      v = v * v * v;
      double u = positive_uniform();
      if (std::log(u) < 0.5 * x * x + d - d * v + d * std::log(v)) return d * v * scale;
    }
  }

  int poisson(double lambda) {  // Knuth's product-of-uniforms method
    double limit = std::exp(-lambda);
    double product = uniform();
    int k = 0;
    while (product > limit) {
      ++k;
      product *= uniform();
    }
    return k;
  }

  // gamma-mixed Poisson: mean mu, variance mu + mu^2/theta
  int negative_binomial(double mu, double theta) {
    return poisson(gamma(theta, mu / theta));
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace synth
