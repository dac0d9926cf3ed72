#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace playseq {

// Seeded generator whose output is fixed across standard libraries:
// std::mt19937_64 is fully specified, but the std distributions are not, so
// the conversions to real numbers and categorical draws are done here.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Uniform on the open interval (0, 1).
  double uniform_open() {
    return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
  }

  // Index drawn with probability proportional to weights[i].
  std::size_t categorical(std::span<const double> weights) {
    double total = 0.0;
    for (double w : weights) total += w;
    const double u = uniform_open() * total;
    double acc = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      acc += weights[i];
      if (u < acc) return i;
    }
    // Round-off can leave u just above the accumulated mass.
    for (std::size_t i = weights.size(); i-- > 0;)
      if (weights[i] > 0.0) return i;
    return 0;
  }

  // Row of `size` uniform(0,1) draws normalized to sum to one.
  std::vector<double> stochastic_row(std::size_t size) {
    std::vector<double> row(size);
    double total = 0.0;
    for (auto& v : row) {
      v = uniform_open();
      total += v;
    }
    for (auto& v : row) v /= total;
    return row;
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace playseq
