#pragma once

// Seeded sampling used by the synthetic data generator and the error injector.
//
// The engine is std::mt19937_64, whose output sequence is fixed by the C++
// standard. Distributions are implemented here rather than taken from <random>
// because the standard library distributions are implementation-defined:
//   uniform01  = (engine() >> 11) * 2^-53                      in [0, 1)
//   normal     = Box-Muller, cosine branch only:
//                sqrt(-2 ln(1 - u1)) * cos(2 pi u2), one value per two draws
//   index(n)   = engine() % n  (bias below 2^-40 for the sizes used here)
// Any implementation reproducing these three formulas over MT19937-64 regenerates
// identical instances.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

#include "gfb/space.hpp"

namespace gfb {

class Sampler {
 public:
  explicit Sampler(std::uint64_t seed) : engine_(seed) {}

  /// Stream keyed by (seed, stream): used so iteration k's draws do not depend on earlier k.
  Sampler(std::uint64_t seed, std::uint64_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
    engine_.seed(seq);
  }

  std::uint64_t next() { return engine_(); }

  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  double normal() {
    const double u1 = uniform01();
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(1.0 - u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  std::size_t index(std::size_t n) { return static_cast<std::size_t>(engine_() % n); }

  Block normal_block(std::size_t rows, std::size_t cols, double scale = 1.0) {
    Block b(rows, cols);
    for (auto& v : b.data()) v = scale * normal();
    return b;
  }

  ProductPoint normal_point(std::size_t n, Shape shape, double scale = 1.0) {
    std::vector<Block> blocks;
    blocks.reserve(n);
    for (std::size_t i = 0; i < n; ++i) blocks.push_back(normal_block(shape.rows, shape.cols, scale));
    return ProductPoint(std::move(blocks));
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace gfb
