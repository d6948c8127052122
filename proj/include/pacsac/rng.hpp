#ifndef PACSAC_RNG_HPP
#define PACSAC_RNG_HPP

#include "pacsac/diffmath.hpp"

#include <cstdint>
#include <random>
#include <string_view>

namespace pacsac {

/// Seeded generator for one named purpose (env, actor-noise, ...). Streams
/// derived from the same run seed with different names are independent.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed = 0, std::string_view name = "default");

  double uniform(double lo = 0.0, double hi = 1.0);
  double normal();
  /// Uniform integer in [0, n).
  std::size_t index(std::size_t n);
  Matrix normal_matrix(std::size_t rows, std::size_t cols);
  Matrix uniform_matrix(std::size_t rows, std::size_t cols, double lo, double hi);

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace pacsac

#endif  // PACSAC_RNG_HPP
