#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>

#include <boost/random/binomial_distribution.hpp>
#include <boost/random/gamma_distribution.hpp>
#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_int_distribution.hpp>
#include <boost/random/uniform_real_distribution.hpp>

namespace mrhet {

/// SplitMix64 output function; a bijection on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// FNV-1a over the bytes of `tag`.
constexpr std::uint64_t tag_word(std::string_view tag) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (char c : tag) {
    h ^= static_cast<std::uint8_t>(c);
    h *= 0x100000001B3ULL;
  }
  return h;
}

/// Stream seed for a task, derived from the master seed and a label path.
///
///   h = mix64(master_seed)
///   for each label w, in order:  h = mix64(h ^ mix64(w + 0x9E3779B97F4A7C15))
///
/// String labels enter as tag_word(label). Because mix64 is bijective, two
/// derivations that share a prefix and differ in a single label never collide.
/// The result depends only on its arguments.
constexpr std::uint64_t derive_seed(std::uint64_t master_seed,
                                    std::initializer_list<std::uint64_t> labels) {
  std::uint64_t h = mix64(master_seed);
  for (std::uint64_t w : labels) h = mix64(h ^ mix64(w + 0x9E3779B97F4A7C15ULL));
  return h;
}

/// Random source for one chain or one task. Uses Boost distributions so
/// draws are identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double normal() { return normal_(engine_); }
  double normal(double mean, double sd) { return mean + sd * normal_(engine_); }
  double uniform(double lo, double hi) {
    return boost::random::uniform_real_distribution<double>(lo, hi)(engine_);
  }
  /// Gamma(shape, rate).
  double gamma(double shape, double rate) {
    return boost::random::gamma_distribution<double>(shape, 1.0 / rate)(engine_);
  }
  /// Inv-Gamma(shape, rate): the reciprocal of a Gamma(shape, rate) draw.
  double inv_gamma(double shape, double rate) { return 1.0 / gamma(shape, rate); }
  int binomial(int trials, double p) {
    return boost::random::binomial_distribution<int, double>(trials, p)(engine_);
  }
  std::size_t index_below(std::size_t n) {
    return boost::random::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  boost::random::normal_distribution<double> normal_{};
};

}  // namespace mrhet
