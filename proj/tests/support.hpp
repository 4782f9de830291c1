#pragma once

#include <cmath>
#include <numeric>
#include <vector>

#include <Eigen/Core>

#include "mrhet/rng.hpp"
#include "mrhet/types.hpp"

namespace mrhet::testing {

inline Row make_row(Study st, std::vector<std::uint8_t> z1, std::vector<std::uint8_t> z2,
                    std::vector<std::uint8_t> z3, double x1, double x2, double y1, double y2) {
  Row r;
  r.study = st;
  r.z1 = std::move(z1);
  r.z2 = std::move(z2);
  r.z3 = std::move(z3);
  if (st == Study::A) {
    r.x1 = x1;
    r.x2 = x2;
  }
  r.y1 = y1;
  r.y2 = y2;
  return r;
}

/// Arbitrary small dataset; study membership follows `pattern` ('A'/'B').
inline CombinedDataset random_dataset(const IvCounts& dims, const std::string& pattern,
                                      std::uint64_t seed) {
  Rng rng(seed);
  CombinedDataset d;
  d.dims = dims;
  const auto geno = [&](std::size_t n) {
    std::vector<std::uint8_t> z(n);
    for (auto& g : z) g = static_cast<std::uint8_t>(rng.binomial(2, 0.4));
    return z;
  };
  for (char c : pattern) {
    const Study st = c == 'A' ? Study::A : Study::B;
    auto z1 = geno(dims.l);
    auto z2 = geno(dims.k);
    auto z3 = geno(dims.m);
    d.rows.push_back(make_row(st, z1, z2, z3, rng.normal(), rng.normal(), rng.normal(), rng.normal()));
  }
  return d;
}

inline ParamState random_state(const IvCounts& dims, std::size_t n_a, std::size_t n_b,
                               std::uint64_t seed) {
  Rng rng(seed);
  ParamState s = ParamState::zeros(dims, n_a, n_b);
  const auto fill = [&](Eigen::VectorXd& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = rng.normal(0.0, 0.5);
  };
  s.beta = {rng.normal(), rng.normal()};
  fill(s.alpha1);
  fill(s.alpha2);
  fill(s.alpha31);
  fill(s.alpha32);
  fill(s.u);
  fill(s.x1_imputed);
  fill(s.x2_imputed);
  for (auto& d : s.delta) d = rng.normal();
  for (auto& v : s.v) v = rng.normal(0.0, 0.3);
  for (auto& s2 : s.sigma2) s2 = rng.uniform(0.2, 2.0);
  return s;
}

inline double mean(const std::vector<double>& x) {
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

inline double variance(const std::vector<double>& x) {
  const double m = mean(x);
  double ss = 0.0;
  for (double v : x) ss += (v - m) * (v - m);
  return ss / static_cast<double>(x.size() - 1);
}

}  // namespace mrhet::testing
