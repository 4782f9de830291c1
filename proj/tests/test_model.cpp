#include <doctest.h>

#include <cmath>
#include <numbers>

#include "mrhet/errors.hpp"
#include "mrhet/model.hpp"
#include "support.hpp"

using namespace mrhet;
using mrhet::testing::make_row;

namespace {

const double kHalfLog2Pi = 0.5 * std::log(2.0 * std::numbers::pi);

double norm_lpdf(double x, double mu, double var) {
  return -kHalfLog2Pi - 0.5 * std::log(var) - (x - mu) * (x - mu) / (2.0 * var);
}

double ig_lpdf(double x, double a, double b) {
  return a * std::log(b) - std::lgamma(a) - (a + 1.0) * std::log(x) - b / x;
}

// Row-by-row density sum, written against the dataset layout rather than the
// dense model view.
double oracle_log_joint(const ParamState& s, const CombinedDataset& d, const PriorSpec& p) {
  double total = 0.0;
  std::size_t a_seen = 0, b_seen = 0;
  const std::size_t n_a = d.count(Study::A);
  for (const Row& r : d.rows) {
    const bool is_b = r.study == Study::B;
    const std::size_t ui = is_b ? n_a + b_seen : a_seen;
    const double u = s.u(static_cast<Eigen::Index>(ui));
    const double x1 = is_b ? s.x1_imputed(static_cast<Eigen::Index>(b_seen)) : *r.x1;
    const double x2 = is_b ? s.x2_imputed(static_cast<Eigen::Index>(b_seen)) : *r.x2;
    double m1 = 0.0, m2 = 0.0;
    for (std::size_t j = 0; j < r.z1.size(); ++j) m1 += s.alpha1(static_cast<Eigen::Index>(j)) * r.z1[j];
    for (std::size_t j = 0; j < r.z2.size(); ++j) m2 += s.alpha2(static_cast<Eigen::Index>(j)) * r.z2[j];
    for (std::size_t j = 0; j < r.z3.size(); ++j) {
      m1 += s.alpha31(static_cast<Eigen::Index>(j)) * r.z3[j];
      m2 += s.alpha32(static_cast<Eigen::Index>(j)) * r.z3[j];
    }
    const double vb = is_b ? 1.0 : 0.0;
    const Study st = r.study;
    total += norm_lpdf(u, 0.0, 1.0);
    total += norm_lpdf(x1, m1 + s.delta[0] * u + vb * s.v[0], s.sigma2_of(Equation::X1, st));
    total += norm_lpdf(x2, m2 + s.delta[1] * u + vb * s.v[1], s.sigma2_of(Equation::X2, st));
    total += norm_lpdf(r.y1, s.beta[0] * x1 + s.delta[2] * u + vb * s.v[2], s.sigma2_of(Equation::Y1, st));
    total += norm_lpdf(r.y2, s.beta[1] * x2 + s.delta[3] * u + vb * s.v[3], s.sigma2_of(Equation::Y2, st));
    (is_b ? b_seen : a_seen)++;
  }
  for (double b : s.beta) total += norm_lpdf(b, 0.0, p.beta_sd * p.beta_sd);
  for (const Eigen::VectorXd* v : {&s.alpha1, &s.alpha2, &s.alpha31, &s.alpha32}) {
    for (Eigen::Index j = 0; j < v->size(); ++j) total += norm_lpdf((*v)(j), 0.0, p.alpha_sd * p.alpha_sd);
  }
  for (double x : s.delta) total += norm_lpdf(x, 0.0, p.delta_sd * p.delta_sd);
  for (double x : s.v) total += norm_lpdf(x, 0.0, p.v_sd * p.v_sd);
  for (double s2 : s.sigma2) {
    total += ig_lpdf(p.ig_target == IgTarget::sd ? std::sqrt(s2) : s2, p.ig_shape, p.ig_rate);
  }
  return total;
}

}  // namespace

TEST_CASE("log_joint: all-zero state on one zero study-A row is a sum of closed forms") {
  const IvCounts dims{1, 1, 1};
  CombinedDataset d;
  d.dims = dims;
  d.rows.push_back(make_row(Study::A, {0}, {0}, {0}, 0.0, 0.0, 0.0, 0.0));
  ParamState s = ParamState::zeros(dims, 1, 0);
  s.sigma2.fill(1.0);
  s.u.setZero();

  for (IgTarget target : {IgTarget::variance, IgTarget::sd}) {
    PriorSpec p;
    p.ig_target = target;
    const double data_part = 5.0 * -kHalfLog2Pi;  // U, X1, X2, Y1, Y2 at N(0,1) mode
    const double priors = 2.0 * (-kHalfLog2Pi - std::log(10.0)) +    // beta
                          4.0 * (-kHalfLog2Pi - std::log(0.3)) +     // alpha1, alpha2, alpha31, alpha32
                          4.0 * -kHalfLog2Pi + 4.0 * -kHalfLog2Pi +  // delta, V
                          8.0 * (3.0 * std::log(2.0) - std::log(2.0) - 2.0);  // IG(3,2) at 1
    CHECK(log_joint(s, d, p) == doctest::Approx(data_part + priors).epsilon(1e-14));
  }
}

TEST_CASE("log_joint: doubling sigma2_Y1A with zero residuals lowers the Y1 term by n_A/2 log 2") {
  const IvCounts dims{2, 2, 1};
  CombinedDataset d;
  d.dims = dims;
  for (int i = 0; i < 6; ++i) {
    const double x1 = 0.1 * i;
    d.rows.push_back(make_row(Study::A, {1, 0}, {0, 2}, {1}, x1, 0.0, 0.5 * x1, 0.0));
  }
  d.rows.push_back(make_row(Study::B, {1, 1}, {1, 1}, {1}, 0, 0, 0.3, 0.1));
  const ModelData md = ModelData::from(d);
  ParamState s = mrhet::testing::random_state(dims, 6, 1, 3);
  s.beta[0] = 0.5;
  s.delta[idx(Equation::Y1)] = 0.0;
  const PriorSpec p;
  const double before = log_joint_terms(s, md, p).likelihood[idx(Equation::Y1)];
  s.sigma2_of(Equation::Y1, Study::A) *= 2.0;
  const double after = log_joint_terms(s, md, p).likelihood[idx(Equation::Y1)];
  CHECK(before - after == doctest::Approx(0.5 * 6.0 * std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("log_joint matches an independent row-wise density sum") {
  const IvCounts dims{2, 2, 1};
  for (std::uint64_t seed : {1u, 2u, 3u, 4u}) {
    // interleaved studies exercise the A-first model ordering
    const CombinedDataset d = mrhet::testing::random_dataset(dims, "ABABA", seed);
    const ParamState s = mrhet::testing::random_state(dims, 3, 2, seed + 100);
    for (IgTarget target : {IgTarget::variance, IgTarget::sd}) {
      PriorSpec p;
      p.ig_target = target;
      p.beta_sd = 2.5;
      const double expect = oracle_log_joint(s, d, p);
      CHECK(std::abs(log_joint(s, d, p) - expect) <= 1e-10 * std::max(1.0, std::abs(expect)));
    }
  }
}

TEST_CASE("log_joint is unchanged when every delta and every u flips sign") {
  const IvCounts dims{3, 2, 2};
  const CombinedDataset d = mrhet::testing::random_dataset(dims, "AABBBAB", 11);
  ParamState s = mrhet::testing::random_state(dims, 3, 4, 12);
  const PriorSpec p;
  const double before = log_joint(s, d, p);
  for (auto& x : s.delta) x = -x;
  s.u = -s.u;
  CHECK(log_joint(s, d, p) == doctest::Approx(before).epsilon(1e-13));
}

TEST_CASE("log_joint decreases as a single residual grows") {
  const IvCounts dims{1, 1, 1};
  CombinedDataset d = mrhet::testing::random_dataset(dims, "AAB", 5);
  ParamState s = mrhet::testing::random_state(dims, 2, 1, 6);
  const PriorSpec p;
  const double fitted = s.beta[0] * *d.rows[0].x1 + s.delta[2] * s.u(0);
  double prev = -INFINITY;
  // walk y1 of row 0 towards its fitted value: density rises monotonically
  for (double off : {3.0, 2.0, 1.0, 0.5, 0.0}) {
    d.rows[0].y1 = fitted + off;
    const double lj = log_joint(s, d, p);
    CHECK(lj > prev);
    prev = lj;
  }
}

TEST_CASE("log_joint reports the non-finite block") {
  const IvCounts dims{1, 1, 1};
  const CombinedDataset d = mrhet::testing::random_dataset(dims, "AB", 7);
  ParamState s = mrhet::testing::random_state(dims, 1, 1, 8);
  s.sigma2_of(Equation::Y2, Study::A) = 0.0;
  const PriorSpec p;
  CHECK_THROWS_WITH_AS(log_joint(s, d, p), doctest::Contains("Y2"), NumericalError);
}

TEST_CASE("state dimensions are checked against the data") {
  const IvCounts dims{2, 2, 1};
  const CombinedDataset d = mrhet::testing::random_dataset(dims, "AB", 9);
  ParamState s = mrhet::testing::random_state(dims, 1, 1, 10);
  s.alpha1.resize(3);
  CHECK_THROWS_AS(log_joint(s, d, PriorSpec{}), ConfigError);
}

TEST_CASE("model view puts study-A rows first and remembers the source rows") {
  const CombinedDataset d = mrhet::testing::random_dataset({1, 1, 1}, "BABA", 2);
  const ModelData md = ModelData::from(d);
  CHECK(md.n_a == 2);
  CHECK(md.n_b == 2);
  CHECK(md.source_row == std::vector<std::size_t>{1, 3, 0, 2});
  CHECK(md.y1(0) == d.rows[1].y1);
  CHECK(md.y1(2) == d.rows[0].y1);
  CHECK(md.gram1_a.isApprox(md.zx1.topRows(2).transpose() * md.zx1.topRows(2)));
}
