#include <doctest.h>

#include <cmath>

#include "mrhet/errors.hpp"
#include "mrhet/gibbs.hpp"
#include "mrhet/simulate.hpp"
#include "support.hpp"

using namespace mrhet;
using mrhet::testing::make_row;
using mrhet::testing::mean;
using mrhet::testing::variance;

namespace {

bool within_rel(double got, double want, double tol) { return std::abs(got - want) <= tol * std::abs(want); }

// One study-A row and one study-B row with fixed genotypes.
CombinedDataset two_rows(double y1_b) {
  CombinedDataset d;
  d.dims = {2, 2, 1};
  d.rows.push_back(make_row(Study::A, {1, 0}, {0, 1}, {2}, 0.4, 0.2, 0.1, 0.0));
  d.rows.push_back(make_row(Study::B, {2, 1}, {1, 1}, {1}, 0, 0, y1_b, -0.3));
  return d;
}

ParamState known_state(const IvCounts& dims, std::size_t n_a, std::size_t n_b) {
  ParamState s = ParamState::zeros(dims, n_a, n_b);
  s.alpha1.setConstant(0.2);
  s.alpha2.setConstant(-0.1);
  s.alpha31.setConstant(0.3);
  s.alpha32.setConstant(0.25);
  s.sigma2.fill(0.5);
  s.u.setConstant(0.7);
  return s;
}

}  // namespace

TEST_CASE("imputation with beta = 0 and delta_X = 0 is the exposure-equation draw") {
  const CombinedDataset d = two_rows(1.3);
  const ModelData md = ModelData::from(d);
  ParamState s = known_state(d.dims, 1, 1);
  s.beta = {0.0, 0.0};
  s.delta = {0.0, 0.0, 0.8, -0.4};
  s.v = {0.1, -0.2, 0.3, 0.05};
  ParamState t = s;
  Rng r1(5), r2(5);
  for (int i = 0; i < 100; ++i) {
    impute_missing_exposures(s, md, r1, ImputeMode::full_conditional);
    impute_missing_exposures(t, md, r2, ImputeMode::exposure_only);
    REQUIRE(s.x1_imputed(0) == doctest::Approx(t.x1_imputed(0)).epsilon(1e-12));
    REQUIRE(s.x2_imputed(0) == doctest::Approx(t.x2_imputed(0)).epsilon(1e-12));
  }
  // N(V_X1 + alpha1 z1 + alpha31 z3, sigma2_X1B): 0.1 + 0.2*3 + 0.3*1
  Rng r3(6);
  std::vector<double> draws;
  for (int i = 0; i < 100000; ++i) {
    impute_missing_exposures(s, md, r3);
    draws.push_back(s.x1_imputed(0));
  }
  CHECK(within_rel(mean(draws), 1.0, 0.01));
  CHECK(within_rel(variance(draws), 0.5, 0.01));
}

TEST_CASE("imputation with an uninformative outcome approaches the prior predictive") {
  const CombinedDataset d = two_rows(1.3);
  const ModelData md = ModelData::from(d);
  ParamState s = known_state(d.dims, 1, 1);
  s.beta = {0.9, 0.9};
  s.delta = {0.5, 0.0, 0.3, 0.0};
  s.sigma2_of(Equation::Y1, Study::B) = 1e8;
  Rng rng(7);
  std::vector<double> draws;
  for (int i = 0; i < 100000; ++i) {
    impute_missing_exposures(s, md, rng);
    draws.push_back(s.x1_imputed(0));
  }
  const double prior_mean = 0.2 * 3 + 0.3 * 1 + 0.5 * 0.7;  // alpha.z + delta_X1 u
  CHECK(within_rel(mean(draws), prior_mean, 0.01));
  CHECK(within_rel(variance(draws), 0.5, 0.01));
}

TEST_CASE("imputation of a single row matches the precision-weighted closed form") {
  const double y1 = 1.3;
  const CombinedDataset d = two_rows(y1);
  const ModelData md = ModelData::from(d);
  ParamState s = known_state(d.dims, 1, 1);
  s.beta = {0.8, 0.0};
  s.delta = {0.5, 0.0, 0.3, 0.0};
  s.v = {0.1, 0.0, -0.2, 0.0};
  s.sigma2_of(Equation::X1, Study::B) = 0.5;
  s.sigma2_of(Equation::Y1, Study::B) = 0.2;
  const double m = 0.1 + 0.2 * 3 + 0.3 * 1 + 0.5 * 0.7;
  const double target = y1 - 0.3 * 0.7 - (-0.2);
  const double prec = 1.0 / 0.5 + 0.8 * 0.8 / 0.2;
  const double want_mean = (m / 0.5 + 0.8 * target / 0.2) / prec;
  Rng rng(8);
  std::vector<double> draws;
  for (int i = 0; i < 100000; ++i) {
    impute_missing_exposures(s, md, rng);
    draws.push_back(s.x1_imputed(0));
  }
  CHECK(within_rel(mean(draws), want_mean, 0.01));
  CHECK(within_rel(variance(draws), 1.0 / prec, 0.01));
}

TEST_CASE("confounder conditional") {
  CombinedDataset d;
  d.dims = {1, 1, 1};
  d.rows.push_back(make_row(Study::A, {1}, {0}, {1}, 1.5, 0.2, 0.3, -0.1));
  d.rows.push_back(make_row(Study::B, {0}, {1}, {1}, 0, 0, 0.4, 0.2));
  const ModelData md = ModelData::from(d);
  ParamState s = known_state(d.dims, 1, 1);
  s.sigma2.fill(1.0);
  Rng rng(9);

  SUBCASE("no delta: standard normal") {
    std::vector<double> draws;
    for (int i = 0; i < 100000; ++i) {
      update_latent_confounder(s, md, rng);
      draws.push_back(s.u(0));
    }
    CHECK(std::abs(mean(draws)) < 0.01);
    CHECK(within_rel(variance(draws), 1.0, 0.01));
  }
  SUBCASE("only delta_X1 = 1 with unit variance: N(r/2, 1/2)") {
    s.delta = {1.0, 0.0, 0.0, 0.0};
    const double r = 1.5 - 0.2 * 1 - 0.3 * 1;
    std::vector<double> draws;
    for (int i = 0; i < 100000; ++i) {
      update_latent_confounder(s, md, rng);
      draws.push_back(s.u(0));
    }
    CHECK(within_rel(mean(draws), r / 2.0, 0.01));
    CHECK(within_rel(variance(draws), 0.5, 0.01));
  }
}

TEST_CASE("coefficients without data are drawn from their priors") {
  CombinedDataset d;
  d.dims = {2, 2, 1};
  const ModelData md = ModelData::from(d);
  ParamState s = ParamState::zeros(d.dims, 0, 0);
  s.sigma2.fill(1.0);
  const PriorSpec p;
  Rng rng(10);
  std::vector<double> beta, alpha, delta, v;
  for (int i = 0; i < 40000; ++i) {
    update_coefficients(s, md, p, rng);
    beta.push_back(s.beta[0]);
    alpha.push_back(s.alpha31(0));
    delta.push_back(s.delta[2]);
    v.push_back(s.v[1]);
  }
  CHECK(within_rel(std::sqrt(variance(beta)), 10.0, 0.02));
  CHECK(within_rel(std::sqrt(variance(alpha)), 0.3, 0.02));
  CHECK(within_rel(std::sqrt(variance(delta)), 1.0, 0.02));
  CHECK(within_rel(std::sqrt(variance(v)), 1.0, 0.02));
  CHECK(std::abs(mean(beta)) < 0.15);
}

TEST_CASE("beta draws match the conjugate normal-regression posterior") {
  // study A only; U known, delta and sigma2 held fixed
  CombinedDataset d = mrhet::testing::random_dataset({2, 2, 1}, std::string(40, 'A'), 21);
  Rng gen(22);
  ParamState s = ParamState::zeros(d.dims, 40, 0);
  for (Eigen::Index i = 0; i < 40; ++i) s.u(i) = gen.normal();
  s.delta = {0.0, 0.0, 0.6, 0.0};
  s.sigma2.fill(0.3);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < d.rows.size(); ++i) {
    Row& r = d.rows[i];
    r.y1 = 0.4 * *r.x1 + 0.6 * s.u(static_cast<Eigen::Index>(i)) + std::sqrt(0.3) * gen.normal();
    sxx += *r.x1 * *r.x1;
    sxy += *r.x1 * (r.y1 - 0.6 * s.u(static_cast<Eigen::Index>(i)));
  }
  const double prec = sxx / 0.3 + 1.0 / 100.0;
  const double want_mean = (sxy / 0.3) / prec;
  const double want_sd = 1.0 / std::sqrt(prec);

  const ModelData md = ModelData::from(d);
  Clamp clamp;
  clamp.delta = true;
  Rng rng(23);
  std::vector<double> draws;
  for (int i = 0; i < 100000; ++i) {
    update_coefficients(s, md, PriorSpec{}, rng, clamp);
    draws.push_back(s.beta[0]);
  }
  CHECK(within_rel(mean(draws), want_mean, 0.01));
  CHECK(within_rel(std::sqrt(variance(draws)), want_sd, 0.01));
  CHECK(s.delta[2] == 0.6);
}

TEST_CASE("a degenerate beta prior pins beta at zero") {
  const CombinedDataset d = mrhet::testing::random_dataset({2, 2, 1}, "AAABBB", 31);
  const ModelData md = ModelData::from(d);
  ParamState s = mrhet::testing::random_state(d.dims, 3, 3, 32);
  PriorSpec p;
  p.beta_sd = 1e-6;
  Rng rng(33);
  for (int i = 0; i < 1000; ++i) {
    update_coefficients(s, md, p, rng);
    REQUIRE(std::abs(s.beta[0]) < 1e-5);
    REQUIRE(std::abs(s.beta[1]) < 1e-5);
  }
}

TEST_CASE("variance updates") {
  CombinedDataset zero;
  zero.dims = {1, 1, 1};
  for (int i = 0; i < 10; ++i) zero.rows.push_back(make_row(Study::A, {0}, {0}, {0}, 0, 0, 0, 0));
  const ModelData md = ModelData::from(zero);
  ParamState s = ParamState::zeros(zero.dims, 10, 0);
  s.sigma2.fill(1.0);
  Rng rng(40);
  PriorSpec p;

  const auto collect = [&](int n) {
    std::vector<double> empty_block, ten_rows;
    for (int i = 0; i < n; ++i) {
      update_variances(s, md, p, rng);
      empty_block.push_back(s.sigma2_of(Equation::X1, Study::B));
      ten_rows.push_back(s.sigma2_of(Equation::X1, Study::A));
    }
    return std::pair{empty_block, ten_rows};
  };

  SUBCASE("inverse gamma on the variance") {
    p.ig_target = IgTarget::variance;
    const auto [empty_block, ten_rows] = collect(100000);
    CHECK(within_rel(mean(empty_block), 2.0 / (3.0 - 1.0), 0.01));  // prior mean
    CHECK(within_rel(mean(ten_rows), 2.0 / 7.0, 0.01));             // IG(3 + 5, 2)
  }
  SUBCASE("inverse gamma on the standard deviation") {
    p.ig_target = IgTarget::sd;
    const auto [empty_block, ten_rows] = collect(200000);
    std::vector<double> sd_empty, sd_ten;
    for (double v : empty_block) sd_empty.push_back(std::sqrt(v));
    for (double v : ten_rows) sd_ten.push_back(std::sqrt(v));
    CHECK(within_rel(mean(sd_empty), 2.0 / (3.0 - 1.0), 0.01));   // sigma ~ IG(3, 2)
    CHECK(within_rel(mean(sd_ten), 2.0 / (13.0 - 1.0), 0.01));    // sigma ~ IG(3 + 10, 2)
  }
}

TEST_CASE("variance posterior concentrates on the residual variance") {
  CombinedDataset d;
  d.dims = {1, 1, 1};
  Rng gen(50);
  for (int i = 0; i < 100000; ++i) {
    d.rows.push_back(make_row(Study::A, {0}, {0}, {0}, 0.1 * gen.normal(), 0, 0, 0));
  }
  const ModelData md = ModelData::from(d);
  for (IgTarget target : {IgTarget::variance, IgTarget::sd}) {
    PriorSpec p;
    p.ig_target = target;
    ParamState s = ParamState::zeros(d.dims, 100000, 0);
    s.sigma2.fill(1.0);
    Rng rng(51);
    std::vector<double> draws;
    for (int i = 0; i < 200; ++i) {
      update_variances(s, md, p, rng);
      if (i >= 50) draws.push_back(s.sigma2_of(Equation::X1, Study::A));
    }
    CHECK(within_rel(mean(draws), 0.01, 0.05));
  }
}

TEST_CASE("chains are deterministic, positive in variance and labelled in order") {
  SimConfig cfg;
  cfg.seed = 3;
  const CombinedDataset d = simulate_dataset(cfg);
  McmcConfig mc;
  mc.n_iter = 600;
  mc.burn_in = 100;
  mc.thin = 2;
  mc.seed = 17;
  const PosteriorDraws a = run_chain(d, PriorSpec{}, mc);
  const PosteriorDraws b = run_chain(d, PriorSpec{}, mc);
  CHECK(a.draws == b.draws);
  CHECK(a.size() == 250);
  CHECK(a.names.size() == 58);
  CHECK(a.names.front() == "beta1");
  CHECK(a.names[2] == "alpha1_1");
  CHECK(a.names.back() == "V_Y2");
  for (const char* name : {"sigma2_X1A", "sigma2_X1B", "sigma2_Y2A", "sigma2_Y2B"}) {
    CHECK((a[name].array() > 0.0).all());
  }
  mc.seed = 18;
  CHECK(run_chain(d, PriorSpec{}, mc).draws != a.draws);
}

TEST_CASE("flatten follows the parameter name order") {
  const IvCounts dims{2, 3, 1};
  ParamState s = mrhet::testing::random_state(dims, 1, 1, 4);
  const auto names = parameter_names(dims);
  const Eigen::VectorXd f = flatten(s);
  REQUIRE(f.size() == static_cast<Eigen::Index>(names.size()));
  const auto at = [&](const std::string& n) {
    return f(std::find(names.begin(), names.end(), n) - names.begin());
  };
  CHECK(at("beta2") == s.beta[1]);
  CHECK(at("alpha2_3") == s.alpha2(2));
  CHECK(at("alpha32_1") == s.alpha32(0));
  CHECK(at("delta_Y1") == s.delta[2]);
  CHECK(at("sigma2_X2B") == s.sigma2_of(Equation::X2, Study::B));
  CHECK(at("V_X2") == s.v[1]);
}

TEST_CASE("first and second halves of a chain started at the truth agree") {
  SimConfig cfg;
  cfg.seed = 12;
  const CombinedDataset d = simulate_dataset(cfg);
  const ModelData md = ModelData::from(d);
  ParamState s = ParamState::zeros(d.dims, static_cast<std::size_t>(md.n_a), static_cast<std::size_t>(md.n_b));
  s.beta = cfg.beta_true;
  for (Eigen::VectorXd* a : {&s.alpha1, &s.alpha2, &s.alpha31, &s.alpha32}) a->setConstant(cfg.iv_strength);
  s.delta.fill(cfg.delta_true);
  s.sigma2.fill(cfg.sigma_true * cfg.sigma_true);
  s.v = d.truth->effects.v;
  for (Eigen::Index i = 0; i < md.n_b; ++i) {
    const Row& r = d.rows[md.source_row[static_cast<std::size_t>(md.n_a + i)]];
    s.x1_imputed(i) = r.masked->x1;
    s.x2_imputed(i) = r.masked->x2;
  }
  McmcConfig mc;
  mc.n_iter = 4000;
  mc.burn_in = 0;
  mc.seed = 99;
  const Eigen::VectorXd b1 = run_chain(md, PriorSpec{}, mc, s)["beta1"];

  // batch-means standard error of each half
  const auto half_stats = [&](Eigen::Index start) {
    const Eigen::Index len = 2000, batches = 20, bl = len / batches;
    std::vector<double> means;
    for (Eigen::Index k = 0; k < batches; ++k) means.push_back(b1.segment(start + k * bl, bl).mean());
    return std::pair{mean(means), std::sqrt(variance(means) / static_cast<double>(batches))};
  };
  const auto [m1, se1] = half_stats(0);
  const auto [m2, se2] = half_stats(2000);
  CHECK(std::abs(m1 - m2) < 3.0 * std::sqrt(se1 * se1 + se2 * se2));
}

TEST_CASE("confounder draws average near zero over a long run") {
  SimConfig cfg;
  cfg.seed = 13;
  const CombinedDataset d = simulate_dataset(cfg);
  const ModelData md = ModelData::from(d);
  McmcConfig mc;
  mc.seed = 5;
  GibbsSampler g(md, PriorSpec{}, mc);
  double sum = 0.0;
  int n = 0;
  for (int i = 0; i < 1500; ++i) {
    g.step();
    if (i >= 500) {
      sum += g.state().u.mean();
      ++n;
    }
  }
  CHECK(std::abs(sum / n) < 3.0 / std::sqrt(400.0));
}

TEST_CASE("chain settings are validated") {
  McmcConfig mc;
  mc.n_iter = 100;
  mc.burn_in = 100;
  CHECK_THROWS_AS(mc.validate(), ConfigError);
  mc.burn_in = 10;
  mc.thin = 0;
  CHECK_THROWS_AS(mc.validate(), ConfigError);
}

TEST_CASE("a non-finite state aborts the chain with the iteration and block") {
  const CombinedDataset d = mrhet::testing::random_dataset({1, 1, 1}, "AABB", 60);
  const ModelData md = ModelData::from(d);
  ParamState s = mrhet::testing::random_state(d.dims, 2, 2, 61);
  s.sigma2_of(Equation::X1, Study::B) = std::nan("");
  McmcConfig mc;
  mc.n_iter = 10;
  mc.burn_in = 1;
  CHECK_THROWS_WITH_AS(run_chain(md, PriorSpec{}, mc, s), doctest::Contains("iteration"), NumericalError);
}

TEST_CASE("both initialisation modes start from finite states") {
  SimConfig cfg;
  const CombinedDataset d = simulate_dataset(cfg);
  const ModelData md = ModelData::from(d);
  for (InitMode mode : {InitMode::least_squares, InitMode::prior_draw}) {
    Rng rng(70);
    const ParamState s = initial_state(md, PriorSpec{}, mode, rng);
    CHECK(flatten(s).allFinite());
    for (double v : s.sigma2) CHECK(v > 0.0);
  }
}
