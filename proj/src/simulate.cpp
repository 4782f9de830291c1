#include "mrhet/simulate.hpp"

#include "mrhet/rng.hpp"

namespace mrhet {

RandomEffects draw_random_effects(const SimConfig& cfg) {
  Rng rng(derive_seed(cfg.seed, {tag_word("random-effects")}));
  RandomEffects re;
  for (double& v : re.v) {
    v = cfg.v_range.lo == cfg.v_range.hi ? cfg.v_range.lo
                                         : rng.uniform(cfg.v_range.lo, cfg.v_range.hi);
  }
  return re;
}

CombinedDataset simulate_dataset(const SimConfig& cfg) {
  cfg.validate();
  const RandomEffects re = draw_random_effects(cfg);
  Rng rng(derive_seed(cfg.seed, {tag_word("rows")}));

  CombinedDataset data;
  data.dims = cfg.n_iv;
  data.truth = Truth{cfg, re};
  data.rows.reserve(cfg.n_total);

  const double a = cfg.iv_strength;
  const double d = cfg.delta_true;
  const double sd = cfg.sigma_true;
  const auto genotypes = [&](std::size_t count) {
    std::vector<std::uint8_t> z(count);
    for (auto& g : z) g = static_cast<std::uint8_t>(rng.binomial(2, cfg.maf_param));
    return z;
  };
  const auto sum = [](const std::vector<std::uint8_t>& z) {
    double s = 0.0;
    for (auto g : z) s += g;
    return s;
  };

  const std::size_t n_a = cfg.n_a();
  for (std::size_t i = 0; i < cfg.n_total; ++i) {
    Row r;
    r.study = i < n_a ? Study::A : Study::B;
    r.z1 = genotypes(cfg.n_iv.l);
    r.z2 = genotypes(cfg.n_iv.k);
    r.z3 = genotypes(cfg.n_iv.m);
    const double u = rng.normal();
    const bool b = r.study == Study::B;
    const auto shift = [&](Equation e) { return b ? re.v[idx(e)] : 0.0; };

    const double x1 = shift(Equation::X1) + a * (sum(r.z1) + sum(r.z3)) + d * u + sd * rng.normal();
    const double x2 = shift(Equation::X2) + a * (sum(r.z2) + sum(r.z3)) + d * u + sd * rng.normal();
    r.y1 = shift(Equation::Y1) + cfg.beta_true[0] * x1 + d * u + sd * rng.normal();
    r.y2 = shift(Equation::Y2) + cfg.beta_true[1] * x2 + d * u + sd * rng.normal();
    if (b) {
      r.masked = Exposures{x1, x2};
    } else {
      r.x1 = x1;
      r.x2 = x2;
    }
    data.rows.push_back(std::move(r));
  }
  return data;
}

}  // namespace mrhet
