#include "mrhet/gibbs.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/Cholesky>

#include "mrhet/errors.hpp"

namespace mrhet {

namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

VectorXd stack(const VectorXd& a, const VectorXd& b) {
  VectorXd out(a.size() + b.size());
  out << a, b;
  return out;
}

VectorXd standard_normals(Index n, Rng& rng) {
  VectorXd z(n);
  for (Index i = 0; i < n; ++i) z(i) = rng.normal();
  return z;
}

/// Draws theta ~ N(P^-1 b, P^-1).
VectorXd draw_from_precision(const MatrixXd& precision, const VectorXd& b, Rng& rng,
                             std::string_view block) {
  Eigen::LLT<MatrixXd> llt(precision);
  if (llt.info() != Eigen::Success || !b.allFinite()) {
    throw NumericalError("singular conditional precision in block " + std::string(block));
  }
  const VectorXd mean = llt.solve(b);
  const VectorXd z = standard_normals(b.size(), rng);
  return mean + llt.matrixU().solve(z);
}

bool first_exposure(Equation e) { return e == Equation::X1 || e == Equation::Y1; }

VectorXd exposure_coefs(const ParamState& s, bool first) {
  return first ? stack(s.alpha1, s.alpha31) : stack(s.alpha2, s.alpha32);
}

VectorXd full_exposure(const ParamState& s, const ModelData& d, bool first) {
  return first ? stack(d.x1_a, s.x1_imputed) : stack(d.x2_a, s.x2_imputed);
}

/// Residual of equation e for every row, including the V shift on study B.
VectorXd residuals(const ParamState& s, const ModelData& d, Equation e) {
  const bool first = first_exposure(e);
  const VectorXd x = full_exposure(s, d, first);
  VectorXd r;
  if (e == Equation::X1 || e == Equation::X2) {
    r = x - (first ? d.zx1 : d.zx2) * exposure_coefs(s, first);
  } else {
    r = (first ? d.y1 : d.y2) - s.beta[first ? 0 : 1] * x;
  }
  r -= s.delta[idx(e)] * s.u;
  r.tail(d.n_b).array() -= s.v[idx(e)];
  return r;
}

void update_exposure_block(ParamState& s, const ModelData& d, const PriorSpec& p, Rng& rng,
                           Equation e, bool clamp_delta) {
  const bool first = e == Equation::X1;
  const MatrixXd& zx = first ? d.zx1 : d.zx2;
  const MatrixXd& gram_a = first ? d.gram1_a : d.gram2_a;
  const MatrixXd& gram_b = first ? d.gram1_b : d.gram2_b;
  const Index n_a = d.n_a;
  const Index n_b = d.n_b;
  const Index p1 = zx.cols();
  const Index dim = clamp_delta ? p1 : p1 + 1;

  VectorXd resp = full_exposure(s, d, first);
  resp.tail(n_b).array() -= s.v[idx(e)];
  if (clamp_delta) resp -= s.delta[idx(e)] * s.u;

  const double wa = 1.0 / s.sigma2_of(e, Study::A);
  const double wb = 1.0 / s.sigma2_of(e, Study::B);
  const auto za = zx.topRows(n_a);
  const auto zb = zx.bottomRows(n_b);

  MatrixXd prec(dim, dim);
  VectorXd b(dim);
  prec.topLeftCorner(p1, p1) = wa * gram_a + wb * gram_b;
  b.head(p1) = wa * (za.transpose() * resp.head(n_a)) + wb * (zb.transpose() * resp.tail(n_b));
  prec.diagonal().head(p1).array() += 1.0 / (p.alpha_sd * p.alpha_sd);
  if (!clamp_delta) {
    const auto ua = s.u.head(n_a);
    const auto ub = s.u.tail(n_b);
    const VectorXd zu = wa * (za.transpose() * ua) + wb * (zb.transpose() * ub);
    prec.col(p1).head(p1) = zu;
    prec.row(p1).head(p1) = zu.transpose();
    prec(p1, p1) = wa * ua.squaredNorm() + wb * ub.squaredNorm() + 1.0 / (p.delta_sd * p.delta_sd);
    b(p1) = wa * ua.dot(resp.head(n_a)) + wb * ub.dot(resp.tail(n_b));
  }

  const VectorXd theta = draw_from_precision(prec, b, rng, first ? "alpha1/alpha31/delta_X1"
                                                                 : "alpha2/alpha32/delta_X2");
  const auto own = static_cast<Index>(first ? d.dims.l : d.dims.k);
  const auto m = static_cast<Index>(d.dims.m);
  (first ? s.alpha1 : s.alpha2) = theta.head(own);
  (first ? s.alpha31 : s.alpha32) = theta.segment(own, m);
  if (!clamp_delta) s.delta[idx(e)] = theta(p1);
}

void update_outcome_block(ParamState& s, const ModelData& d, const PriorSpec& p, Rng& rng,
                          Equation e, bool clamp_delta) {
  const bool first = e == Equation::Y1;
  const Index n_a = d.n_a;
  const Index n_b = d.n_b;
  const VectorXd x = full_exposure(s, d, first);
  VectorXd resp = first ? d.y1 : d.y2;
  resp.tail(n_b).array() -= s.v[idx(e)];
  if (clamp_delta) resp -= s.delta[idx(e)] * s.u;

  const double wa = 1.0 / s.sigma2_of(e, Study::A);
  const double wb = 1.0 / s.sigma2_of(e, Study::B);
  const auto wdot = [&](const VectorXd& a, const VectorXd& c) {
    return wa * a.head(n_a).dot(c.head(n_a)) + wb * a.tail(n_b).dot(c.tail(n_b));
  };

  const Index dim = clamp_delta ? 1 : 2;
  MatrixXd prec(dim, dim);
  VectorXd b(dim);
  prec(0, 0) = wdot(x, x) + 1.0 / (p.beta_sd * p.beta_sd);
  b(0) = wdot(x, resp);
  if (!clamp_delta) {
    prec(0, 1) = prec(1, 0) = wdot(x, s.u);
    prec(1, 1) = wdot(s.u, s.u) + 1.0 / (p.delta_sd * p.delta_sd);
    b(1) = wdot(s.u, resp);
  }
  const VectorXd theta =
      draw_from_precision(prec, b, rng, first ? "beta1/delta_Y1" : "beta2/delta_Y2");
  s.beta[first ? 0 : 1] = theta(0);
  if (!clamp_delta) s.delta[idx(e)] = theta(1);
}

void update_random_effect(ParamState& s, const ModelData& d, const PriorSpec& p, Rng& rng,
                          Equation e) {
  // residual of study-B rows with V removed
  VectorXd r = residuals(s, d, e).tail(d.n_b);
  r.array() += s.v[idx(e)];
  const double w = 1.0 / s.sigma2_of(e, Study::B);
  const double prec = static_cast<double>(d.n_b) * w + 1.0 / (p.v_sd * p.v_sd);
  const double mean = w * r.sum() / prec;
  s.v[idx(e)] = rng.normal(mean, 1.0 / std::sqrt(prec));
}

/// Slice sampler (stepping out) on t = log sigma for the posterior under an
/// Inv-Gamma(shape, rate) prior on sigma. The log target is concave in t.
double draw_sigma_log_scale(double sigma2, double n, double ssr, double shape, double rate,
                            Rng& rng) {
  const auto logf = [&](double t) {
    return -(shape + n) * t - rate * std::exp(-t) - 0.5 * ssr * std::exp(-2.0 * t);
  };
  const double width = 1.0;
  double t0 = 0.5 * std::log(sigma2);
  const double level = logf(t0) + std::log(rng.uniform(0.0, 1.0));
  double lo = t0 - width * rng.uniform(0.0, 1.0);
  double hi = lo + width;
  while (logf(lo) > level) lo -= width;
  while (logf(hi) > level) hi += width;
  for (int guard = 0; guard < 200; ++guard) {
    const double t1 = rng.uniform(lo, hi);
    if (logf(t1) > level) return std::exp(2.0 * t1);
    (t1 < t0 ? lo : hi) = t1;
  }
  return sigma2;
}

}  // namespace

void McmcConfig::validate() const {
  std::ostringstream bad;
  if (n_iter < 1) bad << " n_iter=" << n_iter;
  if (burn_in >= n_iter) bad << " burn_in=" << burn_in << " (must be < n_iter=" << n_iter << ")";
  if (thin < 1) bad << " thin=" << thin;
  if (bad.tellp() > 0) throw ConfigError("invalid McmcConfig:" + bad.str());
}

Index PosteriorDraws::column(std::string_view name) const {
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return static_cast<Index>(i);
  }
  throw ConfigError("unknown parameter '" + std::string(name) + "'");
}

std::vector<std::string> parameter_names(const IvCounts& dims) {
  std::vector<std::string> names{"beta1", "beta2"};
  const auto add = [&](const std::string& stem, std::size_t count) {
    for (std::size_t i = 1; i <= count; ++i) names.push_back(stem + "_" + std::to_string(i));
  };
  add("alpha1", dims.l);
  add("alpha2", dims.k);
  add("alpha31", dims.m);
  add("alpha32", dims.m);
  for (Equation e : kEquations) names.push_back("delta_" + std::string(to_string(e)));
  for (Equation e : kEquations) {
    for (Study s : {Study::A, Study::B}) {
      names.push_back("sigma2_" + std::string(to_string(e)) + std::string(to_string(s)));
    }
  }
  for (Equation e : kEquations) names.push_back("V_" + std::string(to_string(e)));
  return names;
}

VectorXd flatten(const ParamState& s) {
  const Index n = 2 + s.alpha1.size() + s.alpha2.size() + s.alpha31.size() + s.alpha32.size() +
                  4 + 8 + 4;
  VectorXd out(n);
  Index k = 0;
  out(k++) = s.beta[0];
  out(k++) = s.beta[1];
  for (const VectorXd* a : {&s.alpha1, &s.alpha2, &s.alpha31, &s.alpha32}) {
    out.segment(k, a->size()) = *a;
    k += a->size();
  }
  for (double v : s.delta) out(k++) = v;
  for (double v : s.sigma2) out(k++) = v;
  for (double v : s.v) out(k++) = v;
  return out;
}

void impute_missing_exposures(ParamState& s, const ModelData& d, Rng& rng, ImputeMode mode) {
  const Index n_b = d.n_b;
  if (n_b == 0) return;
  const auto ub = s.u.tail(n_b);
  for (const bool first : {true, false}) {
    const Equation ex = first ? Equation::X1 : Equation::X2;
    const Equation ey = first ? Equation::Y1 : Equation::Y2;
    const VectorXd prior_mean = (first ? d.zx1 : d.zx2).bottomRows(n_b) * exposure_coefs(s, first) +
                                s.delta[idx(ex)] * ub + VectorXd::Constant(n_b, s.v[idx(ex)]);
    const double var_x = s.sigma2_of(ex, Study::B);
    VectorXd& out = first ? s.x1_imputed : s.x2_imputed;
    if (mode == ImputeMode::exposure_only) {
      const double sd = std::sqrt(var_x);
      for (Index i = 0; i < n_b; ++i) out(i) = prior_mean(i) + sd * rng.normal();
      continue;
    }
    const double beta = s.beta[first ? 0 : 1];
    const double var_y = s.sigma2_of(ey, Study::B);
    const VectorXd y_target = (first ? d.y1 : d.y2).tail(n_b) - s.delta[idx(ey)] * ub -
                              VectorXd::Constant(n_b, s.v[idx(ey)]);
    const double prec = 1.0 / var_x + beta * beta / var_y;
    const double sd = 1.0 / std::sqrt(prec);
    for (Index i = 0; i < n_b; ++i) {
      const double mean = (prior_mean(i) / var_x + beta * y_target(i) / var_y) / prec;
      out(i) = mean + sd * rng.normal();
    }
  }
}

void update_latent_confounder(ParamState& s, const ModelData& d, Rng& rng) {
  // residuals of each equation with the U term removed
  std::array<VectorXd, 4> r;
  for (Equation e : kEquations) {
    r[idx(e)] = residuals(s, d, e) + s.delta[idx(e)] * s.u;
  }
  for (Study st : {Study::A, Study::B}) {
    const Index start = st == Study::A ? 0 : d.n_a;
    const Index count = st == Study::A ? d.n_a : d.n_b;
    double prec = 1.0;
    VectorXd num = VectorXd::Zero(count);
    for (Equation e : kEquations) {
      const double w = s.delta[idx(e)] / s.sigma2_of(e, st);
      prec += s.delta[idx(e)] * w;
      num += w * r[idx(e)].segment(start, count);
    }
    const double sd = 1.0 / std::sqrt(prec);
    for (Index i = 0; i < count; ++i) s.u(start + i) = num(i) / prec + sd * rng.normal();
  }
}

void update_coefficients(ParamState& s, const ModelData& d, const PriorSpec& p, Rng& rng,
                         const Clamp& clamp) {
  update_exposure_block(s, d, p, rng, Equation::X1, clamp.delta);
  update_exposure_block(s, d, p, rng, Equation::X2, clamp.delta);
  update_outcome_block(s, d, p, rng, Equation::Y1, clamp.delta);
  update_outcome_block(s, d, p, rng, Equation::Y2, clamp.delta);
  if (!clamp.v) {
    for (Equation e : kEquations) update_random_effect(s, d, p, rng, e);
  }
}

void update_variances(ParamState& s, const ModelData& d, const PriorSpec& p, Rng& rng) {
  for (Equation e : kEquations) {
    const VectorXd r = residuals(s, d, e);
    for (Study st : {Study::A, Study::B}) {
      const Index count = st == Study::A ? d.n_a : d.n_b;
      const double ssr = st == Study::A ? r.head(d.n_a).squaredNorm() : r.tail(d.n_b).squaredNorm();
      double& target = s.sigma2_of(e, st);
      if (p.ig_target == IgTarget::variance) {
        target = rng.inv_gamma(p.ig_shape + 0.5 * static_cast<double>(count),
                               p.ig_rate + 0.5 * ssr);
      } else {
        target = draw_sigma_log_scale(target, static_cast<double>(count), ssr, p.ig_shape,
                                      p.ig_rate, rng);
      }
    }
  }
}

ParamState initial_state(const ModelData& d, const PriorSpec& p, InitMode mode, Rng& rng) {
  ParamState s = ParamState::zeros(d.dims, static_cast<std::size_t>(d.n_a),
                                   static_cast<std::size_t>(d.n_b));
  const Index n_a = d.n_a;
  const Index n_b = d.n_b;
  const auto l = static_cast<Index>(d.dims.l);
  const auto k = static_cast<Index>(d.dims.k);
  const auto m = static_cast<Index>(d.dims.m);

  if (mode == InitMode::prior_draw) {
    s.beta = {rng.normal(0.0, p.beta_sd), rng.normal(0.0, p.beta_sd)};
    for (VectorXd* a : {&s.alpha1, &s.alpha2, &s.alpha31, &s.alpha32}) {
      for (Index i = 0; i < a->size(); ++i) (*a)(i) = rng.normal(0.0, p.alpha_sd);
    }
    for (double& v : s.delta) v = rng.normal(0.0, p.delta_sd);
    for (double& v : s.sigma2) {
      const double draw = rng.inv_gamma(p.ig_shape, p.ig_rate);
      v = p.ig_target == IgTarget::variance ? draw : draw * draw;
    }
    for (double& v : s.v) v = rng.normal(0.0, p.v_sd);
    for (Index i = 0; i < s.u.size(); ++i) s.u(i) = rng.normal();
    impute_missing_exposures(s, d, rng, ImputeMode::exposure_only);
    return s;
  }

  // Least squares on study A, stabilised by the prior precision.
  const double alpha_prec = 1.0 / (p.alpha_sd * p.alpha_sd);
  const double beta_prec = 1.0 / (p.beta_sd * p.beta_sd);
  for (const bool first : {true, false}) {
    const Equation ex = first ? Equation::X1 : Equation::X2;
    const Equation ey = first ? Equation::Y1 : Equation::Y2;
    const MatrixXd& zx = first ? d.zx1 : d.zx2;
    const VectorXd& x_a = first ? d.x1_a : d.x2_a;
    const VectorXd y_a = (first ? d.y1 : d.y2).head(n_a);
    MatrixXd gram = first ? d.gram1_a : d.gram2_a;
    gram.diagonal().array() += alpha_prec;
    const VectorXd coef = gram.ldlt().solve(zx.topRows(n_a).transpose() * x_a);
    const Index own = first ? l : k;
    (first ? s.alpha1 : s.alpha2) = coef.head(own);
    (first ? s.alpha31 : s.alpha32) = coef.segment(own, m);
    const double beta = n_a > 0 ? x_a.dot(y_a) / (x_a.squaredNorm() + beta_prec) : 0.0;
    s.beta[first ? 0 : 1] = beta;

    const double prior_mean_var = p.ig_rate / (p.ig_shape - 1.0);
    const double var_x =
        n_a > 0 ? (x_a - zx.topRows(n_a) * coef).squaredNorm() / static_cast<double>(n_a)
                : prior_mean_var;
    const double var_y =
        n_a > 0 ? (y_a - beta * x_a).squaredNorm() / static_cast<double>(n_a) : prior_mean_var;
    const auto floor = [](double v) { return std::max(v, 1e-8); };
    s.sigma2_of(ex, Study::A) = s.sigma2_of(ex, Study::B) = floor(var_x);
    s.sigma2_of(ey, Study::A) = s.sigma2_of(ey, Study::B) = floor(var_y);
    (first ? s.x1_imputed : s.x2_imputed) = zx.bottomRows(n_b) * coef;
  }
  for (Index i = 0; i < s.u.size(); ++i) s.u(i) = rng.normal();
  return s;
}

GibbsSampler::GibbsSampler(const ModelData& data, PriorSpec priors, McmcConfig cfg,
                           std::optional<ParamState> start)
    : data_(data), priors_(priors), cfg_(cfg), rng_(cfg.seed) {
  priors_.validate();
  cfg_.validate();
  state_ = start ? std::move(*start) : initial_state(data_, priors_, cfg_.init, rng_);
  check_dimensions(state_, data_);
}

void GibbsSampler::check_finite(std::string_view block) const {
  const ParamState& s = state_;
  bool ok = s.u.allFinite() && s.x1_imputed.allFinite() && s.x2_imputed.allFinite() &&
            flatten(s).allFinite();
  for (double v : s.sigma2) ok = ok && v > 0.0;
  if (!ok) {
    throw NumericalError("non-finite state at iteration " + std::to_string(iter_) +
                         " after block " + std::string(block));
  }
}

void GibbsSampler::step() {
  impute_missing_exposures(state_, data_, rng_, cfg_.impute);
  check_finite("impute");
  if (!cfg_.clamp.u) {
    update_latent_confounder(state_, data_, rng_);
    check_finite("confounder");
  }
  update_coefficients(state_, data_, priors_, rng_, cfg_.clamp);
  check_finite("coefficients");
  if (!cfg_.clamp.sigma2) {
    update_variances(state_, data_, priors_, rng_);
    check_finite("variances");
  }
  ++iter_;
}

PosteriorDraws run_chain(const ModelData& data, const PriorSpec& priors, const McmcConfig& cfg,
                         std::optional<ParamState> start) {
  GibbsSampler sampler(data, priors, cfg, std::move(start));
  PosteriorDraws out;
  out.names = parameter_names(data.dims);
  out.seed = cfg.seed;
  out.config = cfg;
  out.draws.resize(static_cast<Index>(cfg.kept()), static_cast<Index>(out.names.size()));
  Index row = 0;
  for (std::size_t t = 0; t < cfg.n_iter; ++t) {
    sampler.step();
    if (t >= cfg.burn_in && (t - cfg.burn_in) % cfg.thin == 0) {
      out.draws.row(row++) = flatten(sampler.state()).transpose();
    }
  }
  return out;
}

PosteriorDraws run_chain(const CombinedDataset& data, const PriorSpec& priors,
                         const McmcConfig& cfg) {
  data.validate();
  return run_chain(ModelData::from(data), priors, cfg);
}

}  // namespace mrhet
