#include "mrhet/model.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "mrhet/errors.hpp"

namespace mrhet {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

Eigen::VectorXd stack(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  Eigen::VectorXd out(a.size() + b.size());
  out << a, b;
  return out;
}

double gaussian_block(const Eigen::VectorXd& resid, Eigen::Index n_a, double var_a,
                      double var_b) {
  const Eigen::Index n_b = resid.size() - n_a;
  const double ssr_a = resid.head(n_a).squaredNorm();
  const double ssr_b = resid.tail(n_b).squaredNorm();
  return -0.5 * (static_cast<double>(n_a) * (kLog2Pi + std::log(var_a)) + ssr_a / var_a) -
         0.5 * (static_cast<double>(n_b) * (kLog2Pi + std::log(var_b)) + ssr_b / var_b);
}

double normal_prior(const Eigen::VectorXd& v, double sd) {
  double acc = 0.0;
  for (double x : v) acc += normal_logpdf(x, 0.0, sd * sd);
  return acc;
}

}  // namespace

double normal_logpdf(double x, double mean, double var) {
  const double d = x - mean;
  return -0.5 * (kLog2Pi + std::log(var) + d * d / var);
}

double inv_gamma_logpdf(double x, double shape, double rate) {
  return shape * std::log(rate) - std::lgamma(shape) - (shape + 1.0) * std::log(x) - rate / x;
}

ModelData ModelData::from(const CombinedDataset& data) {
  ModelData md;
  md.dims = data.dims;
  const auto l = static_cast<Eigen::Index>(data.dims.l);
  const auto k = static_cast<Eigen::Index>(data.dims.k);
  const auto m = static_cast<Eigen::Index>(data.dims.m);

  for (std::size_t i = 0; i < data.rows.size(); ++i) {
    if (data.rows[i].study == Study::A) md.source_row.push_back(i);
  }
  md.n_a = static_cast<Eigen::Index>(md.source_row.size());
  for (std::size_t i = 0; i < data.rows.size(); ++i) {
    if (data.rows[i].study == Study::B) md.source_row.push_back(i);
  }
  md.n_b = static_cast<Eigen::Index>(md.source_row.size()) - md.n_a;

  const Eigen::Index n = md.n();
  md.zx1.resize(n, l + m);
  md.zx2.resize(n, k + m);
  md.y1.resize(n);
  md.y2.resize(n);
  md.x1_a.resize(md.n_a);
  md.x2_a.resize(md.n_a);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Row& r = data.rows[md.source_row[static_cast<std::size_t>(i)]];
    if (static_cast<Eigen::Index>(r.z1.size()) != l || static_cast<Eigen::Index>(r.z2.size()) != k ||
        static_cast<Eigen::Index>(r.z3.size()) != m) {
      throw ConfigError("row " + std::to_string(md.source_row[static_cast<std::size_t>(i)]) +
                        ": genotype width does not match IV counts");
    }
    for (Eigen::Index j = 0; j < l; ++j) md.zx1(i, j) = r.z1[static_cast<std::size_t>(j)];
    for (Eigen::Index j = 0; j < k; ++j) md.zx2(i, j) = r.z2[static_cast<std::size_t>(j)];
    for (Eigen::Index j = 0; j < m; ++j) {
      md.zx1(i, l + j) = r.z3[static_cast<std::size_t>(j)];
      md.zx2(i, k + j) = r.z3[static_cast<std::size_t>(j)];
    }
    md.y1(i) = r.y1;
    md.y2(i) = r.y2;
    if (i < md.n_a) {
      if (!r.x1 || !r.x2) throw ConfigError("study A row without exposures");
      md.x1_a(i) = *r.x1;
      md.x2_a(i) = *r.x2;
    }
  }
  const auto gram = [](const auto& block) -> Eigen::MatrixXd { return block.transpose() * block; };
  md.gram1_a = gram(md.zx1.topRows(md.n_a));
  md.gram1_b = gram(md.zx1.bottomRows(md.n_b));
  md.gram2_a = gram(md.zx2.topRows(md.n_a));
  md.gram2_b = gram(md.zx2.bottomRows(md.n_b));
  return md;
}

void check_dimensions(const ParamState& s, const ModelData& d) {
  const auto eq = [](Eigen::Index a, std::size_t b) { return a == static_cast<Eigen::Index>(b); };
  if (!eq(s.alpha1.size(), d.dims.l) || !eq(s.alpha2.size(), d.dims.k) ||
      !eq(s.alpha31.size(), d.dims.m) || !eq(s.alpha32.size(), d.dims.m)) {
    throw ConfigError("parameter state IV dimensions do not match the data");
  }
  if (s.u.size() != d.n() || s.x1_imputed.size() != d.n_b || s.x2_imputed.size() != d.n_b) {
    throw ConfigError("parameter state row dimensions do not match the data");
  }
}

double LogJointTerms::total() const {
  double t = confounder + prior_beta + prior_alpha + prior_delta + prior_sigma + prior_v;
  for (double l : likelihood) t += l;
  return t;
}

LogJointTerms log_joint_terms(const ParamState& s, const ModelData& d, const PriorSpec& p) {
  check_dimensions(s, d);
  const Eigen::Index n_a = d.n_a;
  const Eigen::Index n_b = d.n_b;
  const Eigen::VectorXd x1 = stack(d.x1_a, s.x1_imputed);
  const Eigen::VectorXd x2 = stack(d.x2_a, s.x2_imputed);
  const Eigen::VectorXd coef1 = stack(s.alpha1, s.alpha31);
  const Eigen::VectorXd coef2 = stack(s.alpha2, s.alpha32);

  // study-B indicator times V
  Eigen::VectorXd is_b = Eigen::VectorXd::Zero(d.n());
  is_b.tail(n_b).setOnes();

  const auto dx = [&](Equation e) { return s.delta[idx(e)]; };
  const auto vx = [&](Equation e) { return s.v[idx(e)]; };

  LogJointTerms t;
  t.confounder = -0.5 * (static_cast<double>(d.n()) * kLog2Pi + s.u.squaredNorm());

  const Eigen::VectorXd r_x1 = x1 - d.zx1 * coef1 - dx(Equation::X1) * s.u - vx(Equation::X1) * is_b;
  const Eigen::VectorXd r_x2 = x2 - d.zx2 * coef2 - dx(Equation::X2) * s.u - vx(Equation::X2) * is_b;
  const Eigen::VectorXd r_y1 = d.y1 - s.beta[0] * x1 - dx(Equation::Y1) * s.u - vx(Equation::Y1) * is_b;
  const Eigen::VectorXd r_y2 = d.y2 - s.beta[1] * x2 - dx(Equation::Y2) * s.u - vx(Equation::Y2) * is_b;
  const std::array<const Eigen::VectorXd*, 4> resid{&r_x1, &r_x2, &r_y1, &r_y2};
  for (Equation e : kEquations) {
    t.likelihood[idx(e)] = gaussian_block(*resid[idx(e)], n_a, s.sigma2_of(e, Study::A),
                                          s.sigma2_of(e, Study::B));
  }

  t.prior_beta = normal_logpdf(s.beta[0], 0.0, p.beta_sd * p.beta_sd) +
                 normal_logpdf(s.beta[1], 0.0, p.beta_sd * p.beta_sd);
  t.prior_alpha = normal_prior(s.alpha1, p.alpha_sd) + normal_prior(s.alpha2, p.alpha_sd) +
                  normal_prior(s.alpha31, p.alpha_sd) + normal_prior(s.alpha32, p.alpha_sd);
  for (Equation e : kEquations) {
    t.prior_delta += normal_logpdf(dx(e), 0.0, p.delta_sd * p.delta_sd);
    t.prior_v += normal_logpdf(vx(e), 0.0, p.v_sd * p.v_sd);
  }
  for (double s2 : s.sigma2) {
    const double x = p.ig_target == IgTarget::variance ? s2 : std::sqrt(s2);
    t.prior_sigma += inv_gamma_logpdf(x, p.ig_shape, p.ig_rate);
  }

  const auto require = [](double v, const std::string& block) {
    if (!std::isfinite(v)) throw NumericalError("log_joint: non-finite value in block " + block);
  };
  require(t.confounder, "U");
  for (Equation e : kEquations) require(t.likelihood[idx(e)], std::string(to_string(e)));
  require(t.prior_beta, "prior beta");
  require(t.prior_alpha, "prior alpha");
  require(t.prior_delta, "prior delta");
  require(t.prior_sigma, "prior sigma");
  require(t.prior_v, "prior V");
  return t;
}

double log_joint(const ParamState& state, const ModelData& data, const PriorSpec& priors) {
  return log_joint_terms(state, data, priors).total();
}

double log_joint(const ParamState& state, const CombinedDataset& data, const PriorSpec& priors) {
  return log_joint(state, ModelData::from(data), priors);
}

}  // namespace mrhet
