#include "mrhet/types.hpp"

#include <cmath>
#include <sstream>

#include "mrhet/errors.hpp"

namespace mrhet {

std::string_view to_string(Study s) { return s == Study::A ? "A" : "B"; }

std::string_view to_string(Equation e) {
  switch (e) {
    case Equation::X1: return "X1";
    case Equation::X2: return "X2";
    case Equation::Y1: return "Y1";
    case Equation::Y2: return "Y2";
  }
  return "?";
}

std::size_t SimConfig::n_b() const {
  return static_cast<std::size_t>(std::llround(static_cast<double>(n_total) * missing_rate));
}

void SimConfig::validate() const {
  std::ostringstream bad;
  if (!(missing_rate > 0.0 && missing_rate < 1.0)) bad << " missing_rate=" << missing_rate;
  const double nb = static_cast<double>(n_total) * missing_rate;
  if (std::abs(nb - std::round(nb)) > 1e-9) {
    bad << " n_total*missing_rate=" << nb << " (n_total=" << n_total
        << ", missing_rate=" << missing_rate << ") is not an integer";
  }
  if (n_total < 2) bad << " n_total=" << n_total;
  if (n_iv.l < 1) bad << " n_iv.l=" << n_iv.l;
  if (n_iv.k < 1) bad << " n_iv.k=" << n_iv.k;
  if (n_iv.m < 1) bad << " n_iv.m=" << n_iv.m;
  if (!(sigma_true > 0.0)) bad << " sigma_true=" << sigma_true;
  if (!(maf_param >= 0.0 && maf_param <= 1.0)) bad << " maf_param=" << maf_param;
  if (!(v_range.lo <= v_range.hi)) bad << " v_range=[" << v_range.lo << "," << v_range.hi << "]";
  if (bad.tellp() > 0) throw ConfigError("invalid SimConfig:" + bad.str());
  if (n_a() < 1 || n_b() < 1) {
    throw ConfigError("invalid SimConfig: split yields n_a=" + std::to_string(n_a()) +
                      ", n_b=" + std::to_string(n_b()));
  }
}

void PriorSpec::validate() const {
  std::ostringstream bad;
  if (!(beta_sd > 0)) bad << " beta_sd=" << beta_sd;
  if (!(alpha_sd > 0)) bad << " alpha_sd=" << alpha_sd;
  if (!(delta_sd > 0)) bad << " delta_sd=" << delta_sd;
  if (!(v_sd > 0)) bad << " v_sd=" << v_sd;
  if (!(ig_shape > 2)) bad << " ig_shape=" << ig_shape << " (must exceed 2)";
  if (!(ig_rate > 0)) bad << " ig_rate=" << ig_rate;
  if (bad.tellp() > 0) throw ConfigError("invalid PriorSpec:" + bad.str());
}

std::size_t CombinedDataset::count(Study s) const {
  std::size_t c = 0;
  for (const auto& r : rows) c += (r.study == s);
  return c;
}

void CombinedDataset::validate(bool require_both_studies) const {
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const Row& r = rows[i];
    const auto where = [&] { return "row " + std::to_string(i) + ": "; };
    if (r.z1.size() != dims.l || r.z2.size() != dims.k || r.z3.size() != dims.m) {
      throw ConfigError(where() + "genotype width does not match IV counts");
    }
    for (const auto* z : {&r.z1, &r.z2, &r.z3}) {
      for (auto g : *z) {
        if (g > 2) throw ConfigError(where() + "genotype count outside {0,1,2}");
      }
    }
    const bool has_x = r.x1.has_value() && r.x2.has_value();
    const bool no_x = !r.x1.has_value() && !r.x2.has_value();
    if (r.study == Study::A && !has_x) throw ConfigError(where() + "study A row lacks exposures");
    if (r.study == Study::B && !no_x) throw ConfigError(where() + "study B row carries exposures");
    if (!std::isfinite(r.y1) || !std::isfinite(r.y2) ||
        (has_x && (!std::isfinite(*r.x1) || !std::isfinite(*r.x2)))) {
      throw ConfigError(where() + "non-finite value");
    }
  }
  if (require_both_studies && (count(Study::A) == 0 || count(Study::B) == 0)) {
    throw ConfigError("dataset needs at least one study-A and one study-B row");
  }
}

ParamState ParamState::zeros(const IvCounts& dims, std::size_t n_a, std::size_t n_b) {
  ParamState s;
  s.alpha1 = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dims.l));
  s.alpha2 = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dims.k));
  s.alpha31 = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dims.m));
  s.alpha32 = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dims.m));
  s.sigma2.fill(1.0);
  s.u = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n_a + n_b));
  s.x1_imputed = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n_b));
  s.x2_imputed = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n_b));
  return s;
}

}  // namespace mrhet
