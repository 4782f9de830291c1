#include "mrhet/ivw.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "mrhet/errors.hpp"

namespace mrhet {

using Eigen::Index;

IvAssoc per_iv_associations(const Eigen::MatrixXd& genotypes,
                            const std::vector<std::string>& labels,
                            const Eigen::VectorXd& trait, AssocSide side) {
  const Index n = genotypes.rows();
  if (n < 3) throw ConfigError("per_iv_associations: need at least 3 individuals, got " + std::to_string(n));
  if (trait.size() != n || static_cast<Index>(labels.size()) != genotypes.cols()) {
    throw ConfigError("per_iv_associations: dimension mismatch");
  }
  IvAssoc out;
  out.side = side;
  const double ty = trait.mean();
  const Eigen::VectorXd yc = trait.array() - ty;
  for (Index j = 0; j < genotypes.cols(); ++j) {
    const Eigen::VectorXd zc = genotypes.col(j).array() - genotypes.col(j).mean();
    const double sxx = zc.squaredNorm();
    if (!(sxx > 0.0)) {
      out.excluded.push_back(labels[static_cast<std::size_t>(j)]);
      continue;
    }
    const double slope = zc.dot(yc) / sxx;
    const double ssr = (yc - slope * zc).squaredNorm();
    const double resid_var = ssr / static_cast<double>(n - 2);
    const double se = std::max(std::sqrt(resid_var / sxx), kSeFloor);
    out.entries.push_back({labels[static_cast<std::size_t>(j)], slope, se});
  }
  return out;
}

IvwResult ivw_estimate(const IvAssoc& exposure, const IvAssoc& outcome) {
  std::map<std::string, const IvAssoc::Entry*> out_by_label;
  for (const auto& e : outcome.entries) out_by_label[e.label] = &e;
  const auto contains = [](const std::vector<std::string>& v, const std::string& s) {
    return std::find(v.begin(), v.end(), s) != v.end();
  };

  IvwResult res;
  double num = 0.0;
  double den = 0.0;
  for (const auto& ex : exposure.entries) {
    const auto it = out_by_label.find(ex.label);
    if (it == out_by_label.end()) {
      if (contains(outcome.excluded, ex.label)) {
        res.excluded.push_back(ex.label);
        continue;
      }
      throw ConfigError("ivw_estimate: IV '" + ex.label + "' has no outcome association");
    }
    const IvAssoc::Entry& oc = *it->second;
    const double w = 1.0 / (oc.se * oc.se);
    num += ex.estimate * oc.estimate * w;
    den += ex.estimate * ex.estimate * w;
    res.ratios.emplace_back(ex.label, oc.estimate / ex.estimate);
    out_by_label.erase(it);
  }
  for (const auto& [label, entry] : out_by_label) {
    if (!contains(exposure.excluded, label)) {
      throw ConfigError("ivw_estimate: IV '" + label + "' has no exposure association");
    }
    res.excluded.push_back(label);
  }
  for (const auto& label : exposure.excluded) {
    if (!contains(res.excluded, label)) res.excluded.push_back(label);
  }
  if (res.ratios.empty()) throw NumericalError("ivw_estimate: no instruments left after exclusions");
  if (!(den > 0.0)) throw NumericalError("ivw_estimate: zero total weight");

  res.estimate = num / den;
  res.se = 1.0 / std::sqrt(den);
  res.ci95 = {res.estimate - 1.96 * res.se, res.estimate + 1.96 * res.se};
  return res;
}

std::array<IvwResult, 2> ivw_two_sample(const CombinedDataset& data) {
  data.validate(true);
  std::vector<const Row*> a_rows;
  std::vector<const Row*> b_rows;
  for (const auto& r : data.rows) (r.study == Study::A ? a_rows : b_rows).push_back(&r);

  std::array<IvwResult, 2> out;
  for (const bool first : {true, false}) {
    const std::size_t own = first ? data.dims.l : data.dims.k;
    const std::size_t width = own + data.dims.m;
    std::vector<std::string> labels;
    for (std::size_t j = 1; j <= own; ++j) labels.push_back((first ? "z1_" : "z2_") + std::to_string(j));
    for (std::size_t j = 1; j <= data.dims.m; ++j) labels.push_back("z3_" + std::to_string(j));

    const auto design = [&](const std::vector<const Row*>& rows) {
      Eigen::MatrixXd z(static_cast<Index>(rows.size()), static_cast<Index>(width));
      for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& zown = first ? rows[i]->z1 : rows[i]->z2;
        for (std::size_t j = 0; j < own; ++j) z(static_cast<Index>(i), static_cast<Index>(j)) = zown[j];
        for (std::size_t j = 0; j < data.dims.m; ++j) {
          z(static_cast<Index>(i), static_cast<Index>(own + j)) = rows[i]->z3[j];
        }
      }
      return z;
    };
    Eigen::VectorXd x(static_cast<Index>(a_rows.size()));
    for (std::size_t i = 0; i < a_rows.size(); ++i) {
      x(static_cast<Index>(i)) = first ? *a_rows[i]->x1 : *a_rows[i]->x2;
    }
    Eigen::VectorXd y(static_cast<Index>(b_rows.size()));
    for (std::size_t i = 0; i < b_rows.size(); ++i) {
      y(static_cast<Index>(i)) = first ? b_rows[i]->y1 : b_rows[i]->y2;
    }
    const IvAssoc ex = per_iv_associations(design(a_rows), labels, x, AssocSide::exposure);
    const IvAssoc oc = per_iv_associations(design(b_rows), labels, y, AssocSide::outcome);
    out[first ? 0 : 1] = ivw_estimate(ex, oc);
  }
  return out;
}

}  // namespace mrhet
