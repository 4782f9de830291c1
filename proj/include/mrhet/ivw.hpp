#pragma once

#include <array>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "mrhet/types.hpp"

namespace mrhet {

enum class AssocSide : std::uint8_t { exposure, outcome };

/// Marginal instrument associations: one simple linear regression (with
/// intercept) of the trait on each genotype column.
struct IvAssoc {
  struct Entry {
    std::string label;
    double estimate = 0.0;
    double se = 0.0;
  };
  AssocSide side = AssocSide::exposure;
  std::vector<Entry> entries;
  /// Labels dropped because the genotype column was constant.
  std::vector<std::string> excluded;
};

struct IvwResult {
  double estimate = 0.0;
  double se = 0.0;
  Interval ci95{};
  std::vector<std::pair<std::string, double>> ratios;  // per-IV Wald ratios
  std::vector<std::string> excluded;
};

inline constexpr double kSeFloor = 1e-12;

/// `genotypes` is individuals x instruments; `labels` names each column.
/// Needs at least 3 individuals. Constant columns are excluded and listed.
IvAssoc per_iv_associations(const Eigen::MatrixXd& genotypes,
                            const std::vector<std::string>& labels,
                            const Eigen::VectorXd& trait, AssocSide side);

/// Fixed-effect IVW with first-order weights alpha^2 / se(Gamma)^2.
/// IVs are matched by label; an IV excluded on one side is dropped from both.
/// Throws ConfigError on unmatched labels, NumericalError when nothing is left.
IvwResult ivw_estimate(const IvAssoc& exposure, const IvAssoc& outcome);

/// Two-sample IVW on a combined dataset: instrument-exposure associations from
/// study A, instrument-outcome associations from study B. beta1 uses Z1 and Z3,
/// beta2 uses Z2 and Z3.
std::array<IvwResult, 2> ivw_two_sample(const CombinedDataset& data);

}  // namespace mrhet
