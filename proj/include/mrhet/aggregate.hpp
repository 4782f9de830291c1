#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "mrhet/gibbs.hpp"
#include "mrhet/types.hpp"

namespace mrhet {

struct SubsetPosterior {
  std::size_t index = 0;
  PosteriorDraws draws;
  Eigen::VectorXd mu;  // column means of draws

  static SubsetPosterior from(std::size_t index, PosteriorDraws draws);
};

/// Recentred pool of subset posteriors: every subset's draws are shifted by
/// (mu_hat - mu_j), mu_hat being the average of the subset means, and stacked
/// in subset order.
struct AggregatedPosterior {
  std::vector<std::string> names;
  Eigen::MatrixXd draws;
  Eigen::VectorXd mu_hat;
  std::size_t subsets = 0;

  Eigen::VectorXd operator[](std::string_view name) const;
};

/// Splits study A and study B separately: shuffle within the study, then
/// deal rows round-robin. Each subset gets n_a/J study-A rows followed by
/// n_b/J study-B rows. J = 1 returns the data unchanged.
std::vector<CombinedDataset> partition(const CombinedDataset& data, std::size_t subsets,
                                       std::uint64_t seed);

AggregatedPosterior aggregate_posteriors(std::span<const SubsetPosterior> subsets);

/// Relative error |mean - mu_hat| / max(|mu_hat|, mean |draw|) for every
/// column of the pooled draws; the largest value is returned.
double aggregation_error(const AggregatedPosterior& agg);

std::uint64_t partition_seed(std::uint64_t master_seed);
std::uint64_t subset_chain_seed(std::uint64_t master_seed, std::size_t subset);

struct PartitionedFit {
  std::vector<SubsetPosterior> subsets;
  AggregatedPosterior aggregated;
  std::vector<double> seconds;  // wall time per subset chain
};

/// Partitions with partition_seed(cfg.seed) and runs one chain per subset
/// (seed subset_chain_seed(cfg.seed, j)) on up to `workers` threads, then
/// aggregates. The result does not depend on `workers`.
PartitionedFit fit_partitioned(const CombinedDataset& data, std::size_t subsets,
                               const PriorSpec& priors, const McmcConfig& cfg,
                               std::size_t workers);

}  // namespace mrhet
