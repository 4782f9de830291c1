#include "mrhet/aggregate.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>

#include "mrhet/errors.hpp"
#include "mrhet/parallel.hpp"
#include "mrhet/rng.hpp"

namespace mrhet {

SubsetPosterior SubsetPosterior::from(std::size_t index, PosteriorDraws draws) {
  SubsetPosterior sp;
  sp.index = index;
  sp.mu = draws.draws.colwise().mean().transpose();
  sp.draws = std::move(draws);
  return sp;
}

Eigen::VectorXd AggregatedPosterior::operator[](std::string_view name) const {
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return draws.col(static_cast<Eigen::Index>(i));
  }
  throw ConfigError("unknown parameter '" + std::string(name) + "'");
}

std::uint64_t partition_seed(std::uint64_t master_seed) {
  return derive_seed(master_seed, {tag_word("partition")});
}

std::uint64_t subset_chain_seed(std::uint64_t master_seed, std::size_t subset) {
  return derive_seed(master_seed, {subset, tag_word("subset-chain")});
}

std::vector<CombinedDataset> partition(const CombinedDataset& data, std::size_t subsets,
                                       std::uint64_t seed) {
  if (subsets < 1) throw ConfigError("partition: subset count must be at least 1");
  const std::size_t n_a = data.count(Study::A);
  const std::size_t n_b = data.count(Study::B);
  std::ostringstream bad;
  if (n_a % subsets != 0) bad << " n_a=" << n_a;
  if (n_b % subsets != 0) bad << " n_b=" << n_b;
  if (bad.tellp() > 0) {
    throw ConfigError("partition: counts not divisible by J=" + std::to_string(subsets) + ":" + bad.str());
  }
  if (subsets == 1) return {data};

  Rng rng(seed);
  std::vector<CombinedDataset> out(subsets);
  for (auto& part : out) {
    part.dims = data.dims;
    part.truth = data.truth;
    part.rows.reserve((n_a + n_b) / subsets);
  }
  for (Study st : {Study::A, Study::B}) {
    std::vector<std::size_t> order;
    for (std::size_t i = 0; i < data.rows.size(); ++i) {
      if (data.rows[i].study == st) order.push_back(i);
    }
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[rng.index_below(i)]);
    }
    for (std::size_t k = 0; k < order.size(); ++k) out[k % subsets].rows.push_back(data.rows[order[k]]);
  }
  return out;
}

AggregatedPosterior aggregate_posteriors(std::span<const SubsetPosterior> subsets) {
  if (subsets.empty()) throw ConfigError("aggregate_posteriors: no subsets");
  const auto& names = subsets.front().draws.names;
  const Eigen::Index rows = subsets.front().draws.size();
  for (const auto& sp : subsets) {
    if (sp.draws.names != names) {
      std::ostringstream diff;
      diff << "aggregate_posteriors: subset " << sp.index << " parameter names differ:";
      for (const auto& n : sp.draws.names) {
        if (std::find(names.begin(), names.end(), n) == names.end()) diff << " +" << n;
      }
      for (const auto& n : names) {
        if (std::find(sp.draws.names.begin(), sp.draws.names.end(), n) == sp.draws.names.end()) {
          diff << " -" << n;
        }
      }
      throw ConfigError(diff.str());
    }
    if (sp.draws.size() != rows) {
      throw ConfigError("aggregate_posteriors: subset " + std::to_string(sp.index) +
                        " has a different draw count");
    }
  }

  AggregatedPosterior agg;
  agg.names = names;
  agg.subsets = subsets.size();
  agg.mu_hat = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(names.size()));
  for (const auto& sp : subsets) agg.mu_hat += sp.mu;
  agg.mu_hat /= static_cast<double>(subsets.size());

  agg.draws.resize(rows * static_cast<Eigen::Index>(subsets.size()), agg.mu_hat.size());
  for (std::size_t j = 0; j < subsets.size(); ++j) {
    const Eigen::RowVectorXd shift = (agg.mu_hat - subsets[j].mu).transpose();
    agg.draws.middleRows(static_cast<Eigen::Index>(j) * rows, rows) =
        subsets[j].draws.draws.rowwise() + shift;
  }
  return agg;
}

double aggregation_error(const AggregatedPosterior& agg) {
  double worst = 0.0;
  for (Eigen::Index c = 0; c < agg.draws.cols(); ++c) {
    const double mean = agg.draws.col(c).mean();
    const double scale = std::max(std::abs(agg.mu_hat(c)), agg.draws.col(c).cwiseAbs().mean());
    if (scale == 0.0) continue;
    worst = std::max(worst, std::abs(mean - agg.mu_hat(c)) / scale);
  }
  return worst;
}

PartitionedFit fit_partitioned(const CombinedDataset& data, std::size_t subsets,
                               const PriorSpec& priors, const McmcConfig& cfg,
                               std::size_t workers) {
  const std::vector<CombinedDataset> parts = partition(data, subsets, partition_seed(cfg.seed));
  std::vector<PosteriorDraws> draws(parts.size());
  std::vector<double> seconds(parts.size(), 0.0);
  const auto errors = run_tasks(parts.size(), workers, [&](std::size_t j) {
    const auto start = std::chrono::steady_clock::now();
    McmcConfig chain = cfg;
    chain.seed = subset_chain_seed(cfg.seed, j);
    draws[j] = run_chain(parts[j], priors, chain);
    seconds[j] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  });
  for (std::size_t j = 0; j < errors.size(); ++j) {
    if (!errors[j]) continue;
    try {
      std::rethrow_exception(errors[j]);
    } catch (const NumericalError& e) {
      throw NumericalError("subset " + std::to_string(j) + " failed: " + e.what());
    } catch (const std::exception& e) {
      throw ConfigError("subset " + std::to_string(j) + " failed: " + e.what());
    }
  }

  PartitionedFit fit;
  fit.seconds = std::move(seconds);
  for (std::size_t j = 0; j < draws.size(); ++j) fit.subsets.push_back(SubsetPosterior::from(j, std::move(draws[j])));
  fit.aggregated = aggregate_posteriors(fit.subsets);
  return fit;
}

}  // namespace mrhet
