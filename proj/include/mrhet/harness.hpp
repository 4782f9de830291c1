#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mrhet/aggregate.hpp"
#include "mrhet/gibbs.hpp"
#include "mrhet/io.hpp"
#include "mrhet/metrics.hpp"
#include "mrhet/types.hpp"

namespace mrhet {

enum class Method : std::uint8_t { bayesian, ivw };

std::string_view to_string(Method m);

/// A simulation experiment: the cross product of missing rates, IV strengths
/// and causal effects over a base SimConfig, replicated and fitted.
struct ExperimentConfig {
  SimConfig base{};
  std::vector<double> missing_rates{0.8, 0.5, 0.2};
  std::vector<double> iv_strengths{0.3, 0.1};
  std::vector<double> beta_values{0.3};
  std::size_t replicates = 50;
  std::vector<Method> methods{Method::bayesian, Method::ivw};
  McmcConfig mcmc{};
  PriorSpec priors{};
  std::vector<std::size_t> partitions;  // J values for the large-study run
  std::uint64_t master_seed = 20211;
  std::filesystem::path output_dir;  // nothing written when empty
  std::size_t workers = 0;           // 0 = default_workers()
  std::size_t grid_size = 100;       // contour grid resolution per axis

  /// Cross product in (beta, missing rate, IV strength) order; the seed of
  /// each entry is left at base.seed and set per replicate.
  std::vector<SimConfig> configs() const;
  void validate() const;
};

std::string config_id(const SimConfig& c);

/// Role tags for derive_seed; replicate-level seeds are
/// derive_seed(master, {config_index, replicate, subset, tag_word(role)}).
std::uint64_t task_seed(std::uint64_t master, std::size_t config_index, std::size_t replicate,
                        std::size_t subset, std::string_view role);

struct ReplicateRecord {
  std::size_t config_index = 0;
  std::size_t replicate = 0;
  Method method = Method::bayesian;
  std::array<ReplicateEstimate, 2> estimates{};
};

struct Failure {
  std::size_t config_index = 0;
  std::size_t replicate = 0;
  std::string message;
  bool numerical = false;
};

struct StudyResult {
  std::vector<SimConfig> configs;
  std::vector<MetricsRow> rows;  // config x method x target
  std::vector<ReplicateRecord> replicates;
  std::vector<Failure> failures;
};

/// For every (configuration, replicate): simulate, fit the requested methods
/// and record beta1/beta2 estimates with 95% intervals; then score each
/// configuration. Output depends only on `cfg`, never on the worker count.
/// Writes metrics.tsv, replicates.tsv, table_beta<value>.tsv and
/// manifest.json when an output directory is set.
StudyResult run_study(const ExperimentConfig& cfg);

struct PosteriorContour {
  std::string label;   // "full" or "J=<n>"
  std::size_t subsets = 0;
  std::array<double, 2> mean{};  // (beta1, beta2)
  Eigen::VectorXd mu;            // all parameter means
  DensityGrid grid;
};

struct LargeStudyEntry {
  SimConfig config;
  std::vector<PosteriorContour> posteriors;  // full first, then each J
  /// |E_agg - E_full| per parameter, one map per J in cfg.partitions order.
  std::vector<std::map<std::string, double>> drift;
  double max_aggregation_error = 0.0;
};

struct LargeStudyResult {
  std::vector<LargeStudyEntry> entries;
  std::vector<std::string> parameter_names;
};

/// For each configuration: one dataset, a full-data chain, a partitioned fit
/// per J, and 2D KDE grids of (beta1, beta2) on a shared grid. J = 1 reuses
/// the full-data fit. Writes contours_<id>.json per configuration and
/// large_manifest.json when an output directory is set.
LargeStudyResult run_large_study(const ExperimentConfig& cfg);

// Desk-scale presets.
ExperimentConfig table1_experiment();
ExperimentConfig table2_experiment();
ExperimentConfig contours_experiment();

/// Text renderings used for the output files.
std::string metrics_tsv(const StudyResult& r);
std::string replicates_tsv(const StudyResult& r);
/// Wide layout of one results table: one line per (missing rate, IV strength),
/// columns grouped by target then method (mean, sd, coverage[, power]).
std::string wide_table_tsv(const StudyResult& r, double beta_value);

json experiment_json(const ExperimentConfig& cfg);
ExperimentConfig experiment_from_json(const json& j, ExperimentConfig base = {});

}  // namespace mrhet
