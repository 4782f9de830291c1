#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "mrhet/gibbs.hpp"
#include "mrhet/types.hpp"

namespace mrhet {

struct Summary {
  double mean = 0.0;
  double sd = 0.0;
  Interval ci95{};
};

inline constexpr std::size_t kMinSummaryDraws = 100;

/// Percentile with linear interpolation between order statistics:
/// for sorted x[0..n-1] and h = (n - 1) * p, returns
/// x[floor(h)] + (h - floor(h)) * (x[floor(h) + 1] - x[floor(h)]).
double percentile(std::span<const double> sorted, double p);

/// Sample mean, sample sd (n - 1 divisor) and the equal-tailed 2.5% / 97.5%
/// percentile interval. Requires at least kMinSummaryDraws values.
Summary summarize(std::span<const double> draws);
Summary summarize(const PosteriorDraws& draws, std::string_view param);

struct ReplicateEstimate {
  double estimate = 0.0;
  Interval ci95{};
};

struct MetricsRow {
  std::string config_id;
  std::string method;  // "bayesian" | "ivw"
  std::string target;  // "beta1" | "beta2"
  std::size_t replicates = 0;
  double mean = 0.0;
  double sd = 0.0;  // NaN with a single replicate
  double coverage = 0.0;
  std::optional<double> power;
};

/// Coverage: share of intervals containing `beta_true`. Power: share of
/// intervals excluding 0, reported only when beta_true != 0.
MetricsRow score_replicates(std::span<const ReplicateEstimate> reps, double beta_true);

struct GridSpec {
  Interval x{};
  Interval y{};
  std::size_t nx = 100;
  std::size_t ny = 100;
  /// Scott's rule when absent.
  std::optional<std::array<double, 2>> bandwidth;
};

struct DensityGrid {
  Interval x{};
  Interval y{};
  std::size_t nx = 0;
  std::size_t ny = 0;
  std::array<double, 2> bandwidth{};
  /// Row-major, ny rows of nx values; value (i, j) sits at the centre of
  /// cell (x index i, y index j): values[j * nx + i].
  std::vector<double> values;

  double dx() const { return (x.hi - x.lo) / static_cast<double>(nx); }
  double dy() const { return (y.hi - y.lo) / static_cast<double>(ny); }
  double cell_x(std::size_t i) const { return x.lo + (static_cast<double>(i) + 0.5) * dx(); }
  double cell_y(std::size_t j) const { return y.lo + (static_cast<double>(j) + 0.5) * dy(); }
  double at(std::size_t i, std::size_t j) const { return values[j * nx + i]; }
  /// Centre of the highest cell.
  std::array<double, 2> mode() const;
  double mass() const;
};

/// Scott's rule bandwidths h_d = n^(-1/6) * sd_d for two dimensions.
/// Throws ConfigError when a dimension has zero variance.
std::array<double, 2> scott_bandwidth(const Eigen::MatrixX2d& samples);

/// Grid spanning every sample by `pad` bandwidths on each side.
GridSpec default_grid(const Eigen::MatrixX2d& samples, std::size_t nx = 100, std::size_t ny = 100,
                      double pad = 5.0);

/// Product-Gaussian kernel density estimate evaluated at cell centres.
DensityGrid gkde2d(const Eigen::MatrixX2d& samples, const GridSpec& grid);

}  // namespace mrhet
