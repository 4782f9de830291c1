#include "mrhet/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "mrhet/errors.hpp"

namespace mrhet {

double percentile(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw ConfigError("percentile of an empty sample");
  const double h = static_cast<double>(sorted.size() - 1) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= sorted.size()) return sorted.back();
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[lo + 1] - sorted[lo]);
}

Summary summarize(std::span<const double> draws) {
  if (draws.size() < kMinSummaryDraws) {
    throw ConfigError("summarize: need at least " + std::to_string(kMinSummaryDraws) +
                      " draws, got " + std::to_string(draws.size()));
  }
  const double n = static_cast<double>(draws.size());
  double sum = 0.0;
  for (double d : draws) sum += d;
  Summary s;
  s.mean = sum / n;
  double ss = 0.0;
  for (double d : draws) ss += (d - s.mean) * (d - s.mean);
  s.sd = std::sqrt(ss / (n - 1.0));
  std::vector<double> sorted(draws.begin(), draws.end());
  std::sort(sorted.begin(), sorted.end());
  s.ci95 = {percentile(sorted, 0.025), percentile(sorted, 0.975)};
  return s;
}

Summary summarize(const PosteriorDraws& draws, std::string_view param) {
  const Eigen::VectorXd col = draws[param];
  return summarize(std::span<const double>(col.data(), static_cast<std::size_t>(col.size())));
}

MetricsRow score_replicates(std::span<const ReplicateEstimate> reps, double beta_true) {
  if (reps.empty()) throw ConfigError("score_replicates: no replicates");
  MetricsRow row;
  const double n = static_cast<double>(reps.size());
  row.replicates = reps.size();
  double sum = 0.0;
  std::size_t covered = 0;
  std::size_t excludes_zero = 0;
  for (const auto& r : reps) {
    sum += r.estimate;
    covered += r.ci95.contains(beta_true);
    excludes_zero += !r.ci95.contains(0.0);
  }
  row.mean = sum / n;
  if (reps.size() > 1) {
    double ss = 0.0;
    for (const auto& r : reps) ss += (r.estimate - row.mean) * (r.estimate - row.mean);
    row.sd = std::sqrt(ss / (n - 1.0));
  } else {
    row.sd = std::numeric_limits<double>::quiet_NaN();
  }
  row.coverage = static_cast<double>(covered) / n;
  if (beta_true != 0.0) row.power = static_cast<double>(excludes_zero) / n;
  return row;
}

std::array<double, 2> DensityGrid::mode() const {
  const auto it = std::max_element(values.begin(), values.end());
  const auto k = static_cast<std::size_t>(it - values.begin());
  return {cell_x(k % nx), cell_y(k / nx)};
}

double DensityGrid::mass() const {
  double s = 0.0;
  for (double v : values) s += v;
  return s * dx() * dy();
}

std::array<double, 2> scott_bandwidth(const Eigen::MatrixX2d& samples) {
  const Eigen::Index n = samples.rows();
  if (n < 2) throw ConfigError("gkde2d: need at least 2 samples");
  std::array<double, 2> h{};
  const double factor = std::pow(static_cast<double>(n), -1.0 / 6.0);
  for (Eigen::Index d = 0; d < 2; ++d) {
    const double mean = samples.col(d).mean();
    const double var = (samples.col(d).array() - mean).square().sum() / static_cast<double>(n - 1);
    if (!(var > 0.0)) {
      throw ConfigError("gkde2d: zero variance in dimension " + std::to_string(d + 1) +
                        "; add jitter or pass explicit bandwidths");
    }
    h[static_cast<std::size_t>(d)] = factor * std::sqrt(var);
  }
  return h;
}

GridSpec default_grid(const Eigen::MatrixX2d& samples, std::size_t nx, std::size_t ny, double pad) {
  GridSpec g;
  g.nx = nx;
  g.ny = ny;
  const auto h = scott_bandwidth(samples);
  g.bandwidth = h;
  g.x = {samples.col(0).minCoeff() - pad * h[0], samples.col(0).maxCoeff() + pad * h[0]};
  g.y = {samples.col(1).minCoeff() - pad * h[1], samples.col(1).maxCoeff() + pad * h[1]};
  return g;
}

DensityGrid gkde2d(const Eigen::MatrixX2d& samples, const GridSpec& grid) {
  if (grid.nx == 0 || grid.ny == 0 || !(grid.x.hi > grid.x.lo) || !(grid.y.hi > grid.y.lo)) {
    throw ConfigError("gkde2d: empty grid");
  }
  DensityGrid out;
  out.x = grid.x;
  out.y = grid.y;
  out.nx = grid.nx;
  out.ny = grid.ny;
  out.bandwidth = grid.bandwidth ? *grid.bandwidth : scott_bandwidth(samples);
  const double hx = out.bandwidth[0];
  const double hy = out.bandwidth[1];
  if (!(hx > 0.0) || !(hy > 0.0)) throw ConfigError("gkde2d: bandwidths must be positive");
  const Eigen::Index n = samples.rows();
  if (n < 1) throw ConfigError("gkde2d: no samples");

  // The product kernel separates: density = Kx * Ky^T / n.
  Eigen::MatrixXd kx(static_cast<Eigen::Index>(grid.nx), n);
  Eigen::MatrixXd ky(static_cast<Eigen::Index>(grid.ny), n);
  const double cx = 1.0 / (hx * std::sqrt(2.0 * std::numbers::pi));
  const double cy = 1.0 / (hy * std::sqrt(2.0 * std::numbers::pi));
  for (std::size_t i = 0; i < grid.nx; ++i) {
    const double gx = out.cell_x(i);
    kx.row(static_cast<Eigen::Index>(i)) =
        (-0.5 * ((gx - samples.col(0).array()) / hx).square()).exp() * cx;
  }
  for (std::size_t j = 0; j < grid.ny; ++j) {
    const double gy = out.cell_y(j);
    ky.row(static_cast<Eigen::Index>(j)) =
        (-0.5 * ((gy - samples.col(1).array()) / hy).square()).exp() * cy;
  }
  const Eigen::MatrixXd dens = (ky * kx.transpose()) / static_cast<double>(n);  // ny x nx
  out.values.resize(grid.nx * grid.ny);
  for (std::size_t j = 0; j < grid.ny; ++j) {
    for (std::size_t i = 0; i < grid.nx; ++i) {
      out.values[j * grid.nx + i] = dens(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i));
    }
  }
  return out;
}

}  // namespace mrhet
