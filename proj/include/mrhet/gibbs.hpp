#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "mrhet/model.hpp"
#include "mrhet/rng.hpp"
#include "mrhet/types.hpp"

namespace mrhet {

enum class InitMode : std::uint8_t { least_squares, prior_draw };

/// How missing study-B exposures are drawn.
///   full_conditional  - Gaussian conditional given Z, U, the outcome and
///                       all current parameters (the exact Gibbs step).
///   exposure_only     - draw from the exposure equation alone, ignoring the
///                       outcome. Kept for comparison runs; it does not target
///                       the joint posterior.
enum class ImputeMode : std::uint8_t { full_conditional, exposure_only };

/// Blocks held fixed at their initial values. Used by oracle checks that
/// need a known conditional, e.g. beta given known U, delta and sigma2.
struct Clamp {
  bool u = false;
  bool delta = false;
  bool sigma2 = false;
  bool v = false;
};

struct McmcConfig {
  std::size_t n_iter = 5000;
  std::size_t burn_in = 1000;
  std::size_t thin = 1;
  std::uint64_t seed = 1;
  InitMode init = InitMode::least_squares;
  ImputeMode impute = ImputeMode::full_conditional;
  Clamp clamp{};

  std::size_t kept() const { return n_iter > burn_in ? (n_iter - burn_in + thin - 1) / thin : 0; }
  void validate() const;
};

/// Post-burn-in draws, one row per kept iteration.
struct PosteriorDraws {
  std::vector<std::string> names;
  Eigen::MatrixXd draws;
  std::uint64_t seed = 0;
  double acceptance_rate = 1.0;
  McmcConfig config{};

  Eigen::Index column(std::string_view name) const;  // throws ConfigError if absent
  Eigen::VectorXd operator[](std::string_view name) const { return draws.col(column(name)); }
  Eigen::Index size() const { return draws.rows(); }
};

/// Column labels in recording order: beta1, beta2, alpha1_1.., alpha2_1..,
/// alpha31_1.., alpha32_1.., delta_*, sigma2_<eq><study>, V_*.
std::vector<std::string> parameter_names(const IvCounts& dims);

/// Flattens a state into the parameter_names() order.
Eigen::VectorXd flatten(const ParamState& state);

// Single conditional updates. Each mutates `state` in place.

void impute_missing_exposures(ParamState& state, const ModelData& data, Rng& rng,
                              ImputeMode mode = ImputeMode::full_conditional);

void update_latent_confounder(ParamState& state, const ModelData& data, Rng& rng);

/// Scan order: (alpha1, alpha31, delta_X1), (alpha2, alpha32, delta_X2),
/// (beta1, delta_Y1), (beta2, delta_Y2), then V_X1, V_X2, V_Y1, V_Y2.
void update_coefficients(ParamState& state, const ModelData& data, const PriorSpec& priors,
                         Rng& rng, const Clamp& clamp = {});

void update_variances(ParamState& state, const ModelData& data, const PriorSpec& priors,
                      Rng& rng);

/// Starting state for a chain.
ParamState initial_state(const ModelData& data, const PriorSpec& priors, InitMode mode, Rng& rng);

class GibbsSampler {
 public:
  /// `start` overrides the InitMode-derived starting point when given.
  GibbsSampler(const ModelData& data, PriorSpec priors, McmcConfig cfg,
               std::optional<ParamState> start = std::nullopt);

  /// One full sweep: impute, U, coefficients, variances.
  void step();

  const ParamState& state() const { return state_; }
  std::size_t iteration() const { return iter_; }

 private:
  void check_finite(std::string_view block) const;

  const ModelData& data_;
  PriorSpec priors_;
  McmcConfig cfg_;
  Rng rng_;
  ParamState state_;
  std::size_t iter_ = 0;
};

PosteriorDraws run_chain(const ModelData& data, const PriorSpec& priors, const McmcConfig& cfg,
                         std::optional<ParamState> start = std::nullopt);

PosteriorDraws run_chain(const CombinedDataset& data, const PriorSpec& priors,
                         const McmcConfig& cfg);

}  // namespace mrhet
