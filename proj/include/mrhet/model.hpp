#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Core>

#include "mrhet/types.hpp"

namespace mrhet {

/// Dense, sampler-friendly view of a CombinedDataset.
///
/// Rows are reordered so that all study-A rows come first (dataset order),
/// followed by all study-B rows (dataset order). `source_row[i]` maps model
/// row i back to its dataset index.
struct ModelData {
  IvCounts dims{};
  Eigen::Index n_a = 0;
  Eigen::Index n_b = 0;
  Eigen::MatrixXd zx1;  // n x (L + M): [Z1 | Z3]
  Eigen::MatrixXd zx2;  // n x (K + M): [Z2 | Z3]
  Eigen::VectorXd x1_a;
  Eigen::VectorXd x2_a;
  Eigen::VectorXd y1;
  Eigen::VectorXd y2;
  std::vector<std::size_t> source_row;
  // Per-study Gram matrices of the instrument designs, fixed for a dataset.
  Eigen::MatrixXd gram1_a, gram1_b;
  Eigen::MatrixXd gram2_a, gram2_b;

  static ModelData from(const CombinedDataset& data);

  Eigen::Index n() const { return n_a + n_b; }
};

/// Additive pieces of the joint log density.
struct LogJointTerms {
  double confounder = 0.0;  // sum log N(u_i; 0, 1)
  std::array<double, 4> likelihood{};  // by Equation, both studies
  double prior_beta = 0.0;
  double prior_alpha = 0.0;
  double prior_delta = 0.0;
  double prior_sigma = 0.0;
  double prior_v = 0.0;

  double total() const;
};

/// Log density of (data, imputed exposures, latent U, parameters), with each
/// block kept separate. Throws NumericalError naming the first non-finite
/// block.
LogJointTerms log_joint_terms(const ParamState& state, const ModelData& data,
                              const PriorSpec& priors);

double log_joint(const ParamState& state, const ModelData& data,
                 const PriorSpec& priors);

double log_joint(const ParamState& state, const CombinedDataset& data,
                 const PriorSpec& priors);

/// Throws ConfigError when state dimensions disagree with the data.
void check_dimensions(const ParamState& state, const ModelData& data);

double normal_logpdf(double x, double mean, double var);

/// Log density of Inv-Gamma(shape, rate) at x > 0.
double inv_gamma_logpdf(double x, double shape, double rate);

}  // namespace mrhet
