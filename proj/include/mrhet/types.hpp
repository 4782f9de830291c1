#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace mrhet {

enum class Study : std::uint8_t { A = 0, B = 1 };

/// The four structural equations. Indexes delta, v and the sigma2 table.
enum class Equation : std::uint8_t { X1 = 0, X2 = 1, Y1 = 2, Y2 = 3 };

inline constexpr std::array<Equation, 4> kEquations{Equation::X1, Equation::X2,
                                                    Equation::Y1, Equation::Y2};

std::string_view to_string(Study s);
std::string_view to_string(Equation e);

/// Instrument counts: L for X1 only, K for X2 only, M shared.
struct IvCounts {
  std::size_t l = 15;
  std::size_t k = 15;
  std::size_t m = 5;

  bool operator==(const IvCounts&) const = default;
};

struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  bool contains(double x) const { return lo <= x && x <= hi; }
  bool operator==(const Interval&) const = default;
};

/// Generative settings for one simulated two-study dataset.
struct SimConfig {
  std::size_t n_total = 400;
  double missing_rate = 0.5;
  double iv_strength = 0.3;
  std::array<double, 2> beta_true{0.3, 0.3};
  IvCounts n_iv{};
  double maf_param = 0.3;
  double delta_true = 1.0;
  double sigma_true = 0.1;
  Interval v_range{-0.5, 0.5};
  std::uint64_t seed = 1;

  std::size_t n_b() const;
  std::size_t n_a() const { return n_total - n_b(); }

  /// Throws ConfigError naming each offending field.
  void validate() const;
};

enum class IgTarget : std::uint8_t { variance, sd };

struct PriorSpec {
  double beta_sd = 10.0;
  double alpha_sd = 0.3;
  double delta_sd = 1.0;
  double v_sd = 1.0;
  double ig_shape = 3.0;
  double ig_rate = 2.0;
  IgTarget ig_target = IgTarget::sd;

  void validate() const;
};

struct RandomEffects {
  std::array<double, 4> v{};  // indexed by Equation
};

struct Exposures {
  double x1 = 0.0;
  double x2 = 0.0;

  bool operator==(const Exposures&) const = default;
};

struct Row {
  Study study = Study::A;
  std::vector<std::uint8_t> z1;
  std::vector<std::uint8_t> z2;
  std::vector<std::uint8_t> z3;
  std::optional<double> x1;
  std::optional<double> x2;
  double y1 = 0.0;
  double y2 = 0.0;
  /// Simulated exposures of a study-B row. Never written to dataset files
  /// and never read by any estimator; test oracles only.
  std::optional<Exposures> masked;

  bool operator==(const Row&) const = default;
};

struct Truth {
  SimConfig config;
  RandomEffects effects;
};

struct CombinedDataset {
  IvCounts dims{};
  std::vector<Row> rows;
  std::optional<Truth> truth;

  std::size_t count(Study s) const;

  /// Checks genotype range, exposure presence per study and row widths.
  /// `require_both_studies` additionally demands at least one row of each.
  void validate(bool require_both_studies = false) const;
};

/// Full state of one Markov chain.
///
/// `u` is in model order: study-A rows first, then study-B rows, each in
/// dataset order (see ModelData). `x1_imputed`/`x2_imputed` hold one value
/// per study-B row in the same order.
struct ParamState {
  std::array<double, 2> beta{};
  Eigen::VectorXd alpha1;
  Eigen::VectorXd alpha2;
  Eigen::VectorXd alpha31;
  Eigen::VectorXd alpha32;
  std::array<double, 4> delta{};   // by Equation
  std::array<double, 8> sigma2{};  // by sigma2_index(Equation, Study)
  std::array<double, 4> v{};       // by Equation; acts on study B only
  Eigen::VectorXd u;
  Eigen::VectorXd x1_imputed;
  Eigen::VectorXd x2_imputed;

  static ParamState zeros(const IvCounts& dims, std::size_t n_a, std::size_t n_b);

  double& sigma2_of(Equation e, Study s) { return sigma2[sigma2_index(e, s)]; }
  double sigma2_of(Equation e, Study s) const { return sigma2[sigma2_index(e, s)]; }

  static constexpr std::size_t sigma2_index(Equation e, Study s) {
    return static_cast<std::size_t>(e) * 2 + static_cast<std::size_t>(s);
  }
};

constexpr std::size_t idx(Equation e) { return static_cast<std::size_t>(e); }

}  // namespace mrhet
