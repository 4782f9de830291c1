#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "mrhet/aggregate.hpp"
#include "mrhet/gibbs.hpp"
#include "mrhet/ivw.hpp"
#include "mrhet/metrics.hpp"
#include "mrhet/types.hpp"

namespace mrhet {

using json = nlohmann::ordered_json;

/// Shortest decimal text that round-trips to the same double.
std::string format_double(double v);

// Dataset files: comma-separated, one header row
//   study,z1_1..z1_L,z2_1..z2_K,z3_1..z3_M,x1,x2,y1,y2
// study is A or B; missing exposures are the literal token NA.

void write_dataset(std::ostream& out, const CombinedDataset& data);
void write_dataset(const std::filesystem::path& path, const CombinedDataset& data);
CombinedDataset read_dataset(std::istream& in);
CombinedDataset read_dataset(const std::filesystem::path& path);

/// Sidecar record: generating config, seed, drawn V and the masked study-B
/// exposures keyed by dataset row index.
json provenance_json(const CombinedDataset& data);

// Draw matrices: comma-separated, header row of parameter names.

void write_matrix(std::ostream& out, const std::vector<std::string>& names, const Eigen::MatrixXd& m);
void write_matrix(const std::filesystem::path& path, const std::vector<std::string>& names,
                  const Eigen::MatrixXd& m);
PosteriorDraws read_draws(std::istream& in);
PosteriorDraws read_draws(const std::filesystem::path& path);

void write_text(const std::filesystem::path& path, const std::string& text);

json to_json(const SimConfig& c);
json to_json(const PriorSpec& p);
json to_json(const McmcConfig& c);
json to_json(const IvwResult& r);
json to_json(const DensityGrid& g);
json to_json(const Summary& s);

/// Missing keys keep the defaults of `base`; unknown keys are rejected.
SimConfig sim_config_from_json(const json& j, SimConfig base = {});
PriorSpec prior_spec_from_json(const json& j, PriorSpec base = {});
McmcConfig mcmc_config_from_json(const json& j, McmcConfig base = {});

}  // namespace mrhet
