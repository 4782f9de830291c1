#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "mrhet/errors.hpp"
#include "mrhet/harness.hpp"

using namespace mrhet;
namespace fs = std::filesystem;

namespace {

ExperimentConfig small_study() {
  ExperimentConfig e;
  e.base.n_total = 200;
  e.missing_rates = {0.5, 0.8};
  e.iv_strengths = {0.3};
  e.replicates = 3;
  e.mcmc.n_iter = 400;
  e.mcmc.burn_in = 100;
  e.workers = 1;
  return e;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

TEST_CASE("experiment grid is the cross product in beta, missing, IV order") {
  ExperimentConfig e;
  e.beta_values = {0.3, 0.0};
  const auto c = e.configs();
  REQUIRE(c.size() == 12);
  CHECK(c[0].missing_rate == 0.8);
  CHECK(c[0].iv_strength == 0.3);
  CHECK(c[1].iv_strength == 0.1);
  CHECK(c[2].missing_rate == 0.5);
  CHECK(c[6].beta_true[0] == 0.0);
  CHECK(config_id(c[1]) == "miss0.8_alpha0.1_beta0.3");
}

TEST_CASE("single-replicate IVW study gives one estimate per target and 0/1 scores") {
  ExperimentConfig e = small_study();
  e.replicates = 1;
  e.methods = {Method::ivw};
  const StudyResult r = run_study(e);
  CHECK(r.rows.size() == 2 * 1 * 2);
  CHECK(r.replicates.size() == 2);
  for (const auto& row : r.rows) {
    CHECK(row.replicates == 1);
    CHECK((row.coverage == 0.0 || row.coverage == 1.0));
    CHECK((*row.power == 0.0 || *row.power == 1.0));
    CHECK(std::isnan(row.sd));
  }
}

TEST_CASE("study output is deterministic and independent of the worker count") {
  const fs::path root = fs::temp_directory_path() / "mrhet_harness_test";
  fs::remove_all(root);
  ExperimentConfig e = small_study();
  e.output_dir = root / "one";
  const StudyResult a = run_study(e);
  CHECK(a.rows.size() == 2 * 2 * 2);  // configs x methods x targets
  CHECK(a.failures.empty());
  e.output_dir = root / "many";
  e.workers = 4;
  run_study(e);
  for (const char* f : {"metrics.tsv", "replicates.tsv", "table_beta0.3.tsv", "manifest.json"}) {
    CAPTURE(f);
    const std::string x = slurp(root / "one" / f);
    CHECK_FALSE(x.empty());
    CHECK(x == slurp(root / "many" / f));
  }
  CHECK(metrics_tsv(a) == slurp(root / "one" / "metrics.tsv"));
  fs::remove_all(root);
}

TEST_CASE("table layout has one line per configuration") {
  const StudyResult r = run_study(small_study());
  const std::string t = wide_table_tsv(r, 0.3);
  CHECK(std::count(t.begin(), t.end(), '\n') == 3);
  CHECK(t.rfind("missing_rate\tiv_strength\tbeta1_bayesian_mean", 0) == 0);
  CHECK(t.find("beta2_ivw_power") != std::string::npos);
  // beta = 0 tables carry no power columns
  ExperimentConfig e = small_study();
  e.beta_values = {0.0};
  e.methods = {Method::ivw};
  CHECK(wide_table_tsv(run_study(e), 0.0).find("power") == std::string::npos);
}

TEST_CASE("experiment JSON round-trips and rejects unknown keys") {
  ExperimentConfig e = small_study();
  e.partitions = {2, 4};
  e.methods = {Method::ivw};
  const ExperimentConfig back = experiment_from_json(experiment_json(e));
  CHECK(back.missing_rates == e.missing_rates);
  CHECK(back.partitions == e.partitions);
  CHECK(back.methods == e.methods);
  CHECK(back.mcmc.n_iter == 400);
  CHECK(experiment_json(back).dump() == experiment_json(e).dump());
  CHECK_THROWS_AS(experiment_from_json(json{{"replicate", 3}}), ConfigError);
  CHECK_THROWS_AS(experiment_from_json(json{{"methods", {"mcmc"}}}), ConfigError);
}

TEST_CASE("invalid experiments are rejected before running") {
  ExperimentConfig e = small_study();
  e.replicates = 0;
  CHECK_THROWS_AS(run_study(e), ConfigError);
  e = small_study();
  e.mcmc.n_iter = 150;  // keeps 50 draws
  CHECK_THROWS_AS(run_study(e), ConfigError);
}

TEST_CASE("large study: J = 1 duplicates the full fit and drift is recorded per parameter") {
  ExperimentConfig e = small_study();
  e.missing_rates = {0.5};
  e.base.n_total = 400;
  e.partitions = {1, 4};
  e.grid_size = 20;
  e.workers = 2;
  const LargeStudyResult r = run_large_study(e);
  REQUIRE(r.entries.size() == 1);
  const auto& entry = r.entries[0];
  REQUIRE(entry.posteriors.size() == 3);
  CHECK(entry.posteriors[0].label == "full");
  CHECK(entry.posteriors[1].label == "J=1");
  CHECK(entry.posteriors[1].grid.values == entry.posteriors[0].grid.values);
  CHECK(entry.drift[0].at("beta1") == 0.0);
  CHECK(entry.drift[1].size() == r.parameter_names.size());
  CHECK(entry.max_aggregation_error < 1e-10);
  // shared grid
  CHECK(entry.posteriors[2].grid.x == entry.posteriors[0].grid.x);
}
