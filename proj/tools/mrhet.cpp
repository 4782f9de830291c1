// mrhet: command-line front end for simulation, fitting and the study runs.
//
// Exit status: 0 success, 1 usage or configuration error, 2 numerical failure.

#include <CLI11.hpp>

#include <chrono>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "mrhet/aggregate.hpp"
#include "mrhet/errors.hpp"
#include "mrhet/gibbs.hpp"
#include "mrhet/harness.hpp"
#include "mrhet/io.hpp"
#include "mrhet/ivw.hpp"
#include "mrhet/metrics.hpp"
#include "mrhet/parallel.hpp"
#include "mrhet/simulate.hpp"

namespace fs = std::filesystem;
using namespace mrhet;

namespace {

constexpr int kExitConfig = 1;
constexpr int kExitNumerical = 2;

json load_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void emit(const std::string& text, const fs::path& out) {
  if (out.empty()) std::cout << text;
  else write_text(out, text);
}

std::size_t resolve_workers(std::size_t flag) { return flag > 0 ? flag : default_workers(); }

// Chain and prior flags shared by fit and partition-fit. Values left unset
// keep whatever the optional JSON config (or the defaults) provide.
struct ChainFlags {
  fs::path config;
  std::optional<std::size_t> n_iter, burn_in, thin;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> init, impute, ig_target;
  std::optional<double> beta_sd, alpha_sd, delta_sd, v_sd, ig_shape, ig_rate;

  void attach(CLI::App* app) {
    app->add_option("--config", config, "JSON with optional 'priors' and 'mcmc' objects");
    app->add_option("--iter", n_iter, "Total iterations");
    app->add_option("--burn-in", burn_in, "Discarded initial iterations");
    app->add_option("--thin", thin, "Keep every n-th draw");
    app->add_option("--seed", seed, "Chain seed");
    app->add_option("--init", init, "least_squares | prior_draw");
    app->add_option("--impute", impute, "full_conditional | exposure_only");
    app->add_option("--ig-target", ig_target, "Inverse-gamma prior on: sd | variance");
    app->add_option("--beta-sd", beta_sd);
    app->add_option("--alpha-sd", alpha_sd);
    app->add_option("--delta-sd", delta_sd);
    app->add_option("--v-sd", v_sd);
    app->add_option("--ig-shape", ig_shape);
    app->add_option("--ig-rate", ig_rate);
  }

  std::pair<PriorSpec, McmcConfig> resolve() const {
    PriorSpec p;
    McmcConfig c;
    if (!config.empty()) {
      const json j = load_json(config);
      for (const auto& [key, v] : j.items()) {
        if (key == "priors") p = prior_spec_from_json(v, p);
        else if (key == "mcmc") c = mcmc_config_from_json(v, c);
        else throw ConfigError(config.string() + ": unknown key '" + key + "'");
      }
    }
    json po = json::object(), mo = json::object();
    if (beta_sd) po["beta_sd"] = *beta_sd;
    if (alpha_sd) po["alpha_sd"] = *alpha_sd;
    if (delta_sd) po["delta_sd"] = *delta_sd;
    if (v_sd) po["v_sd"] = *v_sd;
    if (ig_shape) po["ig_shape"] = *ig_shape;
    if (ig_rate) po["ig_rate"] = *ig_rate;
    if (ig_target) po["ig_target"] = *ig_target;
    if (n_iter) mo["n_iter"] = *n_iter;
    if (burn_in) mo["burn_in"] = *burn_in;
    if (thin) mo["thin"] = *thin;
    if (seed) mo["seed"] = *seed;
    if (init) mo["init"] = *init;
    if (impute) mo["impute"] = *impute;
    p = prior_spec_from_json(po, p);
    c = mcmc_config_from_json(mo, c);
    p.validate();
    c.validate();
    return {p, c};
  }
};

// Options for the reproduce-* runs; unset values keep the preset.
struct ExperimentFlags {
  fs::path config;
  fs::path out_dir;
  std::optional<std::size_t> replicates, n_iter, burn_in, n_total, grid_size;
  std::optional<std::uint64_t> seed;
  std::vector<std::size_t> partitions;
  std::vector<std::string> methods;
  std::size_t workers = 0;

  void attach(CLI::App* app, bool large) {
    app->add_option("--config", config, "Experiment JSON overriding the preset");
    app->add_option("--out-dir", out_dir, "Output directory")->required();
    app->add_option("--seed", seed, "Master seed");
    app->add_option("--iter", n_iter, "Iterations per chain");
    app->add_option("--burn-in", burn_in, "Burn-in per chain");
    app->add_option("--workers", workers, "Parallel workers (default: MRHET_WORKERS or all cores)");
    app->add_option("--n", n_total, "Individuals per dataset");
    if (large) {
      app->add_option("--partitions", partitions, "Subset counts J");
      app->add_option("--grid-size", grid_size, "KDE grid cells per axis");
    } else {
      app->add_option("--replicates", replicates, "Replicates per configuration");
      app->add_option("--methods", methods, "bayesian and/or ivw");
    }
  }

  ExperimentConfig resolve(ExperimentConfig e) const {
    if (!config.empty()) e = experiment_from_json(load_json(config), e);
    if (replicates) e.replicates = *replicates;
    if (n_iter) e.mcmc.n_iter = *n_iter;
    if (burn_in) e.mcmc.burn_in = *burn_in;
    if (n_total) e.base.n_total = *n_total;
    if (grid_size) e.grid_size = *grid_size;
    if (seed) e.master_seed = *seed;
    if (!partitions.empty()) e.partitions = partitions;
    if (!methods.empty()) {
      json m = methods;
      e = experiment_from_json(json{{"methods", m}}, e);
    }
    e.output_dir = out_dir;
    e.workers = resolve_workers(workers);
    return e;
  }
};

Eigen::MatrixX2d pick_columns(const PosteriorDraws& d, const std::string& x, const std::string& y) {
  Eigen::MatrixX2d s(d.size(), 2);
  s.col(0) = d[x];
  s.col(1) = d[y];
  return s;
}

// Reads the replicates.tsv layout written by the study runs.
std::map<std::pair<std::string, std::string>, std::vector<std::array<ReplicateEstimate, 2>>>
read_replicates(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read " + path.string());
  std::string line;
  std::getline(in, line);
  if (line.rfind("config_id\treplicate\tmethod", 0) != 0) {
    throw ConfigError(path.string() + ": not a replicates table");
  }
  std::map<std::pair<std::string, std::string>, std::vector<std::array<ReplicateEstimate, 2>>> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string id, rep, method;
    std::array<ReplicateEstimate, 2> est;
    fields >> id >> rep >> method;
    for (auto& e : est) fields >> e.estimate >> e.ci95.lo >> e.ci95.hi;
    if (!fields) throw ConfigError(path.string() + ": malformed line " + std::to_string(line_no));
    out[{id, method}].push_back(est);
  }
  return out;
}

int study_exit(const std::vector<Failure>& failures) {
  if (failures.empty()) return 0;
  bool numerical = false;
  for (const auto& f : failures) {
    std::cerr << "replicate failure: config " << f.config_index << " replicate " << f.replicate << ": "
              << f.message << '\n';
    numerical = numerical || f.numerical;
  }
  return numerical ? kExitNumerical : kExitConfig;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Random-effect Bayesian Mendelian randomization with missing exposures"};
  app.require_subcommand(1);

  // simulate
  SimConfig sim;
  fs::path sim_config, sim_out, sim_sidecar;
  auto* simulate = app.add_subcommand("simulate", "Simulate a two-study dataset");
  simulate->add_option("--config", sim_config, "SimConfig JSON");
  simulate->add_option("--n", sim.n_total, "Total individuals");
  simulate->add_option("--missing-rate", sim.missing_rate, "Share of individuals in study B");
  simulate->add_option("--iv-strength", sim.iv_strength, "IV-exposure effect alpha");
  std::vector<double> sim_beta;
  simulate->add_option("--beta", sim_beta, "Causal effects beta1 beta2")->expected(2);
  simulate->add_option("--seed", sim.seed, "Simulation seed");
  simulate->add_option("--out", sim_out, "Dataset CSV")->required();
  simulate->add_option("--sidecar", sim_sidecar, "Provenance JSON (default: <out>.json)");

  // fit
  ChainFlags fit_flags;
  fs::path fit_data, fit_out;
  auto* fit = app.add_subcommand("fit", "Run the Gibbs sampler on a dataset");
  fit->add_option("--data", fit_data, "Dataset CSV")->required();
  fit->add_option("--out", fit_out, "Draws CSV")->required();
  fit_flags.attach(fit);

  // ivw
  fs::path ivw_data, ivw_out;
  auto* ivw = app.add_subcommand("ivw", "Two-sample IVW estimates");
  ivw->add_option("--data", ivw_data, "Dataset CSV")->required();
  ivw->add_option("--out", ivw_out, "JSON output (default: stdout)");

  // partition-fit
  ChainFlags pf_flags;
  fs::path pf_data, pf_out;
  std::size_t pf_subsets = 1, pf_workers = 0;
  auto* pfit = app.add_subcommand("partition-fit", "Fit data subsets in parallel and aggregate");
  pfit->add_option("--data", pf_data, "Dataset CSV")->required();
  pfit->add_option("--subsets,-J", pf_subsets, "Number of subsets J")->required();
  pfit->add_option("--out-dir", pf_out, "Output directory")->required();
  pfit->add_option("--workers", pf_workers, "Parallel workers (default: MRHET_WORKERS or all cores)");
  pf_flags.attach(pfit);

  // metrics
  fs::path met_reps, met_draws, met_out;
  std::vector<double> met_truth{0.0, 0.0};
  auto* metrics = app.add_subcommand("metrics", "Score replicate estimates or summarize draws");
  auto* met_reps_opt = metrics->add_option("--replicates", met_reps, "replicates.tsv from a study run");
  auto* met_draws_opt = metrics->add_option("--draws", met_draws, "Draws CSV to summarize");
  met_reps_opt->excludes(met_draws_opt);
  metrics->add_option("--beta-true", met_truth, "True beta1 beta2 for coverage/power")->expected(2);
  metrics->add_option("--out", met_out, "Output (default: stdout)");

  // contours
  fs::path con_draws, con_out;
  std::string con_x = "beta1", con_y = "beta2";
  std::size_t con_grid = 100;
  std::vector<double> con_bw;
  auto* contours = app.add_subcommand("contours", "2D kernel density grid of two parameters");
  contours->add_option("--draws", con_draws, "Draws CSV")->required();
  contours->add_option("--x", con_x, "Parameter on the x axis");
  contours->add_option("--y", con_y, "Parameter on the y axis");
  contours->add_option("--grid-size", con_grid, "Cells per axis");
  contours->add_option("--bandwidth", con_bw, "Bandwidths hx hy (default: Scott's rule)")->expected(2);
  contours->add_option("--out", con_out, "JSON output (default: stdout)");

  ExperimentFlags t1_flags, t2_flags, lc_flags;
  auto* table1 = app.add_subcommand("reproduce-table1", "Simulation study with beta = 0.3");
  t1_flags.attach(table1, false);
  auto* table2 = app.add_subcommand("reproduce-table2", "Simulation study with beta = 0");
  t2_flags.attach(table2, false);
  auto* large = app.add_subcommand("reproduce-contours", "Large-study partitioning run with KDE grids");
  lc_flags.attach(large, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (*simulate) {
      if (!sim_beta.empty()) sim.beta_true = {sim_beta[0], sim_beta[1]};
      SimConfig cfg = sim;
      if (!sim_config.empty()) {
        cfg = sim_config_from_json(load_json(sim_config));
        // Explicit flags win over the file.
        if (simulate->count("--n")) cfg.n_total = sim.n_total;
        if (simulate->count("--missing-rate")) cfg.missing_rate = sim.missing_rate;
        if (simulate->count("--iv-strength")) cfg.iv_strength = sim.iv_strength;
        if (simulate->count("--beta")) cfg.beta_true = sim.beta_true;
        if (simulate->count("--seed")) cfg.seed = sim.seed;
      }
      const CombinedDataset data = simulate_dataset(cfg);
      write_dataset(sim_out, data);
      const fs::path side = sim_sidecar.empty() ? fs::path(sim_out.string() + ".json") : sim_sidecar;
      write_text(side, provenance_json(data).dump(2) + "\n");
    } else if (*fit) {
      const auto [priors, mc] = fit_flags.resolve();
      const CombinedDataset data = read_dataset(fit_data);
      const PosteriorDraws draws = run_chain(data, priors, mc);
      write_matrix(fit_out, draws.names, draws.draws);
      json s;
      s["beta1"] = to_json(summarize(draws, "beta1"));
      s["beta2"] = to_json(summarize(draws, "beta2"));
      std::cout << s.dump(2) << '\n';
    } else if (*ivw) {
      const auto res = ivw_two_sample(read_dataset(ivw_data));
      json j;
      j["beta1"] = to_json(res[0]);
      j["beta2"] = to_json(res[1]);
      emit(j.dump(2) + "\n", ivw_out);
    } else if (*pfit) {
      const auto [priors, mc] = pf_flags.resolve();
      const CombinedDataset data = read_dataset(pf_data);
      const auto start = std::chrono::steady_clock::now();
      const PartitionedFit res = fit_partitioned(data, pf_subsets, priors, mc, resolve_workers(pf_workers));
      const double total = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      json manifest;
      manifest["subsets"] = pf_subsets;
      manifest["priors"] = to_json(priors);
      manifest["mcmc"] = to_json(mc);
      manifest["parameters"] = res.aggregated.names;
      json subs = json::array();
      for (const auto& sp : res.subsets) {
        const std::string file = "subset_" + std::to_string(sp.index) + ".csv";
        write_matrix(pf_out / file, sp.draws.names, sp.draws.draws);
        subs.push_back({{"index", sp.index},
                        {"file", file},
                        {"chain_seed", sp.draws.seed},
                        {"mu", std::vector<double>(sp.mu.data(), sp.mu.data() + sp.mu.size())},
                        {"seconds", res.seconds[sp.index]}});
      }
      write_matrix(pf_out / "aggregated.csv", res.aggregated.names, res.aggregated.draws);
      manifest["subset_posteriors"] = subs;
      const auto& mu = res.aggregated.mu_hat;
      manifest["mu_hat"] = std::vector<double>(mu.data(), mu.data() + mu.size());
      manifest["aggregated_file"] = "aggregated.csv";
      manifest["aggregation_error"] = aggregation_error(res.aggregated);
      manifest["seconds_total"] = total;
      write_text(pf_out / "manifest.json", manifest.dump(2) + "\n");
    } else if (*metrics) {
      if (!met_reps.empty()) {
        std::ostringstream out;
        out << "config_id\tmethod\ttarget\treplicates\tmean\tsd\tcoverage\tpower\n";
        for (const auto& [key, reps] : read_replicates(met_reps)) {
          for (std::size_t k = 0; k < 2; ++k) {
            std::vector<ReplicateEstimate> est;
            for (const auto& r : reps) est.push_back(r[k]);
            const MetricsRow row = score_replicates(est, met_truth[k]);
            out << key.first << '\t' << key.second << '\t' << (k == 0 ? "beta1" : "beta2") << '\t'
                << row.replicates << '\t' << format_double(row.mean) << '\t'
                << (std::isnan(row.sd) ? "NA" : format_double(row.sd)) << '\t' << format_double(row.coverage)
                << '\t' << (row.power ? format_double(*row.power) : "NA") << '\n';
          }
        }
        emit(out.str(), met_out);
      } else if (!met_draws.empty()) {
        const PosteriorDraws d = read_draws(met_draws);
        std::ostringstream out;
        out << "parameter\tmean\tsd\tci_lo\tci_hi\n";
        for (const auto& name : d.names) {
          const Summary s = summarize(d, name);
          out << name << '\t' << format_double(s.mean) << '\t' << format_double(s.sd) << '\t'
              << format_double(s.ci95.lo) << '\t' << format_double(s.ci95.hi) << '\n';
        }
        emit(out.str(), met_out);
      } else {
        throw ConfigError("metrics: give --replicates or --draws");
      }
    } else if (*contours) {
      const Eigen::MatrixX2d s = pick_columns(read_draws(con_draws), con_x, con_y);
      GridSpec g = default_grid(s, con_grid, con_grid);
      if (!con_bw.empty()) {
        if (con_bw[0] <= 0.0 || con_bw[1] <= 0.0) throw ConfigError("contours: bandwidths must be positive");
        const double pad_x = 5.0 * con_bw[0], pad_y = 5.0 * con_bw[1];
        g.x = {s.col(0).minCoeff() - pad_x, s.col(0).maxCoeff() + pad_x};
        g.y = {s.col(1).minCoeff() - pad_y, s.col(1).maxCoeff() + pad_y};
        g.bandwidth = std::array<double, 2>{con_bw[0], con_bw[1]};
      }
      json j = to_json(gkde2d(s, g));
      j["x_parameter"] = con_x;
      j["y_parameter"] = con_y;
      emit(j.dump() + "\n", con_out);
    } else if (*table1 || *table2) {
      const ExperimentConfig e =
          *table1 ? t1_flags.resolve(table1_experiment()) : t2_flags.resolve(table2_experiment());
      const StudyResult r = run_study(e);
      for (double b : e.beta_values) std::cout << wide_table_tsv(r, b);
      return study_exit(r.failures);
    } else if (*large) {
      const ExperimentConfig e = lc_flags.resolve(contours_experiment());
      const LargeStudyResult r = run_large_study(e);
      for (const auto& entry : r.entries) {
        std::cout << config_id(entry.config);
        for (const auto& pc : entry.posteriors) {
          const auto mode = pc.grid.mode();
          std::cout << '\t' << pc.label << " mean=(" << format_double(pc.mean[0]) << ','
                    << format_double(pc.mean[1]) << ") mode=(" << format_double(mode[0]) << ','
                    << format_double(mode[1]) << ')';
        }
        std::cout << '\n';
      }
    }
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const json::exception& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  }
  return 0;
}
