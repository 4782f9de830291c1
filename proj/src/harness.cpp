#include "mrhet/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "mrhet/errors.hpp"
#include "mrhet/ivw.hpp"
#include "mrhet/parallel.hpp"
#include "mrhet/rng.hpp"
#include "mrhet/simulate.hpp"

namespace mrhet {

namespace {

std::string fixed(double v, int digits = 4) {
  if (std::isnan(v)) return "NA";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  std::string s(buf);
  if (s.find_first_not_of("-0.") == std::string::npos) s = std::string(buf + (buf[0] == '-'));
  return s;
}

std::size_t workers_of(const ExperimentConfig& cfg) {
  return cfg.workers > 0 ? cfg.workers : default_workers();
}

Method method_from(const std::string& s) {
  if (s == "bayesian") return Method::bayesian;
  if (s == "ivw") return Method::ivw;
  throw ConfigError("unknown method '" + s + "'");
}

Eigen::MatrixX2d beta_columns(const Eigen::MatrixXd& draws) {
  Eigen::MatrixX2d out(draws.rows(), 2);
  out.col(0) = draws.col(0);
  out.col(1) = draws.col(1);
  return out;
}

}  // namespace

std::string_view to_string(Method m) { return m == Method::bayesian ? "bayesian" : "ivw"; }

std::vector<SimConfig> ExperimentConfig::configs() const {
  std::vector<SimConfig> out;
  for (double beta : beta_values) {
    for (double miss : missing_rates) {
      for (double alpha : iv_strengths) {
        SimConfig c = base;
        c.missing_rate = miss;
        c.iv_strength = alpha;
        c.beta_true = {beta, beta};
        out.push_back(c);
      }
    }
  }
  return out;
}

void ExperimentConfig::validate() const {
  if (replicates < 1) throw ConfigError("experiment: replicates must be at least 1");
  if (methods.empty()) throw ConfigError("experiment: no methods selected");
  if (beta_values.empty() || missing_rates.empty() || iv_strengths.empty()) {
    throw ConfigError("experiment: empty configuration grid");
  }
  for (const auto& c : configs()) c.validate();
  mcmc.validate();
  priors.validate();
  if (mcmc.kept() < kMinSummaryDraws) {
    throw ConfigError("experiment: chain keeps " + std::to_string(mcmc.kept()) + " draws, need at least " +
                      std::to_string(kMinSummaryDraws));
  }
  for (auto j : partitions) {
    if (j < 1) throw ConfigError("experiment: partition counts must be at least 1");
  }
}

std::string config_id(const SimConfig& c) {
  return "miss" + format_double(c.missing_rate) + "_alpha" + format_double(c.iv_strength) + "_beta" +
         format_double(c.beta_true[0]);
}

std::uint64_t task_seed(std::uint64_t master, std::size_t config_index, std::size_t replicate,
                        std::size_t subset, std::string_view role) {
  return derive_seed(master, {config_index, replicate, subset, tag_word(role)});
}

StudyResult run_study(const ExperimentConfig& cfg) {
  cfg.validate();
  StudyResult result;
  result.configs = cfg.configs();
  const std::size_t n_cfg = result.configs.size();
  const std::size_t n_tasks = n_cfg * cfg.replicates;
  const bool want_bayes = std::find(cfg.methods.begin(), cfg.methods.end(), Method::bayesian) != cfg.methods.end();
  const bool want_ivw = std::find(cfg.methods.begin(), cfg.methods.end(), Method::ivw) != cfg.methods.end();

  std::vector<std::vector<ReplicateRecord>> slots(n_tasks);
  const auto errors = run_tasks(n_tasks, workers_of(cfg), [&](std::size_t t) {
    const std::size_t c = t / cfg.replicates;
    const std::size_t r = t % cfg.replicates;
    SimConfig sim = result.configs[c];
    sim.seed = task_seed(cfg.master_seed, c, r, 0, "simulate");
    const CombinedDataset data = simulate_dataset(sim);
    if (want_bayes) {
      McmcConfig mc = cfg.mcmc;
      mc.seed = task_seed(cfg.master_seed, c, r, 0, "chain");
      const PosteriorDraws draws = run_chain(data, cfg.priors, mc);
      ReplicateRecord rec{c, r, Method::bayesian, {}};
      for (std::size_t k = 0; k < 2; ++k) {
        const Summary s = summarize(draws, k == 0 ? "beta1" : "beta2");
        rec.estimates[k] = {s.mean, s.ci95};
      }
      slots[t].push_back(rec);
    }
    if (want_ivw) {
      const auto ivw = ivw_two_sample(data);
      ReplicateRecord rec{c, r, Method::ivw, {}};
      for (std::size_t k = 0; k < 2; ++k) rec.estimates[k] = {ivw[k].estimate, ivw[k].ci95};
      slots[t].push_back(rec);
    }
  });

  for (std::size_t t = 0; t < n_tasks; ++t) {
    if (errors[t]) {
      Failure f{t / cfg.replicates, t % cfg.replicates, {}, false};
      try {
        std::rethrow_exception(errors[t]);
      } catch (const NumericalError& e) {
        f.message = e.what();
        f.numerical = true;
      } catch (const std::exception& e) {
        f.message = e.what();
      }
      result.failures.push_back(std::move(f));
      continue;
    }
    for (auto& rec : slots[t]) result.replicates.push_back(rec);
  }

  for (std::size_t c = 0; c < n_cfg; ++c) {
    for (Method m : cfg.methods) {
      for (std::size_t k = 0; k < 2; ++k) {
        std::vector<ReplicateEstimate> est;
        for (const auto& rec : result.replicates) {
          if (rec.config_index == c && rec.method == m) est.push_back(rec.estimates[k]);
        }
        if (est.empty()) continue;
        MetricsRow row = score_replicates(est, result.configs[c].beta_true[k]);
        row.config_id = config_id(result.configs[c]);
        row.method = std::string(to_string(m));
        row.target = k == 0 ? "beta1" : "beta2";
        result.rows.push_back(std::move(row));
      }
    }
  }

  if (!cfg.output_dir.empty()) {
    write_text(cfg.output_dir / "metrics.tsv", metrics_tsv(result));
    write_text(cfg.output_dir / "replicates.tsv", replicates_tsv(result));
    for (double b : cfg.beta_values) {
      write_text(cfg.output_dir / ("table_beta" + format_double(b) + ".tsv"), wide_table_tsv(result, b));
    }
    json manifest;
    manifest["experiment"] = experiment_json(cfg);
    manifest["metric_rows"] = result.rows.size();
    manifest["replicate_records"] = result.replicates.size();
    json fails = json::array();
    for (const auto& f : result.failures) {
      fails.push_back({{"config", config_id(result.configs[f.config_index])},
                       {"replicate", f.replicate},
                       {"numerical", f.numerical},
                       {"message", f.message}});
    }
    manifest["failures"] = fails;
    write_text(cfg.output_dir / "manifest.json", manifest.dump(2) + "\n");
  }
  return result;
}

std::string metrics_tsv(const StudyResult& r) {
  std::ostringstream out;
  out << "config_id\tmissing_rate\tiv_strength\tbeta_true\tmethod\ttarget\treplicates\tmean\tsd\tcoverage\tpower\n";
  for (const auto& row : r.rows) {
    const auto it = std::find_if(r.configs.begin(), r.configs.end(),
                                 [&](const SimConfig& c) { return config_id(c) == row.config_id; });
    const SimConfig& c = *it;
    out << row.config_id << '\t' << format_double(c.missing_rate) << '\t' << format_double(c.iv_strength)
        << '\t' << format_double(c.beta_true[row.target == "beta1" ? 0 : 1]) << '\t' << row.method << '\t'
        << row.target << '\t' << row.replicates << '\t' << format_double(row.mean) << '\t'
        << (std::isnan(row.sd) ? "NA" : format_double(row.sd)) << '\t' << format_double(row.coverage)
        << '\t' << (row.power ? format_double(*row.power) : "NA") << '\n';
  }
  return out.str();
}

std::string replicates_tsv(const StudyResult& r) {
  std::ostringstream out;
  out << "config_id\treplicate\tmethod\tbeta1\tbeta1_lo\tbeta1_hi\tbeta2\tbeta2_lo\tbeta2_hi\n";
  for (const auto& rec : r.replicates) {
    out << config_id(r.configs[rec.config_index]) << '\t' << rec.replicate << '\t' << to_string(rec.method);
    for (const auto& e : rec.estimates) {
      out << '\t' << format_double(e.estimate) << '\t' << format_double(e.ci95.lo) << '\t'
          << format_double(e.ci95.hi);
    }
    out << '\n';
  }
  return out.str();
}

std::string wide_table_tsv(const StudyResult& r, double beta_value) {
  std::vector<std::string> methods;
  for (const auto& row : r.rows) {
    if (std::find(methods.begin(), methods.end(), row.method) == methods.end()) methods.push_back(row.method);
  }
  const bool with_power = beta_value != 0.0;
  std::ostringstream out;
  out << "missing_rate\tiv_strength";
  for (const char* target : {"beta1", "beta2"}) {
    for (const auto& m : methods) {
      out << '\t' << target << '_' << m << "_mean\t" << target << '_' << m << "_sd\t" << target << '_' << m
          << "_coverage";
      if (with_power) out << '\t' << target << '_' << m << "_power";
    }
  }
  out << '\n';
  for (const auto& c : r.configs) {
    if (c.beta_true[0] != beta_value) continue;
    const std::string id = config_id(c);
    out << fixed(c.missing_rate, 2) << '\t' << fixed(c.iv_strength, 2);
    for (const char* target : {"beta1", "beta2"}) {
      for (const auto& m : methods) {
        const auto it = std::find_if(r.rows.begin(), r.rows.end(), [&](const MetricsRow& row) {
          return row.config_id == id && row.method == m && row.target == target;
        });
        if (it == r.rows.end()) {
          out << "\tNA\tNA\tNA" << (with_power ? "\tNA" : "");
          continue;
        }
        out << '\t' << fixed(it->mean, 3) << '\t' << fixed(it->sd, 3) << '\t' << fixed(it->coverage, 3);
        if (with_power) out << '\t' << (it->power ? fixed(*it->power, 3) : "NA");
      }
    }
    out << '\n';
  }
  return out.str();
}

LargeStudyResult run_large_study(const ExperimentConfig& cfg) {
  cfg.validate();
  if (cfg.partitions.empty()) throw ConfigError("large study: no partition counts given");
  LargeStudyResult result;
  result.parameter_names = parameter_names(cfg.base.n_iv);
  const auto configs = cfg.configs();
  const std::size_t workers = workers_of(cfg);

  json manifest;
  manifest["experiment"] = experiment_json(cfg);
  json manifest_entries = json::array();

  for (std::size_t c = 0; c < configs.size(); ++c) {
    SimConfig sim = configs[c];
    sim.seed = task_seed(cfg.master_seed, c, 0, 0, "large-simulate");
    const CombinedDataset data = simulate_dataset(sim);

    // Partition everything up front, then run all chains of this
    // configuration as one task list: index 0 is the full-data chain.
    struct ChainTask {
      const CombinedDataset* data;
      std::uint64_t seed;
    };
    std::vector<std::vector<CombinedDataset>> parts(cfg.partitions.size());
    std::vector<ChainTask> tasks{{&data, task_seed(cfg.master_seed, c, 0, 0, "full-chain")}};
    std::vector<std::size_t> first_task(cfg.partitions.size(), 0);
    for (std::size_t p = 0; p < cfg.partitions.size(); ++p) {
      const std::size_t j_count = cfg.partitions[p];
      if (j_count == 1) continue;
      const std::uint64_t master_j = task_seed(cfg.master_seed, c, 0, j_count, "partition-fit");
      parts[p] = partition(data, j_count, partition_seed(master_j));
      first_task[p] = tasks.size();
      for (std::size_t j = 0; j < j_count; ++j) tasks.push_back({&parts[p][j], subset_chain_seed(master_j, j)});
    }
    std::vector<PosteriorDraws> draws(tasks.size());
    const auto errors = run_tasks(tasks.size(), workers, [&](std::size_t t) {
      McmcConfig mc = cfg.mcmc;
      mc.seed = tasks[t].seed;
      draws[t] = run_chain(*tasks[t].data, cfg.priors, mc);
    });
    for (std::size_t t = 0; t < errors.size(); ++t) {
      if (!errors[t]) continue;
      try {
        std::rethrow_exception(errors[t]);
      } catch (const NumericalError& e) {
        throw NumericalError(config_id(configs[c]) + " chain " + std::to_string(t) + ": " + e.what());
      }
    }

    LargeStudyEntry entry;
    entry.config = sim;
    const Eigen::VectorXd full_mu = draws[0].draws.colwise().mean().transpose();
    std::vector<Eigen::MatrixX2d> samples{beta_columns(draws[0].draws)};
    std::vector<Eigen::VectorXd> mus{full_mu};
    std::vector<std::string> labels{"full"};
    std::vector<std::size_t> counts{1};
    for (std::size_t p = 0; p < cfg.partitions.size(); ++p) {
      const std::size_t j_count = cfg.partitions[p];
      std::map<std::string, double> drift;
      if (j_count == 1) {
        samples.push_back(samples.front());
        mus.push_back(full_mu);
      } else {
        std::vector<SubsetPosterior> subs;
        for (std::size_t j = 0; j < j_count; ++j) subs.push_back(SubsetPosterior::from(j, std::move(draws[first_task[p] + j])));
        const AggregatedPosterior agg = aggregate_posteriors(subs);
        entry.max_aggregation_error = std::max(entry.max_aggregation_error, aggregation_error(agg));
        samples.push_back(beta_columns(agg.draws));
        mus.push_back(agg.mu_hat);
      }
      for (std::size_t k = 0; k < result.parameter_names.size(); ++k) {
        drift[result.parameter_names[k]] = std::abs(mus.back()(static_cast<Eigen::Index>(k)) - full_mu(static_cast<Eigen::Index>(k)));
      }
      entry.drift.push_back(std::move(drift));
      labels.push_back("J=" + std::to_string(j_count));
      counts.push_back(j_count);
    }

    // Shared grid so the contours overlay directly.
    GridSpec grid;
    grid.nx = grid.ny = cfg.grid_size;
    grid.x = {std::numeric_limits<double>::max(), std::numeric_limits<double>::lowest()};
    grid.y = grid.x;
    std::vector<std::array<double, 2>> bws;
    for (const auto& s : samples) {
      const GridSpec g = default_grid(s, cfg.grid_size, cfg.grid_size);
      bws.push_back(*g.bandwidth);
      grid.x = {std::min(grid.x.lo, g.x.lo), std::max(grid.x.hi, g.x.hi)};
      grid.y = {std::min(grid.y.lo, g.y.lo), std::max(grid.y.hi, g.y.hi)};
    }
    for (std::size_t i = 0; i < samples.size(); ++i) {
      PosteriorContour pc;
      pc.label = labels[i];
      pc.subsets = counts[i];
      pc.mu = mus[i];
      pc.mean = {mus[i](0), mus[i](1)};
      GridSpec g = grid;
      g.bandwidth = bws[i];
      pc.grid = gkde2d(samples[i], g);
      entry.posteriors.push_back(std::move(pc));
    }

    json me;
    me["config_id"] = config_id(configs[c]);
    me["config"] = to_json(sim);
    json post = json::array();
    for (const auto& pc : entry.posteriors) {
      const auto mode = pc.grid.mode();
      post.push_back({{"label", pc.label},
                      {"subsets", pc.subsets},
                      {"mean", {pc.mean[0], pc.mean[1]}},
                      {"kde_mode", {mode[0], mode[1]}}});
    }
    me["posteriors"] = post;
    json dr = json::object();
    for (std::size_t p = 0; p < cfg.partitions.size(); ++p) {
      json d = json::object();
      for (const auto& [name, v] : entry.drift[p]) d[name] = v;
      dr["J=" + std::to_string(cfg.partitions[p])] = d;
    }
    me["drift"] = dr;
    me["max_aggregation_error"] = entry.max_aggregation_error;
    manifest_entries.push_back(me);

    if (!cfg.output_dir.empty()) {
      json contours;
      contours["config_id"] = config_id(configs[c]);
      json arr = json::array();
      for (const auto& pc : entry.posteriors) {
        json g = to_json(pc.grid);
        g["label"] = pc.label;
        g["subsets"] = pc.subsets;
        g["mean"] = {pc.mean[0], pc.mean[1]};
        arr.push_back(g);
      }
      contours["posteriors"] = arr;
      write_text(cfg.output_dir / ("contours_" + config_id(configs[c]) + ".json"), contours.dump() + "\n");
    }
    result.entries.push_back(std::move(entry));
  }
  manifest["entries"] = manifest_entries;
  if (!cfg.output_dir.empty()) write_text(cfg.output_dir / "large_manifest.json", manifest.dump(2) + "\n");
  return result;
}

ExperimentConfig table1_experiment() {
  ExperimentConfig e;
  e.beta_values = {0.3};
  return e;
}

ExperimentConfig table2_experiment() {
  ExperimentConfig e;
  e.beta_values = {0.0};
  return e;
}

ExperimentConfig contours_experiment() {
  ExperimentConfig e;
  e.base.n_total = 5000;
  e.beta_values = {0.3, 0.0};
  e.replicates = 1;
  e.methods = {Method::bayesian};
  e.partitions = {5, 25};
  return e;
}

json experiment_json(const ExperimentConfig& cfg) {
  json methods = json::array();
  for (Method m : cfg.methods) methods.push_back(std::string(to_string(m)));
  return {{"base", to_json(cfg.base)},
          {"missing_rates", cfg.missing_rates},
          {"iv_strengths", cfg.iv_strengths},
          {"beta_values", cfg.beta_values},
          {"replicates", cfg.replicates},
          {"methods", methods},
          {"mcmc", to_json(cfg.mcmc)},
          {"priors", to_json(cfg.priors)},
          {"partitions", cfg.partitions},
          {"master_seed", cfg.master_seed},
          {"grid_size", cfg.grid_size}};
}

ExperimentConfig experiment_from_json(const json& j, ExperimentConfig e) {
  for (const auto& [key, v] : j.items()) {
    if (key == "base") e.base = sim_config_from_json(v, e.base);
    else if (key == "missing_rates") e.missing_rates = v.get<std::vector<double>>();
    else if (key == "iv_strengths") e.iv_strengths = v.get<std::vector<double>>();
    else if (key == "beta_values") e.beta_values = v.get<std::vector<double>>();
    else if (key == "replicates") e.replicates = v.get<std::size_t>();
    else if (key == "methods") {
      e.methods.clear();
      for (const auto& m : v) e.methods.push_back(method_from(m.get<std::string>()));
    } else if (key == "mcmc") e.mcmc = mcmc_config_from_json(v, e.mcmc);
    else if (key == "priors") e.priors = prior_spec_from_json(v, e.priors);
    else if (key == "partitions") e.partitions = v.get<std::vector<std::size_t>>();
    else if (key == "master_seed") e.master_seed = v.get<std::uint64_t>();
    else if (key == "output_dir") e.output_dir = v.get<std::string>();
    else if (key == "workers") e.workers = v.get<std::size_t>();
    else if (key == "grid_size") e.grid_size = v.get<std::size_t>();
    else throw ConfigError("experiment: unknown key '" + key + "'");
  }
  return e;
}

}  // namespace mrhet
