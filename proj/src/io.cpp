#include "mrhet/io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "mrhet/errors.hpp"

namespace mrhet {

namespace {

std::vector<std::string_view> split(std::string_view line, char sep = ',') {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.remove_suffix(1);
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  return s;
}

double parse_double(std::string_view s, std::size_t line_no) {
  s = trim(s);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw ConfigError("line " + std::to_string(line_no) + ": cannot parse number '" + std::string(s) + "'");
  }
  return v;
}

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path.string());
  return in;
}

std::size_t count_prefix(const std::vector<std::string_view>& header, std::size_t& pos,
                         std::string_view stem) {
  std::size_t count = 0;
  while (pos < header.size() &&
         trim(header[pos]) == std::string(stem) + "_" + std::to_string(count + 1)) {
    ++count;
    ++pos;
  }
  return count;
}

const char* to_cstr(IgTarget t) { return t == IgTarget::variance ? "variance" : "sd"; }
const char* to_cstr(InitMode m) { return m == InitMode::least_squares ? "least_squares" : "prior_draw"; }
const char* to_cstr(ImputeMode m) {
  return m == ImputeMode::full_conditional ? "full_conditional" : "exposure_only";
}

[[noreturn]] void unknown_key(const std::string& where, const std::string& key) {
  throw ConfigError(where + ": unknown key '" + key + "'");
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

void write_dataset(std::ostream& out, const CombinedDataset& data) {
  out << "study";
  for (std::size_t j = 1; j <= data.dims.l; ++j) out << ",z1_" << j;
  for (std::size_t j = 1; j <= data.dims.k; ++j) out << ",z2_" << j;
  for (std::size_t j = 1; j <= data.dims.m; ++j) out << ",z3_" << j;
  out << ",x1,x2,y1,y2\n";
  const auto opt = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string("NA"); };
  for (const Row& r : data.rows) {
    out << to_string(r.study);
    for (auto g : r.z1) out << ',' << static_cast<int>(g);
    for (auto g : r.z2) out << ',' << static_cast<int>(g);
    for (auto g : r.z3) out << ',' << static_cast<int>(g);
    out << ',' << opt(r.x1) << ',' << opt(r.x2) << ',' << format_double(r.y1) << ','
        << format_double(r.y2) << '\n';
  }
}

void write_dataset(const std::filesystem::path& path, const CombinedDataset& data) {
  auto out = open_out(path);
  write_dataset(out, data);
}

CombinedDataset read_dataset(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("dataset: empty input");
  const auto header = split(line);
  if (header.empty() || trim(header[0]) != "study") throw ConfigError("dataset: first column must be 'study'");
  std::size_t pos = 1;
  CombinedDataset data;
  data.dims.l = count_prefix(header, pos, "z1");
  data.dims.k = count_prefix(header, pos, "z2");
  data.dims.m = count_prefix(header, pos, "z3");
  const std::vector<std::string> tail{"x1", "x2", "y1", "y2"};
  if (header.size() != pos + tail.size()) throw ConfigError("dataset: unexpected header columns");
  for (std::size_t t = 0; t < tail.size(); ++t) {
    if (trim(header[pos + t]) != tail[t]) throw ConfigError("dataset: expected column '" + tail[t] + "'");
  }
  if (data.dims.l == 0 || data.dims.k == 0 || data.dims.m == 0) {
    throw ConfigError("dataset: each instrument group needs at least one column");
  }

  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto f = split(line);
    if (f.size() != header.size()) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected " + std::to_string(header.size()) +
                        " fields, got " + std::to_string(f.size()));
    }
    Row r;
    const auto study = trim(f[0]);
    if (study == "A") r.study = Study::A;
    else if (study == "B") r.study = Study::B;
    else throw ConfigError("line " + std::to_string(line_no) + ": study must be A or B");
    std::size_t c = 1;
    const auto read_z = [&](std::size_t count, std::vector<std::uint8_t>& z) {
      z.resize(count);
      for (std::size_t j = 0; j < count; ++j, ++c) {
        const auto s = trim(f[c]);
        int g = -1;
        const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), g);
        if (ec != std::errc() || ptr != s.data() + s.size() || g < 0 || g > 2) {
          throw ConfigError("line " + std::to_string(line_no) + ": genotype must be 0, 1 or 2");
        }
        z[j] = static_cast<std::uint8_t>(g);
      }
    };
    read_z(data.dims.l, r.z1);
    read_z(data.dims.k, r.z2);
    read_z(data.dims.m, r.z3);
    const auto opt = [&](std::string_view s) -> std::optional<double> {
      if (trim(s) == "NA") return std::nullopt;
      return parse_double(s, line_no);
    };
    r.x1 = opt(f[c]);
    r.x2 = opt(f[c + 1]);
    r.y1 = parse_double(f[c + 2], line_no);
    r.y2 = parse_double(f[c + 3], line_no);
    data.rows.push_back(std::move(r));
  }
  data.validate();
  return data;
}

CombinedDataset read_dataset(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_dataset(in);
}

json provenance_json(const CombinedDataset& data) {
  json j;
  j["n_rows"] = data.rows.size();
  j["n_a"] = data.count(Study::A);
  j["n_b"] = data.count(Study::B);
  if (data.truth) {
    j["config"] = to_json(data.truth->config);
    j["seed"] = data.truth->config.seed;
    json v;
    for (Equation e : kEquations) v["V_" + std::string(to_string(e))] = data.truth->effects.v[idx(e)];
    j["random_effects"] = v;
  }
  json masked = json::array();
  for (std::size_t i = 0; i < data.rows.size(); ++i) {
    if (const auto& m = data.rows[i].masked) masked.push_back({{"row", i}, {"x1", m->x1}, {"x2", m->x2}});
  }
  j["masked_exposures"] = masked;
  return j;
}

void write_matrix(std::ostream& out, const std::vector<std::string>& names, const Eigen::MatrixXd& m) {
  for (std::size_t i = 0; i < names.size(); ++i) out << (i ? "," : "") << names[i];
  out << '\n';
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) out << (c ? "," : "") << format_double(m(r, c));
    out << '\n';
  }
}

void write_matrix(const std::filesystem::path& path, const std::vector<std::string>& names,
                  const Eigen::MatrixXd& m) {
  auto out = open_out(path);
  write_matrix(out, names, m);
}

PosteriorDraws read_draws(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("draws: empty input");
  PosteriorDraws d;
  for (auto s : split(line)) d.names.emplace_back(trim(s));
  std::vector<double> values;
  std::size_t rows = 0;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto f = split(line);
    if (f.size() != d.names.size()) throw ConfigError("draws: line " + std::to_string(line_no) + " has wrong width");
    for (auto s : f) values.push_back(parse_double(s, line_no));
    ++rows;
  }
  d.draws = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      values.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(d.names.size()));
  if (!d.draws.allFinite()) throw ConfigError("draws: non-finite entry");
  return d;
}

PosteriorDraws read_draws(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_draws(in);
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  auto out = open_out(path);
  out << text;
}

json to_json(const SimConfig& c) {
  return {{"n_total", c.n_total},
          {"missing_rate", c.missing_rate},
          {"iv_strength", c.iv_strength},
          {"beta_true", {c.beta_true[0], c.beta_true[1]}},
          {"n_iv", {c.n_iv.l, c.n_iv.k, c.n_iv.m}},
          {"maf_param", c.maf_param},
          {"delta_true", c.delta_true},
          {"sigma_true", c.sigma_true},
          {"v_range", {c.v_range.lo, c.v_range.hi}},
          {"seed", c.seed}};
}

json to_json(const PriorSpec& p) {
  return {{"beta_sd", p.beta_sd}, {"alpha_sd", p.alpha_sd}, {"delta_sd", p.delta_sd},
          {"v_sd", p.v_sd},       {"ig_shape", p.ig_shape}, {"ig_rate", p.ig_rate},
          {"ig_target", to_cstr(p.ig_target)}};
}

json to_json(const McmcConfig& c) {
  return {{"n_iter", c.n_iter}, {"burn_in", c.burn_in}, {"thin", c.thin}, {"seed", c.seed},
          {"init", to_cstr(c.init)}, {"impute", to_cstr(c.impute)}};
}

json to_json(const IvwResult& r) {
  json ratios = json::object();
  for (const auto& [label, ratio] : r.ratios) ratios[label] = ratio;
  return {{"estimate", r.estimate}, {"se", r.se}, {"ci95", {r.ci95.lo, r.ci95.hi}},
          {"ratios", ratios}, {"excluded", r.excluded}};
}

json to_json(const DensityGrid& g) {
  return {{"x_range", {g.x.lo, g.x.hi}}, {"y_range", {g.y.lo, g.y.hi}}, {"nx", g.nx},
          {"ny", g.ny}, {"bandwidth", {g.bandwidth[0], g.bandwidth[1]}},
          {"layout", "row-major; values[j*nx+i] at cell centre (x_i, y_j)"},
          {"values", g.values}};
}

json to_json(const Summary& s) {
  return {{"mean", s.mean}, {"sd", s.sd}, {"ci95", {s.ci95.lo, s.ci95.hi}}};
}

SimConfig sim_config_from_json(const json& j, SimConfig c) {
  for (const auto& [key, v] : j.items()) {
    if (key == "n_total") c.n_total = v.get<std::size_t>();
    else if (key == "missing_rate") c.missing_rate = v.get<double>();
    else if (key == "iv_strength") c.iv_strength = v.get<double>();
    else if (key == "beta_true") {
      if (v.is_number()) c.beta_true = {v.get<double>(), v.get<double>()};
      else c.beta_true = {v.at(0).get<double>(), v.at(1).get<double>()};
    } else if (key == "n_iv") c.n_iv = {v.at(0).get<std::size_t>(), v.at(1).get<std::size_t>(), v.at(2).get<std::size_t>()};
    else if (key == "maf_param") c.maf_param = v.get<double>();
    else if (key == "delta_true") c.delta_true = v.get<double>();
    else if (key == "sigma_true") c.sigma_true = v.get<double>();
    else if (key == "v_range") c.v_range = {v.at(0).get<double>(), v.at(1).get<double>()};
    else if (key == "seed") c.seed = v.get<std::uint64_t>();
    else unknown_key("sim config", key);
  }
  return c;
}

PriorSpec prior_spec_from_json(const json& j, PriorSpec p) {
  for (const auto& [key, v] : j.items()) {
    if (key == "beta_sd") p.beta_sd = v.get<double>();
    else if (key == "alpha_sd") p.alpha_sd = v.get<double>();
    else if (key == "delta_sd") p.delta_sd = v.get<double>();
    else if (key == "v_sd") p.v_sd = v.get<double>();
    else if (key == "ig_shape") p.ig_shape = v.get<double>();
    else if (key == "ig_rate") p.ig_rate = v.get<double>();
    else if (key == "ig_target") {
      const auto s = v.get<std::string>();
      if (s == "variance") p.ig_target = IgTarget::variance;
      else if (s == "sd") p.ig_target = IgTarget::sd;
      else throw ConfigError("priors: ig_target must be 'variance' or 'sd'");
    } else unknown_key("priors", key);
  }
  return p;
}

McmcConfig mcmc_config_from_json(const json& j, McmcConfig c) {
  for (const auto& [key, v] : j.items()) {
    if (key == "n_iter") c.n_iter = v.get<std::size_t>();
    else if (key == "burn_in") c.burn_in = v.get<std::size_t>();
    else if (key == "thin") c.thin = v.get<std::size_t>();
    else if (key == "seed") c.seed = v.get<std::uint64_t>();
    else if (key == "init") {
      const auto s = v.get<std::string>();
      if (s == "least_squares") c.init = InitMode::least_squares;
      else if (s == "prior_draw") c.init = InitMode::prior_draw;
      else throw ConfigError("mcmc: init must be 'least_squares' or 'prior_draw'");
    } else if (key == "impute") {
      const auto s = v.get<std::string>();
      if (s == "full_conditional") c.impute = ImputeMode::full_conditional;
      else if (s == "exposure_only") c.impute = ImputeMode::exposure_only;
      else throw ConfigError("mcmc: impute must be 'full_conditional' or 'exposure_only'");
    } else unknown_key("mcmc", key);
  }
  return c;
}

}  // namespace mrhet
