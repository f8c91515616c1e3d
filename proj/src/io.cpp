#include "rpot/io.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>

#include "json.hpp"

namespace rpot {

namespace {

using nlohmann::json;

// Shortest decimal form that parses back to the same double.
std::string num(double x) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out)
    throw std::runtime_error("cannot open " + path.string() + " for writing");
  return out;
}

void finish(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string quoted = "\"";
  for (char c : s) {
    if (c == '"') quoted += '"';
    quoted += c;
  }
  quoted += '"';
  return quoted;
}

[[noreturn]] void line_fail(const std::filesystem::path& path,
                            std::size_t line, const std::string& msg) {
  throw std::runtime_error(path.string() + ":" + std::to_string(line) + ": " +
                           msg);
}

std::vector<std::string> split_csv(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::vector<std::string> fields;
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = line.find(',', start);
    if (pos == std::string::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return fields;
}

double parse_number(const std::string& s, const std::filesystem::path& path,
                    std::size_t line, const char* what) {
  const char* begin = s.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  if (end == begin || *end != '\0' || !std::isfinite(v))
    line_fail(path, line,
              std::string("bad ") + what + " value '" + s + "'");
  return v;
}

void write_json_file(const std::filesystem::path& path, const json& j) {
  auto out = open_out(path);
  out << j.dump(2) << '\n';
  finish(out, path);
}

json region_to_json(const RegionConfig& cfg) {
  return json{{"regional_params",
               {{"mu", cfg.regional_params.mu},
                {"sigma", cfg.regional_params.sigma},
                {"xi", cfg.regional_params.xi}}},
              {"n_sites", cfg.n_sites},
              {"site_sizes", cfg.site_sizes},
              {"target_size", cfg.target_size},
              {"epsilon", cfg.epsilon},
              {"alpha", cfg.alpha},
              {"beta", cfg.beta},
              {"area_log_mean", cfg.area_log_mean},
              {"area_log_sd", cfg.area_log_sd},
              {"area_noise", cfg.area_noise}};
}

json study_to_json(const StudyConfig& cfg) {
  json est = json::array();
  for (EstimatorKind e : cfg.estimators) est.push_back(to_string(e));
  return json{{"name", cfg.name},
              {"region", region_to_json(cfg.region)},
              {"n_regions", cfg.n_regions},
              {"estimators", est},
              {"probs", cfg.probs},
              {"chain",
               {{"n_iter", cfg.chain.n_iter},
                {"burn_in", cfg.chain.burn_in},
                {"jump_prob", cfg.chain.jump_prob},
                {"pilot_sweeps", cfg.chain.pilot_sweeps},
                {"h1_nsim", cfg.chain.h1_nsim}}},
              {"seed", cfg.seed}};
}

json exclusions_to_json(std::span<const ExclusionTally> tallies) {
  json arr = json::array();
  for (const ExclusionTally& t : tallies)
    arr.push_back(json{{"estimator", to_string(t.estimator)},
                       {"attempted", t.attempted},
                       {"excluded", t.excluded}});
  return arr;
}

json manifest_base(const char* command) {
  return json{{"command", command},
              {"version", kVersion},
              {"compiler", __VERSION__}};
}

// --- JSON config parsing ------------------------------------------------
// `where` strings are JSON pointers ("/region/epsilon") so errors locate the
// offending member exactly.

[[noreturn]] void config_fail(const std::string& where,
                              const std::string& msg) {
  throw std::runtime_error("config error at " +
                           (where.empty() ? std::string("/") : where) + ": " +
                           msg);
}

void require_object(const json& j, const std::string& where) {
  if (!j.is_object()) config_fail(where, "expected an object");
}

void check_keys(const json& obj, const std::string& where,
                std::initializer_list<const char*> allowed) {
  for (const auto& item : obj.items()) {
    const bool known =
        std::any_of(allowed.begin(), allowed.end(),
                    [&](const char* k) { return item.key() == k; });
    if (!known) config_fail(where + "/" + item.key(), "unknown member");
  }
}

double get_number(const json& obj, const std::string& where, const char* key,
                  std::optional<double> fallback) {
  const auto it = obj.find(key);
  if (it == obj.end()) {
    if (fallback) return *fallback;
    config_fail(where + "/" + key, "missing");
  }
  if (!it->is_number()) config_fail(where + "/" + key, "expected a number");
  return it->get<double>();
}

std::uint64_t get_uint(const json& obj, const std::string& where,
                       const char* key, std::optional<std::uint64_t> fallback) {
  const auto it = obj.find(key);
  if (it == obj.end()) {
    if (fallback) return *fallback;
    config_fail(where + "/" + key, "missing");
  }
  if (!it->is_number_integer() && !it->is_number_unsigned())
    config_fail(where + "/" + key, "expected an integer");
  if (it->is_number_integer() && it->get<std::int64_t>() < 0)
    config_fail(where + "/" + key, "must be nonnegative");
  return it->get<std::uint64_t>();
}

std::string get_string(const json& obj, const std::string& where,
                       const char* key, std::optional<std::string> fallback) {
  const auto it = obj.find(key);
  if (it == obj.end()) {
    if (fallback) return *fallback;
    config_fail(where + "/" + key, "missing");
  }
  if (!it->is_string()) config_fail(where + "/" + key, "expected a string");
  return it->get<std::string>();
}

std::vector<double> get_number_array(const json& obj, const std::string& where,
                                     const char* key) {
  const auto it = obj.find(key);
  if (it == obj.end()) config_fail(where + "/" + key, "missing");
  if (!it->is_array()) config_fail(where + "/" + key, "expected an array");
  std::vector<double> out;
  out.reserve(it->size());
  for (std::size_t i = 0; i < it->size(); ++i) {
    const json& e = (*it)[i];
    if (!e.is_number())
      config_fail(where + "/" + key + "/" + std::to_string(i),
                  "expected a number");
    out.push_back(e.get<double>());
  }
  return out;
}

RegionConfig region_from_json(const json& j, const std::string& where) {
  require_object(j, where);
  check_keys(j, where,
             {"regional_params", "n_sites", "site_sizes", "target_size",
              "epsilon", "alpha", "beta", "area_log_mean", "area_log_sd",
              "area_noise"});
  RegionConfig cfg;

  if (const auto it = j.find("regional_params"); it != j.end()) {
    const std::string rp_where = where + "/regional_params";
    require_object(*it, rp_where);
    check_keys(*it, rp_where, {"mu", "sigma", "xi"});
    cfg.regional_params.mu = get_number(*it, rp_where, "mu", std::nullopt);
    cfg.regional_params.sigma =
        get_number(*it, rp_where, "sigma", std::nullopt);
    cfg.regional_params.xi = get_number(*it, rp_where, "xi", std::nullopt);
  }

  cfg.n_sites = get_uint(j, where, "n_sites", cfg.n_sites);

  const auto sizes = j.find("site_sizes");
  if (sizes == j.end()) config_fail(where + "/site_sizes", "missing");
  if (sizes->is_array()) {
    cfg.site_sizes.clear();
    for (std::size_t i = 0; i < sizes->size(); ++i) {
      const json& e = (*sizes)[i];
      if (!e.is_number_integer() && !e.is_number_unsigned())
        config_fail(where + "/site_sizes/" + std::to_string(i),
                    "expected an integer");
      if (e.is_number_integer() && e.get<std::int64_t>() < 0)
        config_fail(where + "/site_sizes/" + std::to_string(i),
                    "must be nonnegative");
      cfg.site_sizes.push_back(e.get<std::uint64_t>());
    }
  } else if (sizes->is_number_integer() || sizes->is_number_unsigned()) {
    cfg.site_sizes.assign(cfg.n_sites, sizes->get<std::uint64_t>());
  } else {
    config_fail(where + "/site_sizes", "expected an array or an integer");
  }

  cfg.target_size = get_uint(j, where, "target_size", cfg.target_size);
  cfg.epsilon = get_number(j, where, "epsilon", cfg.epsilon);
  cfg.alpha = get_number(j, where, "alpha", cfg.alpha);
  cfg.beta = get_number(j, where, "beta", cfg.beta);
  cfg.area_log_mean = get_number(j, where, "area_log_mean", cfg.area_log_mean);
  cfg.area_log_sd = get_number(j, where, "area_log_sd", cfg.area_log_sd);
  cfg.area_noise = get_number(j, where, "area_noise", cfg.area_noise);
  return cfg;
}

json parse_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& ex) {
    throw std::runtime_error(path.string() + ": " + ex.what());
  }
}

}  // namespace

std::vector<SiteRecord> load_sites_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());

  std::string line;
  if (!std::getline(in, line))
    throw std::runtime_error(path.string() + ": empty file");
  const auto header = split_csv(line);
  const std::array<const char*, 3> wanted{"site_id", "area_km2", "value"};
  std::array<std::size_t, 3> col{};
  for (std::size_t w = 0; w < wanted.size(); ++w) {
    const auto it = std::find(header.begin(), header.end(), wanted[w]);
    if (it == header.end())
      line_fail(path, 1, std::string("missing column '") + wanted[w] + "'");
    col[w] = static_cast<std::size_t>(it - header.begin());
  }
  if (header.size() != wanted.size())
    line_fail(path, 1, "expected exactly the columns site_id,area_km2,value");

  std::vector<SiteRecord> sites;
  std::map<std::string, std::size_t> index;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto fields = split_csv(line);
    if (fields.size() != wanted.size())
      line_fail(path, line_no,
                "expected 3 fields, got " + std::to_string(fields.size()));
    const std::string& id = fields[col[0]];
    if (id.empty()) line_fail(path, line_no, "empty site_id");
    const double area = parse_number(fields[col[1]], path, line_no, "area_km2");
    if (!(area > 0.0)) line_fail(path, line_no, "area_km2 must be positive");
    const double value = parse_number(fields[col[2]], path, line_no, "value");

    const auto [it, inserted] = index.try_emplace(id, sites.size());
    if (inserted) {
      SiteRecord rec;
      rec.id = id;
      rec.area = area;
      sites.push_back(std::move(rec));
    } else if (sites[it->second].area != area) {
      line_fail(path, line_no,
                "site '" + id + "' area differs from its earlier rows");
    }
    sites[it->second].exceedances.push_back(value);
  }
  if (sites.empty()) throw std::runtime_error(path.string() + ": no data rows");
  return sites;
}

void save_sites_csv(const std::filesystem::path& path,
                    std::span<const SiteRecord> sites) {
  auto out = open_out(path);
  out << "site_id,area_km2,value\n";
  for (const SiteRecord& site : sites)
    for (double v : site.exceedances)
      out << csv_field(site.id) << ',' << num(site.area) << ',' << num(v)
          << '\n';
  finish(out, path);
}

void write_trace_csv(const std::filesystem::path& path,
                     const ChainTrace& trace) {
  auto out = open_out(path);
  out << "iter,mu,sigma,xi,in_mass,log_post\n";
  for (std::size_t i = 0; i < trace.states.size(); ++i) {
    const ChainState& s = trace.states[i];
    out << i << ',' << num(s.theta.mu) << ',' << num(s.theta.sigma) << ','
        << num(s.theta.xi) << ',' << (s.in_point_mass ? 1 : 0) << ','
        << num(s.log_post) << '\n';
  }
  finish(out, path);
}

void write_estimates_csv(const std::filesystem::path& path,
                         std::span<const QuantileEstimate> estimates) {
  auto out = open_out(path);
  out << "estimator,p,point,lo,hi\n";
  for (const QuantileEstimate& est : estimates) {
    out << to_string(est.estimator) << ',' << num(est.p) << ','
        << num(est.point) << ',';
    if (est.ci90)
      out << num(est.ci90->first) << ',' << num(est.ci90->second);
    else
      out << ',';
    out << '\n';
  }
  finish(out, path);
}

void write_study_csv(const std::filesystem::path& path,
                     const std::string& config_name,
                     const StudyResult& result) {
  auto out = open_out(path);
  out << "config,estimator,prob,nbias,sd,nmse,stderr\n";
  for (const StudyRow& row : result.rows)
    out << csv_field(config_name) << ',' << to_string(row.estimator) << ','
        << num(row.prob) << ',' << num(row.stats.nbias) << ','
        << num(row.stats.sd) << ',' << num(row.stats.nmse) << ','
        << num(row.nmse_stderr) << '\n';
  finish(out, path);
}

void write_sensitivity_csv(const std::filesystem::path& path,
                           const std::string& config_name,
                           const SensitivityResult& result) {
  auto out = open_out(path);
  out << "config,xi_fix,p_xi,r_shape,d_shape,mass_fraction,median_nbias,"
         "mean_ci_width,nbias,sd,nmse,k\n";
  for (const SensitivityCell& cell : result.cells)
    out << csv_field(config_name) << ',' << num(cell.xi_fix) << ','
        << num(cell.p_xi) << ',' << num(cell.r_shape) << ','
        << num(cell.d_shape) << ',' << num(cell.mass_fraction) << ','
        << num(cell.median_nbias) << ',' << num(cell.mean_ci_width) << ','
        << num(cell.stats.nbias) << ',' << num(cell.stats.sd) << ','
        << num(cell.stats.nmse) << ',' << cell.stats.k << '\n';
  finish(out, path);
}

void write_bias_c_csv(const std::filesystem::path& path,
                      const std::string& config_name,
                      const BiasCResult& result) {
  auto out = open_out(path);
  out << "config,estimator,bias_c,nbias_q\n";
  for (const BiasCSeries& series : result.series)
    for (const BiasCPoint& point : series.points)
      out << csv_field(config_name) << ',' << to_string(series.estimator)
          << ',' << num(point.bias_c) << ',' << num(point.nbias_q) << '\n';
  finish(out, path);
}

void write_truth_json(const std::filesystem::path& path,
                      const SyntheticRegion& region) {
  json sites = json::array();
  for (const SiteTruth& t : region.truths)
    sites.push_back(json{{"id", t.id},
                         {"mu", t.params.mu},
                         {"sigma", t.params.sigma},
                         {"xi", t.params.xi},
                         {"c", t.c},
                         {"area", t.area},
                         {"l1", t.lmom_point[0]},
                         {"tau", t.lmom_point[1]},
                         {"tau3", t.lmom_point[2]}});
  const json j{{"center",
                {{"l1", region.center.l1},
                 {"tau", region.center.tau},
                 {"tau3", region.center.tau3},
                 {"tau4", region.center.tau4}}},
               {"sites", sites}};
  write_json_file(path, j);
}

void write_study_manifest(const std::filesystem::path& path,
                          const StudyConfig& cfg, const StudyResult& result) {
  json j = manifest_base("study");
  j["kind"] = to_string(StudyKind::performance);
  j["config"] = study_to_json(cfg);
  j["seed"] = result.seed;
  j["wall_seconds"] = result.wall_seconds;
  j["exclusions"] = exclusions_to_json(result.exclusions);
  j["notes"] = result.notes;
  write_json_file(path, j);
}

void write_sensitivity_manifest(const std::filesystem::path& path,
                                const StudyConfig& cfg,
                                const SensitivityResult& result,
                                const std::string& kind) {
  json j = manifest_base("study");
  j["kind"] = kind;
  j["config"] = study_to_json(cfg);
  j["seed"] = result.seed;
  j["wall_seconds"] = result.wall_seconds;
  j["probe_prob"] = result.probe_prob;
  j["attempted"] = result.attempted;
  j["excluded"] = result.excluded;
  j["notes"] = result.notes;
  write_json_file(path, j);
}

void write_bias_manifest(const std::filesystem::path& path,
                         const StudyConfig& cfg, const BiasCResult& result) {
  json fits = json::array();
  for (const BiasCSeries& s : result.series)
    fits.push_back(json{{"estimator", to_string(s.estimator)},
                        {"slope", s.slope},
                        {"intercept", s.intercept},
                        {"points", s.points.size()}});
  json j = manifest_base("study");
  j["kind"] = to_string(StudyKind::bias_c);
  j["config"] = study_to_json(cfg);
  j["seed"] = result.seed;
  j["wall_seconds"] = result.wall_seconds;
  j["probe_prob"] = result.probe_prob;
  j["fits"] = fits;
  j["attempted"] = result.attempted;
  j["excluded"] = result.excluded;
  j["notes"] = result.notes;
  write_json_file(path, j);
}

void write_generate_manifest(const std::filesystem::path& path,
                             const RegionConfig& cfg, std::uint64_t seed,
                             double wall_seconds) {
  json j = manifest_base("generate");
  j["config"] = region_to_json(cfg);
  j["seed"] = seed;
  j["wall_seconds"] = wall_seconds;
  write_json_file(path, j);
}

std::string to_string(StudyKind kind) {
  switch (kind) {
    case StudyKind::performance:
      return "performance";
    case StudyKind::pxi:
      return "pxi";
    case StudyKind::xifix:
      return "xifix";
    case StudyKind::bias_c:
      return "bias_c";
  }
  throw std::logic_error("unknown study kind");
}

RegionConfig region_config_from_json_file(const std::filesystem::path& path) {
  return region_from_json(parse_json_file(path), "");
}

StudyPlan study_plan_from_json_file(const std::filesystem::path& path) {
  const json root = parse_json_file(path);
  require_object(root, "");
  check_keys(root, "",
             {"kind", "name", "region", "n_regions", "estimators", "probs",
              "chain", "seed", "p_grid", "xifix_grid", "probe_prob"});

  StudyPlan plan;
  const std::string kind = get_string(root, "", "kind", "performance");
  if (kind == "performance")
    plan.kind = StudyKind::performance;
  else if (kind == "pxi")
    plan.kind = StudyKind::pxi;
  else if (kind == "xifix")
    plan.kind = StudyKind::xifix;
  else if (kind == "bias_c")
    plan.kind = StudyKind::bias_c;
  else
    config_fail("/kind",
                "expected one of performance, pxi, xifix, bias_c");

  StudyConfig& cfg = plan.config;
  cfg.name = get_string(root, "", "name", cfg.name);

  const auto region_it = root.find("region");
  if (region_it == root.end()) config_fail("/region", "missing");
  cfg.region = region_from_json(*region_it, "/region");

  cfg.n_regions = get_uint(root, "", "n_regions", cfg.n_regions);

  if (const auto it = root.find("estimators"); it != root.end()) {
    if (!it->is_array()) config_fail("/estimators", "expected an array");
    cfg.estimators.clear();
    for (std::size_t i = 0; i < it->size(); ++i) {
      const json& e = (*it)[i];
      const std::string where = "/estimators/" + std::to_string(i);
      if (!e.is_string()) config_fail(where, "expected a string");
      try {
        cfg.estimators.push_back(estimator_from_string(e.get<std::string>()));
      } catch (const std::exception& ex) {
        config_fail(where, ex.what());
      }
    }
  }

  if (root.contains("probs")) cfg.probs = get_number_array(root, "", "probs");

  if (const auto it = root.find("chain"); it != root.end()) {
    require_object(*it, "/chain");
    check_keys(*it, "/chain",
               {"n_iter", "burn_in", "jump_prob", "pilot_sweeps", "h1_nsim"});
    cfg.chain.n_iter = get_uint(*it, "/chain", "n_iter", cfg.chain.n_iter);
    cfg.chain.burn_in = get_uint(*it, "/chain", "burn_in", cfg.chain.burn_in);
    cfg.chain.jump_prob =
        get_number(*it, "/chain", "jump_prob", cfg.chain.jump_prob);
    cfg.chain.pilot_sweeps =
        get_uint(*it, "/chain", "pilot_sweeps", cfg.chain.pilot_sweeps);
    cfg.chain.h1_nsim = get_uint(*it, "/chain", "h1_nsim", cfg.chain.h1_nsim);
  }

  cfg.seed = get_uint(root, "", "seed", cfg.seed);

  if (plan.kind == StudyKind::pxi || plan.kind == StudyKind::xifix)
    plan.p_grid = get_number_array(root, "", "p_grid");
  if (plan.kind == StudyKind::xifix)
    plan.xifix_grid = get_number_array(root, "", "xifix_grid");

  const double default_probe = plan.kind == StudyKind::pxi ? 0.75 : 0.95;
  plan.probe_prob = get_number(root, "", "probe_prob", default_probe);

  return plan;
}

}  // namespace rpot
