// projive: batch front end for the multi-block latent-variable model.
//
// Subcommands:
//   fit          estimate loadings/scores/noise for aligned block CSVs
//   simulate     generate synthetic datasets over a scenario grid
//   evaluate     score fitted runs against their generating truth
//   select-rank  permutation test and information-criterion grid
//
// Every subcommand takes --config FILE (JSON; schema in the README) plus a
// few overriding flags. Exit codes: 0 success, 1 error, 2 the fit stopped
// at max_iters without converging.

#include "projive/em.hpp"
#include "projive/io.hpp"
#include "projive/metrics.hpp"
#include "projive/preprocess.hpp"
#include "projive/rank_select.hpp"
#include "projive/rng.hpp"
#include "projive/simulate.hpp"
#include "projive/types.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace projive;

namespace {

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<double> tol;
  std::optional<int> max_iters;
  std::optional<std::string> ranks;
  std::optional<std::string> noise;
  std::optional<std::string> init;
  std::optional<std::string> out;
};

json load_config(const std::string& path) {
  if (!fs::exists(path)) throw std::runtime_error("config file not found: " + path);
  return io::read_json_file(path);
}

void apply_overrides(json& config, const Overrides& ov) {
  if (ov.seed) config["seed"] = *ov.seed;
  if (ov.tol) config["tol"] = *ov.tol;
  if (ov.max_iters) config["max_iters"] = *ov.max_iters;
  if (ov.noise) config["noise"] = *ov.noise;
  if (ov.init) config["init"] = *ov.init;
  if (ov.out) config["out"] = *ov.out;
  if (ov.ranks) {
    // rJ:rI1,rI2,...
    const std::string& text = *ov.ranks;
    const auto colon = text.find(':');
    if (colon == std::string::npos) {
      throw std::runtime_error("--ranks expects rJ:rI1,rI2,... (got '" + text + "')");
    }
    json ranks;
    ranks["r_j"] = std::stoi(text.substr(0, colon));
    json r_i = json::array();
    std::istringstream rest(text.substr(colon + 1));
    std::string piece;
    while (std::getline(rest, piece, ',')) r_i.push_back(std::stoi(piece));
    ranks["r_i"] = std::move(r_i);
    config["ranks"] = std::move(ranks);
  }
}

template <typename T>
T get_or(const json& config, const std::string& key, T fallback) {
  if (!config.contains(key)) return fallback;
  return config.at(key).get<T>();
}

std::string require_string(const json& config, const std::string& key) {
  if (!config.contains(key)) throw std::runtime_error("config is missing required key '" + key + "'");
  return config.at(key).get<std::string>();
}

NoiseKind noise_from(const std::string& name) {
  if (name == "isotropic") return NoiseKind::kIsotropic;
  if (name == "diagonal") return NoiseKind::kDiagonal;
  throw std::runtime_error("unknown noise model '" + name + "' (isotropic|diagonal)");
}

InitStrategy init_from(const std::string& name, std::uint64_t seed) {
  if (name == "cholesky") return InitStrategy::cholesky();
  if (name == "random") return InitStrategy::random_normal(seed);
  throw std::runtime_error("unknown init strategy '" + name + "' (cholesky|random)");
}

/// Hash of the config without its location-dependent keys, so the same
/// logical run relocated elsewhere keeps one identity.
std::string config_identity_hash(json config) {
  for (const char* key : {"out", "blocks", "data_dir", "covariates", "truth_root", "fit_root"}) {
    config.erase(key);
  }
  return io::json_content_hash(config);
}

BlockRanks ranks_from_json(const json& ranks) {
  return BlockRanks(ranks.at("r_j").get<int>(), ranks.at("r_i").get<std::vector<int>>());
}

std::string format_compact(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

// ---------------------------------------------------------------------------
// fit
// ---------------------------------------------------------------------------

struct LoadedData {
  MultiBlockData data;
  std::optional<BlockRanks> manifest_ranks;
};

LoadedData load_input_data(const json& config) {
  if (config.contains("blocks")) {
    const auto paths = config.at("blocks").get<std::vector<std::string>>();
    return LoadedData{io::read_blocks(paths), std::nullopt};
  }
  if (config.contains("data_dir")) {
    const std::string dir = config.at("data_dir").get<std::string>();
    const json manifest = io::read_json_file((fs::path(dir) / "manifest.json").string());
    const json& scenario = manifest.at("scenario");
    const int n_blocks = static_cast<int>(scenario.at("p").size());
    std::vector<std::string> paths;
    for (int k = 0; k < n_blocks; ++k) {
      paths.push_back((fs::path(dir) / ("block" + std::to_string(k + 1) + ".csv")).string());
    }
    return LoadedData{io::read_blocks(paths),
                      BlockRanks(scenario.at("r_j").get<int>(),
                                 scenario.at("r_i").get<std::vector<int>>())};
  }
  throw std::runtime_error("config needs either 'blocks' (list of CSV paths) or 'data_dir'");
}

MultiBlockData preprocess_per_config(MultiBlockData data, const json& config,
                                     const std::vector<std::string>& subject_ids) {
  if (config.contains("covariates")) {
    const Matrix covariates =
        io::read_covariates_csv(config.at("covariates").get<std::string>(), subject_ids);
    data = residualize(data, covariates);
  }
  const bool center = get_or(config, "center", false);
  const bool scale = get_or(config, "scale", false);
  if (center || scale) {
    if (!center) {
      throw std::runtime_error("config: 'scale' requires 'center' (scaling uncentered data is "
                               "not supported)");
    }
    data = center_and_scale(data, scale).first;
  }
  return data;
}

int cmd_fit(const json& config) {
  LoadedData loaded = load_input_data(config);
  const std::vector<std::string> subject_ids = loaded.data.subject_ids();
  const std::vector<std::vector<std::string>> feature_names = loaded.data.feature_names();
  MultiBlockData data = preprocess_per_config(std::move(loaded.data), config, subject_ids);

  BlockRanks ranks = config.contains("ranks")
                         ? ranks_from_json(config.at("ranks"))
                         : (loaded.manifest_ranks
                                ? *loaded.manifest_ranks
                                : throw std::runtime_error("config needs 'ranks' (none in "
                                                           "config and no data_dir manifest)"));

  io::FitRunInfo info;
  info.noise = get_or<std::string>(config, "noise", "isotropic");
  info.init = get_or<std::string>(config, "init", "cholesky");
  info.seed = get_or<std::uint64_t>(config, "seed", 0);
  info.tol = get_or(config, "tol", 1e-8);
  info.max_iters = get_or(config, "max_iters", 5000);
  info.config_hash = config_identity_hash(config);

  FitOptions options;
  options.tol = info.tol;
  options.max_iters = info.max_iters;

  const FitResult result =
      fit(data, ranks, init_from(info.init, info.seed), noise_from(info.noise), options);

  const std::string out = require_string(config, "out");
  io::write_fit_result(out, result, subject_ids, feature_names, info);
  std::cout << "fit: loglik=" << io::format_double(result.loglik)
            << " iterations=" << result.iterations << " converged=" << std::boolalpha
            << result.converged << " -> " << out << "\n";
  return result.converged ? 0 : 2;
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

// A grid axis: accepts either a scalar or an array in the config.
template <typename T>
std::vector<T> axis_values(const json& grid, const std::string& key, std::vector<T> fallback) {
  if (!grid.contains(key)) return fallback;
  const json& v = grid.at(key);
  if (v.is_array()) {
    auto out = v.get<std::vector<T>>();
    if (out.empty()) throw std::runtime_error("grid axis '" + key + "' is empty");
    return out;
  }
  return {v.get<T>()};
}

struct FactorialCell {
  Index n;
  Index p1, p2;
  int r_j, r_i1, r_i2;
  double r2_j1, r2_j2, r2_i1, r2_i2;
  std::string dist;

  std::string name() const {
    std::ostringstream os;
    os << "rj" << r_j << "_p2-" << p2 << "_j1-" << format_compact(r2_j1) << "_j2-"
       << format_compact(r2_j2) << "_" << dist << "_n" << n << "_p1-" << p1 << "_i1-"
       << format_compact(r2_i1) << "_i2-" << format_compact(r2_i2) << "_ri" << r_i1 << "-"
       << r_i2;
    return os.str();
  }

  SimScenario scenario(std::uint64_t seed) const {
    SimScenario sc;
    sc.n = n;
    sc.p = {p1, p2};
    sc.r_j = r_j;
    sc.r_i = {r_i1, r_i2};
    sc.target_r2_joint = {r2_j1, r2_j2};
    sc.target_r2_indiv = {r2_i1, r2_i2};
    if (dist == "mixture") {
      sc.score_dist = ScoreDist::kMixtureGaussian;
      sc.loading_dist = LoadingDist::kRademacher;
    } else if (dist != "gaussian") {
      throw std::runtime_error("unknown dist '" + dist + "' (gaussian|mixture)");
    }
    sc.seed = seed;
    return sc;
  }
};

struct FengCell {
  Index n, p1, p2;
  double noise_sd;

  std::string name() const {
    std::ostringstream os;
    os << "feng_n" << n << "_p1-" << p1 << "_p2-" << p2 << "_sd" << format_compact(noise_sd);
    return os.str();
  }
};

int cmd_simulate(const json& config) {
  const std::string design = get_or<std::string>(config, "design", "factorial");
  const int replicates = get_or(config, "replicates", 1);
  if (replicates < 1) throw std::runtime_error("config: replicates must be >= 1");
  const std::uint64_t run_seed = get_or<std::uint64_t>(config, "seed", 0);
  const std::string out = require_string(config, "out");
  const json grid = config.contains("grid") ? config.at("grid") : json::object();

  struct PlannedCell {
    std::string name;
    std::uint64_t seed;
    std::function<SimTruth(std::uint64_t)> make;
  };
  std::vector<PlannedCell> cells;

  if (design == "factorial") {
    for (Index n : axis_values<Index>(grid, "n", {1000}))
      for (Index p1 : axis_values<Index>(grid, "p1", {20}))
        for (Index p2 : axis_values<Index>(grid, "p2", {20, 200}))
          for (int r_j : axis_values<int>(grid, "r_j", {1, 3}))
            for (int r_i1 : axis_values<int>(grid, "r_i1", {2}))
              for (int r_i2 : axis_values<int>(grid, "r_i2", {2}))
                for (double r2_j1 : axis_values<double>(grid, "r2_j1", {0.1, 0.5}))
                  for (double r2_j2 : axis_values<double>(grid, "r2_j2", {0.1, 0.5}))
                    for (double r2_i1 : axis_values<double>(grid, "r2_i1", {0.25}))
                      for (double r2_i2 : axis_values<double>(grid, "r2_i2", {0.25}))
                        for (const std::string& dist :
                             axis_values<std::string>(grid, "dist", {"gaussian", "mixture"})) {
                          FactorialCell cell{n,     p1,    p2,    r_j,   r_i1, r_i2,
                                             r2_j1, r2_j2, r2_i1, r2_i2, dist};
                          const std::uint64_t cell_seed =
                              derive_seed(run_seed, fnv1a(cell.name()));
                          cells.push_back(PlannedCell{
                              cell.name(), cell_seed,
                              [cell](std::uint64_t s) { return generate(cell.scenario(s)); }});
                        }
  } else if (design == "feng") {
    for (Index n : axis_values<Index>(grid, "n", {100}))
      for (Index p1 : axis_values<Index>(grid, "p1", {100}))
        for (Index p2 : axis_values<Index>(grid, "p2", {1000}))
          for (double sd : axis_values<double>(grid, "noise_sd", {1.0})) {
            FengCell cell{n, p1, p2, sd};
            const std::uint64_t cell_seed = derive_seed(run_seed, fnv1a(cell.name()));
            cells.push_back(PlannedCell{
                cell.name(), cell_seed, [cell](std::uint64_t s) {
                  return generate_feng(cell.n, cell.p1, cell.p2, cell.noise_sd, s);
                }});
          }
  } else {
    throw std::runtime_error("unknown design '" + design + "' (factorial|feng)");
  }

  json cells_json = json::array();
  int failures = 0, total = 0;
  for (const PlannedCell& cell : cells) {
    json reps_json = json::array();
    for (int rep = 0; rep < replicates; ++rep) {
      const std::uint64_t rep_seed = derive_seed(cell.seed, static_cast<std::uint64_t>(rep));
      const std::string rel_dir = cell.name + "/rep" + std::to_string(rep);
      json entry{{"index", rep}, {"seed", rep_seed}, {"dir", rel_dir}};
      ++total;
      try {
        const SimTruth truth = cell.make(rep_seed);
        io::write_sim_truth((fs::path(out) / rel_dir).string(), truth,
                            json{{"cell", cell.name}, {"replicate", rep}});
        entry["status"] = "ok";
      } catch (const std::exception& err) {
        entry["status"] = "error";
        entry["error"] = err.what();
        ++failures;
        std::cerr << "simulate: " << rel_dir << " failed: " << err.what() << "\n";
      }
      reps_json.push_back(std::move(entry));
    }
    cells_json.push_back(json{{"name", cell.name}, {"seed", cell.seed},
                              {"replicates", std::move(reps_json)}});
  }

  json manifest{{"command", "simulate"},
                {"design", design},
                {"seed", run_seed},
                {"config_hash", config_identity_hash(config)},
                {"library_version", kLibraryVersion},
                {"cells", std::move(cells_json)}};
  io::write_json_file((fs::path(out) / "run_manifest.json").string(), manifest);
  std::cout << "simulate: " << (total - failures) << "/" << total << " datasets -> " << out
            << "\n";
  return (failures == total) ? 1 : 0;
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

bool is_truth_dir(const fs::path& dir) {
  const fs::path manifest = dir / "manifest.json";
  if (!fs::exists(manifest)) return false;
  try {
    return io::read_json_file(manifest.string()).contains("design");
  } catch (const std::exception&) {
    return false;
  }
}

std::vector<std::string> find_truth_dirs(const std::string& root) {
  std::vector<std::string> rel;
  if (is_truth_dir(root)) {
    rel.push_back(".");
    return rel;
  }
  for (auto it = fs::recursive_directory_iterator(root); it != fs::recursive_directory_iterator();
       ++it) {
    if (it->is_directory() && is_truth_dir(it->path())) {
      rel.push_back(fs::relative(it->path(), root).string());
    }
  }
  std::sort(rel.begin(), rel.end());
  return rel;
}

struct EvalRow {
  std::string cell;
  int replicate;
  Index n, p1, p2;
  int r_j;
  double r2_j1, r2_j2;
  std::string dist;
  std::string metric;
  double value;
};

int cmd_evaluate(const json& config) {
  const std::string truth_root = require_string(config, "truth_root");
  const std::string fit_root = require_string(config, "fit_root");
  const std::string out = require_string(config, "out");

  const std::vector<std::string> dirs = find_truth_dirs(truth_root);
  if (dirs.empty()) throw std::runtime_error("no generated datasets found under " + truth_root);

  std::vector<EvalRow> rows;
  json errors = json::array();
  int evaluated = 0;
  for (const std::string& rel : dirs) {
    const fs::path truth_dir = fs::path(truth_root) / rel;
    const fs::path fit_dir = fs::path(fit_root) / rel;
    const json manifest = io::read_json_file((truth_dir / "manifest.json").string());
    const std::string cell = get_or<std::string>(manifest, "cell", rel);
    const int replicate = get_or(manifest, "replicate", 0);
    try {
      if (!fs::exists(fit_dir / "summary.json")) {
        throw std::runtime_error("no fit output at " + fit_dir.string());
      }
      const SimTruth truth = io::read_sim_truth(truth_dir.string());
      const FitResult result = io::read_fit_result(fit_dir.string());
      const RecoveryReport report = score_recovery(result, truth);

      const SimScenario& sc = truth.scenario;
      const std::string dist = truth.design == "feng"
                                   ? "feng"
                                   : (sc.score_dist == ScoreDist::kMixtureGaussian ? "mixture"
                                                                                   : "gaussian");
      EvalRow base{cell,
                   replicate,
                   sc.n,
                   sc.p.at(0),
                   sc.p.size() > 1 ? sc.p.at(1) : 0,
                   sc.r_j,
                   sc.target_r2_joint.at(0),
                   sc.target_r2_joint.size() > 1 ? sc.target_r2_joint.at(1) : 0.0,
                   dist,
                   "",
                   0.0};
      auto add = [&](const std::string& metric, double value) {
        if (std::isnan(value)) return;
        EvalRow row = base;
        row.metric = metric;
        row.value = value;
        rows.push_back(std::move(row));
      };
      add("joint_score_dist", report.joint_score_dist);
      for (std::size_t k = 0; k < report.joint_load_dist.size(); ++k) {
        const std::string b = "_b" + std::to_string(k + 1);
        add("joint_load_dist" + b, report.joint_load_dist[k]);
        add("indiv_score_dist" + b, report.indiv_score_dist[k]);
        add("indiv_load_dist" + b, report.indiv_load_dist[k]);
      }
      ++evaluated;
    } catch (const std::exception& err) {
      errors.push_back(json{{"cell", cell}, {"replicate", replicate}, {"dir", rel},
                            {"error", err.what()}});
      std::cerr << "evaluate: " << rel << ": " << err.what() << "\n";
    }
  }

  fs::create_directories(out);
  {
    std::ostringstream csv;
    csv << "cell,replicate,method,n,p1,p2,r_j,r2_j1,r2_j2,dist,metric,value\n";
    for (const EvalRow& r : rows) {
      csv << r.cell << ',' << r.replicate << ",projive," << r.n << ',' << r.p1 << ',' << r.p2
          << ',' << r.r_j << ',' << io::format_double(r.r2_j1) << ','
          << io::format_double(r.r2_j2) << ',' << r.dist << ',' << r.metric << ','
          << io::format_double(r.value) << '\n';
    }
    io::write_text_file((fs::path(out) / "replicates.csv").string(), csv.str());
  }
  {
    // Group means/SDs across replicates of one scenario and metric.
    std::map<std::string, std::pair<std::vector<double>, const EvalRow*>> groups;
    std::map<std::string, std::string> group_prefix;
    for (const EvalRow& r : rows) {
      std::ostringstream key;
      key << r.n << ',' << r.p1 << ',' << r.p2 << ',' << r.r_j << ','
          << io::format_double(r.r2_j1) << ',' << io::format_double(r.r2_j2) << ',' << r.dist
          << ',' << r.metric;
      groups[key.str()].first.push_back(r.value);
      group_prefix[key.str()] = key.str();
    }
    std::ostringstream csv;
    csv << "n,p1,p2,r_j,r2_j1,r2_j2,dist,metric,mean,sd,n_reps\n";
    for (const auto& [key, bundle] : groups) {
      const std::vector<double>& values = bundle.first;
      const double mean =
          std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
      double sd = 0.0;
      if (values.size() > 1) {
        double ss = 0.0;
        for (double v : values) ss += (v - mean) * (v - mean);
        sd = std::sqrt(ss / static_cast<double>(values.size() - 1));
      }
      csv << key << ',' << io::format_double(mean) << ',' << io::format_double(sd) << ','
          << values.size() << '\n';
    }
    io::write_text_file((fs::path(out) / "summary.csv").string(), csv.str());
  }
  json manifest{{"command", "evaluate"},
                {"config_hash", config_identity_hash(config)},
                {"library_version", kLibraryVersion},
                {"pairs_evaluated", evaluated},
                {"rows", rows.size()},
                {"errors", std::move(errors)}};
  io::write_json_file((fs::path(out) / "manifest.json").string(), manifest);
  std::cout << "evaluate: " << evaluated << "/" << dirs.size() << " runs, " << rows.size()
            << " metric rows -> " << out << "\n";
  return evaluated == 0 ? 1 : 0;
}

// ---------------------------------------------------------------------------
// select-rank
// ---------------------------------------------------------------------------

int cmd_select_rank(const json& config) {
  LoadedData loaded = load_input_data(config);
  const std::vector<std::string> subject_ids = loaded.data.subject_ids();
  MultiBlockData data = preprocess_per_config(std::move(loaded.data), config, subject_ids);
  const std::string out = require_string(config, "out");
  const std::uint64_t seed = get_or<std::uint64_t>(config, "seed", 0);
  fs::create_directories(out);

  bool ran_any = false;

  {
    const std::vector<Vector> spectra = eigen_spectrum(data);
    std::ostringstream csv;
    csv << "block,component,eigenvalue\n";
    for (std::size_t k = 0; k < spectra.size(); ++k) {
      for (Index i = 0; i < spectra[k].size(); ++i) {
        csv << (k + 1) << ',' << (i + 1) << ',' << io::format_double(spectra[k](i)) << '\n';
      }
    }
    io::write_text_file((fs::path(out) / "scree.csv").string(), csv.str());
  }

  if (config.contains("total_ranks")) {
    const auto ranks = config.at("total_ranks").get<std::vector<int>>();
    if (ranks.size() != 2) throw std::runtime_error("total_ranks must have two entries");
    const int n_perm = get_or(config, "n_perm", 199);
    const double alpha = get_or(config, "alpha", 0.05);
    const PermTestResult result =
        permutation_joint_rank(data, {ranks[0], ranks[1]}, n_perm, alpha, seed);

    json report{{"selected_r_j", result.selected_r_j},
                {"observed_stats", result.observed_stats},
                {"null_quantiles", result.null_quantiles},
                {"n_permutations", result.n_permutations},
                {"alpha", result.alpha},
                {"seed", result.seed}};
    io::write_json_file((fs::path(out) / "perm_test.json").string(), report);

    std::ostringstream csv;
    csv << "component,observed,null_quantile,accepted\n";
    for (std::size_t m = 0; m < result.observed_stats.size(); ++m) {
      csv << (m + 1) << ',' << io::format_double(result.observed_stats[m]) << ','
          << io::format_double(result.null_quantiles[m]) << ','
          << (static_cast<int>(m) < result.selected_r_j ? 1 : 0) << '\n';
    }
    io::write_text_file((fs::path(out) / "perm_test.csv").string(), csv.str());
    std::cout << "select-rank: permutation test selected r_j = " << result.selected_r_j << "\n";
    ran_any = true;
  }

  if (config.contains("candidates")) {
    std::vector<BlockRanks> candidates;
    for (const json& c : config.at("candidates")) candidates.push_back(ranks_from_json(c));
    IcGridOptions options;
    options.noise = noise_from(get_or<std::string>(config, "noise", "isotropic"));
    const std::string init_name = get_or<std::string>(config, "init", "cholesky");
    if (init_name == "random") {
      options.init = InitStrategy::Kind::kRandomNormal;
    } else if (init_name != "cholesky") {
      throw std::runtime_error("unknown init strategy '" + init_name + "' (cholesky|random)");
    }
    options.fit.tol = get_or(config, "tol", 1e-8);
    options.fit.max_iters = get_or(config, "max_iters", 5000);
    options.seed = seed;
    const IcGrid grid = ic_grid(data, candidates, options);

    json entries = json::array();
    std::ostringstream csv;
    csv << "r_j,r_i,loglik,aic,bic,converged,error\n";
    for (const IcEntry& e : grid.entries) {
      std::ostringstream ri;
      for (int k = 0; k < e.ranks.n_blocks(); ++k) {
        if (k > 0) ri << ';';
        ri << e.ranks.indiv(k);
      }
      entries.push_back(json{{"r_j", e.ranks.joint()},
                             {"r_i", e.ranks.indiv()},
                             {"loglik", e.loglik},
                             {"aic", e.aic},
                             {"bic", e.bic},
                             {"converged", e.converged},
                             {"error", e.error}});
      csv << e.ranks.joint() << ',' << ri.str() << ',' << io::format_double(e.loglik) << ','
          << io::format_double(e.aic) << ',' << io::format_double(e.bic) << ','
          << (e.converged ? 1 : 0) << ',' << e.error << '\n';
    }
    io::write_json_file((fs::path(out) / "ic_grid.json").string(), json{{"entries", entries}});
    io::write_text_file((fs::path(out) / "ic_grid.csv").string(), csv.str());
    std::cout << "select-rank: information-criterion grid over " << grid.entries.size()
              << " candidates -> " << out << "\n";
    ran_any = true;
  }

  if (!ran_any) {
    throw std::runtime_error("config needs 'total_ranks' (permutation test) and/or 'candidates' "
                             "(information-criterion grid)");
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-block latent-variable model: fit, simulate, evaluate, select ranks"};
  app.require_subcommand(1);

  Overrides ov;
  std::string config_path;

  auto add_common = [&](CLI::App* sub, bool with_fit_flags) {
    sub->add_option("--config", config_path, "JSON config file")->required();
    sub->add_option("--seed", ov.seed, "override the config seed");
    sub->add_option("--out", ov.out, "override the output directory");
    if (with_fit_flags) {
      sub->add_option("--tol", ov.tol, "relative log-likelihood tolerance");
      sub->add_option("--max-iters", ov.max_iters, "maximum update sweeps");
      sub->add_option("--ranks", ov.ranks, "ranks as rJ:rI1,rI2,...");
      sub->add_option("--noise", ov.noise, "noise model: isotropic|diagonal");
      sub->add_option("--init", ov.init, "start: cholesky|random");
    }
  };

  CLI::App* fit_cmd = app.add_subcommand("fit", "fit the model to aligned block CSVs");
  add_common(fit_cmd, true);
  CLI::App* sim_cmd = app.add_subcommand("simulate", "generate synthetic datasets");
  add_common(sim_cmd, false);
  CLI::App* eval_cmd = app.add_subcommand("evaluate", "score fits against generating truth");
  add_common(eval_cmd, false);
  CLI::App* rank_cmd = app.add_subcommand("select-rank", "permutation test / criterion grid");
  add_common(rank_cmd, true);

  CLI11_PARSE(app, argc, argv);

  try {
    json config = load_config(config_path);
    apply_overrides(config, ov);
    if (app.got_subcommand(fit_cmd)) return cmd_fit(config);
    if (app.got_subcommand(sim_cmd)) return cmd_simulate(config);
    if (app.got_subcommand(eval_cmd)) return cmd_evaluate(config);
    if (app.got_subcommand(rank_cmd)) return cmd_select_rank(config);
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  }
  return 1;
}
