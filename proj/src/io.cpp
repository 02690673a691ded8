#include "projive/io.hpp"

#include "projive/rng.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <unordered_map>
#include <utility>

namespace fs = std::filesystem;
using nlohmann::json;

namespace projive::io {

namespace {

std::vector<std::string> default_labels(const char* prefix, Index count) {
  std::vector<std::string> labels;
  labels.reserve(static_cast<std::size_t>(count));
  for (Index i = 0; i < count; ++i) labels.push_back(prefix + std::to_string(i + 1));
  return labels;
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream stream(line);
  while (std::getline(stream, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

double parse_double(const std::string& text, const std::string& path) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(text, &pos);
    if (pos != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error(path + ": cannot parse '" + text + "' as a number");
  }
}

// Matrix laid out rows x cols as it should appear on disk.
CsvTable make_table(std::string label_header, std::vector<std::string> row_labels,
                    std::vector<std::string> columns, Matrix values) {
  return CsvTable{std::move(label_header), std::move(row_labels), std::move(columns),
                  std::move(values)};
}

std::string block_file(int k) { return "block" + std::to_string(k + 1) + ".csv"; }

json block_r2_json(const std::vector<BlockR2>& r2) {
  json arr = json::array();
  for (const BlockR2& b : r2) arr.push_back({{"joint", b.joint}, {"indiv", b.indiv}});
  return arr;
}

std::vector<BlockR2> block_r2_from_json(const json& arr) {
  std::vector<BlockR2> out;
  for (const json& b : arr) out.push_back(BlockR2{b.at("joint"), b.at("indiv")});
  return out;
}

std::string score_dist_name(ScoreDist dist) {
  return dist == ScoreDist::kGaussian ? "gaussian" : "mixture";
}

ScoreDist score_dist_from(const std::string& name) {
  if (name == "gaussian") return ScoreDist::kGaussian;
  if (name == "mixture") return ScoreDist::kMixtureGaussian;
  throw std::runtime_error("unknown score distribution '" + name + "'");
}

std::string loading_dist_name(LoadingDist dist) {
  return dist == LoadingDist::kGaussian ? "gaussian" : "rademacher";
}

LoadingDist loading_dist_from(const std::string& name) {
  if (name == "gaussian") return LoadingDist::kGaussian;
  if (name == "rademacher") return LoadingDist::kRademacher;
  throw std::runtime_error("unknown loading distribution '" + name + "'");
}

json vector_json(const Vector& v) {
  json arr = json::array();
  for (Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
  return arr;
}

Vector vector_from_json(const json& arr) {
  Vector v(static_cast<Index>(arr.size()));
  Index i = 0;
  for (const json& x : arr) v(i++) = x.get<double>();
  return v;
}

// Scores/loadings tables: plain numeric matrices with generated labels.
void write_scores_csv(const std::string& path, const Matrix& scores,
                      const std::vector<std::string>& subject_ids, const char* col_prefix) {
  write_table(path, make_table("subject_id",
                               subject_ids.empty() ? default_labels("s", scores.rows())
                                                   : subject_ids,
                               default_labels(col_prefix, scores.cols()), scores));
}

void write_loadings_csv(const std::string& path, const Matrix& loadings,
                        const std::vector<std::string>& feature_names, const char* col_prefix) {
  write_table(path, make_table("feature",
                               feature_names.empty() ? default_labels("f", loadings.rows())
                                                     : feature_names,
                               default_labels(col_prefix, loadings.cols()), loadings));
}

}  // namespace

std::string format_double(double value) {
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%.17g", value);
  return buffer;
}

void write_text_file(const std::string& path, const std::string& content) {
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    out << content;
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  fs::rename(tmp, target);
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream content;
  content << in.rdbuf();
  return content.str();
}

void write_json_file(const std::string& path, const json& value) {
  write_text_file(path, value.dump(2) + "\n");
}

json read_json_file(const std::string& path) {
  try {
    return json::parse(read_text_file(path));
  } catch (const json::parse_error& err) {
    throw std::runtime_error(path + ": " + err.what());
  }
}

std::string json_content_hash(const json& value) {
  std::uint64_t h = fnv1a(value.dump());
  char buffer[32];
  std::snprintf(buffer, sizeof(buffer), "%016llx", static_cast<unsigned long long>(h));
  return buffer;
}

void write_table(const std::string& path, const CsvTable& table) {
  if (static_cast<Index>(table.row_labels.size()) != table.values.rows() ||
      static_cast<Index>(table.columns.size()) != table.values.cols()) {
    throw std::invalid_argument("write_table: label counts disagree with the value shape");
  }
  std::ostringstream out;
  out << table.label_header;
  for (const std::string& c : table.columns) out << ',' << c;
  out << '\n';
  for (Index i = 0; i < table.values.rows(); ++i) {
    out << table.row_labels[static_cast<std::size_t>(i)];
    for (Index j = 0; j < table.values.cols(); ++j) {
      out << ',' << format_double(table.values(i, j));
    }
    out << '\n';
  }
  write_text_file(path, out.str());
}

CsvTable read_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::vector<std::string> header = split_line(line);
  if (header.empty()) throw std::runtime_error(path + ": empty header");

  CsvTable table;
  table.label_header = header.front();
  table.columns.assign(header.begin() + 1, header.end());

  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields = split_line(line);
    if (fields.size() != header.size()) {
      throw std::runtime_error(path + ": row " + std::to_string(rows.size() + 1) + " has " +
                               std::to_string(fields.size()) + " fields, header has " +
                               std::to_string(header.size()));
    }
    table.row_labels.push_back(fields.front());
    std::vector<double> row;
    row.reserve(fields.size() - 1);
    for (std::size_t j = 1; j < fields.size(); ++j) row.push_back(parse_double(fields[j], path));
    rows.push_back(std::move(row));
  }
  table.values.resize(static_cast<Index>(rows.size()), static_cast<Index>(table.columns.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows[i].size(); ++j) {
      table.values(static_cast<Index>(i), static_cast<Index>(j)) = rows[i][j];
    }
  }
  return table;
}

void write_block_csv(const std::string& path, const Matrix& block,
                     const std::vector<std::string>& subject_ids,
                     const std::vector<std::string>& feature_names) {
  write_table(path, make_table("subject_id",
                               subject_ids.empty() ? default_labels("s", block.cols())
                                                   : subject_ids,
                               feature_names.empty() ? default_labels("f", block.rows())
                                                     : feature_names,
                               block.transpose()));
}

MultiBlockData read_blocks(const std::vector<std::string>& paths) {
  if (paths.size() < 2) throw std::invalid_argument("read_blocks: need at least two block files");
  std::vector<CsvTable> tables;
  for (const std::string& path : paths) {
    if (!fs::exists(path)) throw std::runtime_error("block file not found: " + path);
    tables.push_back(read_table(path));
  }

  const std::vector<std::string>& order = tables.front().row_labels;
  std::vector<Matrix> blocks;
  std::vector<std::vector<std::string>> feature_names;
  for (std::size_t t = 0; t < tables.size(); ++t) {
    const CsvTable& table = tables[t];
    std::unordered_map<std::string, Index> row_of;
    for (std::size_t i = 0; i < table.row_labels.size(); ++i) {
      if (!row_of.emplace(table.row_labels[i], static_cast<Index>(i)).second) {
        throw std::runtime_error(paths[t] + ": duplicate subject id '" + table.row_labels[i] +
                                 "'");
      }
    }
    if (table.row_labels.size() != order.size()) {
      throw std::runtime_error(paths[t] + ": subject count differs from " + paths[0]);
    }
    Matrix block(table.values.cols(), static_cast<Index>(order.size()));
    for (std::size_t i = 0; i < order.size(); ++i) {
      const auto it = row_of.find(order[i]);
      if (it == row_of.end()) {
        throw std::runtime_error(paths[t] + ": subject id '" + order[i] + "' missing (id sets "
                                 "must match across blocks)");
      }
      block.col(static_cast<Index>(i)) = table.values.row(it->second).transpose();
    }
    blocks.push_back(std::move(block));
    feature_names.push_back(table.columns);
  }
  return MultiBlockData(std::move(blocks), order, std::move(feature_names));
}

Matrix read_covariates_csv(const std::string& path,
                           const std::vector<std::string>& subject_ids) {
  const CsvTable table = read_table(path);
  if (table.row_labels.size() != subject_ids.size()) {
    throw std::runtime_error(path + ": covariate rows (" +
                             std::to_string(table.row_labels.size()) +
                             ") differ from the data's subject count (" +
                             std::to_string(subject_ids.size()) + ")");
  }
  std::unordered_map<std::string, Index> row_of;
  for (std::size_t i = 0; i < table.row_labels.size(); ++i) {
    row_of.emplace(table.row_labels[i], static_cast<Index>(i));
  }
  Matrix covariates(static_cast<Index>(subject_ids.size()), table.values.cols());
  for (std::size_t i = 0; i < subject_ids.size(); ++i) {
    const auto it = row_of.find(subject_ids[i]);
    if (it == row_of.end()) {
      throw std::runtime_error(path + ": subject id '" + subject_ids[i] + "' missing");
    }
    covariates.row(static_cast<Index>(i)) = table.values.row(it->second);
  }
  return covariates;
}

void write_sim_truth(const std::string& dir, const SimTruth& truth, const json& extra) {
  fs::create_directories(dir);
  const fs::path root(dir);
  const SimScenario& sc = truth.scenario;

  json scenario{{"n", sc.n},
                {"p", sc.p},
                {"r_j", sc.r_j},
                {"r_i", sc.r_i},
                {"target_r2_joint", sc.target_r2_joint},
                {"target_r2_indiv", sc.target_r2_indiv},
                {"score_dist", score_dist_name(sc.score_dist)},
                {"loading_dist", loading_dist_name(sc.loading_dist)},
                {"q_joint", vector_json(sc.joint_scales())},
                {"q_indiv", vector_json(sc.q_indiv.size() > 0 ? sc.q_indiv : Vector())},
                {"seed", sc.seed}};
  json constants = json::array();
  for (const ScaleConstants& c : truth.scale_constants) {
    constants.push_back({{"c", c.c}, {"d", c.d}});
  }
  json manifest{{"design", truth.design},
                {"library_version", kLibraryVersion},
                {"seed", sc.seed},
                {"scenario", std::move(scenario)},
                {"achieved_r2", block_r2_json(truth.achieved_r2)},
                {"scale_constants", std::move(constants)}};
  manifest.update(extra);
  write_json_file((root / "manifest.json").string(), manifest);

  const auto& ids = truth.data.subject_ids();
  write_scores_csv((root / "joint_scores.csv").string(), truth.joint_scores, ids, "j");
  for (int k = 0; k < truth.data.n_blocks(); ++k) {
    const std::string tag = "_block" + std::to_string(k + 1) + ".csv";
    write_block_csv((root / block_file(k)).string(), truth.data.block(k), ids,
                    truth.data.feature_names().empty() ? std::vector<std::string>{}
                                                       : truth.data.feature_names().at(k));
    write_scores_csv((root / ("indiv_scores" + tag)).string(), truth.indiv_scores.at(k), ids,
                     "i");
    write_block_csv((root / ("joint_matrix" + tag)).string(), truth.joint_matrices.at(k), ids);
    write_block_csv((root / ("indiv_matrix" + tag)).string(), truth.indiv_matrices.at(k), ids);
    write_block_csv((root / ("noise_matrix" + tag)).string(), truth.noise.at(k), ids);
  }
}

SimTruth read_sim_truth(const std::string& dir) {
  const fs::path root(dir);
  const json manifest = read_json_file((root / "manifest.json").string());
  const json& sc_json = manifest.at("scenario");

  SimScenario scenario;
  scenario.n = sc_json.at("n").get<Index>();
  scenario.p = sc_json.at("p").get<std::vector<Index>>();
  scenario.r_j = sc_json.at("r_j").get<int>();
  scenario.r_i = sc_json.at("r_i").get<std::vector<int>>();
  scenario.target_r2_joint = sc_json.at("target_r2_joint").get<std::vector<double>>();
  scenario.target_r2_indiv = sc_json.at("target_r2_indiv").get<std::vector<double>>();
  scenario.score_dist = score_dist_from(sc_json.at("score_dist"));
  scenario.loading_dist = loading_dist_from(sc_json.at("loading_dist"));
  scenario.q_joint = vector_from_json(sc_json.at("q_joint"));
  scenario.q_indiv = vector_from_json(sc_json.at("q_indiv"));
  scenario.seed = sc_json.at("seed").get<std::uint64_t>();

  const int n_blocks = static_cast<int>(scenario.p.size());
  std::vector<Matrix> blocks;
  std::vector<Matrix> indiv_scores, joint_matrices, indiv_matrices, noise;
  std::vector<std::string> ids;
  std::vector<std::vector<std::string>> names;
  for (int k = 0; k < n_blocks; ++k) {
    const std::string tag = "_block" + std::to_string(k + 1) + ".csv";
    CsvTable data_table = read_table((root / block_file(k)).string());
    if (k == 0) ids = data_table.row_labels;
    names.push_back(data_table.columns);
    blocks.push_back(data_table.values.transpose());
    indiv_scores.push_back(read_table((root / ("indiv_scores" + tag)).string()).values);
    joint_matrices.push_back(
        read_table((root / ("joint_matrix" + tag)).string()).values.transpose());
    indiv_matrices.push_back(
        read_table((root / ("indiv_matrix" + tag)).string()).values.transpose());
    noise.push_back(read_table((root / ("noise_matrix" + tag)).string()).values.transpose());
  }
  Matrix joint_scores = read_table((root / "joint_scores.csv").string()).values;

  json constants = manifest.at("scale_constants");
  std::vector<ScaleConstants> scale_constants;
  for (const json& c : constants) {
    scale_constants.push_back(ScaleConstants{c.at("c"), c.at("d")});
  }

  return SimTruth{MultiBlockData(std::move(blocks), std::move(ids), std::move(names)),
                  std::move(joint_scores),
                  std::move(indiv_scores),
                  std::move(joint_matrices),
                  std::move(indiv_matrices),
                  std::move(noise),
                  block_r2_from_json(manifest.at("achieved_r2")),
                  std::move(scale_constants),
                  std::move(scenario),
                  manifest.at("design").get<std::string>()};
}

void write_fit_result(const std::string& dir, const FitResult& result,
                      const std::vector<std::string>& subject_ids,
                      const std::vector<std::vector<std::string>>& feature_names,
                      const FitRunInfo& info) {
  fs::create_directories(dir);
  const fs::path root(dir);
  const StackedLayout layout = StackedLayout::of(result.params);

  json summary{{"loglik", result.loglik},
               {"aic", result.aic},
               {"bic", result.bic},
               {"iterations", result.iterations},
               {"converged", result.converged},
               {"termination_reason", result.termination_reason == TerminationReason::kTolerance
                                          ? "tolerance"
                                          : "max_iters"},
               {"ranks", {{"r_j", layout.joint_rank()}, {"r_i", result.params.ranks().indiv()}}},
               {"noise_model", info.noise},
               {"init", info.init},
               {"tol", info.tol},
               {"max_iters", info.max_iters},
               {"seed", info.seed},
               {"n", result.scores.mean.rows()},
               {"p", result.params.dims()}};
  write_json_file((root / "summary.json").string(), summary);

  json manifest{{"command", "fit"},
                {"config_hash", info.config_hash},
                {"seed", info.seed},
                {"library_version", kLibraryVersion}};
  write_json_file((root / "manifest.json").string(), manifest);

  Matrix trace(static_cast<Index>(result.loglik_trace.size()), 1);
  std::vector<std::string> sweep_labels;
  for (std::size_t t = 0; t < result.loglik_trace.size(); ++t) {
    trace(static_cast<Index>(t), 0) = result.loglik_trace[t];
    sweep_labels.push_back(std::to_string(t));
  }
  write_table((root / "loglik_trace.csv").string(),
              make_table("sweep", std::move(sweep_labels), {"loglik"}, std::move(trace)));

  write_scores_csv((root / "scores_joint.csv").string(),
                   result.scores.mean.leftCols(layout.joint_rank()), subject_ids, "j");
  for (int k = 0; k < layout.n_blocks(); ++k) {
    const std::string suffix = "_block" + std::to_string(k + 1) + ".csv";
    const std::vector<std::string> block_features =
        feature_names.empty() ? std::vector<std::string>{} : feature_names.at(k);
    write_scores_csv((root / ("scores_indiv" + suffix)).string(),
                     result.scores.mean.middleCols(layout.indiv_col_offset(k),
                                                   layout.indiv_rank(k)),
                     subject_ids, "i");
    write_loadings_csv((root / ("loadings_joint" + suffix)).string(),
                       result.params.w_joint(k), block_features, "j");
    write_loadings_csv((root / ("loadings_indiv" + suffix)).string(),
                       result.params.w_indiv(k), block_features, "i");
    write_table((root / ("noise" + suffix)).string(),
                make_table("feature",
                           block_features.empty()
                               ? default_labels("f", result.params.block_dim(k))
                               : block_features,
                           {"variance"},
                           result.params.noise(k).expand(result.params.block_dim(k))));
  }
}

FitResult read_fit_result(const std::string& dir) {
  const fs::path root(dir);
  const json summary = read_json_file((root / "summary.json").string());
  const std::string noise_name = summary.at("noise_model").get<std::string>();
  const NoiseKind noise_kind =
      noise_name == "diagonal" ? NoiseKind::kDiagonal : NoiseKind::kIsotropic;
  const int n_blocks = static_cast<int>(summary.at("p").size());

  std::vector<Matrix> w_joint, w_indiv;
  std::vector<BlockNoise> noise;
  std::vector<Matrix> indiv_scores;
  for (int k = 0; k < n_blocks; ++k) {
    const std::string suffix = "_block" + std::to_string(k + 1) + ".csv";
    w_joint.push_back(read_table((root / ("loadings_joint" + suffix)).string()).values);
    w_indiv.push_back(read_table((root / ("loadings_indiv" + suffix)).string()).values);
    const Vector variances =
        read_table((root / ("noise" + suffix)).string()).values.col(0);
    noise.push_back(noise_kind == NoiseKind::kIsotropic ? BlockNoise::isotropic(variances(0))
                                                        : BlockNoise::diagonal(variances));
    indiv_scores.push_back(read_table((root / ("scores_indiv" + suffix)).string()).values);
  }
  ProjiveParams params(std::move(w_joint), std::move(w_indiv), std::move(noise));
  const StackedLayout layout = StackedLayout::of(params);

  const Matrix joint_scores = read_table((root / "scores_joint.csv").string()).values;
  Matrix mean(joint_scores.rows(), layout.r_total());
  mean.leftCols(layout.joint_rank()) = joint_scores;
  for (int k = 0; k < n_blocks; ++k) {
    mean.middleCols(layout.indiv_col_offset(k), layout.indiv_rank(k)) = indiv_scores[k];
  }

  const CsvTable trace_table = read_table((root / "loglik_trace.csv").string());
  std::vector<double> trace;
  for (Index i = 0; i < trace_table.values.rows(); ++i) trace.push_back(trace_table.values(i, 0));

  PosteriorScores scores;
  scores.mean = std::move(mean);
  scores.cov = Matrix::Zero(layout.r_total(), layout.r_total());
  scores.second_moment_sum = Matrix::Zero(layout.r_total(), layout.r_total());

  return FitResult{std::move(params),
                   std::move(scores),
                   std::move(trace),
                   summary.at("converged").get<bool>(),
                   summary.at("iterations").get<int>(),
                   summary.at("termination_reason").get<std::string>() == "tolerance"
                       ? TerminationReason::kTolerance
                       : TerminationReason::kMaxIters,
                   summary.at("loglik").get<double>(),
                   summary.at("aic").get<double>(),
                   summary.at("bic").get<double>()};
}

}  // namespace projive::io
