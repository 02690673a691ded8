#pragma once

// File formats and directory layouts.
//
// CSV conventions: comma-separated, one header row, no quoting; every
// numeric value is written with 17 significant digits so doubles round-trip
// exactly. Data blocks are stored subjects x features with a leading
// subject id column (in-memory blocks are features x subjects; the readers
// and writers transpose). All writes are atomic (temp file + rename).
//
// A generated-truth directory holds manifest.json, block<k>.csv,
// joint_scores.csv, indiv_scores_block<k>.csv, joint_matrix_block<k>.csv,
// indiv_matrix_block<k>.csv and noise_matrix_block<k>.csv. A fit directory
// holds manifest.json, summary.json, loglik_trace.csv, scores_joint.csv,
// scores_indiv_block<k>.csv, loadings_joint_block<k>.csv,
// loadings_indiv_block<k>.csv and noise_block<k>.csv.

#include "projive/em.hpp"
#include "projive/simulate.hpp"
#include "projive/types.hpp"

#include <json.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace projive::io {

/// Shortest text that parses back to exactly the same double (17
/// significant digits; nan/inf spelled out).
std::string format_double(double value);

/// One labeled numeric table: first column holds row labels, the remaining
/// columns hold doubles.
struct CsvTable {
  std::string label_header;
  std::vector<std::string> row_labels;
  std::vector<std::string> columns;
  Matrix values;  // row_labels.size() x columns.size()
};

void write_table(const std::string& path, const CsvTable& table);
CsvTable read_table(const std::string& path);

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

void write_json_file(const std::string& path, const nlohmann::json& value);
nlohmann::json read_json_file(const std::string& path);

/// FNV-1a hash (hex) of a canonical JSON dump; path-valued keys should be
/// stripped by the caller first so relocated runs hash identically.
std::string json_content_hash(const nlohmann::json& value);

/// Writes one block (features x subjects in memory) as subjects x features.
/// Empty ids/names select the defaults s1..sn / f1..fp.
void write_block_csv(const std::string& path, const Matrix& block,
                     const std::vector<std::string>& subject_ids = {},
                     const std::vector<std::string>& feature_names = {});

/// Reads >= 2 block CSVs into aligned multi-block data. Every file must
/// carry exactly the same subject id set; rows are reordered to the first
/// file's order before assembly. Mismatched sets are an error.
MultiBlockData read_blocks(const std::vector<std::string>& paths);

/// Reads a covariate table and aligns its rows to the given subject order
/// (same id set required). Returns n x q.
Matrix read_covariates_csv(const std::string& path,
                           const std::vector<std::string>& subject_ids);

/// Serializes a generated truth, merging `extra` (e.g. cell/replicate tags)
/// into manifest.json.
void write_sim_truth(const std::string& dir, const SimTruth& truth,
                     const nlohmann::json& extra = nlohmann::json::object());
SimTruth read_sim_truth(const std::string& dir);

/// Echoed run settings stored alongside a fit.
struct FitRunInfo {
  std::string init = "cholesky";
  std::string noise = "isotropic";
  double tol = 1e-8;
  int max_iters = 5000;
  std::uint64_t seed = 0;
  std::string config_hash;
};

void write_fit_result(const std::string& dir, const FitResult& result,
                      const std::vector<std::string>& subject_ids,
                      const std::vector<std::vector<std::string>>& feature_names,
                      const FitRunInfo& info);

/// Rebuilds a FitResult from a fit directory for downstream evaluation.
/// Parameters, score means, trace and criteria are restored exactly; the
/// posterior covariance is not serialized, so scores.cov and
/// scores.second_moment_sum come back zero.
FitResult read_fit_result(const std::string& dir);

}  // namespace projive::io
