#include "projive/io.hpp"

#include "projive/em.hpp"
#include "projive/rng.hpp"
#include "projive/simulate.hpp"
#include "test_util.hpp"

#include <doctest.h>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

using namespace projive;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path test_root() {
  static const fs::path root = [] {
    fs::path p = fs::temp_directory_path() / "projive_io_cli_tests";
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
  }();
  return root;
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = test_root() / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string cli_binary() {
  const char* env = std::getenv("PROJIVE_CLI");
  REQUIRE_MESSAGE(env != nullptr, "PROJIVE_CLI must point at the command-line binary");
  return env;
}

int run_cli(const std::string& args, const fs::path& log) {
  const std::string command =
      "\"" + cli_binary() + "\" " + args + " > \"" + log.string() + "\" 2>&1";
  const int raw = std::system(command.c_str());
  return raw < 0 ? raw : (raw >> 8) & 0xff;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

SimScenario small_scenario(std::uint64_t seed) {
  SimScenario s;
  s.n = 60;
  s.p = {6, 7};
  s.r_j = 1;
  s.r_i = {1, 1};
  s.target_r2_joint = {0.5, 0.5};
  s.target_r2_indiv = {0.2, 0.2};
  s.seed = seed;
  return s;
}

}  // namespace

TEST_CASE("doubles survive the text round trip") {
  for (double v : {1.0 / 3.0, 1e-17, 6.02214076e23, -2.2250738585072014e-308, 0.0, -1.5}) {
    CHECK(std::stod(io::format_double(v)) == v);
  }
  CHECK(io::format_double(std::numeric_limits<double>::quiet_NaN()) == "nan");
  CHECK(io::format_double(std::numeric_limits<double>::infinity()) == "inf");
}

TEST_CASE("csv tables round-trip labels and exact values") {
  const fs::path dir = fresh_dir("csv_roundtrip");
  RngEngine rng = make_engine(90);
  io::CsvTable table;
  table.label_header = "subject";
  table.row_labels = {"s1", "s2", "s3"};
  table.columns = {"a", "b"};
  table.values = testutil::random_normal(3, 2, rng);
  const std::string path = (dir / "table.csv").string();
  io::write_table(path, table);

  const io::CsvTable back = io::read_table(path);
  CHECK(back.label_header == "subject");
  CHECK(back.row_labels == table.row_labels);
  CHECK(back.columns == table.columns);
  CHECK((back.values - table.values).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("csv reader flags malformed input") {
  const fs::path dir = fresh_dir("csv_malformed");
  CHECK_THROWS_AS(io::read_table((dir / "missing.csv").string()), std::runtime_error);

  const fs::path ragged = dir / "ragged.csv";
  io::write_text_file(ragged.string(), "id,a,b\ns1,1.0\n");
  CHECK_THROWS_AS(io::read_table(ragged.string()), std::runtime_error);
}

TEST_CASE("block files align subjects by id across files") {
  const fs::path dir = fresh_dir("block_alignment");
  RngEngine rng = make_engine(91);
  const Matrix b1 = testutil::random_normal(3, 4, rng);
  const Matrix b2 = testutil::random_normal(2, 4, rng);
  const std::vector<std::string> ids{"s1", "s2", "s3", "s4"};
  const std::vector<std::string> shuffled{"s3", "s1", "s4", "s2"};

  Matrix b2_shuffled(2, 4);
  b2_shuffled.col(0) = b2.col(2);
  b2_shuffled.col(1) = b2.col(0);
  b2_shuffled.col(2) = b2.col(3);
  b2_shuffled.col(3) = b2.col(1);

  const std::string p1 = (dir / "block1.csv").string();
  const std::string p2 = (dir / "block2.csv").string();
  io::write_block_csv(p1, b1, ids);
  io::write_block_csv(p2, b2_shuffled, shuffled);

  const MultiBlockData data = io::read_blocks({p1, p2});
  CHECK(data.subject_ids() == ids);
  CHECK((data.block(0) - b1).cwiseAbs().maxCoeff() == 0.0);
  CHECK((data.block(1) - b2).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("block reader rejects bad inputs") {
  const fs::path dir = fresh_dir("block_errors");
  RngEngine rng = make_engine(92);
  const Matrix b = testutil::random_normal(2, 3, rng);
  const std::string p1 = (dir / "block1.csv").string();
  io::write_block_csv(p1, b, {"s1", "s2", "s3"});

  CHECK_THROWS_AS(io::read_blocks({p1}), std::invalid_argument);

  const std::string missing = (dir / "nope.csv").string();
  CHECK_THROWS_WITH_AS(io::read_blocks({p1, missing}), doctest::Contains("nope.csv"),
                       std::runtime_error);

  const std::string p2 = (dir / "block2.csv").string();
  io::write_block_csv(p2, b, {"s1", "s2", "OTHER"});
  CHECK_THROWS_AS(io::read_blocks({p1, p2}), std::runtime_error);

  const std::string dup = (dir / "dup.csv").string();
  io::write_text_file(dup, "subject,f1,f2\ns1,1,2\ns1,3,4\ns3,5,6\n");
  CHECK_THROWS_AS(io::read_blocks({p1, dup}), std::runtime_error);
}

TEST_CASE("covariates align to the requested subject order") {
  const fs::path dir = fresh_dir("covariates");
  io::write_text_file((dir / "cov.csv").string(),
                      "subject,age,dose\ns2,20,0.1\ns3,30,0.2\ns1,10,0.3\n");
  const Matrix cov = io::read_covariates_csv((dir / "cov.csv").string(), {"s1", "s2", "s3"});
  CHECK(cov(0, 0) == 10.0);
  CHECK(cov(1, 0) == 20.0);
  CHECK(cov(2, 0) == 30.0);
  CHECK(cov(0, 1) == 0.3);

  CHECK_THROWS_AS(io::read_covariates_csv((dir / "cov.csv").string(), {"s1", "s2", "s9"}),
                  std::runtime_error);
}

TEST_CASE("generated truth round-trips through its directory format") {
  const fs::path dir = fresh_dir("truth_roundtrip");
  const SimTruth truth = generate(small_scenario(5));
  io::write_sim_truth(dir.string(), truth, json{{"cell", "demo"}, {"replicate", 3}});

  const SimTruth back = io::read_sim_truth(dir.string());
  CHECK(back.design == "factorial");
  CHECK(back.scenario.n == truth.scenario.n);
  CHECK(back.scenario.seed == truth.scenario.seed);
  CHECK(back.scenario.target_r2_joint == truth.scenario.target_r2_joint);
  for (int k = 0; k < 2; ++k) {
    const auto i = static_cast<std::size_t>(k);
    CHECK((back.data.block(k) - truth.data.block(k)).cwiseAbs().maxCoeff() == 0.0);
    CHECK((back.joint_matrices[i] - truth.joint_matrices[i]).cwiseAbs().maxCoeff() == 0.0);
    CHECK((back.indiv_matrices[i] - truth.indiv_matrices[i]).cwiseAbs().maxCoeff() == 0.0);
    CHECK((back.noise[i] - truth.noise[i]).cwiseAbs().maxCoeff() == 0.0);
    CHECK((back.indiv_scores[i] - truth.indiv_scores[i]).cwiseAbs().maxCoeff() == 0.0);
    CHECK(back.achieved_r2[i].joint == truth.achieved_r2[i].joint);
    CHECK(back.scale_constants[i].d == truth.scale_constants[i].d);
  }
  CHECK((back.joint_scores - truth.joint_scores).cwiseAbs().maxCoeff() == 0.0);

  const json manifest = io::read_json_file((dir / "manifest.json").string());
  CHECK(manifest.at("cell") == "demo");
  CHECK(manifest.at("replicate") == 3);
}

TEST_CASE("fit results round-trip through their directory format") {
  const fs::path dir = fresh_dir("fit_roundtrip");
  const SimTruth truth = generate(small_scenario(6));
  FitOptions options;
  options.warn = false;
  const FitResult result = fit(truth.data, BlockRanks(1, {1, 1}), InitStrategy::cholesky(),
                               NoiseKind::kIsotropic, options);

  io::FitRunInfo info;
  info.config_hash = "deadbeef";
  io::write_fit_result(dir.string(), result, truth.data.subject_ids(),
                       truth.data.feature_names(), info);

  const FitResult back = io::read_fit_result(dir.string());
  CHECK(back.loglik == result.loglik);
  CHECK(back.aic == result.aic);
  CHECK(back.bic == result.bic);
  CHECK(back.converged == result.converged);
  CHECK(back.iterations == result.iterations);
  CHECK(back.termination_reason == result.termination_reason);
  CHECK(back.loglik_trace == result.loglik_trace);
  CHECK((back.scores.mean - result.scores.mean).cwiseAbs().maxCoeff() == 0.0);
  CHECK(back.scores.cov.cwiseAbs().maxCoeff() == 0.0);
  for (int k = 0; k < 2; ++k) {
    CHECK((back.params.w_joint(k) - result.params.w_joint(k)).cwiseAbs().maxCoeff() == 0.0);
    CHECK((back.params.w_indiv(k) - result.params.w_indiv(k)).cwiseAbs().maxCoeff() == 0.0);
    CHECK((back.params.noise(k).expand(truth.data.block_dim(k)) -
           result.params.noise(k).expand(truth.data.block_dim(k)))
              .cwiseAbs()
              .maxCoeff() == 0.0);
  }

  const json manifest = io::read_json_file((dir / "manifest.json").string());
  CHECK(manifest.at("config_hash") == "deadbeef");
}

TEST_CASE("json content hashes track content, not formatting") {
  const json a{{"alpha", 1}, {"beta", {1, 2, 3}}};
  const json b{{"beta", {1, 2, 3}}, {"alpha", 1}};
  json c = a;
  c["alpha"] = 2;
  CHECK(io::json_content_hash(a) == io::json_content_hash(b));
  CHECK(io::json_content_hash(a) != io::json_content_hash(c));
}

TEST_CASE("cli: simulate writes a dataset tree with a run manifest") {
  const fs::path dir = fresh_dir("cli_simulate");
  const json config{{"design", "factorial"},
                    {"replicates", 2},
                    {"seed", 11},
                    {"out", (dir / "sims").string()},
                    {"grid",
                     {{"n", 60},
                      {"p1", 6},
                      {"p2", 7},
                      {"r_j", 1},
                      {"r_i1", 1},
                      {"r_i2", 1},
                      {"r2_j1", 0.5},
                      {"r2_j2", 0.5},
                      {"r2_i1", 0.2},
                      {"r2_i2", 0.2},
                      {"dist", "gaussian"}}}};
  io::write_json_file((dir / "sim.json").string(), config);

  const int code = run_cli("simulate --config \"" + (dir / "sim.json").string() + "\"",
                           dir / "sim.log");
  CHECK(code == 0);

  const json manifest = io::read_json_file((dir / "sims" / "run_manifest.json").string());
  REQUIRE(manifest.at("cells").size() == 1);
  const std::string cell = manifest.at("cells")[0].at("name").get<std::string>();
  CHECK(fs::exists(dir / "sims" / cell / "rep0" / "manifest.json"));
  CHECK(fs::exists(dir / "sims" / cell / "rep1" / "block2.csv"));

  // Dataset directories are reproducible byte for byte under the same seed.
  const json config2 = [&] {
    json c = config;
    c["out"] = (dir / "sims2").string();
    return c;
  }();
  io::write_json_file((dir / "sim2.json").string(), config2);
  REQUIRE(run_cli("simulate --config \"" + (dir / "sim2.json").string() + "\"",
                  dir / "sim2.log") == 0);
  CHECK(slurp(dir / "sims" / cell / "rep0" / "block1.csv") ==
        slurp(dir / "sims2" / cell / "rep0" / "block1.csv"));
  CHECK(slurp(dir / "sims" / cell / "rep0" / "joint_scores.csv") ==
        slurp(dir / "sims2" / cell / "rep0" / "joint_scores.csv"));
}

TEST_CASE("cli: fit on a generated dataset matches the library exactly") {
  const fs::path dir = fresh_dir("cli_fit");
  const SimTruth truth = generate(small_scenario(21));
  const fs::path truth_dir = dir / "data";
  io::write_sim_truth(truth_dir.string(), truth);

  const json config{{"data_dir", truth_dir.string()}, {"out", (dir / "run1").string()}};
  io::write_json_file((dir / "fit.json").string(), config);
  const int code =
      run_cli("fit --config \"" + (dir / "fit.json").string() + "\"", dir / "fit.log");
  CHECK(code == 0);

  FitOptions options;  // CLI defaults: tol 1e-8, max_iters 5000
  const FitResult direct = fit(truth.data, BlockRanks(1, {1, 1}), InitStrategy::cholesky(),
                               NoiseKind::kIsotropic, options);
  const json summary = io::read_json_file((dir / "run1" / "summary.json").string());
  CHECK(summary.at("loglik").get<double>() == direct.loglik);
  CHECK(summary.at("converged").get<bool>() == direct.converged);
  CHECK(summary.at("iterations").get<int>() == direct.iterations);

  // A second run into another directory produces identical artifacts.
  const int code2 = run_cli("fit --config \"" + (dir / "fit.json").string() + "\" --out \"" +
                                (dir / "run2").string() + "\"",
                            dir / "fit2.log");
  CHECK(code2 == 0);
  CHECK(slurp(dir / "run1" / "summary.json") == slurp(dir / "run2" / "summary.json"));
  CHECK(slurp(dir / "run1" / "scores_joint.csv") == slurp(dir / "run2" / "scores_joint.csv"));
  CHECK(slurp(dir / "run1" / "loadings_joint_block1.csv") ==
        slurp(dir / "run2" / "loadings_joint_block1.csv"));

  // Rank overrides reach the fit: a different joint rank changes the layout.
  const int code3 = run_cli("fit --config \"" + (dir / "fit.json").string() + "\" --out \"" +
                                (dir / "run3").string() + "\" --ranks 2:1,1",
                            dir / "fit3.log");
  CHECK(code3 == 0);
  const json summary3 = io::read_json_file((dir / "run3" / "summary.json").string());
  CHECK(summary3.at("ranks").at("r_j").get<int>() == 2);
}

TEST_CASE("cli: evaluate scores fits against their generating truth") {
  const fs::path dir = fresh_dir("cli_evaluate");
  const fs::path truth_root = dir / "truth";
  const fs::path fit_root = dir / "fits";

  for (int rep = 0; rep < 2; ++rep) {
    const SimTruth truth = generate(small_scenario(30 + static_cast<std::uint64_t>(rep)));
    const fs::path truth_dir = truth_root / "cell" / ("rep" + std::to_string(rep));
    io::write_sim_truth(truth_dir.string(), truth,
                        json{{"cell", "cell"}, {"replicate", rep}});
    const json config{{"data_dir", truth_dir.string()},
                      {"out", (fit_root / "cell" / ("rep" + std::to_string(rep))).string()}};
    const fs::path cfg = dir / ("fit" + std::to_string(rep) + ".json");
    io::write_json_file(cfg.string(), config);
    REQUIRE(run_cli("fit --config \"" + cfg.string() + "\"",
                    dir / ("fit" + std::to_string(rep) + ".log")) == 0);
  }

  const json config{{"truth_root", truth_root.string()},
                    {"fit_root", fit_root.string()},
                    {"out", (dir / "eval").string()}};
  io::write_json_file((dir / "eval.json").string(), config);
  const int code =
      run_cli("evaluate --config \"" + (dir / "eval.json").string() + "\"", dir / "eval.log");
  CHECK(code == 0);

  const std::string replicates = slurp(dir / "eval" / "replicates.csv");
  CHECK(replicates.rfind("cell,replicate,method,n,p1,p2,r_j,r2_j1,r2_j2,dist,metric,value\n",
                         0) == 0);
  CHECK(replicates.find("joint_score_dist") != std::string::npos);
  const std::string summary = slurp(dir / "eval" / "summary.csv");
  CHECK(summary.rfind("n,p1,p2,r_j,r2_j1,r2_j2,dist,metric,mean,sd,n_reps", 0) == 0);
  CHECK(summary.find(",2\n") != std::string::npos);  // two replicates aggregated
}

TEST_CASE("cli: select-rank reports a scree, a permutation test and a grid") {
  const fs::path dir = fresh_dir("cli_select");
  RngEngine rng = make_engine(93);
  const Matrix z = testutil::random_normal(50, 1, rng);
  const Matrix b1 = testutil::random_normal(5, 1, rng) * z.transpose() +
                    0.3 * testutil::random_normal(5, 50, rng);
  const Matrix b2 = testutil::random_normal(6, 1, rng) * z.transpose() +
                    0.3 * testutil::random_normal(6, 50, rng);
  io::write_block_csv((dir / "b1.csv").string(), b1);
  io::write_block_csv((dir / "b2.csv").string(), b2);

  const json config{
      {"blocks", {(dir / "b1.csv").string(), (dir / "b2.csv").string()}},
      {"total_ranks", {2, 2}},
      {"n_perm", 49},
      {"seed", 4},
      {"candidates", {{{"r_j", 1}, {"r_i", {1, 1}}}, {{"r_j", 2}, {"r_i", {1, 1}}}}},
      {"out", (dir / "rank").string()}};
  io::write_json_file((dir / "rank.json").string(), config);
  const int code =
      run_cli("select-rank --config \"" + (dir / "rank.json").string() + "\"", dir / "rank.log");
  CHECK(code == 0);

  CHECK(fs::exists(dir / "rank" / "scree.csv"));
  const json perm = io::read_json_file((dir / "rank" / "perm_test.json").string());
  CHECK(perm.at("selected_r_j").get<int>() >= 1);
  const json grid = io::read_json_file((dir / "rank" / "ic_grid.json").string());
  CHECK(grid.at("entries").size() == 2);
  const std::string csv = slurp(dir / "rank" / "ic_grid.csv");
  CHECK(csv.rfind("r_j,r_i,loglik,aic,bic,converged,error\n", 0) == 0);
}

TEST_CASE("cli: bad inputs exit nonzero with a diagnostic") {
  const fs::path dir = fresh_dir("cli_errors");

  // Config referencing a block file that does not exist.
  const json config{{"blocks", {(dir / "gone1.csv").string(), (dir / "gone2.csv").string()}},
                    {"ranks", {{"r_j", 1}, {"r_i", {1, 1}}}},
                    {"out", (dir / "run").string()}};
  io::write_json_file((dir / "fit.json").string(), config);
  CHECK(run_cli("fit --config \"" + (dir / "fit.json").string() + "\"", dir / "fit.log") == 1);
  CHECK(slurp(dir / "fit.log").find("gone1.csv") != std::string::npos);

  // Config file that is not JSON at all.
  io::write_text_file((dir / "broken.json").string(), "not json {{{");
  CHECK(run_cli("fit --config \"" + (dir / "broken.json").string() + "\"",
                dir / "broken.log") == 1);

  // Missing --config flag is a usage error.
  CHECK(run_cli("fit", dir / "usage.log") != 0);
}
