#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "fusereg/csv.hpp"
#include "fusereg/errors.hpp"
#include "fusereg/model_io.hpp"
#include "fusereg/partition.hpp"
#include "fusereg/schema.hpp"
#include "helpers.hpp"

using namespace fusereg;
using namespace fusereg::testing;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir() {
  fs::path dir = fs::temp_directory_path() / "fusereg_cli_tests";
  fs::create_directories(dir);
  return dir;
}

int run_cli(const std::string& args) {
  std::string command = std::string(FUSEREG_CLI_PATH) + " " + args + " 2>/dev/null";
  int status = std::system(command.c_str());
  return WEXITSTATUS(status);
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// noiseless training table: y determined by fused level effects
void write_train_csv(const fs::path& path) {
  const std::vector<std::string> f_levels = {"a", "b", "c", "d"};
  const std::vector<double> f_coef = {0, 0, 2, 2};
  const std::vector<std::string> g_levels = {"u", "v", "w"};
  const std::vector<double> g_coef = {0, 1, 1};
  std::ofstream out(path);
  out << "f,g,y\n";
  for (int i = 0; i < 48; ++i) {
    int fi = i % 4, gi = (i / 4) % 3;
    out << f_levels[fi] << ',' << g_levels[gi] << ','
        << format_double(f_coef[fi] + g_coef[gi] + 1.0) << "\n";
  }
}

}  // namespace

TEST_SUITE_BEGIN("cli");

TEST_CASE("model json round-trip is the identity") {
  Eigen::MatrixXi assign = cycling_assignment({3, 4}, 24);
  CounterRng rng(3);
  Dataset data = make_categorical({3, 4}, assign, gaussian_vector(24, rng));
  PartitionModel model;
  model.factor_rgs = {{0, 1, 1}, {0, 1, 0, 2}};
  model.continuous_included = {false, false};
  RefitResult fitted = refit(model, data);
  FittedModel saved = make_fitted_model(data.design, model, fitted.beta);
  saved.seed = 99;
  saved.config_hash = "deadbeef";

  FittedModel loaded = model_from_json(model_to_json(saved));
  CHECK(loaded == saved);
  CHECK(loaded.model == model);
  CHECK(loaded.seed == 99);
}

TEST_CASE("predict matches hand-computed values and handles unseen levels") {
  // three-level factor with coefficients 1.5 / 1.5 / 4.0
  Eigen::MatrixXi assign(6, 1);
  for (int i = 0; i < 6; ++i) assign(i, 0) = i / 2;
  Eigen::VectorXd y(6);
  y << 1, 2, 3, 5, 8, 13;
  Dataset data = make_categorical({3}, assign, y);
  PartitionModel model;
  model.factor_rgs = {{0, 0, 1}};
  model.continuous_included = {false};
  FittedModel fitted = make_fitted_model(data.design, model, refit(model, data).beta);

  RawTable rows;
  rows.columns = {"f1"};
  rows.rows = {{"l0"}, {"l2"}, {"l1"}, {"l0"}};
  Eigen::VectorXd pred = predict_table(fitted, rows);
  CHECK(pred(0) == doctest::Approx(2.75).epsilon(1e-12));
  CHECK(pred(1) == doctest::Approx(10.5).epsilon(1e-12));
  CHECK(pred(2) == doctest::Approx(2.75).epsilon(1e-12));

  RawTable unseen;
  unseen.columns = {"f1"};
  unseen.rows = {{"l9"}};
  CHECK_THROWS_AS(predict_table(fitted, unseen), UnseenLevel);
  Eigen::VectorXd mapped = predict_table(fitted, unseen, true);
  CHECK(mapped(0) == doctest::Approx(2.75).epsilon(1e-12));  // reference cluster
}

TEST_CASE("end-to-end: pdmr then predict reproduces a noiseless response") {
  fs::path dir = scratch_dir();
  fs::path train = dir / "train.csv";
  fs::path model_path = dir / "model.json";
  fs::path pred_path = dir / "pred.csv";
  write_train_csv(train);

  int status = run_cli("pdmr --input " + train.string() + " --response y --sigma 0.05" +
                       " --nlambda 12 --seed 5 --output " + model_path.string() +
                       " --trace " + (dir / "trace.csv").string());
  REQUIRE(status == 0);

  FittedModel model = load_model(model_path.string());
  CHECK(model_from_json(model_to_json(model)) == model);

  status = run_cli("predict --model " + model_path.string() + " --input " + train.string() +
                   " --output " + pred_path.string());
  REQUIRE(status == 0);

  RawTable predictions = read_csv_file(pred_path.string());
  RawTable source = read_csv_file(train.string());
  REQUIRE(predictions.rows.size() == source.rows.size());
  int y_col = source.find_column("y");
  int yhat_col = predictions.find_column("yhat");
  for (std::size_t i = 0; i < predictions.rows.size(); ++i) {
    double y, yhat;
    REQUIRE(parse_double(source.rows[i][y_col], y));
    REQUIRE(parse_double(predictions.rows[i][yhat_col], yhat));
    CHECK(std::abs(y - yhat) <= 1e-8);
  }
}

TEST_CASE("repeated seeds produce byte-identical model files") {
  fs::path dir = scratch_dir();
  fs::path train = dir / "train2.csv";
  write_train_csv(train);
  fs::path first = dir / "model_a.json", second = dir / "model_b.json";
  REQUIRE(run_cli("pdmr --input " + train.string() +
                  " --response y --sigma 0.05 --nlambda 10 --seed 7 --output " +
                  first.string()) == 0);
  REQUIRE(run_cli("pdmr --input " + train.string() +
                  " --response y --sigma 0.05 --nlambda 10 --seed 7 --output " +
                  second.string()) == 0);
  CHECK(slurp(first) == slurp(second));
}

TEST_CASE("empty input fails with exit code 2 and an error payload") {
  fs::path dir = scratch_dir();
  fs::path empty = dir / "empty.csv";
  std::ofstream(empty).close();
  CHECK(run_cli("pdmr --input " + empty.string() + " --response y --output " +
                (dir / "nil.json").string()) == 2);
  CHECK(run_cli("fit --input " + empty.string() + " --response y --output " +
                (dir / "nil.csv").string()) == 2);
}

TEST_CASE("fit subcommand writes the path as lambda/factor/level/coefficient") {
  fs::path dir = scratch_dir();
  fs::path train = dir / "train3.csv";
  write_train_csv(train);
  fs::path out = dir / "path.csv";
  REQUIRE(run_cli("fit --input " + train.string() + " --response y --nlambda 5 --output " +
                  out.string()) == 0);
  RawTable path = read_csv_file(out.string());
  CHECK(path.columns == std::vector<std::string>{"lambda", "factor", "level", "coefficient"});
  // p = 4 + 2 = 6 coefficients per lambda, 5 lambda values
  CHECK(path.rows.size() == 30);
  double first_lambda, last_lambda;
  REQUIRE(parse_double(path.rows.front()[0], first_lambda));
  REQUIRE(parse_double(path.rows.back()[0], last_lambda));
  CHECK(last_lambda < first_lambda);
}

TEST_CASE("intercept-only model predicts the fitted mean everywhere") {
  fs::path dir = scratch_dir();
  Eigen::MatrixXi assign(6, 1);
  for (int i = 0; i < 6; ++i) assign(i, 0) = i / 2;
  Eigen::VectorXd y(6);
  y << 1, 2, 3, 5, 8, 13;
  Dataset data = make_categorical({3}, assign, y);
  FittedModel fitted = make_fitted_model(
      data.design, intercept_only(data.design), refit(intercept_only(data.design), data).beta);
  fs::path model_path = dir / "intercept.json";
  save_model(fitted, model_path.string());

  std::ofstream rows(dir / "rows.csv");
  rows << "f1\nl0\nl1\nl2\n";
  rows.close();
  fs::path pred_path = dir / "intercept_pred.csv";
  REQUIRE(run_cli("predict --model " + model_path.string() + " --input " +
                  (dir / "rows.csv").string() + " --output " + pred_path.string()) == 0);
  RawTable predictions = read_csv_file(pred_path.string());
  for (const auto& row : predictions.rows) {
    double yhat;
    REQUIRE(parse_double(row[1], yhat));
    CHECK(yhat == doctest::Approx(y.mean()).epsilon(1e-12));
  }
}

TEST_SUITE_END();
