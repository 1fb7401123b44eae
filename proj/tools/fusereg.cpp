// fusereg: partition selection for linear models with categorical
// predictors. Subcommands: fit (group lasso path), pdmr (screen, fuse
// levels, select), predict, simulate (benchmark harness), diagnose
// (theory report for a benchmark setting).

#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <map>
#include <sstream>

#include "fusereg/csv.hpp"
#include "fusereg/errors.hpp"
#include "fusereg/grouplasso.hpp"
#include "fusereg/model_io.hpp"
#include "fusereg/pdmr.hpp"
#include "fusereg/schema.hpp"
#include "fusereg/simbench.hpp"
#include "fusereg/theory.hpp"
#include "fusereg/version.hpp"

namespace {

using namespace fusereg;
using nlohmann::json;

struct OutputStamp {
  std::uint64_t seed = 0;
  std::map<std::string, std::string> config;

  std::string canonical() const {
    std::string s;
    for (const auto& [key, value] : config) s += key + "=" + value + ";";
    return s;
  }
  void write_csv_header(std::ostream& out) const {
    out << "# fusereg " << kVersion << "\n";
    out << "# seed=" << seed << "\n";
    out << "# config=" << canonical() << "\n";
    out << "# config_hash=" << config_hash_hex(canonical()) << "\n";
  }
};

PredictorSchema load_schema_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open schema file: " + path);
  json doc = json::parse(in);
  PredictorSchema schema;
  for (const auto& entry : doc.at("predictors")) {
    Predictor pred;
    pred.name = entry.at("name").get<std::string>();
    std::string kind = entry.at("kind").get<std::string>();
    if (kind == "categorical") pred.kind = PredictorKind::categorical;
    else if (kind == "continuous") pred.kind = PredictorKind::continuous;
    else throw InputError("schema kind must be categorical or continuous: " + kind);
    if (entry.contains("levels"))
      pred.levels = entry.at("levels").get<std::vector<std::string>>();
    schema.predictors.push_back(std::move(pred));
  }
  return schema;
}

// When a forced categorical predictor lists no levels, take them from the
// data in order of first appearance.
void fill_levels_from_data(PredictorSchema& schema, const RawTable& table) {
  for (auto& pred : schema.predictors) {
    if (pred.kind != PredictorKind::categorical || !pred.levels.empty()) continue;
    int col = table.find_column(pred.name);
    if (col < 0) throw InputError("predictor column not found: " + pred.name);
    std::vector<std::string> seen;
    for (const auto& row : table.rows)
      if (std::find(seen.begin(), seen.end(), row[col]) == seen.end()) seen.push_back(row[col]);
    pred.levels = std::move(seen);
  }
}

Dataset load_dataset(const std::string& input, const std::string& response,
                     const std::string& schema_path, PredictorSchema* schema_out = nullptr) {
  RawTable table = read_csv_file(input);
  PredictorSchema schema;
  if (!schema_path.empty()) {
    schema = load_schema_file(schema_path);
    fill_levels_from_data(schema, table);
  } else {
    schema = infer_schema(table, response);
  }
  if (schema_out) *schema_out = schema;
  return encode(table, schema, response);
}

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write file: " + path);
  return out;
}

int run_fit(const std::string& input, const std::string& response, const std::string& schema_path,
            double lambda, int nlambda, double lambda_ratio, double weight_exponent,
            bool penalize_intercept, double kkt_tol, int max_iter, std::uint64_t seed,
            const std::string& output) {
  Dataset data = load_dataset(input, response, schema_path);
  WeightSpec weights;
  weights.exponent = weight_exponent;
  weights.penalize_intercept = penalize_intercept;
  FitOptions options;
  options.kkt_tol = kkt_tol;
  options.max_iter = max_iter;

  std::vector<GroupLassoFit> fits;
  if (lambda > 0) {
    try {
      fits.push_back(fit(data, lambda, weights, options));
    } catch (NoConvergence& err) {
      fits.push_back(err.fit);
    }
  } else {
    LambdaNet net = make_lambda_net(data, weights, nlambda, lambda_ratio);
    fits = fit_path(data, net, weights, options);
  }

  OutputStamp stamp;
  stamp.seed = seed;
  stamp.config = {{"cmd", "fit"},
                  {"input", input},
                  {"response", response},
                  {"lambda", format_double(lambda)},
                  {"nlambda", std::to_string(nlambda)},
                  {"lambda_ratio", format_double(lambda_ratio)},
                  {"weight_exponent", format_double(weight_exponent)},
                  {"penalize_intercept", penalize_intercept ? "1" : "0"},
                  {"kkt_tol", format_double(kkt_tol)},
                  {"max_iter", std::to_string(max_iter)},
                  {"seed", std::to_string(seed)}};  // thread count is not semantic config
  std::ofstream out = open_output(output);
  stamp.write_csv_header(out);
  out << "lambda,factor,level,coefficient\n";
  const auto& design = data.design;
  for (const auto& f : fits) {
    for (int c = 0; c < design.p; ++c) {
      const auto& tag = design.column_tags[c];
      const auto& levels = design.group_levels[tag.factor - 1];
      std::string level_name = levels.empty() ? "" : levels[tag.level];
      out << format_double(f.lambda) << ',' << csv_quote(design.group_names[tag.factor - 1])
          << ',' << csv_quote(level_name) << ',' << format_double(f.beta(c)) << "\n";
    }
  }
  bool all_converged = true;
  for (const auto& f : fits) all_converged = all_converged && f.converged;
  if (!all_converged) {
    std::cerr << json{{"error", "convergence"},
                      {"message", "some lambda values did not converge"}}
                     .dump()
              << "\n";
    return 1;
  }
  return 0;
}

int run_pdmr(const std::string& input, const std::string& response,
             const std::string& schema_path, double lambda_ic, bool ric, double sigma,
             int nlambda, double lambda_ratio, double weight_exponent, bool penalize_intercept,
             std::uint64_t seed, int threads, const std::string& output,
             const std::string& trace_path) {
  Dataset data = load_dataset(input, response, schema_path);
  WeightSpec weights;
  weights.exponent = weight_exponent;
  weights.penalize_intercept = penalize_intercept;
  LambdaNet net = make_lambda_net(data, weights, nlambda, lambda_ratio);

  PdmrOptions options;
  options.threads = threads;
  if (!ric && lambda_ic > 0) options.lambda_ic = lambda_ic;
  if (sigma > 0) options.sigma2 = sigma * sigma;
  SelectionResult selected = pdmr_net(data, net, weights, options);

  OutputStamp stamp;
  stamp.seed = seed;
  stamp.config = {{"cmd", "pdmr"},
                  {"input", input},
                  {"response", response},
                  {"lambda_ic", format_double(lambda_ic)},
                  {"ric", ric ? "1" : "0"},
                  {"sigma", format_double(sigma)},
                  {"nlambda", std::to_string(nlambda)},
                  {"lambda_ratio", format_double(lambda_ratio)},
                  {"weight_exponent", format_double(weight_exponent)},
                  {"penalize_intercept", penalize_intercept ? "1" : "0"},
                  {"seed", std::to_string(seed)}};

  FittedModel model = make_fitted_model(data.design, selected.chosen, selected.beta);
  model.seed = seed;
  model.config_hash = config_hash_hex(stamp.canonical());
  save_model(model, output);

  if (!trace_path.empty()) {
    std::ofstream trace = open_output(trace_path);
    stamp.write_csv_header(trace);
    trace << "dimension,lambda_index,loss,criterion\n";
    for (const auto& row : selected.table)
      trace << row.size << ',' << row.lambda_index << ',' << format_double(row.loss) << ','
            << format_double(row.criterion) << "\n";
  }
  return 0;
}

int run_predict(const std::string& model_path, const std::string& input,
                const std::string& output, bool unseen_as_reference, std::uint64_t seed) {
  FittedModel model = load_model(model_path);
  RawTable table = read_csv_file(input);
  Eigen::VectorXd predictions = predict_table(model, table, unseen_as_reference);

  OutputStamp stamp;
  stamp.seed = seed;
  stamp.config = {{"cmd", "predict"},
                  {"model", model_path},
                  {"input", input},
                  {"unseen_as_reference", unseen_as_reference ? "1" : "0"},
                  {"seed", std::to_string(seed)}};
  std::ofstream out = open_output(output);
  stamp.write_csv_header(out);
  out << "row,yhat\n";
  for (int i = 0; i < predictions.size(); ++i)
    out << i << ',' << format_double(predictions(i)) << "\n";
  return 0;
}

int run_simulate(int setting, double rho, const std::string& snr_list, int reps,
                 std::uint64_t seed, const std::string& method_name, const std::string& output,
                 int n_train, int n_test, int threads, int net_length, bool estimate_sigma,
                 int r_factors) {
  std::vector<double> snrs;
  std::stringstream ss(snr_list);
  std::string token;
  while (std::getline(ss, token, ',')) {
    double v;
    if (!parse_double(token, v)) throw InputError("bad SNR value: " + token);
    snrs.push_back(v);
  }
  if (snrs.empty()) throw InputError("no SNR values given");

  auto method = make_method(method_name);
  OutputStamp stamp;
  stamp.seed = seed;
  stamp.config = {{"cmd", "simulate"},
                  {"setting", std::to_string(setting)},
                  {"rho", format_double(rho)},
                  {"snr", snr_list},
                  {"reps", std::to_string(reps)},
                  {"seed", std::to_string(seed)},
                  {"method", method_name},
                  {"n_train", std::to_string(n_train)},
                  {"n_test", std::to_string(n_test)},
                  {"net_length", std::to_string(net_length)},
                  {"estimate_sigma", estimate_sigma ? "1" : "0"},
                  {"r_factors", std::to_string(r_factors)}};

  std::ofstream out = open_output(output);
  stamp.write_csv_header(out);
  out << "setting,rho,snr,rep,rmse,rmse_oracle,dim_selected,screened\n";
  for (double snr : snrs) {
    SimConfig config;
    config.setting = setting;
    config.rho = rho;
    config.snr = snr;
    config.n_train = n_train;
    config.n_test = n_test;
    config.reps = reps;
    config.seed = seed;
    config.threads = threads;
    config.net_length = net_length;
    config.estimate_sigma = estimate_sigma;
    config.r_factors = r_factors;
    SimResult result = run(config, *method);
    for (int rep = 0; rep < reps; ++rep) {
      const auto& row = result.reps[rep];
      if (row.failed) continue;  // failures excluded, count reported on stderr
      out << setting << ',' << format_double(rho) << ',' << format_double(snr) << ',' << rep
          << ',' << format_double(row.rmse) << ',' << format_double(row.rmse_oracle) << ','
          << row.dim_selected << ',' << (row.screened ? 1 : 0) << "\n";
    }
    if (result.failures > 0)
      std::cerr << "snr " << snr << ": " << result.failures << " failed replications excluded\n";
  }
  return 0;
}

int run_diagnose(int setting, double rho, double snr, int reps, std::uint64_t seed,
                 const std::string& output, int n_train, int cif_budget,
                 long long max_submodels) {
  TheoryReport report =
      diagnose_setting(setting, rho, snr, reps, seed, n_train, cif_budget, max_submodels);
  OutputStamp stamp;
  stamp.seed = seed;
  stamp.config = {{"cmd", "diagnose"},       {"setting", std::to_string(setting)},
                  {"rho", format_double(rho)}, {"snr", format_double(snr)},
                  {"reps", std::to_string(reps)}, {"seed", std::to_string(seed)},
                  {"n_train", std::to_string(n_train)}};

  json doc;
  doc["version"] = kVersion;
  doc["seed"] = seed;
  doc["config_hash"] = config_hash_hex(stamp.canonical());
  doc["setting"] = report.setting;
  doc["rho"] = report.rho;
  doc["snr"] = report.snr;
  doc["sigma"] = report.sigma;
  doc["n"] = report.n;
  doc["p"] = report.p;
  doc["size_true"] = report.size_true;
  doc["x_min"] = report.x_min;
  doc["x_max"] = report.x_max;
  doc["zeta_upper"] = report.zeta_upper;
  doc["zeta_note"] = "sampling upper estimate; condition checks using it are optimistic";
  doc["f_q"] = report.f_q;
  doc["delta_gap"] = report.delta_gap;
  if (report.kl_exact) doc["kl_scaled"] = report.kl_scaled;
  else doc["kl_scaled"] = nullptr;  // enumeration exploded at this scale
  doc["lambda_ric"] = report.lambda;
  doc["condition9"] = {{"lhs", report.condition9.lhs},
                       {"rhs", report.condition9.rhs},
                       {"satisfiable", report.condition9.satisfiable},
                       {"holds", report.condition9.holds},
                       {"prob_bound", report.condition9.prob_bound}};
  doc["coverage"] = {{"true_in_family", report.freq_true_in_family},
                     {"selected_strictly_below", report.freq_selected_strictly_below},
                     {"reps", report.reps}};
  std::ofstream out = open_output(output);
  out << doc.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"partition selection for linear regression with categorical predictors"};
  app.require_subcommand(1);

  // fit
  std::string input, response, schema_path, output = "fit.csv";
  double lambda = 0;
  int nlambda = 0;
  double lambda_ratio = 0;
  double weight_exponent = 1.0;
  bool penalize_intercept = true;
  double kkt_tol = 1e-5;
  int max_iter = 100000;
  std::uint64_t seed = 1;
  auto* fit_cmd = app.add_subcommand("fit", "weighted group lasso over one lambda or a net");
  fit_cmd->add_option("--input", input)->required();
  fit_cmd->add_option("--response", response)->required();
  fit_cmd->add_option("--schema", schema_path);
  fit_cmd->add_option("--lambda", lambda);
  fit_cmd->add_option("--nlambda", nlambda);
  fit_cmd->add_option("--lambda-ratio", lambda_ratio);
  fit_cmd->add_option("--weight-exponent", weight_exponent);
  fit_cmd->add_option("--penalize-intercept", penalize_intercept);
  fit_cmd->add_option("--kkt-tol", kkt_tol);
  fit_cmd->add_option("--max-iter", max_iter);
  fit_cmd->add_option("--seed", seed);
  fit_cmd->add_option("--output", output);

  // pdmr
  std::string p_input, p_response, p_schema, p_output = "model.json", p_trace;
  double p_lambda_ic = 0, p_sigma = 0;
  bool p_ric = false;
  int p_nlambda = 0, p_threads = 1;
  double p_ratio = 0, p_exponent = 1.0;
  bool p_penalize = true;
  std::uint64_t p_seed = 1;
  auto* pdmr_cmd = app.add_subcommand("pdmr", "screen, fuse levels, select, refit");
  pdmr_cmd->add_option("--input", p_input)->required();
  pdmr_cmd->add_option("--response", p_response)->required();
  pdmr_cmd->add_option("--schema", p_schema);
  pdmr_cmd->add_option("--lambda-ic", p_lambda_ic);
  pdmr_cmd->add_flag("--ric", p_ric);
  pdmr_cmd->add_option("--sigma", p_sigma);
  pdmr_cmd->add_option("--nlambda", p_nlambda);
  pdmr_cmd->add_option("--lambda-ratio", p_ratio);
  pdmr_cmd->add_option("--weight-exponent", p_exponent);
  pdmr_cmd->add_option("--penalize-intercept", p_penalize);
  pdmr_cmd->add_option("--seed", p_seed);
  pdmr_cmd->add_option("--threads", p_threads);
  pdmr_cmd->add_option("--output", p_output);
  pdmr_cmd->add_option("--trace", p_trace);

  // predict
  std::string d_model, d_input, d_output = "predictions.csv";
  bool d_unseen = false;
  std::uint64_t d_seed = 1;
  auto* predict_cmd = app.add_subcommand("predict", "fitted values from a model.json");
  predict_cmd->add_option("--model", d_model)->required();
  predict_cmd->add_option("--input", d_input)->required();
  predict_cmd->add_option("--output", d_output);
  predict_cmd->add_flag("--unseen-as-reference", d_unseen);
  predict_cmd->add_option("--seed", d_seed);

  // simulate
  int s_setting = 1, s_reps = 20, s_ntrain = 500, s_ntest = 10000, s_threads = 1,
      s_netlen = 30, s_rfactors = 100;
  double s_rho = 0;
  std::string s_snr = "1", s_method = "pdmr", s_out = "results.csv";
  std::uint64_t s_seed = 1;
  bool s_estimate_sigma = false;
  auto* sim_cmd = app.add_subcommand("simulate", "benchmark settings 1..6");
  sim_cmd->add_option("--setting", s_setting);
  sim_cmd->add_option("--rho", s_rho);
  sim_cmd->add_option("--snr", s_snr);
  sim_cmd->add_option("--reps", s_reps);
  sim_cmd->add_option("--seed", s_seed);
  sim_cmd->add_option("--method", s_method);
  sim_cmd->add_option("--out", s_out);
  sim_cmd->add_option("--n-train", s_ntrain);
  sim_cmd->add_option("--n-test", s_ntest);
  sim_cmd->add_option("--threads", s_threads);
  sim_cmd->add_option("--net-length", s_netlen);
  sim_cmd->add_flag("--estimate-sigma", s_estimate_sigma);
  sim_cmd->add_option("--r-factors", s_rfactors);

  // diagnose
  int g_setting = 1, g_reps = 20, g_ntrain = 500, g_budget = 400;
  double g_rho = 0, g_snr = 1;
  long long g_max_submodels = 2000000;
  std::string g_out = "report.json";
  std::uint64_t g_seed = 1;
  auto* diag_cmd = app.add_subcommand("diagnose", "theory report for a setting");
  diag_cmd->add_option("--setting", g_setting);
  diag_cmd->add_option("--rho", g_rho);
  diag_cmd->add_option("--snr", g_snr);
  diag_cmd->add_option("--reps", g_reps);
  diag_cmd->add_option("--seed", g_seed);
  diag_cmd->add_option("--out", g_out);
  diag_cmd->add_option("--n-train", g_ntrain);
  diag_cmd->add_option("--cif-budget", g_budget);
  diag_cmd->add_option("--max-submodels", g_max_submodels);

  CLI11_PARSE(app, argc, argv);

  try {
    if (fit_cmd->parsed())
      return run_fit(input, response, schema_path, lambda, nlambda, lambda_ratio,
                     weight_exponent, penalize_intercept, kkt_tol, max_iter, seed, output);
    if (pdmr_cmd->parsed())
      return run_pdmr(p_input, p_response, p_schema, p_lambda_ic, p_ric, p_sigma, p_nlambda,
                      p_ratio, p_exponent, p_penalize, p_seed, p_threads, p_output, p_trace);
    if (predict_cmd->parsed()) return run_predict(d_model, d_input, d_output, d_unseen, d_seed);
    if (sim_cmd->parsed())
      return run_simulate(s_setting, s_rho, s_snr, s_reps, s_seed, s_method, s_out, s_ntrain,
                          s_ntest, s_threads, s_netlen, s_estimate_sigma, s_rfactors);
    if (diag_cmd->parsed())
      return run_diagnose(g_setting, g_rho, g_snr, g_reps, g_seed, g_out, g_ntrain, g_budget,
                          g_max_submodels);
  } catch (const ConvergenceError& err) {
    std::cerr << nlohmann::json{{"error", "convergence"}, {"message", err.what()}}.dump() << "\n";
    return 1;
  } catch (const InputError& err) {
    std::cerr << nlohmann::json{{"error", "input"}, {"message", err.what()}}.dump() << "\n";
    return 2;
  } catch (const std::exception& err) {
    std::cerr << nlohmann::json{{"error", "internal"}, {"message", err.what()}}.dump() << "\n";
    return 3;
  }
  return 0;
}
