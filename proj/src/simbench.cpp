#include "fusereg/simbench.hpp"

#include <algorithm>
#include <cmath>

#include "fusereg/errors.hpp"
#include "fusereg/grouplasso.hpp"
#include "fusereg/parallel.hpp"
#include "fusereg/pdmr.hpp"

namespace fusereg {

namespace {

// per-factor coefficient pattern over the 23 non-reference levels
std::vector<double> repeat_blocks(const std::vector<std::pair<double, int>>& blocks) {
  std::vector<double> out;
  for (const auto& [value, count] : blocks)
    out.insert(out.end(), count, value);
  return out;
}

struct SettingLayout {
  std::vector<std::pair<std::vector<double>, std::vector<int>>> groups;  // pattern -> factors
};

SettingLayout setting_layout(int setting) {
  const auto a = repeat_blocks({{0, 7}, {2, 8}, {4, 8}});
  const auto b = repeat_blocks({{0, 15}, {5, 8}});
  const auto c = repeat_blocks({{0, 9}, {2, 4}, {4, 10}});
  const auto d = repeat_blocks({{0, 5}, {2, 6}, {4, 6}, {6, 6}});
  const auto e = repeat_blocks({{0, 4}, {1, 5}, {2, 4}, {3, 5}, {4, 5}});
  const auto f = repeat_blocks({{0, 3}, {2, 12}, {4, 8}});
  SettingLayout layout;
  switch (setting) {
    case 1:
      layout.groups = {{a, {2, 3}}, {b, {4, 5, 6}}};
      break;
    case 2:
      layout.groups = {{a, {2, 3}}, {c, {4, 5, 6}}};
      break;
    case 3:
      layout.groups = {{d, {2, 3, 4, 5}}};
      break;
    case 4:
      layout.groups = {{e, {2, 3, 4, 5}}};
      break;
    case 5:
      layout.groups = {{f, {2, 3, 4, 5, 6, 7, 8, 9, 10}}};
      break;
    case 6: {
      std::vector<int> factors;
      for (int k = 2; k <= 25; ++k) factors.push_back(k);
      layout.groups = {{b, factors}};
      break;
    }
    default:
      throw InputError("setting must be 1..6");
  }
  return layout;
}

std::string level_label(int j) {
  // two-digit labels keep them categorical-looking and sortable
  std::string s = std::to_string(j + 1);
  return s.size() < 2 ? "0" + s : s;
}

std::string factor_label(int k) {
  std::string s = std::to_string(k);
  while (s.size() < 3) s = "0" + s;
  return "f" + s;
}

}  // namespace

SettingSpec setting_beta(int setting, int r, int levels) {
  if (levels != 24)
    throw InputError("the benchmark settings are defined on 24 levels per factor");
  SettingLayout layout = setting_layout(setting);
  int max_factor = 1;
  for (const auto& [pattern, factors] : layout.groups)
    max_factor = std::max(max_factor, *std::max_element(factors.begin(), factors.end()));
  if (r < max_factor)
    throw InputError("setting " + std::to_string(setting) + " needs at least " +
                     std::to_string(max_factor) + " factors");

  SettingSpec spec;
  spec.setting = setting;
  spec.r = r;
  spec.levels = levels;
  for (int k = 1; k <= r; ++k) {
    Predictor pred;
    pred.name = factor_label(k);
    pred.kind = PredictorKind::categorical;
    for (int j = 0; j < levels; ++j) pred.levels.push_back(level_label(j));
    spec.schema.predictors.push_back(std::move(pred));
  }

  // per-factor coefficients over levels 0..23; factor 1 is (0, pattern of
  // factor 2), every unlisted factor is zero
  std::vector<std::vector<double>> level_coef(r, std::vector<double>(levels, 0.0));
  for (const auto& [pattern, factors] : layout.groups)
    for (int k : factors)
      for (int j = 1; j < levels; ++j) level_coef[k - 1][j] = pattern[j - 1];
  level_coef[0] = level_coef[1];  // beta_1 = (0, beta_2)

  const int p = levels + (r - 1) * (levels - 1);
  spec.beta = Eigen::VectorXd::Zero(p);
  int col = 0;
  for (int k = 1; k <= r; ++k) {
    int first = (k == 1) ? 0 : 1;
    for (int j = first; j < levels; ++j) spec.beta(col++) = level_coef[k - 1][j];
  }

  spec.true_model.factor_rgs.resize(r);
  spec.true_model.continuous_included.assign(r, false);
  for (int k = 1; k <= r; ++k) {
    std::vector<int> labels(levels, -1);
    int next = 0;
    for (int j = 0; j < levels; ++j) {
      if (labels[j] >= 0) continue;
      labels[j] = next;
      for (int j2 = j + 1; j2 < levels; ++j2)
        if (labels[j2] < 0 && level_coef[k - 1][j2] == level_coef[k - 1][j]) labels[j2] = next;
      ++next;
    }
    spec.true_model.factor_rgs[k - 1] = canonical_rgs(labels);
  }
  spec.dimension = model_size(spec.true_model);
  return spec;
}

Eigen::MatrixXd gen_uniform_scores(int r, double rho, int n, CounterRng rng) {
  if (!(rho >= 0 && rho < 1)) throw InputError("rho must be in [0, 1)");
  const double latent = 2.0 * std::sin(M_PI * rho / 6.0);  // Pearson copula identity
  const double shared = std::sqrt(latent);
  const double own = std::sqrt(1.0 - latent);
  Eigen::MatrixXd out(n, r);
  for (int i = 0; i < n; ++i) {
    double common = (latent > 0) ? rng.gaussian() : 0.0;
    for (int k = 0; k < r; ++k) {
      double z = shared * common + own * rng.gaussian();
      out(i, k) = 0.5 * std::erfc(-z / std::sqrt(2.0));
    }
  }
  return out;
}

Eigen::MatrixXi gen_design(int r, int levels, double rho, int n, CounterRng rng) {
  Eigen::MatrixXd scores = gen_uniform_scores(r, rho, n, std::move(rng));
  Eigen::MatrixXi out(n, r);
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < r; ++k) {
      int category = static_cast<int>(std::ceil(levels * scores(i, k)));
      out(i, k) = std::clamp(category, 1, levels) - 1;
    }
  }
  return out;
}

Dataset draw_setting_dataset(const SettingSpec& spec, double rho, int n, CounterRng rng) {
  for (int attempt = 0; attempt < 200; ++attempt) {
    Eigen::MatrixXi draw = gen_design(spec.r, spec.levels, rho, n, rng.split(attempt));
    bool covered = true;
    for (int k = 0; k < spec.r && covered; ++k) {
      std::vector<int> counts(spec.levels, 0);
      for (int i = 0; i < n; ++i) ++counts[draw(i, k)];
      for (int c : counts)
        if (c == 0) {
          covered = false;
          break;
        }
    }
    if (!covered) continue;
    IndexedTable table;
    table.levels = draw;
    table.continuous.resize(n, 1);
    table.continuous_slot.assign(spec.r, -1);
    return encode_indexed(table, spec.schema, Eigen::VectorXd::Zero(n));
  }
  throw InputError("could not draw a design covering every level; increase n");
}

Eigen::MatrixXd level_coefficient_table(const Eigen::VectorXd& beta, const DesignMatrix& design) {
  int max_levels = 0;
  for (int k = 1; k <= design.r; ++k) max_levels = std::max(max_levels, design.levels_of(k));
  Eigen::MatrixXd table = Eigen::MatrixXd::Zero(max_levels, design.r);
  for (int c = 0; c < design.p; ++c) {
    const auto& tag = design.column_tags[c];
    table(tag.level, tag.factor - 1) = beta(c);
  }
  return table;
}

namespace {

Eigen::VectorXd predict_levels(const Eigen::MatrixXd& table, const Eigen::MatrixXi& levels) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(levels.rows());
  for (int i = 0; i < levels.rows(); ++i)
    for (int k = 0; k < levels.cols(); ++k) out(i) += table(levels(i, k), k);
  return out;
}

class OracleMethod : public SimMethod {
 public:
  std::string name() const override { return "oracle"; }
  MethodFit fit(const Dataset& train, const SimContext& ctx) const override {
    RefitResult refitted = refit(ctx.spec->true_model, train);
    return {refitted.beta, model_size(ctx.spec->true_model), true};
  }
};

class PdmrMethod : public SimMethod {
 public:
  std::string name() const override { return "pdmr"; }
  MethodFit fit(const Dataset& train, const SimContext& ctx) const override {
    WeightSpec weights;
    LambdaNet net =
        make_lambda_net(train, weights, ctx.config->net_length, ctx.config->net_ratio);
    PdmrOptions options;
    if (!ctx.config->estimate_sigma) options.sigma2 = ctx.sigma * ctx.sigma;
    bool screened = false;
    const PartitionModel& truth = ctx.spec->true_model;
    // screening event: the true model survives inside some family member,
    // i.e. no active factor or true distinction has been lost at that cut
    options.family_observer = [&](int, const NestedFamily& family) {
      if (screened) return;
      for (const auto& member : family.models)
        if (is_submodel(truth, member)) {
          screened = true;
          return;
        }
    };
    SelectionResult selected = pdmr_net(train, net, weights, options);
    return {selected.beta, model_size(selected.chosen), screened};
  }
};

class GroupLassoMethod : public SimMethod {
 public:
  std::string name() const override { return "grouplasso"; }
  MethodFit fit(const Dataset& train, const SimContext& ctx) const override {
    WeightSpec weights;
    LambdaNet net =
        make_lambda_net(train, weights, ctx.config->net_length, ctx.config->net_ratio);
    std::vector<GroupLassoFit> path = fit_path(train, net, weights);
    double sigma2 = ctx.sigma * ctx.sigma;
    double lambda_ic = ric_lambda(sigma2, train.design.p);
    // same penalized-loss rule, dimension = number of nonzero coefficients
    int best = -1;
    double best_criterion = 0;
    std::vector<int> dims(path.size(), 0);
    for (int i = 0; i < static_cast<int>(path.size()); ++i) {
      if (!path[i].converged) continue;
      int dim = static_cast<int>((path[i].beta.array() != 0.0).count());
      dims[i] = dim;
      double criterion = loss_value(train.design, path[i].beta, train.response) +
                         0.5 * lambda_ic * lambda_ic * dim;
      if (best < 0 || criterion < best_criterion) {
        best = i;
        best_criterion = criterion;
      }
    }
    if (best < 0) throw NoConvergence(path.empty() ? GroupLassoFit{} : path.back());
    return {path[best].beta, dims[best], false};
  }
};

}  // namespace

std::unique_ptr<SimMethod> make_method(const std::string& name) {
  if (name == "pdmr") return std::make_unique<PdmrMethod>();
  if (name == "grouplasso") return std::make_unique<GroupLassoMethod>();
  if (name == "oracle") return std::make_unique<OracleMethod>();
  throw InputError("unknown method: " + name);
}

SimResult run(const SimConfig& config, const SimMethod& method) {
  SettingSpec spec = setting_beta(config.setting, config.r_factors, config.levels);
  CounterRng root(config.seed);

  SimResult result;
  result.reps.resize(config.reps);
  parallel_for(config.reps, config.threads, [&](std::size_t rep) {
    RepResult& slot = result.reps[rep];
    CounterRng rng = root.split(rep + 1);
    try {
      Dataset train = draw_setting_dataset(spec, config.rho, config.n_train, rng.split(0));
      Eigen::VectorXd mean = train.design.values * spec.beta;
      double mu_bar = mean.mean();
      double var = (mean.array() - mu_bar).square().sum() / (config.n_train - 1);
      double sigma = std::sqrt(var / config.snr);

      CounterRng noise = rng.split(1);
      train.response = mean;
      for (int i = 0; i < config.n_train; ++i) train.response(i) += sigma * noise.gaussian();

      Eigen::MatrixXi test_levels =
          gen_design(spec.r, spec.levels, config.rho, config.n_test, rng.split(2));
      Eigen::MatrixXd truth_table = level_coefficient_table(spec.beta, train.design);
      Eigen::VectorXd test_mean = predict_levels(truth_table, test_levels);
      CounterRng test_noise = rng.split(3);
      Eigen::VectorXd test_y = test_mean;
      for (int i = 0; i < config.n_test; ++i) test_y(i) += sigma * test_noise.gaussian();

      SimContext ctx{sigma, &spec, &config};
      MethodFit fitted = method.fit(train, ctx);
      Eigen::VectorXd predictions =
          predict_levels(level_coefficient_table(fitted.beta, train.design), test_levels);
      slot.rmse = std::sqrt((predictions - test_y).squaredNorm() / config.n_test);

      RefitResult oracle = refit(spec.true_model, train);
      Eigen::VectorXd oracle_pred =
          predict_levels(level_coefficient_table(oracle.beta, train.design), test_levels);
      slot.rmse_oracle = std::sqrt((oracle_pred - test_y).squaredNorm() / config.n_test);

      slot.dim_selected = fitted.dimension;
      slot.screened = fitted.screened;
    } catch (const Error&) {
      slot.failed = true;
    }
  });

  // order-independent reduction over the per-rep slots
  double sum = 0, sum_sq = 0;
  int count = 0, screened = 0;
  for (const auto& rep : result.reps) {
    if (rep.failed) {
      ++result.failures;
      continue;
    }
    double rel = rep.rmse / rep.rmse_oracle;
    sum += rel;
    sum_sq += rel * rel;
    if (rep.screened) ++screened;
    ++count;
  }
  if (count > 0) {
    result.mean_rel_rmse = sum / count;
    if (count > 1) {
      double var = (sum_sq - sum * sum / count) / (count - 1);
      result.se_rel_rmse = std::sqrt(std::max(var, 0.0) / count);
    }
    result.screening_freq = static_cast<double>(screened) / count;
  }
  return result;
}

}  // namespace fusereg
