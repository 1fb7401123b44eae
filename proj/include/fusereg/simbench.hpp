#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "fusereg/partition.hpp"
#include "fusereg/rng.hpp"
#include "fusereg/schema.hpp"

namespace fusereg {

/// One benchmark scenario: r categorical factors on a fixed number of
/// levels, a sparse fused coefficient vector and its induced true model.
struct SettingSpec {
  int setting = 0;
  int r = 0;
  int levels = 0;
  PredictorSchema schema;
  Eigen::VectorXd beta;  // aligned with the encoded design columns
  PartitionModel true_model;
  int dimension = 0;  // size of the true model
};

/// Settings 1..6 on r factors with 24 levels each (defaults r = 100,
/// p = 2301). The per-factor coefficient patterns are fixed; r only controls
/// how many inactive factors pad the design.
SettingSpec setting_beta(int setting, int r = 100, int levels = 24);

/// Uniform copula scores Phi(z) of latent equicorrelated normals with
/// off-diagonal 2 sin(pi rho / 6), so the scores have Pearson correlation
/// exactly rho.
Eigen::MatrixXd gen_uniform_scores(int r, double rho, int n, CounterRng rng);

/// Correlated categorical draw through the Gaussian copula: category
/// ceil(levels * Phi(z)) clamped to 1..levels, returned as 0-based level
/// indices (n x r).
Eigen::MatrixXi gen_design(int r, int levels, double rho, int n, CounterRng rng);

/// Encoded training draw; resamples until every (factor, level) pair occurs
/// so all column norms are positive. The response is left zero.
Dataset draw_setting_dataset(const SettingSpec& spec, double rho, int n, CounterRng rng);

/// Per-level coefficient lookup table, (levels x r): entry (j, k-1) is the
/// prediction contribution of level j of factor k under beta.
Eigen::MatrixXd level_coefficient_table(const Eigen::VectorXd& beta, const DesignMatrix& design);

struct SimConfig {
  int setting = 1;
  double rho = 0.0;
  double snr = 1.0;
  int n_train = 500;
  int n_test = 10000;
  int reps = 20;
  std::uint64_t seed = 1;
  int threads = 1;
  int net_length = 30;
  double net_ratio = 0.0;      // 0: default rule of the lambda net
  bool estimate_sigma = false; // methods otherwise receive the true sigma
  int r_factors = 100;
  int levels = 24;
};

struct SimContext {
  double sigma = 0;  // true noise level of this replication
  const SettingSpec* spec = nullptr;
  const SimConfig* config = nullptr;
};

struct MethodFit {
  Eigen::VectorXd beta;
  int dimension = 0;
  // true model contained in some family member at some lambda: screening
  // succeeded, nothing of the true structure was merged or dropped there
  bool screened = false;
};

class SimMethod {
 public:
  virtual ~SimMethod() = default;
  virtual std::string name() const = 0;
  virtual MethodFit fit(const Dataset& train, const SimContext& ctx) const = 0;
};

std::unique_ptr<SimMethod> make_method(const std::string& name);  // pdmr | grouplasso | oracle

struct RepResult {
  double rmse = 0;
  double rmse_oracle = 0;
  int dim_selected = 0;
  bool screened = false;
  bool failed = false;
};

struct SimResult {
  std::vector<RepResult> reps;
  double mean_rel_rmse = 0;
  double se_rel_rmse = 0;
  double screening_freq = 0;
  int failures = 0;
};

/// The replication protocol: fresh train and test draws from the same
/// copula, sigma set per replication so that var(X beta) / sigma^2 = snr,
/// oracle = least squares on the true partition, RMSE on the test response.
/// Replications run in parallel over derived seeds; identical config+seed
/// gives identical results at any thread count.
SimResult run(const SimConfig& config, const SimMethod& method);

}  // namespace fusereg
