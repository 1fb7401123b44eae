#pragma once

#include <Eigen/Dense>
#include <functional>
#include <optional>
#include <vector>

#include "fusereg/grouplasso.hpp"
#include "fusereg/partition.hpp"
#include "fusereg/schema.hpp"

namespace fusereg {

/// Complete-linkage dendrogram over the levels of one screened factor.
/// Leaves are the p_k + 1 level coefficients (the reference coefficient 0 is
/// adjoined for factors k >= 2); the dissimilarity is |beta_j1 - beta_j2|
/// and the inter-cluster distance is the maximum pairwise difference.
/// Equal-height ties merge the pair with the lowest smallest member level.
struct DendrogramMerge {
  double height = 0;
  std::vector<int> levels_a;  // members of the two merged clusters
  std::vector<int> levels_b;
  int smallest_level = 0;     // min over both sides, the tie-break key
};

struct Dendrogram {
  int factor = 0;
  int leaves = 0;
  std::vector<DendrogramMerge> merges;  // leaves - 1, heights nondecreasing
  std::vector<double> cutting_heights;  // the merge heights
};

Dendrogram cluster_factor(const GroupLassoFit& fit, int factor, const DesignMatrix& design);

/// Nested family M_0 (discrete on the active set) down to the
/// intercept-only model, one merge per step in globally sorted height order.
struct NestedFamily {
  std::vector<PartitionModel> models;
  std::vector<double> heights;  // leading 0 for M_0
  std::vector<int> sizes;       // strictly decreasing by 1
};

NestedFamily build_family(const GroupLassoFit& fit, const DesignMatrix& design);

struct CandidateScore {
  int size = 0;
  double loss = 0;
  double criterion = 0;
  bool feasible = false;
  int lambda_index = -1;  // net position the candidate came from, -1 for single-lambda
};

struct SelectionResult {
  PartitionModel chosen;
  Eigen::VectorXd beta;  // refit coefficients of the chosen model, length p
  double loss = 0;
  double criterion = 0;
  double lambda_ic = 0;
  double sigma2_used = 0;
  std::vector<CandidateScore> table;
  std::vector<PartitionModel> candidate_models;  // aligned with table
};

/// Penalized-loss selection over an explicit candidate list:
/// argmin loss(refit(M)) + lambda_ic^2/2 * |M|, infeasible members skipped,
/// ties resolved toward the smaller model.
SelectionResult select_models(const std::vector<PartitionModel>& candidates, const Dataset& data,
                              double lambda_ic, double sigma2);

SelectionResult select(const NestedFamily& family, const Dataset& data, double lambda_ic,
                       double sigma2);

/// lambda_ic of the Risk Inflation Criterion: lambda^2 = 2 sigma^2 log p.
double ric_lambda(double sigma2, int p);

struct PdmrOptions {
  std::optional<double> lambda_ic;  // explicit tuning; default RIC
  std::optional<double> sigma2;     // noise variance; estimated when absent
  FitOptions fit;
  int threads = 1;
  /// Observes each lambda's family as it is built (screening diagnostics).
  std::function<void(int, const NestedFamily&)> family_observer;
};

/// Single-penalty pipeline: screen at lambda, cluster, select with
/// lambda_ic (default: lambda itself, the single-tuning-parameter form).
SelectionResult pdmr_single(const Dataset& data, double lambda, const WeightSpec& weights,
                            double lambda_ic, double sigma2, const FitOptions& options = {});

/// Net scheme: (1) per lambda, group lasso + family; (2) per model
/// dimension, keep the candidate with minimal refit loss on the training
/// data; (3) select among the per-dimension winners by RIC; refit the
/// winner. Per-lambda convergence failures are recorded and skipped; the
/// call fails only when every lambda fails.
SelectionResult pdmr_net(const Dataset& data, const LambdaNet& net, const WeightSpec& weights,
                         const PdmrOptions& options = {});

}  // namespace fusereg
