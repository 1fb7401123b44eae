#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

#include "fusereg/schema.hpp"

namespace fusereg {

/// Fused model M = (P_1, ..., P_r). Each categorical factor holds a set
/// partition of its levels {0..p_k} stored as a restricted-growth string:
/// rgs[level] = cluster id, ids numbered by first occurrence, so the cluster
/// containing level 0 is id 0. Continuous predictors carry an in/out flag.
///
/// size(M) = j_1 + sum_{k>=2}(j_k - 1) + #included continuous, where j_k is
/// the number of clusters of factor k: every cluster of factor 1 has a free
/// coefficient, while for k >= 2 the cluster absorbing the reference level
/// is pinned to zero.
struct PartitionModel {
  std::vector<std::vector<int>> factor_rgs;  // empty for continuous factors
  std::vector<bool> continuous_included;     // aligned with factors

  bool operator==(const PartitionModel&) const = default;

  int n_factors() const { return static_cast<int>(factor_rgs.size()); }
  int n_clusters(int factor) const;
  bool is_categorical(int factor) const { return !factor_rgs[factor - 1].empty(); }
  /// Clusters of a factor as level lists, ordered by cluster id.
  std::vector<std::vector<int>> clusters(int factor) const;
};

int model_size(const PartitionModel& model);

/// Canonicalize an arbitrary cluster-id labelling into restricted-growth form.
std::vector<int> canonical_rgs(const std::vector<int>& labels);

/// Model with every level its own cluster on the given factors and all
/// other factors fully merged (deleted); continuous flags as given.
PartitionModel discrete_model(const DesignMatrix& design, const std::vector<int>& active_factors);

/// Intercept-only model: every factor fully merged, continuous all excluded.
PartitionModel intercept_only(const DesignMatrix& design);

/// The smallest model containing beta: levels with equal coefficients share
/// a cluster (the implicit reference coefficient 0 participates for k >= 2);
/// a continuous predictor is included iff its coefficient is nonzero.
PartitionModel model_of(const Eigen::VectorXd& beta, const DesignMatrix& design,
                        double tol = 0.0);

/// True iff sub is a submodel of super (possibly equal): every partition of
/// sub coarsens the matching partition of super and sub's continuous support
/// is contained in super's.
bool is_submodel(const PartitionModel& sub, const PartitionModel& super);

struct ClusterColumn {
  int factor = 0;
  int cluster = 0;        // cluster id within the factor
  int smallest_level = 0; // -1 for a continuous column
};

/// Z = X A1_M: the design with the columns of each cluster summed, the
/// reference-absorbing cluster of every factor k >= 2 dropped, and included
/// continuous columns kept. Columns ordered by (factor, smallest level).
struct CollapsedDesign {
  Eigen::MatrixXd z;                   // n x m
  std::vector<int> carrier;            // design column -> Z column, -1 when absorbed
  std::vector<ClusterColumn> columns;  // Z column -> provenance
};

CollapsedDesign collapse(const PartitionModel& model, const DesignMatrix& design);

/// Expand collapsed coefficients back to the p design columns.
Eigen::VectorXd expand(const CollapsedDesign& collapsed, const Eigen::VectorXd& xi, int p);

struct RefitResult {
  Eigen::VectorXd xi;    // m collapsed coefficients
  Eigen::VectorXd beta;  // p expanded coefficients
  double loss = 0;       // ||X beta||^2/2 - y'X beta
  PartitionModel model;
};

/// Constrained least squares on L_M done as an unconstrained fit on the
/// collapsed design. Throws Overparameterized when size(M) > n and
/// RankDeficient when rank(Z) < size(M).
RefitResult refit(const PartitionModel& model, const Dataset& data);

/// The (p - m) x p constraint matrix whose kernel is L_M, in the block form
/// (B_M | I). Rows state beta_{j,k} = beta_{s,k} for every non-smallest
/// member j of a cluster with smallest member s, or beta_{j,k} = 0 when the
/// cluster absorbs the reference of a factor k >= 2. The column order is the
/// model-induced reordering of the design columns: first one column per
/// free cluster, then the remaining coefficients.
///
/// `cluster_orders`, when non-empty, fixes the ordering of each factor's
/// clusters (a permutation of cluster ids per factor); the default is id
/// order. The matrix depends on this choice only up to row/column
/// permutation.
struct ConstraintSystem {
  Eigen::MatrixXd a0;                  // (p - m) x p
  std::vector<int> column_order;       // reordered position -> design column
  int m = 0;
};

ConstraintSystem constraint_matrix(const PartitionModel& model, const DesignMatrix& design,
                                   const std::vector<std::vector<int>>& cluster_orders = {});

/// All proper coarsenings of the model (additional merges, continuous
/// deletions), each exactly once. Throws Exploded when the count would pass
/// max_count. Intended for desk-scale true models.
std::vector<PartitionModel> enumerate_submodels(const PartitionModel& model,
                                                long long max_count);

/// Streaming form of the enumeration; the materializing version wraps it.
void for_each_submodel(const PartitionModel& model, long long max_count,
                       const std::function<void(const PartitionModel&)>& visit);

}  // namespace fusereg
