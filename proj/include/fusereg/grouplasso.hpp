#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "fusereg/errors.hpp"
#include "fusereg/schema.hpp"

namespace fusereg {

/// Per-column penalty weights w_{j,k}. The default derives them from the
/// design, w = ||x||^q with q = 1, which makes the group penalty
/// lambda * sum_k ||W_k beta_k||. Factor 1 (the group holding the intercept
/// level) is penalized like any other unless penalize_intercept is cleared.
struct WeightSpec {
  double exponent = 1.0;
  std::optional<Eigen::VectorXd> explicit_weights;
  bool penalize_intercept = true;

  Eigen::VectorXd resolve(const DesignMatrix& design) const;
};

struct FitOptions {
  double kkt_tol = 1e-5;    // relative to lambda
  int max_iter = 100000;    // full block cycles
  double coord_tol = 1e-7;  // relative coordinate-change pre-filter
};

struct GroupLassoFit {
  double lambda = 0;
  Eigen::VectorXd beta;
  std::vector<int> active_set;  // factors k with beta_k != 0, ascending
  int iterations = 0;
  double kkt_gap = 0;  // max over groups of the KKT violation, absolute units
  double objective = 0;
  bool converged = false;
};

/// Thrown by fit() past max_iter; carries the best iterate and its gap.
class NoConvergence : public ConvergenceError {
 public:
  explicit NoConvergence(GroupLassoFit best)
      : ConvergenceError("group lasso did not converge within max_iter (kkt_gap " +
                         std::to_string(best.kkt_gap) + ")"),
        fit(std::move(best)) {}
  GroupLassoFit fit;
};

/// Decreasing geometric grid; values[0] = lambda_max (the smallest lambda
/// with a zero solution) and values[last] = ratio * lambda_max.
struct LambdaNet {
  std::vector<double> values;
  double lambda_max = 0;
  double ratio = 0;
  int length = 0;
};

double loss_value(const DesignMatrix& design, const Eigen::VectorXd& beta,
                  const Eigen::VectorXd& y);
Eigen::VectorXd loss_gradient(const DesignMatrix& design, const Eigen::VectorXd& beta,
                              const Eigen::VectorXd& y);
double objective_value(const DesignMatrix& design, const Eigen::VectorXd& beta,
                       const Eigen::VectorXd& y, double lambda, const Eigen::VectorXd& weights,
                       bool penalize_intercept);

/// KKT residual of a candidate solution: for inactive groups the excess of
/// ||W_k^{-1} grad_k|| over lambda, for active groups the norm of
/// W_k^{-1} grad_k + lambda W_k beta_k / ||W_k beta_k||.
double kkt_gap(const DesignMatrix& design, const Eigen::VectorXd& beta, const Eigen::VectorXd& y,
               double lambda, const Eigen::VectorXd& weights, bool penalize_intercept);

/// Weighted group lasso by cyclic block coordinate descent with per-block
/// majorization: each block step minimizes the Lipschitz surrogate plus the
/// group penalty exactly (a weighted group soft-threshold; with unequal
/// within-block weights the threshold scale is found by a guarded Newton
/// iteration). The cycle order 1..r is fixed and part of the determinism
/// contract. Throws ConvergenceError past max_iter, carrying no result;
/// fit_path instead records the best iterate with converged = false.
GroupLassoFit fit(const Dataset& data, double lambda, const WeightSpec& weights,
                  const FitOptions& options = {}, const Eigen::VectorXd* init = nullptr);

LambdaNet make_lambda_net(const Dataset& data, const WeightSpec& weights, int length = 0,
                          double ratio = 0);

/// Warm-started sweep over the net. Per-lambda convergence failures are
/// recorded in the fit (converged = false) without aborting the sweep.
std::vector<GroupLassoFit> fit_path(const Dataset& data, const LambdaNet& net,
                                    const WeightSpec& weights, const FitOptions& options = {});

}  // namespace fusereg
