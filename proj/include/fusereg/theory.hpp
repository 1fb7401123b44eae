#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "fusereg/partition.hpp"
#include "fusereg/schema.hpp"

namespace fusereg {

// ---- Set-partition combinatorics ------------------------------------------

/// Stirling number of the second kind, exact integer arithmetic; n <= 25
/// keeps everything inside 64 bits (throws Overflow beyond).
std::uint64_t stirling2(int n, int k);
std::uint64_t bell(int n);

/// Touchard polynomial sum_k {n k} x^k = E K(x)^n for K(x) ~ Poisson(x).
/// Exact summation for n <= 25, log-space evaluation beyond.
double touchard(int n, double x);

struct PoissonMomentBound {
  double exact = 0;   // E[K(x)/x]^n = touchard(n, x)/x^n
  double bound1 = 0;  // ((n/x)/log(1 + n/x))^n
  double bound2 = 0;  // exp(n^2/(2x))
};
PoissonMomentBound poisson_moment_bound(int n, double x);

// ---- Estimation-error geometry ---------------------------------------------

/// f(q) = x_m^{-2} (x_M/x_m)^{max(0, |2q-3|-1)}; for an orthogonal design
/// with weights ||x||^q it bounds x_W^2 / zeta^2, minimized exactly on
/// q in [1, 2].
double weight_bound_f(double q, double x_m, double x_M);

/// Membership in the cone C_{a,W}: sum over non-support groups of
/// ||W_k v_k|| <= sum over support groups + a |W v|_1.
bool in_cone(const DesignMatrix& design, const Eigen::VectorXd& weights, double a,
             const std::vector<int>& support, const Eigen::VectorXd& v);

struct ConeSample {
  double a = 0;
  Eigen::VectorXd weights;
  std::vector<int> support;
  std::vector<Eigen::VectorXd> vectors;  // all satisfy the cone inequality
};

/// Upper estimate of the cone invertibility factor
/// zeta = inf over the cone of |W^{-1} X'X v|_inf / |v|_inf, from seeded
/// one/two-coordinate candidates, random cone samples and (for small p)
/// coordinate-descent refinement. Deterministic under the seed. The true
/// infimum is intractable, so the value is an optimistic plug-in.
double cif_estimate(const DesignMatrix& design, const Eigen::VectorXd& weights, double a,
                    const std::vector<int>& support, int budget, std::uint64_t seed,
                    ConeSample* samples = nullptr);

/// Empirical coverage of the sup-norm error bound on an orthogonal design:
/// fraction of replications with |bhat - b|_inf <= (1+a) lambda / x_m at
/// lambda^2 = 2 a^{-2} sigma^2 x_W^2 log(2p/alpha), default weights.
/// Expected >= 1 - alpha. sigma = 0 degenerates to the least-squares fit.
double lemma1_coverage(const DesignMatrix& design, const Eigen::VectorXd& beta_true, double sigma,
                       double a, double alpha, int reps, std::uint64_t seed);

struct DeltaResult {
  double gap_min = 0;    // smallest within-factor gap between unequal true coefficients
  double kl_scaled = 0;  // min over proper submodels of ||(I-H_M) X b||^2 / (|T|-|M|)
  long long submodels = 0;
};

/// Exact by enumeration of the proper submodels of the true model.
DeltaResult delta_true(const DesignMatrix& design, const Eigen::VectorXd& beta_true,
                       const PartitionModel& model_true, long long max_submodels);

double coefficient_gap_min(const DesignMatrix& design, const Eigen::VectorXd& beta_true);

struct Condition9 {
  double lhs = 0;         // 2 a^{-2} sigma^2 log(|T|^2/(2 log 2))
  double rhs = 0;         // min(Delta^2 zeta^2, 4 delta) / (16 (1+a)^2)
  bool satisfiable = false;  // lhs < rhs, some admissible lambda exists
  bool holds = false;        // lhs <= lambda^2 < rhs at the given lambda
  double prob_bound = 0;     // (2p + |T|^2) exp(-a^2 lambda^2 / (2 sigma^2))
};

Condition9 theorem1_condition(double lambda, double a, double sigma, double delta_gap,
                              double zeta_a, double kl_scaled, int size_true, int p);

// ---- Cone factor comparison (numerical-predictor cone) ---------------------

struct ConeFactors {
  double re = 0;        // restricted eigenvalue
  double ka = 0;        // compatibility factor
  double zeta_inf = 0;  // unweighted CIF at q = infinity
};

/// Sampling upper estimates of the three factors on the coordinate cone
/// |theta_{T'}|_1 <= (1+a)/(1-a) |theta_T|_1. Diagnostics only.
ConeFactors cone_factor_estimates(const Eigen::MatrixXd& x, const std::vector<int>& support,
                                  double a, int budget, std::uint64_t seed);

struct ErrorBounds {
  double r1 = 0;  // l1 bound via the compatibility factor
  double r2 = 0;  // l2 bound via the restricted eigenvalue
  double r3 = 0;  // sup-norm bound via the CIF
};

ErrorBounds error_bounds(const ConeFactors& factors, int support_size, double a, double lambda);

// ---- Per-setting diagnostic report ------------------------------------------

struct TheoryReport {
  int setting = 0;
  double rho = 0, snr = 0, sigma = 0;
  int n = 0, p = 0, size_true = 0;
  double x_min = 0, x_max = 0;
  double zeta_upper = 0;
  double f_q = 0;             // f at the run's weight exponent
  double delta_gap = 0;       // +inf when no factor has unequal coefficients
  double kl_scaled = 0;       // NaN when enumeration exploded
  bool kl_exact = false;
  double lambda = 0;          // RIC lambda used in the checks
  Condition9 condition9;
  double freq_true_in_family = 0;  // empirical event frequencies over reps
  double freq_selected_strictly_below = 0;
  int reps = 0;
};

TheoryReport diagnose_setting(int setting, double rho, double snr, int reps, std::uint64_t seed,
                              int n_train = 500, int cif_budget = 400,
                              long long max_submodels = 2000000);

}  // namespace fusereg
