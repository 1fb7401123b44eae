#include "fusereg/grouplasso.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>

#include "fusereg/errors.hpp"

namespace fusereg {

Eigen::VectorXd WeightSpec::resolve(const DesignMatrix& design) const {
  if (explicit_weights) {
    if (explicit_weights->size() != design.p)
      throw DimensionMismatch("explicit weight vector length != p");
    if ((explicit_weights->array() <= 0.0).any())
      throw InputError("weights must be strictly positive");
    return *explicit_weights;
  }
  return design.column_norms.array().pow(exponent);
}

double loss_value(const DesignMatrix& design, const Eigen::VectorXd& beta,
                  const Eigen::VectorXd& y) {
  Eigen::VectorXd xb = design.values * beta;
  return 0.5 * xb.squaredNorm() - y.dot(xb);
}

Eigen::VectorXd loss_gradient(const DesignMatrix& design, const Eigen::VectorXd& beta,
                              const Eigen::VectorXd& y) {
  return design.values.transpose() * (design.values * beta - y);
}

namespace {

struct GroupView {
  int offset = 0;
  int size = 0;
  bool penalized = true;
  double lipschitz = 0;
};

std::vector<GroupView> make_groups(const DesignMatrix& design, bool penalize_intercept) {
  std::vector<GroupView> groups(design.r);
  for (int k = 1; k <= design.r; ++k) {
    groups[k - 1].offset = design.group_offsets[k - 1];
    groups[k - 1].size = design.cols_of(k);
    groups[k - 1].penalized = (k == 1) ? penalize_intercept : true;
  }
  return groups;
}

// Largest eigenvalue of a symmetric PSD matrix by power iteration
// (deterministic start), inflated slightly so the block surrogate stays a
// majorizer despite the finite tolerance.
double top_eigenvalue(const Eigen::MatrixXd& gram) {
  const int d = static_cast<int>(gram.rows());
  if (d == 1) return gram(0, 0);
  Eigen::VectorXd v = Eigen::VectorXd::Constant(d, 1.0 / std::sqrt(static_cast<double>(d)));
  double value = 0;
  for (int it = 0; it < 10000; ++it) {
    Eigen::VectorXd gv = gram * v;
    double norm = gv.norm();
    if (norm <= 0) return gram.diagonal().maxCoeff();
    gv /= norm;
    double next = gv.dot(gram * gv);
    if (std::abs(next - value) <= 1e-6 * std::max(next, 1e-300)) {
      value = next;
      break;
    }
    value = next;
    v = gv;
  }
  return value * (1.0 + 1e-5);
}

double group_norm(const Eigen::VectorXd& beta, const Eigen::VectorXd& weights,
                  const GroupView& g) {
  return (weights.segment(g.offset, g.size).array() *
          beta.segment(g.offset, g.size).array())
      .matrix()
      .norm();
}

// Root of phi(nu) = sum_j (w_j t_j)^2 / (L nu + lambda w_j^2)^2 - 1 on
// (0, inf); exists and is unique when phi(0) > 0, phi is convex and
// decreasing, so Newton from 0 converges monotonically from the left.
double threshold_scale(const Eigen::VectorXd& wt, const Eigen::VectorXd& w2, double lipschitz,
                       double lambda) {
  double nu = 0.0;
  for (int it = 0; it < 200; ++it) {
    double phi = -1.0, dphi = 0.0;
    for (int j = 0; j < wt.size(); ++j) {
      double denom = lipschitz * nu + lambda * w2(j);
      double term = wt(j) / denom;
      phi += term * term;
      dphi -= 2.0 * lipschitz * term * term / denom;
    }
    if (phi <= 0.0) break;
    double step = -phi / dphi;
    double next = nu + step;
    if (!(next > nu)) break;
    nu = next;
    if (step <= 1e-15 * nu) break;
  }
  return nu;
}

class Solver {
 public:
  Solver(const Dataset& data, const Eigen::VectorXd& weights, bool penalize_intercept,
         const FitOptions& options)
      : design_(data.design),
        y_(data.response),
        weights_(weights),
        options_(options),
        groups_(make_groups(data.design, penalize_intercept)) {
    for (auto& g : groups_) {
      Eigen::MatrixXd gram = design_.values.middleCols(g.offset, g.size).transpose() *
                             design_.values.middleCols(g.offset, g.size);
      g.lipschitz = top_eigenvalue(gram);
    }
  }

  GroupLassoFit run(double lambda, const Eigen::VectorXd* init) {
    if (lambda < 0) throw InputError("lambda must be nonnegative");
    Eigen::VectorXd beta = init ? *init : Eigen::VectorXd::Zero(design_.p);
    if (beta.size() != design_.p) throw DimensionMismatch("init length != p");
    Eigen::VectorXd residual = design_.values * beta - y_;

    const double kkt_threshold =
        options_.kkt_tol * (lambda > 0 ? lambda : 1.0 + weighted_grad_inf(residual));
#ifndef NDEBUG
    double prev_objective = objective_of(beta, residual, lambda);
#endif
    int iterations = 0;
    bool converged = false;
    double gap = 0;
    while (iterations < options_.max_iter) {
      double change = sweep(beta, residual, lambda, /*active_only=*/false);
      ++iterations;
#ifndef NDEBUG
      double objective_now = objective_of(beta, residual, lambda);
      assert(objective_now <= prev_objective + 1e-9 * (1.0 + std::abs(prev_objective)));
      prev_objective = objective_now;
#endif
      // Inner passes over the current active set until they stall; cheap
      // when only a few groups are live.
      while (iterations < options_.max_iter &&
             change > options_.coord_tol * (1.0 + beta.lpNorm<Eigen::Infinity>())) {
        change = sweep(beta, residual, lambda, /*active_only=*/true);
        ++iterations;
      }
      double full_change = sweep(beta, residual, lambda, /*active_only=*/false);
      ++iterations;
      if (full_change <= options_.coord_tol * (1.0 + beta.lpNorm<Eigen::Infinity>())) {
        gap = kkt_gap_of(beta, residual, lambda);
        if (gap <= kkt_threshold) {
          converged = true;
          break;
        }
      }
    }
    GroupLassoFit out;
    out.lambda = lambda;
    out.beta = std::move(beta);
    out.iterations = iterations;
    out.converged = converged;
    out.kkt_gap = converged ? gap : kkt_gap_of(out.beta, residual, lambda);
    out.objective = objective_of(out.beta, residual, lambda);
    for (int k = 1; k <= design_.r; ++k) {
      const auto& g = groups_[k - 1];
      if (out.beta.segment(g.offset, g.size).array().abs().maxCoeff() > 0)
        out.active_set.push_back(k);
    }
    return out;
  }

 private:
  double weighted_grad_inf(const Eigen::VectorXd& residual) const {
    Eigen::VectorXd grad = design_.values.transpose() * residual;
    return (grad.array() / weights_.array()).abs().maxCoeff();
  }

  double objective_of(const Eigen::VectorXd& beta, const Eigen::VectorXd& residual,
                      double lambda) const {
    double loss = 0.5 * (residual.squaredNorm() - y_.squaredNorm());
    double penalty = 0;
    for (const auto& g : groups_)
      if (g.penalized) penalty += group_norm(beta, weights_, g);
    return loss + lambda * penalty;
  }

  double kkt_gap_of(const Eigen::VectorXd& beta, const Eigen::VectorXd& residual,
                    double lambda) const {
    double gap = 0;
    for (const auto& g : groups_) {
      Eigen::VectorXd grad =
          design_.values.middleCols(g.offset, g.size).transpose() * residual;
      Eigen::ArrayXd w = weights_.segment(g.offset, g.size).array();
      Eigen::VectorXd scaled = (grad.array() / w).matrix();
      Eigen::VectorXd b = beta.segment(g.offset, g.size);
      if (!g.penalized) {
        gap = std::max(gap, scaled.norm());
      } else if (b.isZero(0.0)) {
        gap = std::max(gap, std::max(0.0, scaled.norm() - lambda));
      } else {
        Eigen::VectorXd wb = (w * b.array()).matrix();
        gap = std::max(gap, (scaled + lambda * wb / wb.norm()).norm());
      }
    }
    return gap;
  }

  // One cycle over groups in fixed ascending order; returns the largest
  // coordinate change. The residual Xb - y is kept in sync with beta.
  double sweep(Eigen::VectorXd& beta, Eigen::VectorXd& residual, double lambda,
               bool active_only) {
    double max_change = 0;
    for (std::size_t gi = 0; gi < groups_.size(); ++gi) {
      const auto& g = groups_[gi];
      auto beta_k = beta.segment(g.offset, g.size);
      if (active_only && g.penalized && beta_k.isZero(0.0)) continue;
      Eigen::VectorXd grad =
          design_.values.middleCols(g.offset, g.size).transpose() * residual;
      Eigen::VectorXd target = g.lipschitz * beta_k - grad;  // L * u without the round trip
      Eigen::ArrayXd w = weights_.segment(g.offset, g.size).array();
      Eigen::VectorXd next(g.size);
      if (!g.penalized) {
        next = target / g.lipschitz;
      } else if ((target.array() / w).matrix().norm() <= lambda) {
        next.setZero();
      } else {
        Eigen::VectorXd wt = (w * target.array()).matrix();
        Eigen::VectorXd w2 = (w * w).matrix();
        double nu = threshold_scale(wt, w2, g.lipschitz, lambda);
        for (int j = 0; j < g.size; ++j)
          next(j) = nu * target(j) / (g.lipschitz * nu + lambda * w2(j));
      }
      Eigen::VectorXd delta = next - beta_k;
      double change = delta.lpNorm<Eigen::Infinity>();
      if (change > 0) {
        residual += design_.values.middleCols(g.offset, g.size) * delta;
        beta_k = next;
        max_change = std::max(max_change, change);
      }
    }
    return max_change;
  }

  const DesignMatrix& design_;
  const Eigen::VectorXd& y_;
  Eigen::VectorXd weights_;
  FitOptions options_;
  std::vector<GroupView> groups_;
};

}  // namespace

double objective_value(const DesignMatrix& design, const Eigen::VectorXd& beta,
                       const Eigen::VectorXd& y, double lambda, const Eigen::VectorXd& weights,
                       bool penalize_intercept) {
  double value = loss_value(design, beta, y);
  for (int k = 1; k <= design.r; ++k) {
    if (k == 1 && !penalize_intercept) continue;
    int offset = design.group_offsets[k - 1];
    int size = design.cols_of(k);
    value += lambda * (weights.segment(offset, size).array() *
                       beta.segment(offset, size).array())
                          .matrix()
                          .norm();
  }
  return value;
}

double kkt_gap(const DesignMatrix& design, const Eigen::VectorXd& beta, const Eigen::VectorXd& y,
               double lambda, const Eigen::VectorXd& weights, bool penalize_intercept) {
  Eigen::VectorXd grad = design.values.transpose() * (design.values * beta - y);
  double gap = 0;
  for (int k = 1; k <= design.r; ++k) {
    int offset = design.group_offsets[k - 1];
    int size = design.cols_of(k);
    Eigen::ArrayXd w = weights.segment(offset, size).array();
    Eigen::VectorXd scaled = (grad.segment(offset, size).array() / w).matrix();
    Eigen::VectorXd b = beta.segment(offset, size);
    bool penalized = (k != 1) || penalize_intercept;
    if (!penalized) {
      gap = std::max(gap, scaled.norm());
    } else if (b.isZero(0.0)) {
      gap = std::max(gap, std::max(0.0, scaled.norm() - lambda));
    } else {
      Eigen::VectorXd wb = (w * b.array()).matrix();
      gap = std::max(gap, (scaled + lambda * wb / wb.norm()).norm());
    }
  }
  return gap;
}

GroupLassoFit fit(const Dataset& data, double lambda, const WeightSpec& weights,
                  const FitOptions& options, const Eigen::VectorXd* init) {
  Solver solver(data, weights.resolve(data.design), weights.penalize_intercept, options);
  GroupLassoFit result = solver.run(lambda, init);
  if (!result.converged) throw NoConvergence(std::move(result));
  return result;
}

LambdaNet make_lambda_net(const Dataset& data, const WeightSpec& weights, int length,
                          double ratio) {
  const DesignMatrix& design = data.design;
  Eigen::VectorXd w = weights.resolve(design);
  if (length <= 0) length = 100;
  if (ratio <= 0) ratio = (design.n < design.p) ? 1e-2 : 1e-4;

  Eigen::VectorXd target = data.response;
  if (!weights.penalize_intercept) {
    // Project out the unpenalized intercept block first; lambda_max is then
    // taken over the penalized groups at that partial fit.
    int size = design.cols_of(1);
    Eigen::MatrixXd block = design.values.leftCols(size);
    target -= block * block.colPivHouseholderQr().solve(data.response);
  }
  double lambda_max = 0;
  for (int k = 1; k <= design.r; ++k) {
    if (k == 1 && !weights.penalize_intercept) continue;
    int offset = design.group_offsets[k - 1];
    int size = design.cols_of(k);
    Eigen::VectorXd g = design.values.middleCols(offset, size).transpose() * target;
    lambda_max = std::max(lambda_max, (g.array() / w.segment(offset, size).array()).matrix().norm());
  }
  if (lambda_max <= 0) throw InputError("lambda_max is zero: response orthogonal to the design");

  LambdaNet net;
  net.lambda_max = lambda_max;
  net.ratio = ratio;
  net.length = length;
  net.values.resize(length);
  for (int i = 0; i < length; ++i) {
    double frac = (length == 1) ? 0.0 : static_cast<double>(i) / (length - 1);
    net.values[i] = lambda_max * std::pow(ratio, frac);
  }
  return net;
}

std::vector<GroupLassoFit> fit_path(const Dataset& data, const LambdaNet& net,
                                    const WeightSpec& weights, const FitOptions& options) {
  Solver solver(data, weights.resolve(data.design), weights.penalize_intercept, options);
  std::vector<GroupLassoFit> fits;
  fits.reserve(net.values.size());
  const Eigen::VectorXd* init = nullptr;
  for (double lambda : net.values) {
    fits.push_back(solver.run(lambda, init));
    init = &fits.back().beta;
  }
  return fits;
}

}  // namespace fusereg
