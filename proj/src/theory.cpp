#include "fusereg/theory.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "fusereg/errors.hpp"
#include "fusereg/grouplasso.hpp"
#include "fusereg/pdmr.hpp"
#include "fusereg/rng.hpp"
#include "fusereg/simbench.hpp"

namespace fusereg {

namespace {
constexpr int kExactLimit = 25;  // bell(25) still fits in 64 bits

std::uint64_t checked_add(std::uint64_t a, std::uint64_t b) {
  std::uint64_t out;
  if (__builtin_add_overflow(a, b, &out)) throw Overflow("stirling sum overflows 64 bits");
  return out;
}

std::uint64_t checked_mul(std::uint64_t a, std::uint64_t b) {
  std::uint64_t out;
  if (__builtin_mul_overflow(a, b, &out)) throw Overflow("stirling product overflows 64 bits");
  return out;
}

std::vector<std::uint64_t> stirling_row(int n) {
  // row of {n k} for k = 0..n via {n k} = k {n-1 k} + {n-1 k-1}
  std::vector<std::uint64_t> row{1};  // {0 0} = 1
  for (int m = 1; m <= n; ++m) {
    std::vector<std::uint64_t> next(m + 1, 0);
    for (int k = 1; k <= m; ++k) {
      std::uint64_t carry = (k < static_cast<int>(row.size())) ? row[k] : 0;
      next[k] = checked_add(checked_mul(static_cast<std::uint64_t>(k), carry), row[k - 1]);
    }
    row = std::move(next);
  }
  return row;
}

}  // namespace

std::uint64_t stirling2(int n, int k) {
  if (n < 0 || k < 0) throw InputError("stirling2 needs n, k >= 0");
  if (n > kExactLimit) throw Overflow("stirling2 exact range is n <= 25");
  if (k > n) return 0;
  return stirling_row(n)[k];
}

std::uint64_t bell(int n) {
  if (n < 0) throw InputError("bell needs n >= 0");
  if (n > kExactLimit) throw Overflow("bell exact range is n <= 25");
  auto row = stirling_row(n);
  std::uint64_t sum = 0;
  for (auto v : row) sum = checked_add(sum, v);
  return sum;
}

namespace {

double log_add_exp(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  double hi = std::max(a, b), lo = std::min(a, b);
  return hi + std::log1p(std::exp(lo - hi));
}

}  // namespace

double touchard(int n, double x) {
  if (x <= 0) throw InputError("touchard needs x > 0");
  if (n < 0) throw InputError("touchard needs n >= 0");
  if (n == 0) return 1.0;
  if (n <= kExactLimit) {
    auto row = stirling_row(n);
    double sum = 0;
    for (int k = n; k >= 1; --k) sum = sum * x + static_cast<double>(row[k]);
    return sum * x;  // Horner in x from the top coefficient
  }
  // log-space recurrence over rows of log {m k}
  const double neg_inf = -std::numeric_limits<double>::infinity();
  std::vector<double> row{0.0};  // log {0 0}
  for (int m = 1; m <= n; ++m) {
    std::vector<double> next(m + 1, neg_inf);
    for (int k = 1; k <= m; ++k) {
      double carry = (k < static_cast<int>(row.size())) ? row[k] : neg_inf;
      next[k] = log_add_exp(std::log(static_cast<double>(k)) + carry, row[k - 1]);
    }
    row = std::move(next);
  }
  double log_sum = neg_inf;
  const double log_x = std::log(x);
  for (int k = 1; k <= n; ++k) log_sum = log_add_exp(log_sum, row[k] + k * log_x);
  return std::exp(log_sum);
}

PoissonMomentBound poisson_moment_bound(int n, double x) {
  if (n < 0 || x <= 0) throw InputError("poisson_moment_bound needs n >= 0, x > 0");
  PoissonMomentBound out;
  if (n == 0) {
    out.exact = out.bound1 = out.bound2 = 1.0;
    return out;
  }
  out.exact = touchard(n, x) / std::pow(x, n);
  double t = static_cast<double>(n) / x;
  out.bound1 = std::pow(t / std::log1p(t), n);
  out.bound2 = std::exp(0.5 * static_cast<double>(n) * n / x);
  return out;
}

double weight_bound_f(double q, double x_m, double x_M) {
  if (!(0 < x_m && x_m <= x_M)) throw InputError("need 0 < x_m <= x_M");
  double exponent = std::max(0.0, std::abs(2.0 * q - 3.0) - 1.0);
  return std::pow(x_m, -2.0) * std::pow(x_M / x_m, exponent);
}

// ---- Cone machinery ---------------------------------------------------------

namespace {

struct GroupLayout {
  int offset;
  int size;
};

std::vector<GroupLayout> layouts(const DesignMatrix& design) {
  std::vector<GroupLayout> out(design.r);
  for (int k = 1; k <= design.r; ++k)
    out[k - 1] = {design.group_offsets[k - 1], design.cols_of(k)};
  return out;
}

}  // namespace

bool in_cone(const DesignMatrix& design, const Eigen::VectorXd& weights, double a,
             const std::vector<int>& support, const Eigen::VectorXd& v) {
  std::vector<bool> in_support(design.r + 1, false);
  for (int k : support) in_support[k] = true;
  double lhs = 0, rhs = 0;
  for (int k = 1; k <= design.r; ++k) {
    int offset = design.group_offsets[k - 1];
    int size = design.cols_of(k);
    double norm = (weights.segment(offset, size).array() * v.segment(offset, size).array())
                      .matrix()
                      .norm();
    (in_support[k] ? rhs : lhs) += norm;
  }
  rhs += a * (weights.array() * v.array()).abs().sum();
  return lhs <= rhs;
}

namespace {

class CifSearch {
 public:
  CifSearch(const DesignMatrix& design, const Eigen::VectorXd& weights, double a,
            const std::vector<int>& support)
      : design_(design), weights_(weights), a_(a), support_(support) {
    gram_ = design.values.transpose() * design.values;
  }

  double evaluate(const Eigen::VectorXd& v) const {
    double vinf = v.lpNorm<Eigen::Infinity>();
    if (vinf <= 0) return std::numeric_limits<double>::infinity();
    return ((gram_ * v).array() / weights_.array()).abs().maxCoeff() / vinf;
  }

  bool member(const Eigen::VectorXd& v) const {
    return in_cone(design_, weights_, a_, support_, v);
  }

  const Eigen::MatrixXd& gram() const { return gram_; }

 private:
  const DesignMatrix& design_;
  const Eigen::VectorXd& weights_;
  double a_;
  std::vector<int> support_;
  Eigen::MatrixXd gram_;
};

}  // namespace

double cif_estimate(const DesignMatrix& design, const Eigen::VectorXd& weights, double a,
                    const std::vector<int>& support, int budget, std::uint64_t seed,
                    ConeSample* samples) {
  if (support.empty()) throw InputError("cif_estimate needs a nonempty support set");
  if (!(a > 0 && a < 1)) throw InputError("cif_estimate needs a in (0,1)");
  if (budget < 1) throw InputError("cif_estimate needs budget >= 1");
  CifSearch search(design, weights, a, support);
  const int p = design.p;
  CounterRng rng = CounterRng(seed).split(0x1cf);

  if (samples) {
    samples->a = a;
    samples->weights = weights;
    samples->support = support;
    samples->vectors.clear();
  }

  std::vector<int> support_cols;
  std::vector<bool> in_support(design.r + 1, false);
  for (int k : support) in_support[k] = true;
  for (int k = 1; k <= design.r; ++k) {
    if (!in_support[k]) continue;
    for (int c = 0; c < design.cols_of(k); ++c)
      support_cols.push_back(design.group_offsets[k - 1] + c);
  }

  double best = std::numeric_limits<double>::infinity();
  Eigen::VectorXd best_v;
  auto consider = [&](const Eigen::VectorXd& v) {
    if (!search.member(v)) return;
    double value = search.evaluate(v);
    if (samples && samples->vectors.size() < 64) samples->vectors.push_back(v);
    if (value < best) {
      best = value;
      best_v = v;
    }
  };

  // Single coordinates inside the support are always in the cone.
  Eigen::VectorXd v = Eigen::VectorXd::Zero(p);
  for (int j : support_cols) {
    v(j) = 1.0;
    consider(v);
    v(j) = 0.0;
  }

  // Two-coordinate rays: a support coordinate plus a partner scaled to the
  // diagonal ratio (exact on orthogonal designs) capped just inside the cone.
  std::vector<int> partners(p);
  for (int j = 0; j < p; ++j) partners[j] = j;
  std::sort(partners.begin(), partners.end(), [&](int x, int y) {
    double rx = search.gram()(x, x) / weights(x), ry = search.gram()(y, y) / weights(y);
    return std::tie(rx, x) < std::tie(ry, y);
  });
  if (static_cast<int>(partners.size()) > 64) partners.resize(64);
  for (int j : support_cols) {
    for (int jp : partners) {
      if (jp == j) continue;
      double t_obj = (search.gram()(j, j) / weights(j)) * (weights(jp) / search.gram()(jp, jp));
      double t_cone = (1.0 + a) * weights(j) / ((1.0 - a) * weights(jp));
      double t = std::min(t_obj, t_cone * (1.0 - 1e-9));
      if (!(t > 0)) continue;
      for (double sign : {1.0, -1.0}) {
        v(j) = 1.0;
        v(jp) = sign * t;
        consider(v);
        v(j) = 0.0;
        v(jp) = 0.0;
      }
    }
  }

  // Random cone points: Gaussian support block, off-support block scaled to
  // a random fraction of the largest admissible length.
  for (int s = 0; s < budget; ++s) {
    Eigen::VectorXd cand = Eigen::VectorXd::Zero(p);
    for (int j : support_cols) cand(j) = rng.gaussian();
    Eigen::VectorXd tail = Eigen::VectorXd::Zero(p);
    for (int j = 0; j < p; ++j)
      if (!std::binary_search(support_cols.begin(), support_cols.end(), j))
        tail(j) = rng.gaussian();
    // scale s.t. sum_{off} ||W v_k|| = u * (sum_{on} ||W v_k|| + a |W v|_1)
    double on_norms = 0, on_l1 = 0, off_norms = 0, off_l1 = 0;
    for (int k = 1; k <= design.r; ++k) {
      int offset = design.group_offsets[k - 1];
      int size = design.cols_of(k);
      auto w = weights.segment(offset, size).array();
      if (in_support[k]) {
        on_norms += (w * cand.segment(offset, size).array()).matrix().norm();
        on_l1 += (w * cand.segment(offset, size).array()).abs().sum();
      } else {
        off_norms += (w * tail.segment(offset, size).array()).matrix().norm();
        off_l1 += (w * tail.segment(offset, size).array()).abs().sum();
      }
    }
    if (off_norms > 0) {
      double u = rng.uniform();
      double denom = off_norms - a * off_l1;
      double scale;
      if (denom <= 0) {
        scale = u / std::max(off_norms, 1e-300);  // cone holds at any scale
      } else {
        scale = u * (on_norms + a * on_l1) / denom;
      }
      cand += scale * tail;
    }
    consider(cand);
  }

  // Coordinate-descent polish for small problems.
  if (p <= 64 && best_v.size() == p) {
    Eigen::VectorXd cur = best_v;
    for (int sweep = 0; sweep < 24; ++sweep) {
      bool improved = false;
      for (int j = 0; j < p; ++j) {
        double scale = std::max(cur.lpNorm<Eigen::Infinity>(), 1e-12);
        for (double step : {0.3, 0.1, 0.03, 0.01, 0.003, 0.001}) {
          for (double sign : {1.0, -1.0}) {
            Eigen::VectorXd trial = cur;
            trial(j) += sign * step * scale;
            if (!search.member(trial)) continue;
            if (search.evaluate(trial) < search.evaluate(cur)) {
              cur = trial;
              improved = true;
            }
          }
        }
      }
      if (!improved) break;
    }
    double value = search.evaluate(cur);
    if (value < best) best = value;
  }
  return best;
}

double lemma1_coverage(const DesignMatrix& design, const Eigen::VectorXd& beta_true, double sigma,
                       double a, double alpha, int reps, std::uint64_t seed) {
  if (!(a > 0 && a < 1) || !(alpha > 0 && alpha < 1))
    throw InputError("lemma1_coverage needs a, alpha in (0,1)");
  Eigen::MatrixXd gram = design.values.transpose() * design.values;
  Eigen::MatrixXd off = gram;
  off.diagonal().setZero();
  if (off.array().abs().maxCoeff() > 1e-8 * gram.diagonal().maxCoeff())
    throw InputError("lemma1_coverage requires an orthogonal design");

  WeightSpec weights;  // default ||x||, so x_W = 1 exactly
  Eigen::VectorXd w = weights.resolve(design);
  ColumnStats stats = column_stats(design, w);
  const double lambda =
      std::sqrt(2.0 * sigma * sigma * stats.x_w * stats.x_w * std::log(2.0 * design.p / alpha)) /
      a;
  const double radius = (1.0 + a) * lambda / stats.x_min;

  Eigen::VectorXd mean = design.values * beta_true;
  // round-off slack so the noiseless case counts as covered at radius 0
  const double slack = 1e-12 * (1.0 + beta_true.lpNorm<Eigen::Infinity>());
  CounterRng root(seed);
  int hits = 0;
  for (int rep = 0; rep < reps; ++rep) {
    CounterRng rng = root.split(rep + 1);
    Eigen::VectorXd y = mean;
    for (int i = 0; i < design.n; ++i) y(i) += sigma * rng.gaussian();
    Eigen::VectorXd beta_hat;
    if (lambda > 0) {
      Dataset data{design, y};
      beta_hat = fit(data, lambda, weights).beta;
    } else {
      // lambda = 0 is plain least squares; exact per column by orthogonality
      beta_hat = (design.values.transpose() * y).array() /
                 design.column_norms.array().square();
    }
    if ((beta_hat - beta_true).lpNorm<Eigen::Infinity>() <= radius + slack) ++hits;
  }
  return static_cast<double>(hits) / reps;
}

double coefficient_gap_min(const DesignMatrix& design, const Eigen::VectorXd& beta_true) {
  // smallest within-factor gap between unequal coefficients, the implicit
  // reference 0 included for every factor k >= 2
  double gap = std::numeric_limits<double>::infinity();
  for (int k = 1; k <= design.r; ++k) {
    std::vector<double> coef;
    if (design.group_kinds[k - 1] == PredictorKind::categorical) {
      for (int j = 0; j < design.levels_of(k); ++j) {
        int col = design.column_of(k, j);
        coef.push_back(col < 0 ? 0.0 : beta_true(col));
      }
    } else {
      coef = {0.0, beta_true(design.column_of(k, 1))};
    }
    for (std::size_t i = 0; i < coef.size(); ++i)
      for (std::size_t j = i + 1; j < coef.size(); ++j)
        if (coef[i] != coef[j]) gap = std::min(gap, std::abs(coef[i] - coef[j]));
  }
  return gap;
}

DeltaResult delta_true(const DesignMatrix& design, const Eigen::VectorXd& beta_true,
                       const PartitionModel& model_true, long long max_submodels) {
  if (beta_true.size() != design.p) throw DimensionMismatch("beta length != p");
  DeltaResult out;
  out.gap_min = coefficient_gap_min(design, beta_true);

  // scaled K-L separation by enumeration, folded down from the true model's
  // collapsed Gram exactly like the family refits
  CollapsedDesign base = collapse(model_true, design);
  Eigen::MatrixXd gram = base.z.transpose() * base.z;
  Eigen::VectorXd mu = design.values * beta_true;
  Eigen::VectorXd zmu = base.z.transpose() * mu;
  const double mu2 = mu.squaredNorm();
  const int size_true = model_size(model_true);
  const int q = static_cast<int>(base.z.cols());

  out.kl_scaled = std::numeric_limits<double>::infinity();
  for_each_submodel(model_true, max_submodels, [&](const PartitionModel& sub) {
    ++out.submodels;
    std::vector<int> offset(design.r + 1, 0);
    int m = 0;
    for (int k = 1; k <= design.r; ++k) {
      offset[k] = m;
      if (sub.is_categorical(k)) m += (k == 1) ? sub.n_clusters(k) : sub.n_clusters(k) - 1;
      else if (sub.continuous_included[k - 1]) m += 1;
    }
    Eigen::MatrixXd s = Eigen::MatrixXd::Zero(std::max(m, 1), std::max(m, 1));
    Eigen::VectorXd b = Eigen::VectorXd::Zero(std::max(m, 1));
    std::vector<int> map(q, -1);
    for (int i = 0; i < q; ++i) {
      const auto& col = base.columns[i];
      int k = col.factor;
      if (col.smallest_level < 0) {
        map[i] = sub.continuous_included[k - 1] ? offset[k] : -1;
        continue;
      }
      int cluster = sub.factor_rgs[k - 1][col.smallest_level];
      if (k != 1 && cluster == 0) continue;
      map[i] = offset[k] + ((k == 1) ? cluster : cluster - 1);
    }
    double projection = 0;
    if (m > 0) {
      for (int i = 0; i < q; ++i) {
        if (map[i] < 0) continue;
        b(map[i]) += zmu(i);
        for (int j = 0; j < q; ++j)
          if (map[j] >= 0) s(map[i], map[j]) += gram(i, j);
      }
      Eigen::VectorXd xi = s.colPivHouseholderQr().solve(b);
      projection = b.dot(xi);
    }
    double delta = std::max(mu2 - projection, 0.0);
    int drop = size_true - m;
    if (drop > 0) out.kl_scaled = std::min(out.kl_scaled, delta / drop);
  });
  return out;
}

Condition9 theorem1_condition(double lambda, double a, double sigma, double delta_gap,
                              double zeta_a, double kl_scaled, int size_true, int p) {
  Condition9 out;
  double log_term = std::log(static_cast<double>(size_true) * size_true / (2.0 * std::log(2.0)));
  out.lhs = 2.0 * sigma * sigma * log_term / (a * a);
  out.rhs = std::min(delta_gap * delta_gap * zeta_a * zeta_a, 4.0 * kl_scaled) /
            (16.0 * (1.0 + a) * (1.0 + a));
  out.satisfiable = out.lhs < out.rhs;
  double l2 = lambda * lambda;
  out.holds = out.lhs <= l2 && l2 < out.rhs;
  out.prob_bound = (2.0 * p + static_cast<double>(size_true) * size_true) *
                   std::exp(-a * a * l2 / (2.0 * sigma * sigma));
  return out;
}

ConeFactors cone_factor_estimates(const Eigen::MatrixXd& x, const std::vector<int>& support,
                                  double a, int budget, std::uint64_t seed) {
  const int p = static_cast<int>(x.cols());
  Eigen::MatrixXd gram = x.transpose() * x;
  std::vector<bool> on(p, false);
  for (int j : support) on[j] = true;
  const double rho = (1.0 + a) / (1.0 - a);
  const double t_size = static_cast<double>(support.size());

  ConeFactors best;
  best.re = best.ka = best.zeta_inf = std::numeric_limits<double>::infinity();
  auto consider = [&](const Eigen::VectorXd& theta) {
    double l1_on = 0, l1_off = 0;
    for (int j = 0; j < p; ++j) (on[j] ? l1_on : l1_off) += std::abs(theta(j));
    if (l1_off > rho * l1_on || l1_on == 0) return;
    Eigen::VectorXd g = gram * theta;
    double quad = theta.dot(g);
    best.re = std::min(best.re, quad / theta.squaredNorm());
    best.ka = std::min(best.ka, t_size * quad / (l1_on * l1_on));
    best.zeta_inf =
        std::min(best.zeta_inf, g.lpNorm<Eigen::Infinity>() / theta.lpNorm<Eigen::Infinity>());
  };

  Eigen::VectorXd indicator = Eigen::VectorXd::Zero(p);
  for (int j : support) indicator(j) = 1.0;
  consider(indicator);
  Eigen::VectorXd e = Eigen::VectorXd::Zero(p);
  for (int j : support) {
    e(j) = 1.0;
    consider(e);
    e(j) = 0.0;
  }
  CounterRng rng = CounterRng(seed).split(0xc0e);
  for (int s = 0; s < budget; ++s) {
    Eigen::VectorXd theta(p);
    double l1_on = 0;
    for (int j = 0; j < p; ++j) {
      theta(j) = rng.gaussian();
      if (on[j]) l1_on += std::abs(theta(j));
    }
    double l1_off = 0;
    for (int j = 0; j < p; ++j)
      if (!on[j]) l1_off += std::abs(theta(j));
    if (l1_off > 0) {
      double scale = rng.uniform() * rho * l1_on / l1_off;
      for (int j = 0; j < p; ++j)
        if (!on[j]) theta(j) *= scale;
    }
    consider(theta);
  }
  return best;
}

ErrorBounds error_bounds(const ConeFactors& factors, int support_size, double a, double lambda) {
  ErrorBounds out;
  out.r1 = 2.0 * (1.0 + a) * support_size * lambda / ((1.0 - a) * factors.ka);
  out.r2 = (1.0 + a) * std::sqrt(static_cast<double>(support_size)) * lambda / factors.re;
  out.r3 = (1.0 + a) * lambda / factors.zeta_inf;
  return out;
}

TheoryReport diagnose_setting(int setting, double rho, double snr, int reps, std::uint64_t seed,
                              int n_train, int cif_budget, long long max_submodels) {
  const double a = 0.5;
  SettingSpec spec = setting_beta(setting);
  CounterRng root(seed);
  Dataset data = draw_setting_dataset(spec, rho, n_train, root.split(0));

  TheoryReport report;
  report.setting = setting;
  report.rho = rho;
  report.snr = snr;
  report.n = n_train;
  report.p = data.design.p;
  report.size_true = model_size(spec.true_model);
  report.reps = reps;

  WeightSpec weights;
  Eigen::VectorXd w = weights.resolve(data.design);
  ColumnStats stats = column_stats(data.design, w);
  report.x_min = stats.x_min;
  report.x_max = stats.x_max;
  report.f_q = weight_bound_f(weights.exponent, stats.x_min, stats.x_max);

  Eigen::VectorXd mu = data.design.values * spec.beta;
  double mu_mean = mu.mean();
  double var = (mu.array() - mu_mean).square().sum() / (data.design.n - 1);
  report.sigma = std::sqrt(var / snr);

  std::vector<int> support;
  for (int k = 1; k <= data.design.r; ++k) {
    int offset = data.design.group_offsets[k - 1];
    int size = data.design.cols_of(k);
    if (spec.beta.segment(offset, size).array().abs().maxCoeff() > 0) support.push_back(k);
  }
  report.zeta_upper = cif_estimate(data.design, w, a, support, cif_budget, seed);

  report.delta_gap = coefficient_gap_min(data.design, spec.beta);
  try {
    DeltaResult delta = delta_true(data.design, spec.beta, spec.true_model, max_submodels);
    report.kl_scaled = delta.kl_scaled;
    report.kl_exact = true;
  } catch (const Exploded&) {
    report.kl_scaled = std::numeric_limits<double>::quiet_NaN();
    report.kl_exact = false;
  }

  report.lambda = ric_lambda(report.sigma * report.sigma, report.p);
  report.condition9 =
      theorem1_condition(report.lambda, a, report.sigma, report.delta_gap, report.zeta_upper,
                         report.kl_exact ? report.kl_scaled : 0.0, report.size_true, report.p);

  int in_family = 0, strictly_below = 0;
  for (int rep = 0; rep < reps; ++rep) {
    CounterRng rng = root.split(1000 + rep);
    Dataset draw = draw_setting_dataset(spec, rho, n_train, rng.split(0));
    Eigen::VectorXd mean = draw.design.values * spec.beta;
    CounterRng noise = rng.split(1);
    for (int i = 0; i < draw.design.n; ++i)
      draw.response(i) = mean(i) + report.sigma * noise.gaussian();
    try {
      GroupLassoFit screened = fit(draw, report.lambda, weights);
      NestedFamily family = build_family(screened, draw.design);
      bool found = false;
      for (const auto& member : family.models)
        if (member == spec.true_model) {
          found = true;
          break;
        }
      if (found) ++in_family;
      SelectionResult selected =
          select(family, draw, report.lambda, report.sigma * report.sigma);
      if (is_submodel(selected.chosen, spec.true_model) && !(selected.chosen == spec.true_model))
        ++strictly_below;
    } catch (const Error&) {
      // failed replication counts as neither event
    }
  }
  report.freq_true_in_family = reps > 0 ? static_cast<double>(in_family) / reps : 0.0;
  report.freq_selected_strictly_below =
      reps > 0 ? static_cast<double>(strictly_below) / reps : 0.0;
  return report;
}

}  // namespace fusereg
