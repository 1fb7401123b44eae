#include "fusereg/pdmr.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <map>

#include "fusereg/errors.hpp"
#include "fusereg/parallel.hpp"

namespace fusereg {

namespace {

std::vector<double> level_coefficients(const GroupLassoFit& fit, int factor,
                                       const DesignMatrix& design) {
  int n_levels = design.levels_of(factor);
  std::vector<double> coef(n_levels);
  for (int j = 0; j < n_levels; ++j) {
    int col = design.column_of(factor, j);
    coef[j] = (col < 0) ? 0.0 : fit.beta(col);  // adjoined reference coefficient
  }
  return coef;
}

struct LinkCluster {
  std::vector<int> levels;
  double min_coef = 0, max_coef = 0;
  int min_level = 0;
};

double cluster_distance(const LinkCluster& a, const LinkCluster& b) {
  // max pairwise |difference| is attained at the value-range endpoints
  return std::max(a.max_coef - b.min_coef, b.max_coef - a.min_coef);
}

}  // namespace

Dendrogram cluster_factor(const GroupLassoFit& fit, int factor, const DesignMatrix& design) {
  if (design.group_kinds[factor - 1] != PredictorKind::categorical)
    throw InputError("cluster_factor expects a categorical factor");
  if (std::find(fit.active_set.begin(), fit.active_set.end(), factor) == fit.active_set.end())
    throw NotScreened(factor);

  std::vector<double> coef = level_coefficients(fit, factor, design);
  Dendrogram out;
  out.factor = factor;
  out.leaves = static_cast<int>(coef.size());

  std::vector<LinkCluster> clusters(coef.size());
  for (int j = 0; j < out.leaves; ++j)
    clusters[j] = {{j}, coef[j], coef[j], j};

  while (clusters.size() > 1) {
    std::size_t best_a = 0, best_b = 1;
    double best_dist = 0;
    int best_lo = 0, best_hi = 0;
    bool first = true;
    for (std::size_t a = 0; a < clusters.size(); ++a) {
      for (std::size_t b = a + 1; b < clusters.size(); ++b) {
        double dist = cluster_distance(clusters[a], clusters[b]);
        int lo = std::min(clusters[a].min_level, clusters[b].min_level);
        int hi = std::max(clusters[a].min_level, clusters[b].min_level);
        if (first || dist < best_dist ||
            (dist == best_dist && (lo < best_lo || (lo == best_lo && hi < best_hi)))) {
          best_a = a;
          best_b = b;
          best_dist = dist;
          best_lo = lo;
          best_hi = hi;
          first = false;
        }
      }
    }
    DendrogramMerge merge;
    merge.height = best_dist;
    merge.levels_a = clusters[best_a].levels;
    merge.levels_b = clusters[best_b].levels;
    merge.smallest_level = best_lo;
    out.merges.push_back(merge);
    out.cutting_heights.push_back(best_dist);

    LinkCluster joined;
    joined.levels = clusters[best_a].levels;
    joined.levels.insert(joined.levels.end(), clusters[best_b].levels.begin(),
                         clusters[best_b].levels.end());
    std::sort(joined.levels.begin(), joined.levels.end());
    joined.min_coef = std::min(clusters[best_a].min_coef, clusters[best_b].min_coef);
    joined.max_coef = std::max(clusters[best_a].max_coef, clusters[best_b].max_coef);
    joined.min_level = best_lo;
    clusters.erase(clusters.begin() + best_b);
    clusters[best_a] = std::move(joined);

#ifndef NDEBUG
    // Complete linkage on the line keeps clusters as non-interleaved value
    // intervals: sorted by min coefficient, each next cluster starts at or
    // after the previous one ends.
    std::vector<const LinkCluster*> sorted;
    for (const auto& c : clusters) sorted.push_back(&c);
    std::sort(sorted.begin(), sorted.end(), [](const LinkCluster* x, const LinkCluster* y) {
      return std::tie(x->min_coef, x->max_coef) < std::tie(y->min_coef, y->max_coef);
    });
    for (std::size_t i = 1; i < sorted.size(); ++i)
      assert(sorted[i]->min_coef >= sorted[i - 1]->max_coef);
#endif
  }
  assert(std::is_sorted(out.cutting_heights.begin(), out.cutting_heights.end()));
  return out;
}

namespace {

struct MergeEvent {
  double height = 0;
  int smallest_level = 0;
  int factor = 0;
  bool continuous_delete = false;
  std::vector<int> levels_a, levels_b;
};

}  // namespace

NestedFamily build_family(const GroupLassoFit& fit, const DesignMatrix& design) {
  NestedFamily family;
  PartitionModel current = discrete_model(design, fit.active_set);
  family.models.push_back(current);
  family.heights.push_back(0.0);
  family.sizes.push_back(model_size(current));
  if (fit.active_set.empty()) return family;  // {intercept-only} alone

  std::vector<MergeEvent> events;
  for (int k : fit.active_set) {
    if (design.group_kinds[k - 1] == PredictorKind::categorical) {
      Dendrogram dendro = cluster_factor(fit, k, design);
      for (const auto& merge : dendro.merges) {
        MergeEvent e;
        e.height = merge.height;
        e.smallest_level = merge.smallest_level;
        e.factor = k;
        e.levels_a = merge.levels_a;
        e.levels_b = merge.levels_b;
        events.push_back(std::move(e));
      }
    } else {
      MergeEvent e;
      e.height = std::abs(fit.beta(design.column_of(k, 1)));
      e.smallest_level = 0;
      e.factor = k;
      e.continuous_delete = true;
      events.push_back(std::move(e));
    }
  }
  // Global order: height, then the pair's smallest member, then factor.
  // Stable sort keeps each factor's dendrogram sequence on full ties.
  std::stable_sort(events.begin(), events.end(), [](const MergeEvent& a, const MergeEvent& b) {
    return std::tie(a.height, a.smallest_level, a.factor) <
           std::tie(b.height, b.smallest_level, b.factor);
  });

  for (const auto& e : events) {
    if (e.continuous_delete) {
      current.continuous_included[e.factor - 1] = false;
    } else {
      auto& rgs = current.factor_rgs[e.factor - 1];
      int label_a = rgs[e.levels_a.front()];
      for (int level : e.levels_b) rgs[level] = label_a;
      rgs = canonical_rgs(rgs);
    }
    family.models.push_back(current);
    family.heights.push_back(e.height);
    family.sizes.push_back(model_size(current));
    assert(family.sizes[family.sizes.size() - 2] == family.sizes.back() + 1);
  }
  assert(family.sizes.back() == 1);
  return family;
}

double ric_lambda(double sigma2, int p) { return std::sqrt(2.0 * sigma2 * std::log(p)); }

namespace {

SelectionResult select_from_scores(const std::vector<PartitionModel>& candidates,
                                   std::vector<CandidateScore> table, const Dataset& data,
                                   double lambda_ic, double sigma2) {
  for (auto& score : table)
    if (score.feasible) score.criterion = score.loss + 0.5 * lambda_ic * lambda_ic * score.size;

  // argmin criterion; ties toward the smaller model, then first occurrence
  std::vector<int> order;
  for (int i = 0; i < static_cast<int>(table.size()); ++i)
    if (table[i].feasible) order.push_back(i);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return std::tie(table[a].criterion, table[a].size) <
           std::tie(table[b].criterion, table[b].size);
  });

  for (int best : order) {
    RefitResult fitted;
    try {
      fitted = refit(candidates[best], data);
    } catch (const RankDeficient&) {
      continue;
    } catch (const Overparameterized&) {
      continue;
    }
    SelectionResult result;
    result.chosen = candidates[best];
    result.beta = fitted.beta;
    result.loss = fitted.loss;
    result.criterion = table[best].criterion;
    result.lambda_ic = lambda_ic;
    result.sigma2_used = sigma2;
    result.table = std::move(table);
    result.candidate_models = candidates;
    return result;
  }
  throw AllInfeasible("no feasible model among the candidates");
}

}  // namespace

SelectionResult select_models(const std::vector<PartitionModel>& candidates, const Dataset& data,
                              double lambda_ic, double sigma2) {
  std::vector<CandidateScore> table(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    CandidateScore& score = table[i];
    score.size = model_size(candidates[i]);
    try {
      score.loss = refit(candidates[i], data).loss;
      score.feasible = true;
    } catch (const RankDeficient&) {
      score.feasible = false;
    } catch (const Overparameterized&) {
      score.feasible = false;
    }
  }
  return select_from_scores(candidates, std::move(table), data, lambda_ic, sigma2);
}

SelectionResult select(const NestedFamily& family, const Dataset& data, double lambda_ic,
                       double sigma2) {
  return select_models(family.models, data, lambda_ic, sigma2);
}

SelectionResult pdmr_single(const Dataset& data, double lambda, const WeightSpec& weights,
                            double lambda_ic, double sigma2, const FitOptions& options) {
  GroupLassoFit screened = fit(data, lambda, weights, options);
  NestedFamily family = build_family(screened, data.design);
  return select(family, data, lambda_ic, sigma2);
}

namespace {

// Loss of a family member computed on the collapsed Gram of a refining
// member: Z columns of any coarsening are sums of the base member's
// collapsed columns, so Z'Z and Z'y fold down without touching the n-row
// design again. Rebasing at the first member of interest keeps the Gram at
// that member's size instead of the full active-column count.
struct FamilyGram {
  PartitionModel model;  // the refining member whose clusters index the gram
  std::vector<ClusterColumn> columns;
  Eigen::MatrixXd gram;
  Eigen::VectorXd zy;
};

FamilyGram make_family_gram(const PartitionModel& base_model, const Dataset& data) {
  FamilyGram out;
  out.model = base_model;
  CollapsedDesign collapsed = collapse(base_model, data.design);
  out.columns = collapsed.columns;
  out.gram = collapsed.z.transpose() * collapsed.z;
  out.zy = collapsed.z.transpose() * data.response;
  return out;
}

// Returns false when the member is overparameterized (or pruned by cap) or
// its normal system is numerically inconsistent (rank deficient). The
// member must coarsen bg.model.
bool member_loss(const FamilyGram& bg, const PartitionModel& member, const DesignMatrix& design,
                 int cap, double& loss_out) {
  const int q = static_cast<int>(bg.columns.size());
  // member Z layout mirrors collapse(): factors ascending, cluster ids
  // ascending, reference cluster of k >= 2 skipped.
  std::vector<int> member_offset(design.r + 1, 0);
  int m = 0;
  for (int k = 1; k <= design.r; ++k) {
    member_offset[k] = m;
    if (member.is_categorical(k)) {
      int j = member.n_clusters(k);
      m += (k == 1) ? j : j - 1;
    } else if (member.continuous_included[k - 1]) {
      m += 1;
    }
  }
  if (m > cap) return false;
  if (m == 0) {
    loss_out = 0;
    return true;
  }

  // base column -> member Z column (or -1 when absorbed/deleted)
  std::vector<int> map(q, -1);
  for (int i = 0; i < q; ++i) {
    const auto& col = bg.columns[i];
    int k = col.factor;
    if (col.smallest_level < 0) {
      map[i] = member.continuous_included[k - 1] ? member_offset[k] : -1;
      continue;
    }
    int cluster = member.factor_rgs[k - 1][col.smallest_level];
    if (k != 1 && cluster == 0) continue;  // absorbed into the reference
    map[i] = member_offset[k] + ((k == 1) ? cluster : cluster - 1);
  }

  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(m, m);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(m);
  for (int i = 0; i < q; ++i) {
    if (map[i] < 0) continue;
    b(map[i]) += bg.zy(i);
    for (int j = 0; j < q; ++j)
      if (map[j] >= 0) s(map[i], map[j]) += bg.gram(i, j);
  }
  Eigen::LDLT<Eigen::MatrixXd> ldlt(s);
  if (ldlt.info() != Eigen::Success) return false;
  Eigen::VectorXd xi = ldlt.solve(b);
  double scale = s.diagonal().maxCoeff() * xi.array().abs().maxCoeff() + b.array().abs().maxCoeff();
  if ((s * xi - b).array().abs().maxCoeff() > 1e-8 * (scale + 1.0)) return false;
  loss_out = -0.5 * b.dot(xi);
  return true;
}

}  // namespace

SelectionResult pdmr_net(const Dataset& data, const LambdaNet& net, const WeightSpec& weights,
                         const PdmrOptions& options) {
  const int n = data.design.n;
  std::vector<GroupLassoFit> path = fit_path(data, net, weights, options.fit);

  // A dimension whose criterion lower bound already exceeds the
  // intercept-only criterion can never win, since loss >= -||y||^2/2; with
  // the tuning known up front this caps the sizes worth refitting. With an
  // estimated sigma^2 every feasible dimension is kept.
  int cap = n;
  double lambda_ic_known = 0;
  if (options.lambda_ic) lambda_ic_known = *options.lambda_ic;
  else if (options.sigma2) lambda_ic_known = ric_lambda(*options.sigma2, data.design.p);
  if (lambda_ic_known > 0) {
    double ybar = data.response.mean();
    double intercept_criterion =
        -0.5 * n * ybar * ybar + 0.5 * lambda_ic_known * lambda_ic_known;
    double slack = intercept_criterion + 0.5 * data.response.squaredNorm();
    double cap_dim = std::floor(2.0 * slack / (lambda_ic_known * lambda_ic_known));
    cap = std::min<double>(n, std::max(1.0, cap_dim));
  }

  struct Winner {
    PartitionModel model;
    double loss = 0;
    int lambda_index = -1;
  };
  std::map<int, Winner> winners;  // model dimension -> minimal-loss candidate

  int usable = 0;
  for (int li = 0; li < static_cast<int>(path.size()); ++li) {
    if (!path[li].converged) continue;
    ++usable;
    NestedFamily family = build_family(path[li], data.design);
    if (options.family_observer) options.family_observer(li, family);

    std::size_t first = 0;
    while (first < family.models.size() && family.sizes[first] > cap) ++first;
    FamilyGram bg = make_family_gram(family.models[first], data);
    const std::size_t count = family.models.size() - first;
    std::vector<double> losses(count);
    std::vector<char> feasible(count, 0);
    parallel_for(count, options.threads, [&](std::size_t i) {
      feasible[i] =
          member_loss(bg, family.models[first + i], data.design, cap, losses[i]) ? 1 : 0;
    });
    for (std::size_t i = 0; i < count; ++i) {
      if (!feasible[i]) continue;
      int size = family.sizes[first + i];
      auto it = winners.find(size);
      if (it == winners.end() || losses[i] < it->second.loss)
        winners[size] = {family.models[first + i], losses[i], li};
    }
  }
  if (usable == 0)
    throw NoConvergence(path.empty() ? GroupLassoFit{} : path.back());
  if (winners.empty()) throw AllInfeasible("no feasible model at any lambda");

  double sigma2 = 0;
  if (options.sigma2) {
    sigma2 = *options.sigma2;
  } else {
    // residual variance at the largest winner of moderate size
    const Winner* pick = nullptr;
    int pick_size = 0;
    for (const auto& [size, winner] : winners)
      if (size <= n / 2 && size >= pick_size) {
        pick = &winner;
        pick_size = size;
      }
    if (!pick) throw AllInfeasible("no winner small enough to estimate sigma^2");
    sigma2 = (data.response.squaredNorm() + 2.0 * pick->loss) / (n - pick_size);
  }
  double lambda_ic = options.lambda_ic ? *options.lambda_ic : ric_lambda(sigma2, data.design.p);

  std::vector<PartitionModel> candidates;
  std::vector<CandidateScore> table;
  for (const auto& [size, winner] : winners) {
    candidates.push_back(winner.model);
    CandidateScore score;
    score.size = size;
    score.loss = winner.loss;
    score.feasible = true;
    score.lambda_index = winner.lambda_index;
    table.push_back(score);
  }
  return select_from_scores(candidates, std::move(table), data, lambda_ic, sigma2);
}

}  // namespace fusereg
