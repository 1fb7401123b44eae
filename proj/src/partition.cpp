#include "fusereg/partition.hpp"

#include <algorithm>
#include <cmath>

#include "fusereg/errors.hpp"

namespace fusereg {

int PartitionModel::n_clusters(int factor) const {
  const auto& rgs = factor_rgs[factor - 1];
  if (rgs.empty()) return 0;
  return 1 + *std::max_element(rgs.begin(), rgs.end());
}

std::vector<std::vector<int>> PartitionModel::clusters(int factor) const {
  std::vector<std::vector<int>> out(n_clusters(factor));
  const auto& rgs = factor_rgs[factor - 1];
  for (std::size_t level = 0; level < rgs.size(); ++level)
    out[rgs[level]].push_back(static_cast<int>(level));
  return out;
}

int model_size(const PartitionModel& model) {
  int m = 0;
  for (int k = 1; k <= model.n_factors(); ++k) {
    if (model.is_categorical(k)) {
      int j = model.n_clusters(k);
      m += (k == 1) ? j : j - 1;
    } else if (model.continuous_included[k - 1]) {
      m += 1;
    }
  }
  return m;
}

std::vector<int> canonical_rgs(const std::vector<int>& labels) {
  std::vector<int> mapping(labels.size(), -1);
  std::vector<int> out(labels.size());
  int next = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    int& slot = mapping[labels[i]];
    if (slot < 0) slot = next++;
    out[i] = slot;
  }
  return out;
}

namespace {

void check_dims(const PartitionModel& model, const DesignMatrix& design) {
  if (model.n_factors() != design.r) throw DimensionMismatch("model factor count != design");
  for (int k = 1; k <= design.r; ++k) {
    bool cat = design.group_kinds[k - 1] == PredictorKind::categorical;
    if (cat != model.is_categorical(k))
      throw DimensionMismatch("factor " + std::to_string(k) + " kind mismatch");
    if (cat && static_cast<int>(model.factor_rgs[k - 1].size()) != design.levels_of(k))
      throw DimensionMismatch("factor " + std::to_string(k) + " level count mismatch");
  }
}

}  // namespace

PartitionModel discrete_model(const DesignMatrix& design, const std::vector<int>& active_factors) {
  PartitionModel model;
  model.factor_rgs.resize(design.r);
  model.continuous_included.assign(design.r, false);
  std::vector<bool> active(design.r + 1, false);
  for (int k : active_factors) active[k] = true;
  for (int k = 1; k <= design.r; ++k) {
    if (design.group_kinds[k - 1] == PredictorKind::categorical) {
      int n_levels = design.levels_of(k);
      auto& rgs = model.factor_rgs[k - 1];
      rgs.assign(n_levels, 0);
      if (active[k])
        for (int j = 0; j < n_levels; ++j) rgs[j] = j;
    } else {
      model.continuous_included[k - 1] = active[k];
    }
  }
  return model;
}

PartitionModel intercept_only(const DesignMatrix& design) {
  return discrete_model(design, {});
}

PartitionModel model_of(const Eigen::VectorXd& beta, const DesignMatrix& design, double tol) {
  if (beta.size() != design.p) throw DimensionMismatch("beta length != p");
  PartitionModel model;
  model.factor_rgs.resize(design.r);
  model.continuous_included.assign(design.r, false);
  for (int k = 1; k <= design.r; ++k) {
    if (design.group_kinds[k - 1] == PredictorKind::categorical) {
      int n_levels = design.levels_of(k);
      std::vector<double> coef(n_levels);
      for (int j = 0; j < n_levels; ++j) {
        int col = design.column_of(k, j);
        coef[j] = (col < 0) ? 0.0 : beta(col);  // adjoined reference coefficient
      }
      std::vector<int> labels(n_levels, -1);
      int next = 0;
      for (int j = 0; j < n_levels; ++j) {
        if (labels[j] >= 0) continue;
        labels[j] = next;
        for (int j2 = j + 1; j2 < n_levels; ++j2)
          if (labels[j2] < 0 && std::abs(coef[j2] - coef[j]) <= tol) labels[j2] = next;
        ++next;
      }
      model.factor_rgs[k - 1] = canonical_rgs(labels);
    } else {
      int col = design.column_of(k, 1);
      model.continuous_included[k - 1] = std::abs(beta(col)) > tol;
    }
  }
  return model;
}

bool is_submodel(const PartitionModel& sub, const PartitionModel& super) {
  if (sub.n_factors() != super.n_factors()) return false;
  for (int k = 1; k <= sub.n_factors(); ++k) {
    if (sub.is_categorical(k) != super.is_categorical(k)) return false;
    if (sub.is_categorical(k)) {
      const auto& a = sub.factor_rgs[k - 1];
      const auto& b = super.factor_rgs[k - 1];
      if (a.size() != b.size()) return false;
      // a coarsens b: levels sharing a b-cluster must share an a-cluster
      std::vector<int> image(b.size(), -1);
      for (std::size_t level = 0; level < b.size(); ++level) {
        int& slot = image[b[level]];
        if (slot < 0) slot = a[level];
        else if (slot != a[level]) return false;
      }
    } else if (sub.continuous_included[k - 1] && !super.continuous_included[k - 1]) {
      return false;
    }
  }
  return true;
}

CollapsedDesign collapse(const PartitionModel& model, const DesignMatrix& design) {
  check_dims(model, design);
  CollapsedDesign out;
  out.carrier.assign(design.p, -1);

  // First pass: lay out Z columns in (factor, cluster id) order; canonical
  // restricted growth makes id order equal smallest-level order.
  for (int k = 1; k <= design.r; ++k) {
    if (model.is_categorical(k)) {
      auto clusters = model.clusters(k);
      for (int c = 0; c < static_cast<int>(clusters.size()); ++c) {
        if (k != 1 && c == 0) continue;  // reference-absorbing cluster is dropped
        out.columns.push_back({k, c, clusters[c].front()});
      }
    } else if (model.continuous_included[k - 1]) {
      out.columns.push_back({k, 0, -1});
    }
  }

  const int m = static_cast<int>(out.columns.size());
  out.z = Eigen::MatrixXd::Zero(design.n, m);
  for (int zc = 0; zc < m; ++zc) {
    const auto& col = out.columns[zc];
    if (col.smallest_level < 0) {
      int dc = design.column_of(col.factor, 1);
      out.z.col(zc) = design.values.col(dc);
      out.carrier[dc] = zc;
      continue;
    }
    const auto& rgs = model.factor_rgs[col.factor - 1];
    for (int level = 0; level < static_cast<int>(rgs.size()); ++level) {
      if (rgs[level] != col.cluster) continue;
      int dc = design.column_of(col.factor, level);
      if (dc < 0) continue;  // reference of k >= 2 has no design column
      out.z.col(zc) += design.values.col(dc);
      out.carrier[dc] = zc;
    }
  }
  return out;
}

Eigen::VectorXd expand(const CollapsedDesign& collapsed, const Eigen::VectorXd& xi, int p) {
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  for (int dc = 0; dc < p; ++dc)
    if (collapsed.carrier[dc] >= 0) beta(dc) = xi(collapsed.carrier[dc]);
  return beta;
}

RefitResult refit(const PartitionModel& model, const Dataset& data) {
  CollapsedDesign collapsed = collapse(model, data.design);
  const int m = static_cast<int>(collapsed.z.cols());
  const int n = data.design.n;
  if (m > n) throw Overparameterized(m, n);

  RefitResult result;
  result.model = model;
  if (m == 0) {
    result.xi.resize(0);
    result.beta = Eigen::VectorXd::Zero(data.design.p);
    result.loss = 0.0;
    return result;
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(collapsed.z);
  if (qr.rank() < m) throw RankDeficient(m, static_cast<int>(qr.rank()));
  result.xi = qr.solve(data.response);
  result.beta = expand(collapsed, result.xi, data.design.p);
  Eigen::VectorXd fitted = collapsed.z * result.xi;
  result.loss = 0.5 * fitted.squaredNorm() - data.response.dot(fitted);
  return result;
}

ConstraintSystem constraint_matrix(const PartitionModel& model, const DesignMatrix& design,
                                   const std::vector<std::vector<int>>& cluster_orders) {
  check_dims(model, design);
  if (!cluster_orders.empty() && static_cast<int>(cluster_orders.size()) != design.r)
    throw DimensionMismatch("cluster_orders must give one ordering per factor");

  ConstraintSystem sys;
  sys.m = model_size(model);
  const int p = design.p;

  // Leading columns: one per free cluster (all clusters of factor 1, every
  // non-reference cluster of k >= 2, each included continuous column),
  // addressed by the smallest member's design column.
  std::vector<int> lead_of_cluster;                 // flattened (factor, cluster) -> lead index or -1
  std::vector<std::vector<int>> cluster_index(design.r);
  std::vector<int> remaining;                       // design columns in trailing order

  for (int k = 1; k <= design.r; ++k) {
    if (model.is_categorical(k)) {
      auto clusters = model.clusters(k);
      std::vector<int> order(clusters.size());
      if (!cluster_orders.empty() && !cluster_orders[k - 1].empty()) {
        order = cluster_orders[k - 1];
        if (order.size() != clusters.size() || order[0] != 0)
          throw DimensionMismatch("cluster order of factor " + std::to_string(k) +
                                  " must permute ids with the reference cluster first");
      } else {
        for (std::size_t c = 0; c < clusters.size(); ++c) order[c] = static_cast<int>(c);
      }
      cluster_index[k - 1].assign(clusters.size(), -1);
      for (int c : order) {
        int s = clusters[c].front();  // smallest member
        bool free_cluster = (k == 1) || (c != 0);
        if (free_cluster) {
          cluster_index[k - 1][c] = static_cast<int>(sys.column_order.size());
          sys.column_order.push_back(design.column_of(k, s));
        }
      }
    } else if (model.continuous_included[k - 1]) {
      sys.column_order.push_back(design.column_of(k, 1));
    }
  }
  if (static_cast<int>(sys.column_order.size()) != sys.m)
    throw InternalError("free-cluster count disagrees with model size");

  // Trailing columns: per factor, per cluster in the same order, the
  // non-smallest members increasing; excluded continuous columns last.
  struct Row { int design_col; int factor; int cluster; };
  std::vector<Row> rows;
  for (int k = 1; k <= design.r; ++k) {
    if (model.is_categorical(k)) {
      auto clusters = model.clusters(k);
      std::vector<int> order(clusters.size());
      if (!cluster_orders.empty() && !cluster_orders[k - 1].empty()) order = cluster_orders[k - 1];
      else for (std::size_t c = 0; c < clusters.size(); ++c) order[c] = static_cast<int>(c);
      for (int c : order) {
        bool free_cluster = (k == 1) || (c != 0);
        int lead_level = clusters[c].front();
        for (int level : clusters[c]) {
          int dc = design.column_of(k, level);
          if (dc < 0) continue;  // reference level of k >= 2: no coefficient
          if (free_cluster && level == lead_level) continue;
          rows.push_back({dc, k, c});
        }
      }
    } else if (!model.continuous_included[k - 1]) {
      rows.push_back({design.column_of(k, 1), k, -1});
    }
  }

  const int n_rows = static_cast<int>(rows.size());
  if (n_rows != p - sys.m) throw InternalError("constraint row count disagrees with p - m");
  sys.a0 = Eigen::MatrixXd::Zero(n_rows, p);
  for (int t = 0; t < n_rows; ++t) {
    sys.column_order.push_back(rows[t].design_col);
    sys.a0(t, sys.m + t) = 1.0;
    if (rows[t].cluster >= 0) {
      int lead = cluster_index[rows[t].factor - 1][rows[t].cluster];
      if (lead >= 0) sys.a0(t, lead) = -1.0;
      // lead < 0: reference-absorbing cluster of k >= 2, constraint is beta = 0
    }
  }
  return sys;
}

namespace {

// All set partitions of {0..count-1} as restricted-growth strings, in
// lexicographic RGS order.
std::vector<std::vector<int>> all_partitions(int count) {
  std::vector<std::vector<int>> out;
  std::vector<int> rgs(count, 0);
  while (true) {
    out.push_back(rgs);
    // next RGS: increment the rightmost position that can grow
    int i = count - 1;
    for (; i > 0; --i) {
      int cap = 1 + *std::max_element(rgs.begin(), rgs.begin() + i);
      if (rgs[i] < cap) break;
    }
    if (i == 0) break;
    ++rgs[i];
    std::fill(rgs.begin() + i + 1, rgs.end(), 0);
  }
  return out;
}

}  // namespace

void for_each_submodel(const PartitionModel& model, long long max_count,
                       const std::function<void(const PartitionModel&)>& visit) {
  // Per-factor options: every coarsening of the factor's partition, realized
  // by partitioning its clusters. Continuous factors offer {kept, deleted}.
  std::vector<std::vector<std::vector<int>>> factor_options(model.n_factors());
  std::vector<std::vector<bool>> continuous_options(model.n_factors());

  double total = 1.0;
  for (int k = 1; k <= model.n_factors(); ++k) {
    if (model.is_categorical(k)) {
      const auto& rgs = model.factor_rgs[k - 1];
      int j = model.n_clusters(k);
      for (const auto& grouping : all_partitions(j)) {
        std::vector<int> merged(rgs.size());
        for (std::size_t level = 0; level < rgs.size(); ++level)
          merged[level] = grouping[rgs[level]];
        factor_options[k - 1].push_back(canonical_rgs(merged));
      }
      total *= static_cast<double>(factor_options[k - 1].size());
    } else {
      continuous_options[k - 1].push_back(model.continuous_included[k - 1]);
      if (model.continuous_included[k - 1]) continuous_options[k - 1].push_back(false);
      total *= static_cast<double>(continuous_options[k - 1].size());
    }
  }
  if (total - 1.0 > static_cast<double>(max_count)) throw Exploded(total - 1.0, max_count);

  PartitionModel current = model;
  std::function<void(int)> rec = [&](int k) {
    if (k > model.n_factors()) {
      if (!(current == model)) visit(current);
      return;
    }
    if (model.is_categorical(k)) {
      for (const auto& option : factor_options[k - 1]) {
        current.factor_rgs[k - 1] = option;
        rec(k + 1);
      }
      current.factor_rgs[k - 1] = model.factor_rgs[k - 1];
    } else {
      for (bool included : continuous_options[k - 1]) {
        current.continuous_included[k - 1] = included;
        rec(k + 1);
      }
      current.continuous_included[k - 1] = model.continuous_included[k - 1];
    }
  };
  rec(1);
}

std::vector<PartitionModel> enumerate_submodels(const PartitionModel& model, long long max_count) {
  std::vector<PartitionModel> out;
  for_each_submodel(model, max_count, [&](const PartitionModel& m) { out.push_back(m); });
  return out;
}

}  // namespace fusereg
