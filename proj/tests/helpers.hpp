#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "fusereg/rng.hpp"
#include "fusereg/schema.hpp"

namespace fusereg::testing {

/// All-categorical dataset from 0-based level assignments (n x r).
inline Dataset make_categorical(const std::vector<int>& levels_per_factor,
                                const Eigen::MatrixXi& assign,
                                const Eigen::VectorXd& response) {
  PredictorSchema schema;
  for (std::size_t k = 0; k < levels_per_factor.size(); ++k) {
    Predictor pred;
    pred.name = "f" + std::to_string(k + 1);
    pred.kind = PredictorKind::categorical;
    for (int j = 0; j < levels_per_factor[k]; ++j)
      pred.levels.push_back("l" + std::to_string(j));
    schema.predictors.push_back(std::move(pred));
  }
  IndexedTable table;
  table.levels = assign;
  table.continuous.resize(assign.rows(), 1);
  table.continuous_slot.assign(levels_per_factor.size(), -1);
  return encode_indexed(table, schema, response);
}

/// Level assignments cycling through every level so no column is empty.
inline Eigen::MatrixXi cycling_assignment(const std::vector<int>& levels_per_factor, int n) {
  Eigen::MatrixXi assign(n, levels_per_factor.size());
  for (int i = 0; i < n; ++i)
    for (std::size_t k = 0; k < levels_per_factor.size(); ++k)
      assign(i, k) = (i + static_cast<int>(k)) % levels_per_factor[k];
  return assign;
}

inline Eigen::VectorXd gaussian_vector(int n, CounterRng& rng) {
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v(i) = rng.gaussian();
  return v;
}

/// Random design with exactly orthogonal columns: Q from a random matrix,
/// scaled per column. Blocks are then orthogonal with diagonal Grams.
inline Eigen::MatrixXd orthogonal_design(int n, int p, CounterRng& rng,
                                         double scale_lo = 0.5, double scale_hi = 3.0) {
  Eigen::MatrixXd raw(n, p);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < p; ++j) raw(i, j) = rng.gaussian();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(raw);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(n, p);
  for (int j = 0; j < p; ++j)
    q.col(j) *= scale_lo + (scale_hi - scale_lo) * rng.uniform();
  return q;
}

/// Wrap an arbitrary numeric matrix as a design of single-column continuous
/// groups following a synthetic intercept; used by solver tests that need
/// full control over the columns.
inline Dataset make_numeric(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                            const std::vector<int>& group_sizes) {
  DesignMatrix d;
  d.values = x;
  d.n = static_cast<int>(x.rows());
  d.p = static_cast<int>(x.cols());
  d.r = static_cast<int>(group_sizes.size());
  d.column_norms.resize(d.p);
  for (int c = 0; c < d.p; ++c) d.column_norms(c) = x.col(c).norm();
  int offset = 0;
  for (std::size_t k = 0; k < group_sizes.size(); ++k) {
    d.group_offsets.push_back(offset);
    d.group_sizes.push_back(k == 0 ? group_sizes[k] - 1 : group_sizes[k]);
    d.group_kinds.push_back(PredictorKind::categorical);
    d.group_names.push_back("g" + std::to_string(k + 1));
    std::vector<std::string> levels;
    int n_levels = (k == 0) ? group_sizes[k] : group_sizes[k] + 1;
    for (int j = 0; j < n_levels; ++j) levels.push_back("l" + std::to_string(j));
    d.group_levels.push_back(levels);
    for (int j = 0; j < group_sizes[k]; ++j)
      d.column_tags.push_back({static_cast<int>(k + 1), (k == 0) ? j : j + 1});
    offset += group_sizes[k];
  }
  return {std::move(d), y};
}

}  // namespace fusereg::testing
