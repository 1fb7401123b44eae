#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "fusereg/csv.hpp"

namespace fusereg {

enum class PredictorKind { categorical, continuous };

struct Predictor {
  std::string name;
  PredictorKind kind = PredictorKind::categorical;
  std::vector<std::string> levels;  // categorical only; first entry is the reference level
};

/// Declarative list of predictors. Validation enforces: at least one
/// predictor, categorical predictors have >= 2 levels with unique names.
struct PredictorSchema {
  std::vector<Predictor> predictors;

  void validate() const;
  int find(const std::string& name) const;  // -1 when absent
};

/// (factor, level) tag of one design column. Factors are indexed 1..r.
/// Factor 1 carries the intercept and keeps its reference level, so its
/// columns are tagged (1, 0)..(1, p1); any other categorical factor k drops
/// the reference and is tagged (k, 1)..(k, p_k); a continuous factor is a
/// single column tagged (k, 1).
struct ColumnTag {
  int factor = 0;
  int level = 0;
  bool operator==(const ColumnTag&) const = default;
};

struct DesignMatrix {
  Eigen::MatrixXd values;  // n x p, dense
  std::vector<ColumnTag> column_tags;
  Eigen::VectorXd column_norms;  // strictly positive by construction
  int n = 0;
  int p = 0;
  int r = 0;  // number of factors (groups)

  std::vector<int> group_sizes;    // p_k; factor 1 occupies p_1 + 1 columns
  std::vector<int> group_offsets;  // first column of each factor, 0-based
  std::vector<PredictorKind> group_kinds;
  std::vector<std::string> group_names;
  std::vector<std::vector<std::string>> group_levels;  // incl. reference; empty for continuous
  bool synthetic_intercept = false;  // true when factor 1 was prepended

  int cols_of(int factor) const {
    if (group_kinds[factor - 1] == PredictorKind::continuous) return 1;
    return factor == 1 ? group_sizes[0] + 1 : group_sizes[factor - 1];
  }
  int levels_of(int factor) const { return static_cast<int>(group_levels[factor - 1].size()); }
  /// Design column of (factor, level) per the tagging above; -1 for the
  /// dropped reference of a categorical factor k >= 2.
  int column_of(int factor, int level) const {
    if (factor != 1 && group_kinds[factor - 1] == PredictorKind::categorical && level == 0)
      return -1;
    return group_offsets[factor - 1] + (factor == 1 ? level : level - 1);
  }
};

struct Dataset {
  DesignMatrix design;
  Eigen::VectorXd response;
};

struct ColumnStats {
  double x_max = 0;  // max column norm
  double x_min = 0;  // min column norm
  double x_w = 0;    // max norm / weight
};

/// Encode a raw table against a schema. Column order is deterministic:
/// factor 1 levels 0..p1 first, then each remaining predictor in schema
/// order. When the first predictor is not categorical a synthetic one-level
/// factor (a pure intercept column) is prepended so the intercept always
/// lives in the column space.
Dataset encode(const RawTable& table, const PredictorSchema& schema,
               const std::string& response_column);

/// Shared low-level builder: categorical levels as 0-based indices
/// (n x #predictors), continuous values alongside. Used by encode() and by
/// the simulation generator, which never goes through strings.
struct IndexedTable {
  Eigen::MatrixXi levels;                   // n x (#categorical slots), -1 where continuous
  Eigen::MatrixXd continuous;               // n x (#continuous slots), column per continuous predictor
  std::vector<int> continuous_slot;         // per predictor: column in `continuous` or -1
};

Dataset encode_indexed(const IndexedTable& data, const PredictorSchema& schema,
                       const Eigen::VectorXd& response);

ColumnStats column_stats(const DesignMatrix& design);
ColumnStats column_stats(const DesignMatrix& design, const Eigen::VectorXd& weights);

/// Infer a schema from a raw table: columns where every cell parses as a
/// number become continuous, everything else categorical with levels in
/// order of first appearance.
PredictorSchema infer_schema(const RawTable& table, const std::string& response_column);

/// Level labels of the active categorical columns of one encoded row.
std::vector<std::string> decode_row(const DesignMatrix& design, int row);

}  // namespace fusereg
