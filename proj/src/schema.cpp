#include "fusereg/schema.hpp"

#include <set>
#include <unordered_map>

#include "fusereg/errors.hpp"

namespace fusereg {

void PredictorSchema::validate() const {
  if (predictors.empty()) throw InputError("schema has no predictors");
  std::set<std::string> names;
  for (const auto& pred : predictors) {
    if (!names.insert(pred.name).second)
      throw InputError("duplicate predictor name: " + pred.name);
    if (pred.kind == PredictorKind::categorical) {
      if (pred.levels.size() < 2)
        throw InputError("categorical predictor '" + pred.name + "' needs >= 2 levels");
      std::set<std::string> levels(pred.levels.begin(), pred.levels.end());
      if (levels.size() != pred.levels.size())
        throw InputError("duplicate level names in predictor '" + pred.name + "'");
    } else if (!pred.levels.empty()) {
      throw InputError("continuous predictor '" + pred.name + "' must not list levels");
    }
  }
}

int PredictorSchema::find(const std::string& name) const {
  for (std::size_t i = 0; i < predictors.size(); ++i)
    if (predictors[i].name == name) return static_cast<int>(i);
  return -1;
}

namespace {

const char* kInterceptName = "_intercept";
const char* kInterceptLevel = "_";

// Effective factor list: prepend a synthetic one-level factor when the
// first predictor is not categorical, so p = 1 + sum(p_k) always holds.
std::vector<Predictor> effective_factors(const PredictorSchema& schema, bool& synthetic) {
  synthetic = schema.predictors.front().kind != PredictorKind::categorical;
  std::vector<Predictor> factors;
  if (synthetic)
    factors.push_back({kInterceptName, PredictorKind::categorical, {kInterceptLevel}});
  factors.insert(factors.end(), schema.predictors.begin(), schema.predictors.end());
  return factors;
}

}  // namespace

Dataset encode_indexed(const IndexedTable& data, const PredictorSchema& schema,
                       const Eigen::VectorXd& response) {
  schema.validate();
  bool synthetic = false;
  std::vector<Predictor> factors = effective_factors(schema, synthetic);
  const int n = static_cast<int>(response.size());
  const int r = static_cast<int>(factors.size());
  if (data.levels.rows() != n)
    throw DimensionMismatch("row count mismatch between table and response");

  DesignMatrix d;
  d.n = n;
  d.r = r;
  d.synthetic_intercept = synthetic;
  d.group_sizes.resize(r);
  d.group_offsets.resize(r);
  d.group_kinds.resize(r);
  d.group_names.resize(r);
  d.group_levels.resize(r);

  int p = 0;
  for (int k = 1; k <= r; ++k) {
    const auto& f = factors[k - 1];
    d.group_kinds[k - 1] = f.kind;
    d.group_names[k - 1] = f.name;
    d.group_offsets[k - 1] = p;
    if (f.kind == PredictorKind::categorical) {
      d.group_levels[k - 1] = f.levels;
      int n_levels = static_cast<int>(f.levels.size());
      d.group_sizes[k - 1] = n_levels - 1;  // p_k; factor 1 contributes p_1 + 1 columns
      p += (k == 1) ? n_levels : n_levels - 1;
    } else {
      d.group_sizes[k - 1] = 1;
      p += 1;
    }
  }
  d.p = p;

  d.values = Eigen::MatrixXd::Zero(n, p);
  d.column_tags.resize(p);
  for (int k = 1; k <= r; ++k) {
    const auto& f = factors[k - 1];
    int offset = d.group_offsets[k - 1];
    if (f.kind == PredictorKind::categorical) {
      // Column index of the raw (indexed) table for this factor.
      int raw = synthetic ? k - 2 : k - 1;
      int n_levels = static_cast<int>(f.levels.size());
      for (int i = 0; i < n; ++i) {
        int level = (raw < 0) ? 0 : data.levels(i, raw);
        if (level < 0 || level >= n_levels)
          throw UnknownLevel(f.name, "#" + std::to_string(level));
        int col = (k == 1) ? offset + level : (level == 0 ? -1 : offset + level - 1);
        if (col >= 0) d.values(i, col) = 1.0;
      }
      if (k == 1) {
        for (int j = 0; j <= n_levels - 1; ++j) d.column_tags[offset + j] = {1, j};
      } else {
        for (int j = 1; j <= n_levels - 1; ++j) d.column_tags[offset + j - 1] = {k, j};
      }
    } else {
      int raw = synthetic ? k - 2 : k - 1;
      int slot = data.continuous_slot[raw];
      d.values.col(offset) = data.continuous.col(slot);
      d.column_tags[offset] = {k, 1};
    }
  }

  d.column_norms.resize(p);
  for (int c = 0; c < p; ++c) {
    double norm = d.values.col(c).norm();
    if (norm <= 0.0) {
      const auto& tag = d.column_tags[c];
      throw EmptyColumn(tag.factor, tag.level);
    }
    d.column_norms(c) = norm;
  }
  return {std::move(d), response};
}

Dataset encode(const RawTable& table, const PredictorSchema& schema,
               const std::string& response_column) {
  schema.validate();
  int resp_idx = table.find_column(response_column);
  if (resp_idx < 0) throw InputError("response column not found: " + response_column);

  const int n = static_cast<int>(table.rows.size());
  if (n == 0) throw InputError("table has no data rows");

  Eigen::VectorXd response(n);
  for (int i = 0; i < n; ++i) {
    double v;
    if (!parse_double(table.rows[i][resp_idx], v)) throw NonNumericResponse(table.rows[i][resp_idx]);
    response(i) = v;
  }

  const int n_pred = static_cast<int>(schema.predictors.size());
  IndexedTable data;
  data.levels = Eigen::MatrixXi::Constant(n, n_pred, -1);
  data.continuous_slot.assign(n_pred, -1);
  int n_cont = 0;
  for (int j = 0; j < n_pred; ++j)
    if (schema.predictors[j].kind == PredictorKind::continuous)
      data.continuous_slot[j] = n_cont++;
  data.continuous.resize(n, std::max(n_cont, 1));

  for (int j = 0; j < n_pred; ++j) {
    const auto& pred = schema.predictors[j];
    int col = table.find_column(pred.name);
    if (col < 0) throw InputError("predictor column not found: " + pred.name);
    if (pred.kind == PredictorKind::categorical) {
      std::unordered_map<std::string, int> index;
      for (std::size_t l = 0; l < pred.levels.size(); ++l)
        index.emplace(pred.levels[l], static_cast<int>(l));
      for (int i = 0; i < n; ++i) {
        auto it = index.find(table.rows[i][col]);
        if (it == index.end()) throw UnknownLevel(pred.name, table.rows[i][col]);
        data.levels(i, j) = it->second;
      }
    } else {
      for (int i = 0; i < n; ++i) {
        double v;
        if (!parse_double(table.rows[i][col], v))
          throw InputError("non-numeric cell '" + table.rows[i][col] + "' in continuous column '" +
                           pred.name + "'");
        data.continuous(i, data.continuous_slot[j]) = v;
      }
    }
  }
  return encode_indexed(data, schema, response);
}

ColumnStats column_stats(const DesignMatrix& design) {
  ColumnStats s;
  s.x_max = design.column_norms.maxCoeff();
  s.x_min = design.column_norms.minCoeff();
  s.x_w = 0;  // meaningful only with a weight vector
  return s;
}

ColumnStats column_stats(const DesignMatrix& design, const Eigen::VectorXd& weights) {
  if (weights.size() != design.p) throw DimensionMismatch("weight vector length != p");
  ColumnStats s = column_stats(design);
  s.x_w = (design.column_norms.array() / weights.array()).maxCoeff();
  return s;
}

PredictorSchema infer_schema(const RawTable& table, const std::string& response_column) {
  PredictorSchema schema;
  for (std::size_t c = 0; c < table.columns.size(); ++c) {
    if (table.columns[c] == response_column) continue;
    bool numeric = !table.rows.empty();
    for (const auto& row : table.rows) {
      double v;
      if (!parse_double(row[c], v)) {
        numeric = false;
        break;
      }
    }
    Predictor pred;
    pred.name = table.columns[c];
    if (numeric) {
      pred.kind = PredictorKind::continuous;
    } else {
      pred.kind = PredictorKind::categorical;
      std::set<std::string> seen;
      for (const auto& row : table.rows)
        if (seen.insert(row[c]).second) pred.levels.push_back(row[c]);
    }
    schema.predictors.push_back(std::move(pred));
  }
  if (schema.predictors.empty()) throw InputError("no predictor columns besides the response");
  return schema;
}

std::vector<std::string> decode_row(const DesignMatrix& design, int row) {
  std::vector<std::string> labels;
  for (int k = 1; k <= design.r; ++k) {
    if (design.group_kinds[k - 1] != PredictorKind::categorical) continue;
    int n_levels = design.levels_of(k);
    int active = -1;
    for (int j = 0; j < n_levels; ++j) {
      int col = design.column_of(k, j);
      if (col >= 0 && design.values(row, col) == 1.0) {
        active = j;
        break;
      }
    }
    if (active < 0) active = 0;  // reference level of factor k >= 2 has no column
    labels.push_back(design.group_levels[k - 1][active]);
  }
  return labels;
}

}  // namespace fusereg
