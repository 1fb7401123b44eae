#include "fusereg/model_io.hpp"

#include <fstream>
#include <json.hpp>
#include <unordered_map>

#include "fusereg/errors.hpp"
#include "fusereg/version.hpp"

namespace fusereg {

using nlohmann::json;

std::string config_hash_hex(const std::string& canonical_config) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a(canonical_config)));
  return buf;
}

FittedModel make_fitted_model(const DesignMatrix& design, const PartitionModel& model,
                              const Eigen::VectorXd& beta) {
  if (beta.size() != design.p) throw DimensionMismatch("beta length != p");
  FittedModel out;
  out.synthetic_intercept = design.synthetic_intercept;
  out.model = model;
  out.version = kVersion;
  for (int k = 1; k <= design.r; ++k) {
    FactorInfo info;
    info.name = design.group_names[k - 1];
    info.kind = design.group_kinds[k - 1];
    info.levels = design.group_levels[k - 1];
    out.factors.push_back(std::move(info));
    if (design.group_kinds[k - 1] == PredictorKind::categorical) {
      std::vector<double> coef(design.levels_of(k));
      for (int j = 0; j < design.levels_of(k); ++j) {
        int col = design.column_of(k, j);
        coef[j] = (col < 0) ? 0.0 : beta(col);
      }
      out.coefficients.push_back(std::move(coef));
    } else {
      out.coefficients.push_back({beta(design.column_of(k, 1))});
    }
  }
  return out;
}

std::string model_to_json(const FittedModel& model) {
  json doc;
  doc["version"] = model.version.empty() ? kVersion : model.version;
  doc["seed"] = model.seed;
  doc["config_hash"] = model.config_hash;
  doc["synthetic_intercept"] = model.synthetic_intercept;

  json factors = json::array();
  json continuous = json::array();
  json coefficients = json::object();
  for (std::size_t idx = 0; idx < model.factors.size(); ++idx) {
    const auto& info = model.factors[idx];
    int k = static_cast<int>(idx) + 1;
    if (info.kind == PredictorKind::categorical) {
      json entry;
      entry["name"] = info.name;
      entry["factor"] = k;
      entry["levels"] = info.levels;
      json clusters = json::array();
      for (const auto& cluster : model.model.clusters(k)) {
        json members = json::array();
        for (int level : cluster) members.push_back(info.levels[level]);
        clusters.push_back(members);
      }
      entry["clusters"] = clusters;
      factors.push_back(entry);
      for (std::size_t j = 0; j < info.levels.size(); ++j)
        coefficients[info.name + "=" + info.levels[j]] = model.coefficients[idx][j];
    } else {
      json entry;
      entry["name"] = info.name;
      entry["factor"] = k;
      entry["included"] = static_cast<bool>(model.model.continuous_included[idx]);
      continuous.push_back(entry);
      coefficients[info.name] = model.coefficients[idx][0];
    }
  }
  doc["factors"] = factors;
  doc["continuous"] = continuous;
  doc["coefficients"] = coefficients;
  return doc.dump(2) + "\n";
}

FittedModel model_from_json(const std::string& text) {
  json doc = json::parse(text);
  FittedModel result;
  result.version = doc.value("version", "");
  result.seed = doc.value("seed", std::uint64_t{0});
  result.config_hash = doc.value("config_hash", "");
  result.synthetic_intercept = doc.value("synthetic_intercept", false);

  // Entries carry their 1-based effective factor index; reassemble in that
  // order so categorical and continuous predictors interleave as encoded.
  const auto& coefficients = doc.at("coefficients");
  std::size_t total = doc.at("factors").size() + doc.at("continuous").size();
  result.model.factor_rgs.resize(total);
  result.model.continuous_included.assign(total, false);
  result.factors.resize(total);
  result.coefficients.resize(total);

  for (const auto& entry : doc.at("factors")) {
    std::size_t idx = entry.at("factor").get<std::size_t>() - 1;
    if (idx >= total) throw InputError("model JSON: factor index out of range");
    FactorInfo info;
    info.name = entry.at("name").get<std::string>();
    info.kind = PredictorKind::categorical;
    info.levels = entry.at("levels").get<std::vector<std::string>>();

    std::unordered_map<std::string, int> cluster_of;
    int cid = 0;
    for (const auto& cluster : entry.at("clusters")) {
      for (const auto& level : cluster) cluster_of[level.get<std::string>()] = cid;
      ++cid;
    }
    std::vector<int> labels;
    std::vector<double> coef;
    for (const auto& level : info.levels) {
      auto it = cluster_of.find(level);
      if (it == cluster_of.end())
        throw InputError("model JSON: level '" + level + "' missing from clusters of '" +
                         info.name + "'");
      labels.push_back(it->second);
      coef.push_back(coefficients.at(info.name + "=" + level).get<double>());
    }
    result.model.factor_rgs[idx] = canonical_rgs(labels);
    result.coefficients[idx] = std::move(coef);
    result.factors[idx] = std::move(info);
  }
  for (const auto& entry : doc.at("continuous")) {
    std::size_t idx = entry.at("factor").get<std::size_t>() - 1;
    if (idx >= total) throw InputError("model JSON: factor index out of range");
    FactorInfo info;
    info.name = entry.at("name").get<std::string>();
    info.kind = PredictorKind::continuous;
    result.model.continuous_included[idx] = entry.at("included").get<bool>();
    result.coefficients[idx] = {coefficients.at(info.name).get<double>()};
    result.factors[idx] = std::move(info);
  }
  return result;
}

void save_model(const FittedModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write file: " + path);
  out << model_to_json(model);
}

FittedModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open file: " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return model_from_json(text);
}

Eigen::VectorXd predict_table(const FittedModel& model, const RawTable& table,
                              bool unseen_as_reference) {
  const int n = static_cast<int>(table.rows.size());
  Eigen::VectorXd out = Eigen::VectorXd::Zero(n);
  for (std::size_t idx = 0; idx < model.factors.size(); ++idx) {
    const auto& info = model.factors[idx];
    bool synthetic = model.synthetic_intercept && idx == 0;
    int col = -1;
    if (!synthetic) {
      col = table.find_column(info.name);
      if (col < 0) throw InputError("column not found in the data: " + info.name);
    }
    if (info.kind == PredictorKind::categorical) {
      std::unordered_map<std::string, double> coef_of;
      for (std::size_t j = 0; j < info.levels.size(); ++j)
        coef_of.emplace(info.levels[j], model.coefficients[idx][j]);
      double reference_coef = model.coefficients[idx][0];
      for (int i = 0; i < n; ++i) {
        if (synthetic) {
          out(i) += reference_coef;
          continue;
        }
        auto it = coef_of.find(table.rows[i][col]);
        if (it == coef_of.end()) {
          if (!unseen_as_reference) throw UnseenLevel(info.name, table.rows[i][col]);
          out(i) += reference_coef;
        } else {
          out(i) += it->second;
        }
      }
    } else {
      for (int i = 0; i < n; ++i) {
        double v;
        if (!parse_double(table.rows[i][col], v))
          throw InputError("non-numeric cell '" + table.rows[i][col] + "' in column '" +
                           info.name + "'");
        out(i) += v * model.coefficients[idx][0];
      }
    }
  }
  return out;
}

}  // namespace fusereg
