#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "fusereg/csv.hpp"
#include "fusereg/partition.hpp"
#include "fusereg/schema.hpp"

namespace fusereg {

struct FactorInfo {
  std::string name;
  PredictorKind kind = PredictorKind::categorical;
  std::vector<std::string> levels;  // categorical only
};

/// Self-contained fitted model: the effective factor list, the selected
/// partitions, and one coefficient per (factor, level) — equal within each
/// cluster, zero on the reference-absorbing clusters of factors k >= 2.
struct FittedModel {
  std::vector<FactorInfo> factors;
  bool synthetic_intercept = false;
  PartitionModel model;
  std::vector<std::vector<double>> coefficients;  // per factor, per level (single entry if continuous)

  std::string version;
  std::uint64_t seed = 0;
  std::string config_hash;

  bool operator==(const FittedModel& other) const {
    return model == other.model && coefficients == other.coefficients &&
           synthetic_intercept == other.synthetic_intercept;
  }
};

FittedModel make_fitted_model(const DesignMatrix& design, const PartitionModel& model,
                              const Eigen::VectorXd& beta);

std::string model_to_json(const FittedModel& model);
FittedModel model_from_json(const std::string& text);

void save_model(const FittedModel& model, const std::string& path);
FittedModel load_model(const std::string& path);

/// Fitted values on raw rows. Unseen categorical values raise UnseenLevel
/// unless unseen_as_reference maps them onto the reference cluster.
Eigen::VectorXd predict_table(const FittedModel& model, const RawTable& table,
                              bool unseen_as_reference = false);

}  // namespace fusereg
