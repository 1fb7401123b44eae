#include <doctest.h>

#include <cmath>
#include <set>

#include "fusereg/errors.hpp"
#include "fusereg/pdmr.hpp"
#include "helpers.hpp"

using namespace fusereg;
using namespace fusereg::testing;

namespace {

// balanced single-factor dataset: levels 0..(L-1), g observations each
Dataset balanced_factor(int levels, int per_level, const Eigen::VectorXd& y) {
  Eigen::MatrixXi assign(levels * per_level, 1);
  for (int i = 0; i < assign.rows(); ++i) assign(i, 0) = i / per_level;
  return make_categorical({levels}, assign, y);
}

GroupLassoFit fake_fit(const DesignMatrix& design, const Eigen::VectorXd& beta) {
  GroupLassoFit fit;
  fit.lambda = 1.0;
  fit.beta = beta;
  fit.converged = true;
  for (int k = 1; k <= design.r; ++k) {
    int offset = design.group_offsets[k - 1];
    int size = design.cols_of(k);
    if (beta.segment(offset, size).array().abs().maxCoeff() > 0) fit.active_set.push_back(k);
  }
  return fit;
}

}  // namespace

TEST_SUITE_BEGIN("pdmr");

TEST_CASE("complete linkage on coefficients (0, 2, 2, 4)") {
  Eigen::VectorXd y = Eigen::VectorXd::Zero(8);
  y(0) = 1;  // any response; clustering only uses the coefficients
  Dataset data = balanced_factor(4, 2, y);
  Eigen::VectorXd beta(4);
  beta << 0, 2, 2, 4;
  GroupLassoFit fit = fake_fit(data.design, beta);
  Dendrogram dendro = cluster_factor(fit, 1, data.design);

  REQUIRE(dendro.merges.size() == 3);
  CHECK(dendro.cutting_heights == std::vector<double>{0, 2, 4});
  // first merge joins the two equal coefficients
  CHECK(dendro.merges[0].levels_a == std::vector<int>{1});
  CHECK(dendro.merges[0].levels_b == std::vector<int>{2});
  // tie at height 2 between {0}u{1,2} and {1,2}u{3}: lowest smallest member wins
  CHECK(dendro.merges[1].smallest_level == 0);
  CHECK(dendro.merges[2].height == 4);
}

TEST_CASE("single nonzero level merges once at |c|; equal coefficients at height 0") {
  Eigen::VectorXd y = Eigen::VectorXd::Zero(4);
  Dataset data = balanced_factor(2, 2, y);
  Eigen::VectorXd beta(2);
  beta << 0, -3.5;
  Dendrogram dendro = cluster_factor(fake_fit(data.design, beta), 1, data.design);
  REQUIRE(dendro.merges.size() == 1);
  CHECK(dendro.merges[0].height == 3.5);

  Eigen::VectorXd equal = Eigen::VectorXd::Constant(2, 1.25);
  Dendrogram flat = cluster_factor(fake_fit(data.design, equal), 1, data.design);
  CHECK(flat.cutting_heights == std::vector<double>{0});
}

TEST_CASE("factor k >= 2 adjoins the zero reference coefficient") {
  Eigen::MatrixXi assign = cycling_assignment({2, 3}, 12);
  CounterRng rng(5);
  Dataset data = make_categorical({2, 3}, assign, gaussian_vector(12, rng));
  Eigen::VectorXd beta(4);       // columns: f1 level0, level1; f2 level1, level2
  beta << 0.5, 0.5, 1.0, -1.0;   // factor 2 leaves: (0, 1, -1)
  GroupLassoFit fit = fake_fit(data.design, beta);
  Dendrogram dendro = cluster_factor(fit, 2, data.design);
  CHECK(dendro.leaves == 3);
  REQUIRE(dendro.merges.size() == 2);
  CHECK(dendro.merges[0].height == 1.0);  // tie |0-1| = |0-(-1)|: pair (0,1) wins
  CHECK(dendro.merges[0].levels_a == std::vector<int>{0});
  CHECK(dendro.merges[0].levels_b == std::vector<int>{1});
  CHECK(dendro.merges[1].height == 2.0);

  CHECK_THROWS_AS(cluster_factor(fit, 3, data.design), InputError);
}

TEST_CASE("not screened factors are rejected") {
  Eigen::VectorXd y = Eigen::VectorXd::Zero(4);
  Dataset data = balanced_factor(2, 2, y);
  GroupLassoFit fit = fake_fit(data.design, Eigen::VectorXd::Zero(2));
  CHECK_THROWS_AS(cluster_factor(fit, 1, data.design), NotScreened);
}

TEST_CASE("family for one factor with coefficients (0, 1, 3)") {
  Eigen::VectorXd y = Eigen::VectorXd::Zero(6);
  Dataset data = balanced_factor(3, 2, y);
  Eigen::VectorXd beta(3);
  beta << 0, 1, 3;
  NestedFamily family = build_family(fake_fit(data.design, beta), data.design);
  CHECK(family.sizes == std::vector<int>{3, 2, 1});
  CHECK(family.heights == std::vector<double>{0, 1, 3});
  // last model is intercept-only
  CHECK(family.models.back() == intercept_only(data.design));
}

TEST_CASE("family properties: nested, sizes drop by one, heights sorted") {
  Eigen::MatrixXi assign = cycling_assignment({4, 5, 3}, 60);
  CounterRng rng(13);
  Dataset data = make_categorical({4, 5, 3}, assign, gaussian_vector(60, rng));
  for (int trial = 0; trial < 10; ++trial) {
    Eigen::VectorXd beta = gaussian_vector(data.design.p, rng);
    if (trial % 3 == 0) beta.segment(data.design.group_offsets[1], 4).setZero();
    NestedFamily family = build_family(fake_fit(data.design, beta), data.design);
    for (std::size_t i = 1; i < family.models.size(); ++i) {
      CHECK(is_submodel(family.models[i], family.models[i - 1]));
      CHECK_FALSE(family.models[i] == family.models[i - 1]);
      CHECK(family.sizes[i] == family.sizes[i - 1] - 1);
      CHECK(family.heights[i] >= family.heights[i - 1]);
    }
    CHECK(family.sizes.back() == 1);
  }
}

TEST_CASE("empty active set: family is the intercept-only model alone") {
  Eigen::VectorXd y = Eigen::VectorXd::Zero(6);
  Dataset data = balanced_factor(3, 2, y);
  NestedFamily family = build_family(fake_fit(data.design, Eigen::VectorXd::Zero(3)), data.design);
  REQUIRE(family.models.size() == 1);
  CHECK(family.models[0] == intercept_only(data.design));
}

TEST_CASE("separation property: true partition appears among the cuts") {
  // if within-cluster spreads stay <= 2R and between-cluster values differ
  // by more than 2R, some cut reproduces the true partition
  CounterRng rng(17);
  Eigen::VectorXd y = Eigen::VectorXd::Zero(14);
  Dataset data = balanced_factor(7, 2, y);
  const double radius = 0.2;
  const std::vector<double> centers = {0.0, 1.0, 2.5};
  for (int trial = 0; trial < 25; ++trial) {
    std::vector<int> truth(7);
    for (int j = 0; j < 7; ++j) truth[j] = static_cast<int>(rng.below(3));
    truth[0] = 0;
    Eigen::VectorXd beta(7);
    for (int j = 0; j < 7; ++j)
      beta(j) = centers[truth[j]] + radius * (2 * rng.uniform() - 1);
    NestedFamily family = build_family(fake_fit(data.design, beta), data.design);
    PartitionModel expected;
    expected.factor_rgs = {canonical_rgs(truth)};
    expected.continuous_included = {false};
    bool found = false;
    for (const auto& member : family.models)
      if (member == expected) found = true;
    CHECK(found);
  }
}

TEST_CASE("select: noiseless toy keeps the true model under any small tuning") {
  Eigen::VectorXd y(6);
  y << 2, 2, 2, 2, 7, 7;  // true partition {0,1} u {2}
  Dataset data = balanced_factor(3, 2, y);
  Eigen::VectorXd means(3);
  means << 2, 2, 7;
  NestedFamily family = build_family(fake_fit(data.design, means), data.design);
  REQUIRE(family.models.size() == 3);

  PartitionModel truth;
  truth.factor_rgs = {{0, 0, 1}};
  truth.continuous_included = {false};

  // losses: -57 (both larger models), -121/3 for intercept-only;
  // threshold sqrt(2 * (57 - 121/3)) = sqrt(2 * 50/3) ... computed: 16.667
  for (double lambda_ic : {0.5, 3.0, 5.7}) {
    SelectionResult result = select(family, data, lambda_ic, 1.0);
    CHECK(result.chosen == truth);
  }
  SelectionResult coarse = select(family, data, 6.0, 1.0);
  CHECK(coarse.chosen == intercept_only(data.design));
}

TEST_CASE("select limits: zero tuning keeps the largest model, huge tuning collapses") {
  Eigen::VectorXd y(6);
  y << 1, 2, 3, 5, 8, 13;  // generic: strictly decreasing losses along the family
  Dataset data = balanced_factor(3, 2, y);
  Eigen::VectorXd means(3);
  means << 1.5, 4, 10.5;
  NestedFamily family = build_family(fake_fit(data.design, means), data.design);

  SelectionResult largest = select(family, data, 0.0, 1.0);
  CHECK(largest.chosen == family.models.front());
  SelectionResult smallest = select(family, data, 1e6, 1.0);
  CHECK(smallest.chosen == intercept_only(data.design));
}

TEST_CASE("select is invariant under (cy, c lambda_ic, c sigma)") {
  CounterRng rng(23);
  Eigen::VectorXd y = gaussian_vector(12, rng) * 3.0;
  Dataset data = balanced_factor(4, 3, y);
  Eigen::VectorXd beta(4);
  beta << 0, 0.8, 1.1, 2.9;
  NestedFamily family = build_family(fake_fit(data.design, beta), data.design);
  SelectionResult base = select(family, data, 1.3, 1.0);

  const double c = 3.0;
  Dataset scaled = data;
  scaled.response *= c;
  SelectionResult rescaled = select(family, scaled, c * 1.3, c * c * 1.0);
  CHECK(rescaled.chosen == base.chosen);
}

TEST_CASE("net of length one equals the single-lambda pipeline") {
  CounterRng rng(31);
  Eigen::MatrixXi assign = cycling_assignment({4, 3, 3}, 48);
  Dataset data = make_categorical({4, 3, 3}, assign, Eigen::VectorXd::Zero(48));
  Eigen::VectorXd truth(8);
  truth << 1, 1, 3, 3, 0, 2, 0, 0;  // f1: {0,1}{2,3}; f2: level1=2; f3: zero
  data.response = data.design.values * truth + 0.1 * gaussian_vector(48, rng);

  WeightSpec weights;
  LambdaNet single;
  single.values = {0.8};
  single.lambda_max = 0.8;
  single.length = 1;
  PdmrOptions options;
  options.lambda_ic = 1.0;
  options.sigma2 = 0.01;
  SelectionResult via_net = pdmr_net(data, single, weights, options);
  SelectionResult direct = pdmr_single(data, 0.8, weights, 1.0, 0.01);
  CHECK(via_net.chosen == direct.chosen);
  CHECK((via_net.beta - direct.beta).lpNorm<Eigen::Infinity>() <= 1e-10);
}

TEST_CASE("net: one survivor per dimension and losses match refits") {
  CounterRng rng(37);
  Eigen::MatrixXi assign = cycling_assignment({4, 3, 3}, 60);
  Dataset data = make_categorical({4, 3, 3}, assign, Eigen::VectorXd::Zero(60));
  Eigen::VectorXd truth(8);
  truth << 0.5, 0.5, 2, 2, 1.5, 0, 0, 0;
  data.response = data.design.values * truth + 0.3 * gaussian_vector(60, rng);

  WeightSpec weights;
  LambdaNet net = make_lambda_net(data, weights, 12, 0.05);
  PdmrOptions options;
  options.sigma2 = 0.09;
  SelectionResult result = pdmr_net(data, net, weights, options);

  std::set<int> dims;
  for (std::size_t i = 0; i < result.table.size(); ++i) {
    CHECK(dims.insert(result.table[i].size).second);  // unique dimensions
    RefitResult direct = refit(result.candidate_models[i], data);
    CHECK(result.table[i].loss ==
          doctest::Approx(direct.loss).epsilon(1e-8));
  }
  // the family observer sees every lambda
  int seen = 0;
  PdmrOptions observe = options;
  observe.family_observer = [&](int, const NestedFamily&) { ++seen; };
  pdmr_net(data, net, weights, observe);
  CHECK(seen == 12);
}

TEST_CASE("oracle coefficients recover the true model on noiseless data") {
  Eigen::MatrixXi assign = cycling_assignment({5, 4}, 40);
  Dataset data = make_categorical({5, 4}, assign, Eigen::VectorXd::Zero(40));
  Eigen::VectorXd truth(8);
  truth << 1, 1, 1, 4, 4, 2, 2, 0;  // f1: {0,1,2}{3,4}; f2: {1,2} at 2, level 3 off
  data.response = data.design.values * truth;

  NestedFamily family = build_family(fake_fit(data.design, truth), data.design);
  PartitionModel expected = model_of(truth, data.design);
  bool found = false;
  for (const auto& member : family.models)
    if (member == expected) found = true;
  CHECK(found);

  SelectionResult selected = select(family, data, 0.05, 1.0);
  CHECK(selected.chosen == expected);
  CHECK((selected.beta - truth).lpNorm<Eigen::Infinity>() <= 1e-8);
}

TEST_CASE("ric lambda") {
  CHECK(ric_lambda(1.0, 100) == doctest::Approx(std::sqrt(2 * std::log(100.0))).epsilon(1e-12));
  CHECK(ric_lambda(4.0, 50) == doctest::Approx(std::sqrt(8 * std::log(50.0))).epsilon(1e-12));
}

TEST_SUITE_END();
