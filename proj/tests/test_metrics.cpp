#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "edgesign/metrics.hpp"
#include "support/oracles.hpp"

using namespace edgesign;
using Catch::Approx;

TEST_CASE("perfect separation gives AUC 1 and binary F1 1") {
  std::vector<double> scores{0.9, 0.8, 0.95, 0.2, 0.1, 0.3};
  std::vector<int> labels{1, 1, 1, 0, 0, 0};
  auto r = compute_metrics(scores, labels);
  REQUIRE(r.auc.has_value());
  CHECK(*r.auc == 1.0);
  CHECK(r.binary_f1 == 1.0);
  CHECK(r.micro_f1 == 1.0);
  CHECK(r.macro_f1 == 1.0);
}

TEST_CASE("all-equal scores give AUC one half") {
  std::vector<double> scores(10, 0.42);
  std::vector<int> labels{1, 0, 1, 0, 1, 0, 1, 0, 1, 0};
  auto r = compute_metrics(scores, labels);
  REQUIRE(r.auc.has_value());
  CHECK(*r.auc == 0.5);
}

TEST_CASE("rank AUC equals the pairwise oracle exactly, ties included") {
  std::mt19937 rng(17);
  std::uniform_int_distribution<int> level(0, 9);  // coarse grid forces ties
  std::uniform_int_distribution<int> coin(0, 1);
  for (int round = 0; round < 200; ++round) {
    const std::size_t n = 5 + std::size_t(rng() % 26);  // up to 30 edges
    std::vector<double> scores(n);
    std::vector<int> labels(n);
    bool has_pos = false, has_neg = false;
    for (std::size_t i = 0; i < n; ++i) {
      scores[i] = level(rng) / 10.0;
      labels[i] = coin(rng);
      (labels[i] ? has_pos : has_neg) = true;
    }
    if (!has_pos || !has_neg) {
      labels[0] = 1;
      labels[1] = 0;
    }
    auto r = compute_metrics(scores, labels);
    REQUIRE(r.auc.has_value());
    CHECK(*r.auc == oracles::pairwise_auc(scores, labels));  // exact
  }
}

TEST_CASE("f1 variants match the confusion-matrix formulas exactly") {
  std::mt19937 rng(23);
  std::uniform_real_distribution<double> dist(0.0, 1.0);
  for (int round = 0; round < 100; ++round) {
    const std::size_t n = 8 + rng() % 40;
    std::vector<double> scores(n);
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
      scores[i] = dist(rng);
      labels[i] = rng() % 2;
    }
    auto r = compute_metrics(scores, labels);
    auto oracle = oracles::f1_from_counts(r.tp, r.fp, r.tn, r.fn);
    CHECK(r.binary_f1 == oracle.binary);
    CHECK(r.micro_f1 == oracle.micro);
    CHECK(r.macro_f1 == oracle.macro);
    CHECK(r.tp + r.fp + r.tn + r.fn == n);
  }
}

TEST_CASE("single-class edge sets report no AUC but keep the F1s") {
  std::vector<double> scores{0.9, 0.4, 0.7};
  std::vector<int> labels{1, 1, 1};
  auto r = compute_metrics(scores, labels);
  CHECK_FALSE(r.auc.has_value());
  CHECK(r.binary_f1 > 0.0);
  auto json = metrics_to_json(r);
  CHECK(json["auc"].is_null());
}

TEST_CASE("per-class precision and recall come from the counts") {
  // predictions: 0.9 (tp), 0.8 (fp), 0.3 (fn), 0.2 (tn), 0.1 (tn)
  std::vector<double> scores{0.9, 0.8, 0.3, 0.2, 0.1};
  std::vector<int> labels{1, 0, 1, 0, 0};
  auto r = compute_metrics(scores, labels);
  CHECK(r.positive.precision == Approx(0.5));
  CHECK(r.positive.recall == Approx(0.5));
  CHECK(r.negative.precision == Approx(2.0 / 3.0));
  CHECK(r.negative.recall == Approx(2.0 / 3.0));
  CHECK(r.num_edges == 5);
}

TEST_CASE("metric json serialization carries the full report") {
  std::vector<double> scores{0.9, 0.2};
  std::vector<int> labels{1, 0};
  auto json = metrics_to_json(compute_metrics(scores, labels));
  CHECK(json["binary_f1"] == 1.0);
  CHECK(json["confusion"]["tp"] == 1);
  CHECK(json["auc"] == 1.0);
  CHECK(json["positive"]["recall"] == 1.0);
}
