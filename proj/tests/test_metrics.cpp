#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "spaloc/metrics.hpp"

#include <random>
#include <sstream>

using namespace spaloc;

TEST_CASE("separating scores give 100 accuracy and 100 AUC-PR") {
  std::vector<Scored> s = {{0.9, true}, {0.8, true}, {0.3, false}, {0.1, false}, {0.05, false}};
  CHECK(balanced_accuracy(s) == 100.0);
  CHECK(auc_pr(s) == doctest::Approx(100.0));
}

TEST_CASE("a constant predictor on balanced data scores 50") {
  std::vector<Scored> s;
  for (int i = 0; i < 10; ++i) s.push_back({0.7, i % 2 == 0});
  CHECK(balanced_accuracy(s) == 50.0);
  for (auto& x : s) x.score = 0.2;
  CHECK(balanced_accuracy(s) == 50.0);
}

TEST_CASE("balanced accuracy weights each class equally") {
  // 1 of 2 positives right, 9 of 10 negatives right
  std::vector<Scored> s = {{0.9, true}, {0.1, true}, {0.6, false}};
  for (int i = 0; i < 9; ++i) s.push_back({0.2, false});
  CHECK(balanced_accuracy(s) == doctest::Approx(100 * (0.5 + 0.9) / 2));
  CHECK_THROWS_AS(balanced_accuracy(std::vector<Scored>{}), EmptyEvaluationError);
}

TEST_CASE("hand-built precision-recall fixture") {
  // ranks: P N P N. Curve points (0,1) (.5,1) (.5,.5) (1,2/3) (1,.5)
  std::vector<Scored> s = {{0.9, true}, {0.8, false}, {0.7, true}, {0.6, false}};
  const double expect = 0.5 * (1 + 1) / 2 + 0 + 0.5 * (0.5 + 2.0 / 3) / 2;
  CHECK(auc_pr(s) == doctest::Approx(100 * expect));
  CHECK_THROWS_AS(auc_pr({{0.5, false}}), EmptyEvaluationError);
}

TEST_CASE("tied scores form a single curve point") {
  // all tied: one point (1, 0.5), trapezoid from (0, 1)
  std::vector<Scored> s = {{0.5, true}, {0.5, false}};
  CHECK(auc_pr(s) == doctest::Approx(100 * 0.75));
}

TEST_CASE("weights equal repeated entries") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0, 1);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Scored> weighted, expanded;
    for (int i = 0; i < 6; ++i) {
      const double score = std::floor(u(rng) * 5) / 5;
      const bool pos = u(rng) < 0.4;
      const int w = 1 + static_cast<int>(u(rng) * 4);
      weighted.push_back({score, pos, static_cast<double>(w)});
      for (int k = 0; k < w; ++k) expanded.push_back({score, pos, 1.0});
    }
    bool any_pos = false, any_neg = false;
    for (const auto& x : expanded) (x.positive ? any_pos : any_neg) = true;
    CHECK(balanced_accuracy(weighted) == doctest::Approx(balanced_accuracy(expanded)));
    if (any_pos) {
      const double a = auc_pr(weighted);
      CHECK(a == doctest::Approx(auc_pr(expanded)));
      CHECK(a >= 0);
      CHECK(a <= 100 + 1e-9);
    }
  }
}

TEST_CASE("Hit@10 counts positives ranked in the top ten") {
  std::vector<double> pos = {0.9, 0.5};
  std::vector<std::vector<double>> neg(2);
  for (int i = 0; i < 50; ++i) neg[0].push_back(i < 9 ? 0.95 : 0.1);   // rank 10
  for (int i = 0; i < 50; ++i) neg[1].push_back(i < 10 ? 0.6 : 0.1);   // rank 11
  CHECK(hit_at_k(pos, neg, 10) == 50.0);
  neg[0][9] = 0.9;  // a tie counts against the positive
  CHECK(hit_at_k(pos, neg, 10) == 0.0);
}

TEST_CASE("metrics CSV schema") {
  MetricsRow r;
  r.epoch = 3;
  r.split = "valid";
  r.loss = 0.25;
  r.accuracy = 99.5;
  r.auc_pr = 98;
  r.hit10 = std::nan("");
  r.density_percent = 1.5;
  r.peak_bytes = 1024;
  r.seconds_per_sample = 0.01;
  std::ostringstream os;
  write_metrics_header(os);
  write_metrics_row(os, r);
  CHECK(os.str() ==
        "epoch,split,loss,accuracy,auc_pr,hit10,density_percent,peak_bytes\n"
        "3,valid,0.2500,99.5000,98.0000,,1.5000,1024\n");
}
