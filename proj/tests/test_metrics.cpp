#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "oracles.hpp"
#include "pointpan/metrics.hpp"

#include <random>

using namespace pointpan;
using oracle::random_gt;
using oracle::random_pred;

namespace {

constexpr int kClasses = 4;

}  // namespace

TEST_CASE("identical maps score one") {
  std::mt19937_64 gen(1);
  const PanopticMap gt = random_gt(gen);
  const auto r = panoptic_quality(gt, gt);
  CHECK(r.all.pq == 1.0);
  CHECK(r.all.sq == 1.0);
  CHECK(r.all.rq == 1.0);
}

TEST_CASE("a deleted thing segment costs one false negative") {
  PanopticMap gt({2, 4});
  gt.ids << 1, 1, 2, 2, 1, 1, 2, 2;
  gt.segments[1] = {3, SegmentKind::thing};
  gt.segments[2] = {3, SegmentKind::thing};
  PanopticMap pred = gt;
  for (Index i = 0; i < 8; ++i)
    if (pred.ids(i) == 2) pred.ids(i) = 0;
  pred.segments.erase(2);
  const auto r = panoptic_quality(pred, gt);
  const ClassStats& s = r.per_class.at(3);
  CHECK(s.tp == 1);
  CHECK(s.fn == 1);
  CHECK(s.fp == 0);
  CHECK(std::abs(s.pq() - 2.0 / 3.0) < 1e-15);
  CHECK(std::abs(r.all.pq - 2.0 / 3.0) < 1e-15);
  CHECK(r.things.classes == 1);
  CHECK(r.stuff.classes == 0);
}

TEST_CASE("void handling") {
  PanopticMap gt({1, 6});
  gt.ids << 1, 1, 1, 0, 0, 0;
  gt.segments[1] = {2, SegmentKind::thing};
  PanopticMap pred(gt.shape);
  pred.ids << 1, 1, 1, 2, 2, 2;
  pred.segments[1] = {2, SegmentKind::thing};
  pred.segments[2] = {2, SegmentKind::thing};
  const auto r = panoptic_quality(pred, gt);
  CHECK(r.per_class.at(2).fp == 0);
  CHECK(r.all.pq == 1.0);

  // Pred pixels on gt void do not enter the union.
  pred.ids << 1, 1, 1, 1, 1, 0;
  CHECK(panoptic_quality(pred, gt).all.sq == 1.0);
}

TEST_CASE("brute-force agreement and pq = sq * rq on 1000 random scenes") {
  std::mt19937_64 gen(2024);
  PqAccumulator all;
  std::map<int, oracle::MatchStats> oracle_total;
  for (int trial = 0; trial < 1000; ++trial) {
    const PanopticMap gt = random_gt(gen);
    const PanopticMap pred = random_pred(gt, gen);
    PqAccumulator acc({kClasses});
    acc.add(pred, gt);
    all.add(pred, gt);
    const auto match = oracle::brute_force_pq(pred, gt);
    CHECK(match.unique);
    const auto& oracle = match.per_class;
    for (const auto& [cls, o] : oracle) {
      auto& t = oracle_total[cls];
      t.tp += o.tp;
      t.fp += o.fp;
      t.fn += o.fn;
      t.iou += o.iou;
    }
    const auto report = acc.report();
    double sum = 0.0;
    int n = 0;
    for (const auto& [cls, o] : oracle) {
      if (o.tp + o.fp + o.fn == 0) continue;
      REQUIRE(report.per_class.count(cls) == 1);
      const ClassStats& s = report.per_class.at(cls);
      CHECK(s.tp == o.tp);
      CHECK(s.fp == o.fp);
      CHECK(s.fn == o.fn);
      CHECK(std::abs(s.iou_sum - o.iou) < 1e-12);
      CHECK(std::abs(s.pq() - s.sq() * s.rq()) < 1e-9);
      sum += o.iou / (o.tp + 0.5 * o.fp + 0.5 * o.fn);
      ++n;
    }
    CHECK(std::abs(report.all.pq - (n > 0 ? sum / n : 0.0)) < 1e-12);
  }
  const auto total = all.report();
  for (const auto& [cls, o] : oracle_total) {
    CHECK(total.per_class.at(cls).tp == o.tp);
    CHECK(total.per_class.at(cls).fn == o.fn);
    CHECK(total.per_class.at(cls).fp == o.fp);
  }
}

TEST_CASE("accumulator merge equals sequential accumulation") {
  std::mt19937_64 gen(5);
  PqAccumulator seq, left, right;
  for (int k = 0; k < 20; ++k) {
    const PanopticMap gt = random_gt(gen);
    const PanopticMap pred = random_pred(gt, gen);
    seq.add(pred, gt);
    (k % 2 ? left : right).add(pred, gt);
  }
  left.merge(right);
  const auto a = seq.report(), b = left.report();
  CHECK(std::abs(a.all.pq - b.all.pq) < 1e-12);
  for (const auto& [cls, s] : a.per_class) {
    CHECK(b.per_class.at(cls).tp == s.tp);
    CHECK(b.per_class.at(cls).fp == s.fp);
  }
}

TEST_CASE("input checks") {
  PanopticMap a({2, 2}), b({2, 3});
  CHECK_THROWS_AS(panoptic_quality(a, b), ValidationError);
  PanopticMap bad({2, 2});
  bad.ids.setConstant(4);
  CHECK_THROWS_AS(panoptic_quality(bad, a), ValidationError);
  PanopticMap wide({2, 2});
  wide.ids.setConstant(1);
  wide.segments[1] = {9, SegmentKind::thing};
  CHECK_THROWS_AS(panoptic_quality(wide, wide, {kClasses}), ValidationError);
}

TEST_CASE("mean IoU") {
  SUBCASE("identical maps") {
    Eigen::VectorXi c(6);
    c << 0, 1, 2, 2, 1, 0;
    const auto r = mean_iou(c, c);
    for (const auto& [cls, v] : r.per_class) CHECK(v == 1.0);
    CHECK(r.mean == 1.0);
  }
  SUBCASE("all background against half foreground") {
    Eigen::VectorXi gt(4), pred = Eigen::VectorXi::Zero(4);
    gt << 0, 0, 1, 1;
    const auto r = mean_iou(pred, gt);
    CHECK(r.per_class.at(0) == 0.5);
    CHECK(r.per_class.at(1) == 0.0);
    CHECK(r.mean == 0.25);
  }
  SUBCASE("random maps match a confusion-matrix oracle") {
    std::mt19937_64 gen(8);
    Eigen::VectorXi gt(100), pred(100);
    for (Index i = 0; i < 100; ++i) {
      gt(i) = static_cast<int>(gen() % 5) - 1;  // -1 is void
      pred(i) = static_cast<int>(gen() % 4);
    }
    int conf[4][4] = {};
    for (Index i = 0; i < 100; ++i)
      if (gt(i) >= 0) ++conf[gt(i)][pred(i)];
    double mean = 0.0;
    int present = 0;
    const auto r = mean_iou(pred, gt);
    for (int c = 0; c < 4; ++c) {
      int row = 0, col = 0;
      for (int k = 0; k < 4; ++k) {
        row += conf[c][k];
        col += conf[k][c];
      }
      if (row == 0) continue;
      const double iou = static_cast<double>(conf[c][c]) / (row + col - conf[c][c]);
      CHECK(std::abs(r.per_class.at(c) - iou) < 1e-15);
      mean += iou;
      ++present;
    }
    CHECK(std::abs(r.mean - mean / present) < 1e-15);
  }
  SUBCASE("semantic field predictions use the argmax") {
    PanopticMap gt({1, 2});
    gt.ids << 1, 2;
    gt.segments[1] = {0, SegmentKind::stuff};
    gt.segments[2] = {1, SegmentKind::thing};
    SemanticField<double> p{{1, 2}, PixelMatrix<double>(2, 2)};
    p.probs << 0.7, 0.3, 0.2, 0.8;
    CHECK(mean_iou(p, gt).mean == 1.0);
  }
}
