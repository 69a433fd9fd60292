#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "oracles.hpp"
#include "pointpan/losses.hpp"

#include <functional>
#include <random>

using namespace pointpan;
using oracle::numeric_gradient;

namespace {

std::mt19937_64 rng(11);

double unif(double lo = 0.0, double hi = 1.0) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

SemanticField<double> random_field(GridShape s, Index classes) {
  SemanticField<double> f{s, PixelMatrix<double>(s.pixels(), classes)};
  for (Index i = 0; i < s.pixels(); ++i) {
    for (Index c = 0; c < classes; ++c) f.probs(i, c) = unif(0.01, 1.0);
    f.probs.row(i) /= f.probs.row(i).sum();
  }
  return f;
}

FeatureField<double> random_features(GridShape s, Index dims) {
  FeatureField<double> f{s, PixelMatrix<double>(s.pixels(), dims)};
  for (Index i = 0; i < s.pixels(); ++i) {
    for (Index d = 0; d < dims; ++d) f.features(i, d) = unif(-1.0, 1.0);
    f.features.row(i).normalize();
  }
  return f;
}

LabImage<double> random_lab(GridShape s, double spread) {
  LabImage<double> lab{s, PixelMatrix<double, 3>(s.pixels(), 3)};
  for (Index i = 0; i < s.pixels(); ++i)
    for (Index c = 0; c < 3; ++c) lab.data(i, c) = unif(0.0, spread);
  return lab;
}

void check_gradient(const PixelMatrix<double>& analytic, const PixelMatrix<double>& numeric) {
  REQUIRE(analytic.rows() == numeric.rows());
  REQUIRE(analytic.cols() == numeric.cols());
  for (Index r = 0; r < analytic.rows(); ++r)
    for (Index c = 0; c < analytic.cols(); ++c) {
      const double a = analytic(r, c), n = numeric(r, c);
      CHECK(std::abs(a - n) <= 1e-4 * std::max(std::abs(a), std::abs(n)) + 1e-8);
    }
}

/// Three rectangular targets on a 6x6 grid plus void on the last row.
PanopticMap three_targets() {
  PanopticMap m({6, 6});
  for (Index y = 0; y < 5; ++y)
    for (Index x = 0; x < 6; ++x) m.ids(y * 6 + x) = x < 2 ? 1 : (x < 4 ? 2 : 3);
  m.segments[1] = {1, SegmentKind::thing};
  m.segments[2] = {1, SegmentKind::thing};
  m.segments[3] = {0, SegmentKind::stuff};
  return m;
}

std::vector<PointLabel> three_target_points() {
  return {{0, 1, 1, 1}, {1, 3, 1, 1}, {3, 0, 1, 2}, {5, 4, 0, 3, SegmentKind::stuff}};
}

}  // namespace

TEST_CASE("partial cross-entropy") {
  const GridShape s{4, 4};
  SUBCASE("correct one-hot labels give zero") {
    SemanticField<double> p{s, PixelMatrix<double>::Zero(16, 3)};
    p.probs.col(2).setOnes();
    const LabeledPixelSet y{{{0, 2, 1}, {5, 2, 1}, {15, 2, 2}}};
    const auto r = partial_ce(p, y);
    CHECK(r.value == 0.0);
    CHECK(r.n_terms == 3);
    CHECK_FALSE(r.vacuous);
  }
  SUBCASE("two half-confident pixels give ln 2") {
    SemanticField<double> p{s, PixelMatrix<double>::Constant(16, 2, 0.5)};
    CHECK(std::abs(partial_ce(p, {{{3, 0, 1}, {9, 1, 2}}}).value - 0.6931471805599453) < 1e-15);
  }
  SUBCASE("empty label set is vacuous") {
    SemanticField<double> p{s, PixelMatrix<double>::Constant(16, 2, 0.5)};
    const auto r = partial_ce(p, {});
    CHECK(r.vacuous);
    CHECK(r.value == 0.0);
  }
  SUBCASE("zero probability is clamped") {
    SemanticField<double> p{s, PixelMatrix<double>::Zero(16, 2)};
    p.probs.col(0).setOnes();
    CHECK(partial_ce(p, {{{0, 1, 1}}}).value == doctest::Approx(27.631021115928547));
  }
  SUBCASE("random field matches a naive loop") {
    const auto p = random_field(s, 4);
    LabeledPixelSet y;
    double oracle = 0.0;
    for (int k = 0; k < 5; ++k) {
      const Index px = static_cast<Index>(rng() % 16);
      const int c = static_cast<int>(rng() % 4);
      y.entries.push_back({px, c, k});
      oracle += -std::log(p.probs(px, c));
    }
    oracle /= 5.0;
    const auto r = partial_ce(p, y, true);
    CHECK(std::abs(r.value - oracle) < 1e-9);
    CHECK(r.per_term.size() == 5);
  }
  SUBCASE("gradient matches finite differences") {
    auto p = random_field(s, 3);
    const LabeledPixelSet y{{{0, 1, 1}, {7, 2, 1}, {7, 0, 2}, {12, 1, 3}}};
    const auto analytic = partial_ce_gradient(p, y);
    const auto numeric = numeric_gradient(p.probs, [&] { return partial_ce(p, y).value; });
    check_gradient(analytic, numeric);
  }
  CHECK_THROWS_AS(partial_ce(random_field(s, 2), {{{16, 0, 1}}}), ValidationError);
  CHECK_THROWS_AS(partial_ce(random_field(s, 2), {{{0, 2, 1}}}), ValidationError);
}

TEST_CASE("color prior") {
  const GridShape s{5, 5};
  SUBCASE("identical one-hot pixels give zero") {
    SemanticField<double> p{s, PixelMatrix<double>::Zero(25, 3)};
    p.probs.col(1).setOnes();
    const auto g = build_affinity(random_lab(s, 0.0), 3, 1, 0.3, 2.0);
    CHECK(color_prior(p, g).value == 0.0);
  }
  SUBCASE("orthogonal one-hots hit the clamp floor") {
    const GridShape line{1, 2};
    SemanticField<double> p{line, PixelMatrix<double>::Zero(2, 2)};
    p.probs << 1, 0, 0, 1;
    const auto g = build_affinity(random_lab(line, 0.0), 3, 1, 0.3, 2.0);
    const auto r = color_prior(p, g, 3.0);
    CHECK(std::abs(r.value - (-3.0 * std::log(1e-12))) < 1e-12);
    CHECK(r.value == doctest::Approx(82.89306334778564));
  }
  SUBCASE("no similar pairs is vacuous") {
    const auto g = build_affinity(random_lab(s, 1000.0), 3, 1, 0.999, 0.01);
    REQUIRE(g.active_edges() == 0);
    CHECK(color_prior(random_field(s, 2), g).vacuous);
  }
  SUBCASE("random field and affinity match a naive double loop") {
    const auto p = random_field(s, 3);
    const auto lab = random_lab(s, 6.0);
    const int kernel = 3, dilation = 2;
    const double threshold = 0.3, theta = 2.0, amplify = 3.0;
    const auto g = build_affinity(lab, kernel, dilation, threshold, theta);
    double sum = 0.0;
    int n = 0;
    for (Index y = 0; y < 5; ++y)
      for (Index x = 0; x < 5; ++x)
        for (int a = -1; a <= 1; ++a)
          for (int b = -1; b <= 1; ++b) {
            if (a == 0 && b == 0) continue;
            const Index yy = y + a * dilation, xx = x + b * dilation;
            if (yy < 0 || yy >= 5 || xx < 0 || xx >= 5) continue;
            const Index i = y * 5 + x, j = yy * 5 + xx;
            double dist = 0.0;
            for (Index c = 0; c < 3; ++c) dist += std::pow(lab.data(i, c) - lab.data(j, c), 2);
            if (std::exp(-std::sqrt(dist) / theta) < threshold) continue;
            double dot = 0.0;
            for (Index c = 0; c < 3; ++c) dot += p.probs(i, c) * p.probs(j, c);
            sum += -std::log(std::max(dot, 1e-12));
            ++n;
          }
    REQUIRE(n > 0);
    REQUIRE(n < static_cast<int>(g.edges.size()));
    CHECK(std::abs(color_prior(p, g, amplify).value - amplify * sum / n) < 1e-9);
  }
  SUBCASE("gradient matches finite differences") {
    auto p = random_field(s, 3);
    const auto g = build_affinity(random_lab(s, 4.0), 5, 1, 0.3, 2.0);
    const auto analytic = color_prior_gradient(p, g, 3.0);
    const auto numeric = numeric_gradient(p.probs, [&] { return color_prior(p, g, 3.0).value; });
    check_gradient(analytic, numeric);
  }
}

TEST_CASE("masked average") {
  const GridShape s{3, 3};
  const auto f = random_features(s, 4);
  PixelMask one = PixelMask::Constant(9, false);
  one(4) = true;
  CHECK((masked_average(f, one) - f.features.row(4).transpose()).norm() == 0.0);

  FeatureField<double> constant{s, PixelMatrix<double>(9, 4)};
  for (Index i = 0; i < 9; ++i) constant.features.row(i) << 0.5, -0.5, 0.5, 0.5;
  const auto avg = masked_average(constant, PixelMask::Constant(9, true));
  CHECK((avg - constant.features.row(0).transpose()).norm() < 1e-15);

  PixelMask random(9);
  for (Index i = 0; i < 9; ++i) random(i) = (rng() % 2) == 0;
  random(0) = true;
  std::vector<double> oracle(4, 0.0);
  int count = 0;
  for (Index i = 0; i < 9; ++i)
    if (random(i)) {
      ++count;
      for (Index d = 0; d < 4; ++d) oracle[static_cast<std::size_t>(d)] += f.features(i, d);
    }
  const auto got = masked_average(f, random);
  for (Index d = 0; d < 4; ++d) CHECK(std::abs(got(d) - oracle[static_cast<std::size_t>(d)] / count) < 1e-12);

  CHECK_THROWS_AS(masked_average(f, PixelMask::Constant(9, false)), ValidationError);
}

TEST_CASE("contrastive loss") {
  SUBCASE("single target and point gives zero") {
    const GridShape s{2, 2};
    const auto f = random_features(s, 3);
    PanopticMap m(s);
    m.ids.setConstant(1);
    m.segments[1] = {1, SegmentKind::thing};
    CHECK(contrastive(f, {{1, 1, 1, 1}}, m).value == 0.0);
  }
  SUBCASE("orthogonal prototypes closed form") {
    const GridShape s{1, 4};
    FeatureField<double> f{s, PixelMatrix<double>::Zero(4, 2)};
    f.features << 1, 0, 1, 0, 0, 1, 0, 1;
    PanopticMap m(s);
    m.ids << 1, 1, 2, 2;
    m.segments[1] = {1, SegmentKind::thing};
    m.segments[2] = {1, SegmentKind::thing};
    const double expected = std::log1p(std::exp(-1.0 / 0.07));
    CHECK(expected == doctest::Approx(6.2487e-7).epsilon(1e-4));
    const auto r = contrastive(f, {{0, 0, 1, 1}, {3, 0, 1, 2}}, m, 0.07);
    CHECK(std::abs(r.value - expected) < 1e-15);
  }
  SUBCASE("random three-target scene matches a naive oracle") {
    const auto f = random_features({6, 6}, 5);
    const auto m = three_targets();
    const auto pts = three_target_points();
    for (double tau : {0.07, 0.5}) {
      CHECK(std::abs(contrastive(f, pts, m, tau).value - oracle::contrastive(f, pts, m, tau, false)) < 1e-9);
      CHECK(std::abs(contrastive(f, pts, m, tau, ContrastiveDenominator::points).value -
                     oracle::contrastive(f, pts, m, tau, true)) < 1e-9);
    }
  }
  SUBCASE("gradient matches finite differences") {
    auto f = random_features({6, 6}, 4);
    const auto m = three_targets();
    const auto pts = three_target_points();
    for (auto mode : {ContrastiveDenominator::targets, ContrastiveDenominator::points}) {
      const auto analytic = contrastive_gradient(f, pts, m, 0.3, mode);
      const auto numeric = numeric_gradient(f.features, [&] { return contrastive(f, pts, m, 0.3, mode).value; });
      check_gradient(analytic, numeric);
    }
  }
  SUBCASE("a point on void has no target mask") {
    const auto f = random_features({6, 6}, 4);
    CHECK_THROWS_AS(contrastive(f, {{0, 5, 1, 1}}, three_targets()), ValidationError);
    CHECK_THROWS_AS(contrastive(f, {{0, 0, 1, 1}}, three_targets(), 0.0), ValidationError);
  }
}
