#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "oracles.hpp"
#include "pointpan/engine.hpp"

#include <random>

using namespace pointpan;
using oracle::floyd_warshall;

namespace {

SemanticField<double> onehot_field(GridShape s, Index classes, const std::vector<int>& cls) {
  SemanticField<double> f{s, PixelMatrix<double>::Zero(s.pixels(), classes)};
  for (Index i = 0; i < s.pixels(); ++i) f.probs(i, cls[static_cast<std::size_t>(i)]) = 1.0;
  return f;
}

FeatureField<double> constant_features(GridShape s, Index dims) {
  FeatureField<double> f{s, PixelMatrix<double>::Zero(s.pixels(), dims)};
  f.features.col(0).setOnes();
  return f;
}

CostModel<double> flat_model(GridShape s) {
  CostModel<double> m;
  m.semantic = onehot_field(s, 2, std::vector<int>(static_cast<std::size_t>(s.pixels()), 1));
  m.boundary = BoundaryMap<double>{s, PixelVector<double>::Zero(s.pixels())};
  m.manifold = constant_features(s, 3);
  return m;
}

DistanceMatrix<double> manual_distances(const PixelMatrix<double>& normalized) {
  DistanceMatrix<double> d;
  d.raw = normalized;
  d.normalized = normalized;
  return d;
}

}  // namespace

TEST_CASE("neighbor order is symmetric") {
  for (int k = 0; k < 8; ++k) {
    CHECK(kNeighbors8[k].dy == -kNeighbors8[7 - k].dy);
    CHECK(kNeighbors8[k].dx == -kNeighbors8[7 - k].dx);
  }
}

TEST_CASE("indexed heap pops in (priority, key) order") {
  std::mt19937_64 gen(3);
  detail::IndexedHeap<double> heap(200);
  std::vector<double> best(200, 1e9);
  for (int r = 0; r < 1000; ++r) {
    const auto key = static_cast<std::int32_t>(gen() % 200);
    const double p = static_cast<double>(gen() % 50);
    if (p < best[static_cast<std::size_t>(key)]) {
      best[static_cast<std::size_t>(key)] = p;
      heap.push_or_decrease(key, p);
    }
  }
  std::vector<std::pair<double, std::int32_t>> expected;
  for (std::int32_t k = 0; k < 200; ++k)
    if (best[static_cast<std::size_t>(k)] < 1e9) expected.push_back({best[static_cast<std::size_t>(k)], k});
  std::sort(expected.begin(), expected.end());
  std::vector<std::pair<double, std::int32_t>> popped;
  while (!heap.empty()) popped.push_back(heap.pop());
  CHECK(popped == expected);
}

TEST_CASE("edge_cost closed forms") {
  const GridShape s{1, 2};
  CostModel<double> m;
  m.semantic = onehot_field(s, 2, {0, 0});
  m.boundary = BoundaryMap<double>{s, PixelVector<double>::Zero(2)};
  m.manifold = constant_features(s, 2);
  CHECK(edge_cost(m, 0, 1) == 0.0);

  m.semantic = onehot_field(s, 2, {0, 1});
  m.boundary->data << 0.0, 1.0;
  m.manifold->features << 1.0, 0.0, 0.0, 1.0;
  CHECK(edge_cost(m, 0, 1) == doctest::Approx(2.2).epsilon(1e-15));
  // The boundary term reads the destination pixel only.
  CHECK(edge_cost(m, 1, 0) == doctest::Approx(2.1).epsilon(1e-15));

  m.semantic = onehot_field(s, 2, {0, 0});
  m.boundary->data.setZero();
  m.manifold->features << 1.0, 0.0, -1.0, 0.0;
  CHECK(edge_cost(m, 0, 1) == doctest::Approx(0.2).epsilon(1e-15));

  CHECK_THROWS_AS(edge_cost(m, 0, 0), ValidationError);
  const GridShape wide{1, 3};
  CostModel<double> w = flat_model(wide);
  CHECK_THROWS_AS(edge_cost(w, 0, 2), ValidationError);

  CostModel<double> missing;
  missing.semantic = onehot_field(s, 2, {0, 0});
  CHECK_THROWS_AS(edge_cost(missing, 0, 1), ValidationError);
  missing.lambda_b = 0.0;
  missing.lambda_m = 0.0;
  CHECK(edge_cost(missing, 0, 1) == 0.0);
  missing.lambda_b = -1.0;
  CHECK_THROWS_AS(edge_cost(missing, 0, 1), ValidationError);
}

TEST_CASE("traversing distances, closed forms") {
  SUBCASE("uniform fields give zero everywhere") {
    const GridShape s{5, 6};
    const auto d = traversing_distances(flat_model(s), {{1, 2, 1, 1}, {4, 4, 1, 2}});
    CHECK(d.raw.isZero(0.0));
    CHECK(d.normalized.isZero(0.0));
  }
  SUBCASE("1x5 chain with one boundary pixel") {
    const GridShape s{1, 5};
    CostModel<double> m = flat_model(s);
    m.boundary->data << 0, 0, 1, 0, 0;
    m.lambda_b = 0.1;
    const auto d = traversing_distances(m, {{0, 0, 1, 1}});
    CHECK(std::abs(d.raw(0, 4) - 0.1) < 1e-12);
    CHECK(std::abs(d.raw(0, 3) - 0.1) < 1e-12);
    CHECK(d.raw(0, 1) == 0.0);
    // Starting on the boundary pixel never pays for it.
    CHECK(d.raw(0, 2) == 0.0);
  }
  SUBCASE("normalization modes") {
    const GridShape s{1, 5};
    CostModel<double> m = flat_model(s);
    m.boundary->data << 1, 0, 0, 0, 0.5;
    m.lambda_b = 0.5;
    const std::vector<PointLabel> pts{{0, 0, 1, 1}, {4, 0, 1, 2}};
    const auto g = traversing_distances(m, pts, Normalization::global);
    const auto p = traversing_distances(m, pts, Normalization::per_label);
    CHECK(g.normalized.row(0).maxCoeff() == 1.0);
    CHECK(g.normalized.row(1).maxCoeff() == 0.5);
    for (Index r = 0; r < 2; ++r) CHECK(p.normalized.row(r).maxCoeff() == 1.0);
    CHECK(g.raw == p.raw);
  }
  CHECK_THROWS_AS(traversing_distances(flat_model({2, 2}), {}), ValidationError);
  CHECK_THROWS_AS(traversing_distances(flat_model({2, 2}), {{2, 0, 1, 1}}), ValidationError);
}

TEST_CASE("traversing distances agree with Floyd-Warshall on a random 6x6 field") {
  std::mt19937_64 gen(42);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const GridShape s{6, 6};
  CostModel<double> m;
  m.semantic = {s, PixelMatrix<double>(36, 3)};
  for (Index i = 0; i < 36; ++i) {
    Eigen::RowVector3d r(u(gen), u(gen), u(gen));
    m.semantic.probs.row(i) = r / r.sum();
  }
  m.boundary = BoundaryMap<double>{s, PixelVector<double>(36)};
  for (Index i = 0; i < 36; ++i) m.boundary->data(i) = u(gen);
  m.manifold = FeatureField<double>{s, PixelMatrix<double>(36, 4)};
  for (Index i = 0; i < 36; ++i) {
    Eigen::RowVector4d f(u(gen) - 0.5, u(gen) - 0.5, u(gen) - 0.5, u(gen) - 0.5);
    m.manifold->features.row(i) = f.normalized();
  }
  const std::vector<PointLabel> pts{{0, 0, 0, 1}, {5, 2, 1, 2}, {3, 5, 2, 3}};
  const auto costs = GridCosts<double>::from_model(m);
  const auto oracle = floyd_warshall(costs);
  const auto d = traversing_distances(m, pts);
  double peak = 0.0;
  for (std::size_t l = 0; l < pts.size(); ++l)
    for (Index i = 0; i < 36; ++i) {
      const double want = oracle[static_cast<std::size_t>(i)][static_cast<std::size_t>(s.index(pts[l].y, pts[l].x))];
      CHECK(std::abs(d.raw(static_cast<Index>(l), i) - want) <= 1e-9);
      peak = std::max(peak, want);
    }
  CHECK(std::abs(d.normalized.maxCoeff() - 1.0) < 1e-15);
  CHECK(std::abs(d.raw.maxCoeff() - peak) < 1e-12);

  // Edge table entries are the model's directed edge costs.
  for (Index u0 = 0; u0 < 36; ++u0)
    for (int k = 0; k < 8; ++k) {
      const Index y = s.row(u0) + kNeighbors8[k].dy, x = s.col(u0) + kNeighbors8[k].dx;
      if (s.contains(y, x)) CHECK(costs.incoming(u0, k) == edge_cost(m, s.index(y, x), u0));
      else CHECK(std::isinf(costs.incoming(u0, k)));
    }

  // Parallel labels give identical bits.
  const auto par = traversing_distances(m, pts, Normalization::global, {3});
  CHECK(par.raw == d.raw);
  CHECK(par.normalized == d.normalized);
}

TEST_CASE("assign arithmetic") {
  const GridShape s{1, 1};
  SUBCASE("hard probabilities") {
    SemanticField<double> p{s, PixelMatrix<double>(1, 2)};
    p.probs << 1.0, 0.0;
    PixelMatrix<double> nd(2, 1);
    nd << 0.9, 0.1;
    const std::vector<PointLabel> pts{{0, 0, 0, 1}, {0, 0, 1, 2}};
    const auto a = assign(manual_distances(nd), p, pts);
    CHECK(a.label(0) == 0);
    CHECK(a.score(0) == doctest::Approx(-0.1));
  }
  SUBCASE("soft probabilities override the class mode") {
    SemanticField<double> p{s, PixelMatrix<double>(1, 3)};
    p.probs << 0.0, 0.6, 0.4;
    PixelMatrix<double> nd(2, 1);
    nd << 0.5, 0.2;
    const std::vector<PointLabel> pts{{0, 0, 1, 1}, {0, 0, 2, 2}};
    const auto a = assign(manual_distances(nd), p, pts);
    CHECK(a.label(0) == 1);
    CHECK(a.score(0) == doctest::Approx(-0.32));
  }
  SUBCASE("all-zero scores fall back to the raw distance") {
    SemanticField<double> p{s, PixelMatrix<double>(1, 2)};
    p.probs << 1.0, 0.0;
    DistanceMatrix<double> d;
    d.raw.resize(2, 1);
    d.raw << 0.7, 0.3;
    d.normalized = PixelMatrix<double>::Ones(2, 1);
    const std::vector<PointLabel> pts{{0, 0, 1, 1}, {0, 0, 1, 2}};
    CHECK(assign(d, p, pts).label(0) == 1);
    d.raw << 0.3, 0.3;
    const std::vector<PointLabel> swapped{{0, 0, 1, 9}, {0, 0, 1, 2}};
    CHECK(assign(d, p, swapped).label(0) == 1);
  }
  SUBCASE("a single point claims every pixel") {
    const GridShape g{3, 3};
    const auto m = pseudo_mask(flat_model(g), {{1, 1, 1, 4}});
    CHECK((m.ids.array() == 1).all());
    REQUIRE(m.segments.size() == 1);
    CHECK(m.segments.at(1).class_id == 1);
  }
}

TEST_CASE("pseudo_mask recovers a two-blob scene") {
  // Two same-class blobs on background; semantic walls cost 2 per crossing.
  const GridShape s{20, 24};
  std::vector<int> cls(static_cast<std::size_t>(s.pixels()), 0);
  Eigen::VectorXi truth = Eigen::VectorXi::Zero(s.pixels());
  for (Index y = 3; y < 9; ++y)
    for (Index x = 3; x < 10; ++x) truth(s.index(y, x)) = 1;
  for (Index y = 11; y < 17; ++y)
    for (Index x = 13; x < 21; ++x) truth(s.index(y, x)) = 2;
  for (Index i = 0; i < s.pixels(); ++i) cls[static_cast<std::size_t>(i)] = truth(i) > 0 ? 1 : 0;
  CostModel<double> m;
  m.semantic = onehot_field(s, 2, cls);
  m.lambda_b = 0.0;
  m.lambda_m = 0.0;
  const std::vector<PointLabel> pts{{5, 5, 1, 10, SegmentKind::thing},
                                    {17, 14, 1, 20, SegmentKind::thing},
                                    {0, 0, 0, 30, SegmentKind::stuff}};
  const PanopticMap map = pseudo_mask(m, pts);
  // Ids 1, 2, 3 follow the order of the points.
  for (Index i = 0; i < s.pixels(); ++i) {
    const int want = truth(i) == 0 ? 3 : truth(i);
    CHECK(map.ids(i) == want);
  }
  CHECK(map.segments.at(3).kind == SegmentKind::stuff);
}

TEST_CASE("pseudo_mask splits touching instances at the manifold wall") {
  // Two same-class halves: semantic cost is zero everywhere, only the
  // orthogonal features separate them.
  const GridShape s{10, 12};
  CostModel<double> m;
  m.semantic = onehot_field(s, 2, std::vector<int>(static_cast<std::size_t>(s.pixels()), 1));
  m.manifold = FeatureField<double>{s, PixelMatrix<double>::Zero(s.pixels(), 2)};
  for (Index i = 0; i < s.pixels(); ++i) m.manifold->features(i, s.col(i) < 6 ? 0 : 1) = 1.0;
  m.lambda_b = 0.0;
  m.lambda_m = 0.1;
  const std::vector<PointLabel> pts{{2, 5, 1, 1}, {9, 4, 1, 2}};
  const PanopticMap map = pseudo_mask(m, pts);
  for (Index i = 0; i < s.pixels(); ++i) CHECK(map.ids(i) == (s.col(i) < 6 ? 1 : 2));

  // Without the manifold term the halves are indistinguishable and the
  // raw distance ties resolve to the lower target.
  m.lambda_m = 0.0;
  const PanopticMap flat = pseudo_mask(m, pts);
  CHECK((flat.ids.array() == 1).all());
}

TEST_CASE("stuff points of one class merge into one segment") {
  const GridShape s{4, 4};
  const std::vector<PointLabel> pts{
      {0, 0, 0, 1, SegmentKind::stuff}, {3, 3, 0, 2, SegmentKind::stuff}, {2, 1, 1, 3, SegmentKind::thing}};
  Assignment<double> a{Eigen::VectorXi(16), PixelVector<double>::Zero(16)};
  for (Index i = 0; i < 16; ++i) a.label(i) = static_cast<int>(i % 3);
  const PanopticMap map = to_panoptic(a, s, pts);
  CHECK(map.segments.size() == 2);
  for (Index i = 0; i < 16; ++i) CHECK(map.ids(i) == (i % 3 == 2 ? 2 : 1));
  CHECK_FALSE(validate(map).has_value());
}

TEST_CASE("pseudo_mask validates its points") {
  CHECK_THROWS_AS(pseudo_mask(flat_model({3, 3}), {{1, 1, 5, 1}}), ValidationError);
  CHECK_THROWS_AS(pseudo_mask(flat_model({3, 3}), {{1, 1, 1, 1}, {0, 0, 0, 1}}), ValidationError);
}
