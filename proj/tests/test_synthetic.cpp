#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "pointpan/synthetic.hpp"

using namespace pointpan;

namespace {

/// True when some pixel of segment a is 4-adjacent to segment b.
bool touches(const PanopticMap& m, int a, int b) {
  for (Index y = 0; y < m.shape.height; ++y)
    for (Index x = 0; x < m.shape.width; ++x) {
      if (m.at(y, x) != a) continue;
      if ((x + 1 < m.shape.width && m.at(y, x + 1) == b) || (y + 1 < m.shape.height && m.at(y + 1, x) == b) ||
          (x > 0 && m.at(y, x - 1) == b) || (y > 0 && m.at(y - 1, x) == b))
        return true;
    }
  return false;
}

}  // namespace

TEST_CASE("scenes are deterministic in the spec") {
  SceneSpec spec;
  spec.seed = 99;
  const auto a = make_scene(spec), b = make_scene(spec);
  CHECK(a.gt == b.gt);
  CHECK(a.image.data == b.image.data);
  CHECK(a.semantic.probs == b.semantic.probs);
  CHECK(a.features.features == b.features.features);
  spec.seed = 100;
  CHECK_FALSE(make_scene(spec).gt == a.gt);
}

TEST_CASE("one target gives one thing plus background") {
  SceneSpec spec;
  spec.n_targets = 1;
  spec.seed = 4;
  const auto s = make_scene(spec);
  REQUIRE(s.gt.segments.size() == 2);
  CHECK(s.gt.segments.at(1).kind == SegmentKind::stuff);
  CHECK(s.gt.segments.at(1).class_id == 0);
  CHECK(s.gt.segments.at(2).kind == SegmentKind::thing);
  CHECK(s.gt.mask(2).count() > 0);
  CHECK_FALSE(validate(s.gt).has_value());
}

TEST_CASE("ideal fields agree with the ground truth") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    SceneSpec spec;
    spec.n_targets = 2 + static_cast<int>(seed % 4);
    spec.seed = seed;
    const auto s = make_scene(spec);
    const Eigen::VectorXi cls = s.gt.class_map();
    for (Index i = 0; i < s.gt.ids.size(); ++i) {
      CHECK(s.semantic.probs(i, cls(i)) == 1.0);
      CHECK(s.semantic.probs.row(i).sum() == 1.0);
    }
    CHECK_FALSE(validate(s.features).has_value());
    CHECK_FALSE(validate(s.semantic).has_value());
    // One distinct vector per segment: constant inside, orthogonal across.
    std::map<int, Index> first;
    for (Index i = 0; i < s.gt.ids.size(); ++i) {
      auto [it, inserted] = first.try_emplace(s.gt.ids(i), i);
      if (!inserted) CHECK(s.features.features.row(i) == s.features.features.row(it->second));
    }
    for (const auto& [a, ia] : first)
      for (const auto& [b, ib] : first)
        if (a != b) CHECK(std::abs(s.features.features.row(ia).dot(s.features.features.row(ib))) < 1e-12);
    // Separate targets keep a gap.
    for (const auto& [a, ia] : first)
      for (const auto& [b, ib] : first)
        if (a > 1 && b > 1 && a != b) CHECK_FALSE(touches(s.gt, a, b));
  }
}

TEST_CASE("corruption mixes toward a random distribution") {
  SceneSpec spec;
  spec.corruption = 0.1;
  spec.seed = 3;
  const auto s = make_scene(spec);
  CHECK_FALSE(validate(s.semantic).has_value());
  const Eigen::VectorXi cls = s.gt.class_map();
  for (Index i = 0; i < s.gt.ids.size(); ++i) {
    CHECK(s.semantic.probs(i, cls(i)) >= 0.9);
    CHECK(s.semantic.probs(i, cls(i)) < 1.0);
  }
}

TEST_CASE("touching mode places same-class pairs that share an edge") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    SceneSpec spec;
    spec.n_targets = 2;
    spec.touching = true;
    spec.seed = seed;
    const auto s = make_scene(spec);
    CHECK(touches(s.gt, 2, 3));
    CHECK(s.gt.segments.at(2).class_id == s.gt.segments.at(3).class_id);
  }
}

TEST_CASE("packing failure and bad specs") {
  SceneSpec spec;
  spec.size = 16;
  spec.n_targets = 40;
  spec.max_retries = 50;
  CHECK_THROWS_WITH_AS(make_scene(spec), doctest::Contains("infeasible packing"), ValidationError);
  spec = {};
  spec.size = 8;
  CHECK_THROWS_AS(make_scene(spec), ValidationError);
  spec = {};
  spec.corruption = 1.5;
  CHECK_THROWS_AS(make_scene(spec), ValidationError);
}
