#pragma once

#include "pointpan/fields.hpp"
#include "pointpan/imaging.hpp"

#include <cstdint>

namespace pointpan {

/// Colored-blob scene description. Class 0 is the background stuff class,
/// thing targets use classes 1..thing_classes.
struct SceneSpec {
  Index size = 64;
  int n_targets = 3;
  int thing_classes = 3;
  /// Mixing weight toward a random distribution: P = (1 - c) onehot + c r.
  double corruption = 0.0;
  /// Place targets in pairs of same-class rectangles sharing an edge.
  bool touching = false;
  int feature_dims = 8;
  int max_retries = 2000;
  std::uint64_t seed = 0;
};

/// A generated scene and the ideal network outputs consistent with it: one
/// distinct unit feature vector per target, constant inside the target.
struct SyntheticScene {
  RgbImage<double> image;
  PanopticMap gt;
  SemanticField<double> semantic;
  FeatureField<double> features;
};

/// Deterministic in `spec`. Throws ValidationError when the targets cannot be
/// packed within the retry budget.
SyntheticScene make_scene(const SceneSpec& spec);

}  // namespace pointpan
