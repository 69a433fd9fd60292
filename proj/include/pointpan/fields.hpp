#pragma once

#include "pointpan/core.hpp"

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace pointpan {

/// Per-pixel class probabilities, one row per pixel (HW x C).
template <typename Scalar>
struct SemanticField {
  GridShape shape;
  PixelMatrix<Scalar> probs;

  Index classes() const { return probs.cols(); }
};

/// Per-pixel L2-normalized embeddings (HW x D).
template <typename Scalar>
struct FeatureField {
  GridShape shape;
  PixelMatrix<Scalar> features;

  Index dims() const { return features.cols(); }
};

enum class SegmentKind { thing, stuff };

std::string to_string(SegmentKind kind);
SegmentKind parse_kind(const std::string& s);

/// A single annotated pixel. Several points may share a target_id when a
/// target carries more than one annotation.
struct PointLabel {
  Index x = 0;
  Index y = 0;
  int class_id = 0;
  int target_id = 0;
  SegmentKind kind = SegmentKind::thing;

  friend bool operator==(const PointLabel&, const PointLabel&) = default;
};

struct LabeledPixel {
  Index pixel = 0;
  int class_id = 0;
  int target_id = 0;
};

struct LabeledPixelSet {
  std::vector<LabeledPixel> entries;

  Index size() const { return static_cast<Index>(entries.size()); }
};

struct SegmentInfo {
  int class_id = 0;
  SegmentKind kind = SegmentKind::thing;
  friend bool operator==(const SegmentInfo&, const SegmentInfo&) = default;
};

/// Segment id per pixel (0 = void) plus the id -> (class, kind) table.
struct PanopticMap {
  static constexpr int kVoid = 0;

  GridShape shape;
  Eigen::VectorXi ids;
  std::map<int, SegmentInfo> segments;

  PanopticMap() = default;
  explicit PanopticMap(GridShape s) : shape(s), ids(Eigen::VectorXi::Zero(s.pixels())) {}

  int at(Index y, Index x) const { return ids(shape.index(y, x)); }
  PixelMask mask(int id) const { return ids.array() == id; }
  /// Class per pixel, -1 where void.
  Eigen::VectorXi class_map() const;
};

bool operator==(const PanopticMap& a, const PanopticMap& b);

struct Violation {
  std::string what;
  Index pixel = -1;
  double quantity = 0.0;
};

/// Squares of `side` pixels around each point. Pixels claimed by squares of
/// different classes are dropped, same-class conflicts go to the nearer point
/// (ties to the lower target_id).
LabeledPixelSet expand_points(const std::vector<PointLabel>& points, int side, GridShape shape);

std::optional<Violation> validate(const PanopticMap& map);
std::optional<Violation> validate(const std::vector<PointLabel>& points, GridShape shape, Index classes);

template <typename Scalar>
std::optional<Violation> validate(const SemanticField<Scalar>& field, double tol = 1e-5) {
  if (field.shape.height < 1 || field.shape.width < 1) return Violation{"empty shape", -1, 0.0};
  if (field.probs.rows() != field.shape.pixels())
    return Violation{"row count does not match shape", -1, static_cast<double>(field.probs.rows())};
  if (field.classes() < 1) return Violation{"no classes", -1, 0.0};
  for (Index i = 0; i < field.probs.rows(); ++i) {
    double sum = 0.0;
    for (Index c = 0; c < field.classes(); ++c) {
      const double p = static_cast<double>(field.probs(i, c));
      if (!std::isfinite(p)) return Violation{"non-finite probability", i, p};
      if (p < 0.0) return Violation{"negative probability", i, p};
      sum += p;
    }
    if (std::abs(sum - 1.0) > tol) return Violation{"probabilities do not sum to 1", i, sum};
  }
  return std::nullopt;
}

template <typename Scalar>
std::optional<Violation> validate(const FeatureField<Scalar>& field, double tol = 1e-5) {
  if (field.shape.height < 1 || field.shape.width < 1) return Violation{"empty shape", -1, 0.0};
  if (field.features.rows() != field.shape.pixels())
    return Violation{"row count does not match shape", -1, static_cast<double>(field.features.rows())};
  if (field.dims() < 1) return Violation{"no feature dimensions", -1, 0.0};
  for (Index i = 0; i < field.features.rows(); ++i) {
    const double n = static_cast<double>(field.features.row(i).norm());
    if (!std::isfinite(n) || std::abs(n - 1.0) > tol) return Violation{"feature is not unit norm", i, n};
  }
  return std::nullopt;
}

/// Throws ValidationError carrying the report.
template <typename T>
void require_valid(const T& value, const std::string& name) {
  if (auto v = validate(value))
    throw ValidationError(name + ": " + v->what + " at pixel " + std::to_string(v->pixel) + " (" +
                          std::to_string(v->quantity) + ")");
}

}  // namespace pointpan
