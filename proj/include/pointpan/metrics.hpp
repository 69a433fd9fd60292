#pragma once

#include "pointpan/fields.hpp"

#include <map>
#include <optional>

namespace pointpan {

struct ClassStats {
  double iou_sum = 0.0;
  Index tp = 0;
  Index fp = 0;
  Index fn = 0;
  SegmentKind kind = SegmentKind::thing;

  double pq() const;
  double sq() const;
  double rq() const;
};

struct QualityTriple {
  double pq = 0.0;
  double sq = 0.0;
  double rq = 0.0;
  Index classes = 0;
};

struct PqReport {
  QualityTriple all;
  QualityTriple things;
  QualityTriple stuff;
  std::map<int, ClassStats> per_class;
};

struct PqOptions {
  /// When set, class ids outside [0, num_classes) are rejected.
  std::optional<int> num_classes;
};

/// Accumulates per-class matching counts over images; summation order does
/// not matter.
class PqAccumulator {
 public:
  explicit PqAccumulator(PqOptions opts = {}) : opts_(opts) {}

  void add(const PanopticMap& pred, const PanopticMap& gt);
  void merge(const PqAccumulator& other);
  PqReport report() const;
  const std::map<int, ClassStats>& stats() const { return stats_; }

 private:
  PqOptions opts_;
  std::map<int, ClassStats> stats_;
};

/// Panoptic quality with IoU > 0.5 matching of same-class segments. Ground
/// truth void pixels are excluded from IoU; a prediction lying mostly on gt
/// void is not counted as a false positive. Averages run over classes with at
/// least one tp, fp or fn.
PqReport panoptic_quality(const PanopticMap& pred, const PanopticMap& gt, PqOptions opts = {});

struct IouReport {
  std::map<int, double> per_class;
  double mean = 0.0;
};

/// Per-class IoU over non-void gt pixels, averaged over classes present in gt.
IouReport mean_iou(const Eigen::VectorXi& pred_classes, const Eigen::VectorXi& gt_classes);
IouReport mean_iou(const PanopticMap& pred, const PanopticMap& gt);

template <typename Scalar>
Eigen::VectorXi argmax_classes(const SemanticField<Scalar>& P) {
  Eigen::VectorXi out(P.probs.rows());
  for (Index i = 0; i < P.probs.rows(); ++i) {
    Index c = 0;
    P.probs.row(i).maxCoeff(&c);
    out(i) = static_cast<int>(c);
  }
  return out;
}

template <typename Scalar>
IouReport mean_iou(const SemanticField<Scalar>& pred, const PanopticMap& gt) {
  require(pred.shape == gt.shape, "prediction and ground truth shapes differ");
  return mean_iou(argmax_classes(pred), gt.class_map());
}

}  // namespace pointpan
