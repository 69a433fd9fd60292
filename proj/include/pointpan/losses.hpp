#pragma once

#include "pointpan/fields.hpp"
#include "pointpan/imaging.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <vector>

namespace pointpan {

inline constexpr double kLogClamp = 1e-12;

struct LossReport {
  double value = 0.0;
  Index n_terms = 0;
  bool vacuous = false;
  std::vector<double> per_term;
};

namespace detail {

inline LossReport mean_report(std::vector<double> terms, double scale, bool keep_terms) {
  LossReport r;
  r.n_terms = static_cast<Index>(terms.size());
  if (terms.empty()) {
    r.vacuous = true;
    return r;
  }
  r.value = scale * pairwise_sum(terms) / static_cast<double>(terms.size());
  if (keep_terms) r.per_term = std::move(terms);
  return r;
}

inline double clamped_neg_log(double p) { return -std::log(std::max(p, kLogClamp)); }

}  // namespace detail

/// Cross-entropy averaged over labeled pixels only.
template <typename Scalar>
LossReport partial_ce(const SemanticField<Scalar>& P, const LabeledPixelSet& Y, bool keep_terms = false) {
  std::vector<double> terms;
  terms.reserve(Y.entries.size());
  for (const LabeledPixel& e : Y.entries) {
    require(e.pixel >= 0 && e.pixel < P.probs.rows(), "labeled pixel out of bounds");
    require(e.class_id >= 0 && e.class_id < P.classes(), "labeled class out of range");
    terms.push_back(detail::clamped_neg_log(static_cast<double>(P.probs(e.pixel, e.class_id))));
  }
  return detail::mean_report(std::move(terms), 1.0, keep_terms);
}

template <typename Scalar>
PixelMatrix<double> partial_ce_gradient(const SemanticField<Scalar>& P, const LabeledPixelSet& Y) {
  PixelMatrix<double> g = PixelMatrix<double>::Zero(P.probs.rows(), P.classes());
  if (Y.entries.empty()) return g;
  const double n = static_cast<double>(Y.entries.size());
  for (const LabeledPixel& e : Y.entries) {
    const double p = static_cast<double>(P.probs(e.pixel, e.class_id));
    if (p > kLogClamp) g(e.pixel, e.class_id) -= 1.0 / (n * p);
  }
  return g;
}

/// -amplify * mean over similar pairs of log(P_i . P_j).
template <typename Scalar>
LossReport color_prior(const SemanticField<Scalar>& P, const AffinityGraph& graph, double amplify = 3.0,
                       bool keep_terms = false) {
  require(graph.shape == P.shape, "affinity graph shape differs from the semantic field");
  std::vector<double> terms;
  for (const AffinityEdge& e : graph.edges) {
    if (!e.similar) continue;
    terms.push_back(detail::clamped_neg_log(static_cast<double>(P.probs.row(e.i).dot(P.probs.row(e.j)))));
  }
  return detail::mean_report(std::move(terms), amplify, keep_terms);
}

template <typename Scalar>
PixelMatrix<double> color_prior_gradient(const SemanticField<Scalar>& P, const AffinityGraph& graph,
                                         double amplify = 3.0) {
  PixelMatrix<double> g = PixelMatrix<double>::Zero(P.probs.rows(), P.classes());
  const Index z = graph.active_edges();
  if (z == 0) return g;
  const double scale = amplify / static_cast<double>(z);
  const PixelMatrix<double> Pd = P.probs.template cast<double>();
  for (const AffinityEdge& e : graph.edges) {
    if (!e.similar) continue;
    const double dot = Pd.row(e.i).dot(Pd.row(e.j));
    if (dot <= kLogClamp) continue;
    g.row(e.i) -= scale * Pd.row(e.j) / dot;
    g.row(e.j) -= scale * Pd.row(e.i) / dot;
  }
  return g;
}

/// Mean feature over the mask; the result is not re-normalized.
template <typename Scalar>
PixelVector<Scalar> masked_average(const FeatureField<Scalar>& F, const PixelMask& mask) {
  require(mask.size() == F.features.rows(), "mask size differs from the feature field");
  const Index z = mask.count();
  require(z > 0, "masked_average of an empty mask");
  PixelVector<Scalar> sum = PixelVector<Scalar>::Zero(F.dims());
  for (Index j = 0; j < mask.size(); ++j)
    if (mask(j)) sum += F.features.row(j).transpose();
  return sum / static_cast<Scalar>(z);
}

/// Which set the contrastive denominator runs over. `targets` follows the
/// multi-point convention (one negative per distinct target); `points` sums
/// over every point literally.
enum class ContrastiveDenominator { targets, points };

namespace detail {

/// Point-to-prototype logits shared by the loss and its gradient.
template <typename Scalar>
struct ContrastiveSetup {
  std::vector<int> segment_ids;             // distinct targets in id order
  std::vector<Index> point_pixels;
  std::vector<std::size_t> point_segment;   // index into segment_ids
  std::vector<Index> mask_sizes;
  PixelMatrix<double> prototypes;           // one row per distinct target
  // Candidates in the denominator: rows of `prototypes`, and per point the positive candidate.
  std::vector<std::size_t> candidate_segment;
  std::vector<std::size_t> positive;
};

template <typename Scalar>
ContrastiveSetup<Scalar> contrastive_setup(const FeatureField<Scalar>& F, const std::vector<PointLabel>& points,
                                           const PanopticMap& masks, ContrastiveDenominator mode) {
  require(masks.shape == F.shape, "mask shape differs from the feature field");
  require(!points.empty(), "contrastive loss needs at least one point");
  ContrastiveSetup<Scalar> s;
  std::map<int, std::size_t> slot;
  for (const PointLabel& p : points) {
    require(F.shape.contains(p.y, p.x), "point outside the image");
    const int id = masks.at(p.y, p.x);
    require(id != PanopticMap::kVoid, "point lies on a void pixel, its target mask is empty");
    slot.try_emplace(id, 0);
  }
  std::size_t k = 0;
  for (auto& [id, idx] : slot) {
    idx = k++;
    s.segment_ids.push_back(id);
  }
  s.prototypes.resize(static_cast<Index>(s.segment_ids.size()), F.dims());
  for (std::size_t t = 0; t < s.segment_ids.size(); ++t) {
    const PixelMask m = masks.mask(s.segment_ids[t]);
    s.mask_sizes.push_back(m.count());
    s.prototypes.row(static_cast<Index>(t)) = masked_average(F, m).template cast<double>().transpose();
  }
  for (std::size_t i = 0; i < points.size(); ++i) {
    s.point_pixels.push_back(F.shape.index(points[i].y, points[i].x));
    s.point_segment.push_back(slot.at(masks.at(points[i].y, points[i].x)));
  }
  if (mode == ContrastiveDenominator::targets) {
    for (std::size_t t = 0; t < s.segment_ids.size(); ++t) s.candidate_segment.push_back(t);
    s.positive = s.point_segment;
  } else {
    s.candidate_segment = s.point_segment;
    for (std::size_t i = 0; i < points.size(); ++i) s.positive.push_back(i);
  }
  return s;
}

}  // namespace detail

/// InfoNCE between each point's feature and the masked-average prototypes of
/// the targets, with temperature tau.
template <typename Scalar>
LossReport contrastive(const FeatureField<Scalar>& F, const std::vector<PointLabel>& points,
                       const PanopticMap& masks, double tau = 0.07,
                       ContrastiveDenominator mode = ContrastiveDenominator::targets, bool keep_terms = false) {
  require(tau > 0.0, "contrastive temperature must be positive");
  const auto s = detail::contrastive_setup(F, points, masks, mode);
  std::vector<double> terms;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const Eigen::RowVectorXd f = F.features.row(s.point_pixels[i]).template cast<double>();
    std::vector<double> logits;
    for (std::size_t c : s.candidate_segment)
      logits.push_back(f.dot(s.prototypes.row(static_cast<Index>(c))) / tau);
    const double peak = *std::max_element(logits.begin(), logits.end());
    double denom = 0.0;
    for (double a : logits) denom += std::exp(a - peak);
    terms.push_back(-(logits[s.positive[i]] - peak) + std::log(denom));
  }
  return detail::mean_report(std::move(terms), 1.0, keep_terms);
}

/// Gradient of `contrastive` with respect to every feature entry, including
/// the dependence of the prototypes on the masked features.
template <typename Scalar>
PixelMatrix<double> contrastive_gradient(const FeatureField<Scalar>& F, const std::vector<PointLabel>& points,
                                         const PanopticMap& masks, double tau = 0.07,
                                         ContrastiveDenominator mode = ContrastiveDenominator::targets) {
  require(tau > 0.0, "contrastive temperature must be positive");
  const auto s = detail::contrastive_setup(F, points, masks, mode);
  const double n = static_cast<double>(points.size());
  PixelMatrix<double> g = PixelMatrix<double>::Zero(F.features.rows(), F.dims());
  PixelMatrix<double> proto_grad = PixelMatrix<double>::Zero(s.prototypes.rows(), s.prototypes.cols());

  for (std::size_t i = 0; i < points.size(); ++i) {
    const Eigen::RowVectorXd f = F.features.row(s.point_pixels[i]).template cast<double>();
    std::vector<double> logits;
    for (std::size_t c : s.candidate_segment)
      logits.push_back(f.dot(s.prototypes.row(static_cast<Index>(c))) / tau);
    const double peak = *std::max_element(logits.begin(), logits.end());
    double denom = 0.0;
    for (double a : logits) denom += std::exp(a - peak);
    Eigen::RowVectorXd direct = Eigen::RowVectorXd::Zero(F.dims());
    for (std::size_t c = 0; c < logits.size(); ++c) {
      const double w = std::exp(logits[c] - peak) / denom - (c == s.positive[i] ? 1.0 : 0.0);
      const Index t = static_cast<Index>(s.candidate_segment[c]);
      direct += w * s.prototypes.row(t);
      proto_grad.row(t) += w * f;
    }
    g.row(s.point_pixels[i]) += direct / (tau * n);
  }
  for (std::size_t t = 0; t < s.segment_ids.size(); ++t) {
    const Eigen::RowVectorXd share =
        proto_grad.row(static_cast<Index>(t)) / (tau * n * static_cast<double>(s.mask_sizes[t]));
    for (Index j = 0; j < masks.ids.size(); ++j)
      if (masks.ids(j) == s.segment_ids[t]) g.row(j) += share;
  }
  return g;
}

}  // namespace pointpan
