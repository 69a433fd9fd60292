#pragma once

#include "pointpan/detail/indexed_heap.hpp"
#include "pointpan/fields.hpp"
#include "pointpan/imaging.hpp"

#include <array>
#include <exception>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <thread>
#include <tuple>
#include <vector>

namespace pointpan {

/// 8-neighborhood, ordered so that the opposite of direction k is 7 - k.
inline constexpr std::array<Offset, 8> kNeighbors8{{
    {-1, -1}, {-1, 0}, {-1, 1}, {0, -1}, {0, 1}, {1, -1}, {1, 0}, {1, 1}}};

/// Traversing-cost model: E(i,j) = semantic L1 + lambda_b |B_j| + lambda_m max(1 - F_i.F_j, 0).
/// The boundary and manifold fields may be omitted when their weight is zero.
template <typename Scalar>
struct CostModel {
  SemanticField<Scalar> semantic;
  std::optional<BoundaryMap<Scalar>> boundary;
  std::optional<FeatureField<Scalar>> manifold;
  double lambda_b = 0.1;
  double lambda_m = 0.1;

  GridShape shape() const { return semantic.shape; }

  void check() const {
    require(std::isfinite(lambda_b) && lambda_b >= 0.0, "lambda_b must be finite and non-negative");
    require(std::isfinite(lambda_m) && lambda_m >= 0.0, "lambda_m must be finite and non-negative");
    require(semantic.probs.rows() == semantic.shape.pixels(), "semantic field does not match its shape");
    if (lambda_b > 0.0) {
      require(boundary.has_value(), "lambda_b > 0 needs a boundary map");
      require(boundary->shape == shape() && boundary->data.size() == shape().pixels(),
              "boundary map shape differs from the semantic field");
    }
    if (lambda_m > 0.0) {
      require(manifold.has_value(), "lambda_m > 0 needs a feature field");
      require(manifold->shape == shape() && manifold->features.rows() == shape().pixels(),
              "feature field shape differs from the semantic field");
    }
  }
};

inline bool are_neighbors8(GridShape s, Index i, Index j) {
  if (i == j || i < 0 || j < 0 || i >= s.pixels() || j >= s.pixels()) return false;
  const Index dy = s.row(j) - s.row(i);
  const Index dx = s.col(j) - s.col(i);
  return dy >= -1 && dy <= 1 && dx >= -1 && dx <= 1;
}

namespace detail {

template <typename Scalar>
Scalar edge_cost_unchecked(const CostModel<Scalar>& m, Index i, Index j) {
  Scalar cost = (m.semantic.probs.row(i) - m.semantic.probs.row(j)).cwiseAbs().sum();
  if (m.lambda_b > 0.0) cost += Scalar(m.lambda_b) * std::abs(m.boundary->data(j));
  if (m.lambda_m > 0.0) {
    const Scalar cosine = m.manifold->features.row(i).dot(m.manifold->features.row(j));
    cost += Scalar(m.lambda_m) * std::max(Scalar(1) - cosine, Scalar(0));
  }
  return cost;
}

}  // namespace detail

/// Directed cost of stepping from pixel i to its 8-neighbor j.
template <typename Scalar>
Scalar edge_cost(const CostModel<Scalar>& model, Index i, Index j) {
  model.check();
  require(are_neighbors8(model.shape(), i, j), "edge_cost needs two distinct 8-neighbors");
  return detail::edge_cost_unchecked(model, i, j);
}

/// Cost of entering each pixel from each of its 8 neighbors:
/// entry(u, k) = E(u + kNeighbors8[k] -> u). Out-of-bounds entries are +inf.
template <typename Scalar>
struct GridCosts {
  GridShape shape;
  PixelMatrix<Scalar, 8> incoming;

  static GridCosts from_model(const CostModel<Scalar>& model) {
    model.check();
    const GridShape s = model.shape();
    GridCosts g{s, PixelMatrix<Scalar, 8>::Constant(s.pixels(), 8, std::numeric_limits<Scalar>::infinity())};
    for (Index y = 0; y < s.height; ++y)
      for (Index x = 0; x < s.width; ++x) {
        const Index u = s.index(y, x);
        for (int k = 0; k < 8; ++k) {
          const Index ny = y + kNeighbors8[k].dy, nx = x + kNeighbors8[k].dx;
          if (s.contains(ny, nx)) g.incoming(u, k) = detail::edge_cost_unchecked(model, s.index(ny, nx), u);
        }
      }
    return g;
  }
};

enum class Normalization { global, per_label };

/// Pixel-to-point traversing distances, one row per point label.
template <typename Scalar>
struct DistanceMatrix {
  PixelMatrix<Scalar> raw;
  PixelMatrix<Scalar> normalized;
  Normalization mode = Normalization::global;

  Index labels() const { return raw.rows(); }
  Index pixels() const { return raw.cols(); }
};

struct ExecutionOptions {
  int jobs = 1;
};

namespace detail {

/// Runs fn(0..n-1) on up to `jobs` threads with a static round-robin split.
/// If any call throws, the exception of the lowest index is rethrown.
template <typename Fn>
void parallel_for(Index n, int jobs, Fn&& fn) {
  const int workers = static_cast<int>(std::min<Index>(std::max(jobs, 1), std::max<Index>(n, 1)));
  if (workers <= 1) {
    for (Index k = 0; k < n; ++k) fn(k);
    return;
  }
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n));
  {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&, w] {
        for (Index k = w; k < n; k += workers) {
          try {
            fn(k);
          } catch (...) {
            errors[static_cast<std::size_t>(k)] = std::current_exception();
          }
        }
      });
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
}

/// Shortest distance from every pixel to `source`, following edges toward the
/// source (a forward search from the source over reversed edges).
template <typename Scalar>
void distances_to(const GridCosts<Scalar>& g, Index source, PixelVector<Scalar>& dist) {
  const GridShape s = g.shape;
  dist.setConstant(std::numeric_limits<Scalar>::infinity());
  std::vector<bool> done(static_cast<std::size_t>(s.pixels()), false);
  IndexedHeap<Scalar> heap(static_cast<std::size_t>(s.pixels()));
  dist(source) = Scalar(0);
  heap.push_or_decrease(static_cast<std::int32_t>(source), Scalar(0));
  while (!heap.empty()) {
    const auto [du, u32] = heap.pop();
    const Index u = u32;
    done[u] = true;
    const Index y = s.row(u), x = s.col(u);
    for (int k = 0; k < 8; ++k) {
      const Index ny = y + kNeighbors8[k].dy, nx = x + kNeighbors8[k].dx;
      if (!s.contains(ny, nx)) continue;
      const Index v = s.index(ny, nx);
      if (done[v]) continue;
      const Scalar cand = du + g.incoming(u, k);
      if (cand < dist(v)) {
        dist(v) = cand;
        heap.push_or_decrease(static_cast<std::int32_t>(v), cand);
      }
    }
  }
}

template <typename Scalar>
void normalize(DistanceMatrix<Scalar>& d) {
  d.normalized = d.raw;
  if (d.raw.size() == 0) return;
  if (d.mode == Normalization::global) {
    const Scalar peak = d.raw.maxCoeff();
    if (peak > Scalar(0))
      d.normalized /= peak;
    else
      d.normalized.setZero();
  } else {
    for (Index r = 0; r < d.raw.rows(); ++r) {
      const Scalar peak = d.raw.row(r).maxCoeff();
      if (peak > Scalar(0))
        d.normalized.row(r) /= peak;
      else
        d.normalized.row(r).setZero();
    }
  }
}

}  // namespace detail

template <typename Scalar>
DistanceMatrix<Scalar> traversing_distances(const GridCosts<Scalar>& costs, const std::vector<PointLabel>& points,
                                            Normalization mode = Normalization::global,
                                            ExecutionOptions exec = {}) {
  require(!points.empty(), "traversing_distances needs at least one point");
  const GridShape s = costs.shape;
  require(costs.incoming.rows() == s.pixels(), "cost table does not match its shape");
  require(s.pixels() <= std::numeric_limits<std::int32_t>::max(), "image too large");
  for (const PointLabel& p : points) require(s.contains(p.y, p.x), "point outside the image");

  DistanceMatrix<Scalar> d;
  d.mode = mode;
  d.raw.resize(static_cast<Index>(points.size()), s.pixels());
  detail::parallel_for(d.raw.rows(), exec.jobs, [&](Index l) {
    PixelVector<Scalar> row(s.pixels());
    detail::distances_to(costs, s.index(points[l].y, points[l].x), row);
    d.raw.row(l) = row.transpose();
  });
  detail::normalize(d);
  return d;
}

template <typename Scalar>
DistanceMatrix<Scalar> traversing_distances(const CostModel<Scalar>& model, const std::vector<PointLabel>& points,
                                            Normalization mode = Normalization::global,
                                            ExecutionOptions exec = {}) {
  require(!points.empty(), "traversing_distances needs at least one point");
  return traversing_distances(GridCosts<Scalar>::from_model(model), points, mode, exec);
}

template <typename Scalar>
struct Assignment {
  Eigen::VectorXi label;
  PixelVector<Scalar> score;
};

/// Per pixel, the label minimizing (normalized distance - 1) * P_i[class of label].
/// When every score is exactly zero the raw distance decides; remaining ties go
/// to the lowest target_id, then the lowest label index.
template <typename Scalar>
Assignment<Scalar> assign(const DistanceMatrix<Scalar>& distances, const SemanticField<Scalar>& semantic,
                          const std::vector<PointLabel>& points) {
  const Index n = static_cast<Index>(points.size());
  const Index m = semantic.shape.pixels();
  require(n >= 1, "assign needs at least one point");
  require(distances.labels() == n && distances.pixels() == m && distances.normalized.rows() == n &&
              distances.normalized.cols() == m,
          "distance matrix shape differs from points x pixels");
  require(semantic.probs.rows() == m, "semantic field does not match its shape");
  for (const PointLabel& p : points)
    require(p.class_id >= 0 && p.class_id < semantic.classes(), "point class out of range");

  Assignment<Scalar> out{Eigen::VectorXi(m), PixelVector<Scalar>(m)};
  auto better = [&](Index a, Index b) {  // tie-break among equal keys
    return std::tie(points[a].target_id, a) < std::tie(points[b].target_id, b);
  };
  for (Index i = 0; i < m; ++i) {
    Index best = 0;
    Scalar best_score = std::numeric_limits<Scalar>::infinity();
    for (Index s = 0; s < n; ++s) {
      const Scalar score = (distances.normalized(s, i) - Scalar(1)) * semantic.probs(i, points[s].class_id);
      if (score < best_score || (score == best_score && better(s, best))) {
        best = s;
        best_score = score;
      }
    }
    if (best_score == Scalar(0)) {
      Scalar best_raw = std::numeric_limits<Scalar>::infinity();
      for (Index s = 0; s < n; ++s) {
        const Scalar raw = distances.raw(s, i);
        if (raw < best_raw || (raw == best_raw && better(s, best))) {
          best = s;
          best_raw = raw;
        }
      }
    }
    out.label(i) = static_cast<int>(best);
    out.score(i) = best_score;
  }
  return out;
}

/// Thing points become one segment per target_id; stuff points merge into one
/// segment per class. Ids are 1.. in order of first appearance in `points`.
template <typename Scalar>
PanopticMap to_panoptic(const Assignment<Scalar>& a, GridShape shape, const std::vector<PointLabel>& points) {
  require(a.label.size() == shape.pixels(), "assignment does not match the shape");
  std::map<std::pair<int, int>, int> key_to_id;  // (kind, target or class)
  std::vector<int> label_to_id(points.size());
  PanopticMap map(shape);
  for (std::size_t l = 0; l < points.size(); ++l) {
    const PointLabel& p = points[l];
    const bool stuff = p.kind == SegmentKind::stuff;
    const std::pair<int, int> key{stuff ? 1 : 0, stuff ? p.class_id : p.target_id};
    auto [it, inserted] = key_to_id.try_emplace(key, static_cast<int>(key_to_id.size()) + 1);
    if (inserted) {
      map.segments[it->second] = SegmentInfo{p.class_id, p.kind};
    } else {
      require(map.segments[it->second].class_id == p.class_id, "points of one target disagree on class");
    }
    label_to_id[l] = it->second;
  }
  for (Index i = 0; i < shape.pixels(); ++i) map.ids(i) = label_to_id[a.label(i)];
  return map;
}

struct PseudoMaskOptions {
  Normalization normalization = Normalization::global;
  ExecutionOptions exec;
};

template <typename Scalar>
PanopticMap pseudo_mask(const CostModel<Scalar>& model, const std::vector<PointLabel>& points,
                        PseudoMaskOptions opts = {}) {
  if (auto v = validate(points, model.shape(), model.semantic.classes()))
    throw ValidationError("points: " + v->what + " (index " + std::to_string(v->pixel) + ")");
  const DistanceMatrix<Scalar> d = traversing_distances(model, points, opts.normalization, opts.exec);
  return to_panoptic(assign(d, model.semantic, points), model.shape(), points);
}

}  // namespace pointpan
