#include "pointpan/synthetic.hpp"

#include "pointpan/sampler.hpp"

#include <Eigen/QR>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

namespace pointpan {

namespace {

class SceneRng {
 public:
  explicit SceneRng(std::uint64_t seed) : gen_(splitmix64(seed)) {}

  double uniform() { return uniform01(gen_); }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  Index integer(Index lo, Index hi) {  // inclusive
    return lo + std::min<Index>(hi - lo, static_cast<Index>(uniform() * static_cast<double>(hi - lo + 1)));
  }
  double gaussian() {
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::mt19937_64 gen_;
};

constexpr Index kBorderMargin = 2;
constexpr Index kGap = 3;

struct Canvas {
  GridShape shape;
  std::vector<int> owner;  // 0 = background, k = target k

  bool fits(const std::vector<Index>& pixels, int partner) const {
    if (pixels.empty()) return false;
    for (Index p : pixels) {
      const Index y = shape.row(p), x = shape.col(p);
      if (y < kBorderMargin || x < kBorderMargin || y >= shape.height - kBorderMargin ||
          x >= shape.width - kBorderMargin)
        return false;
      for (Index dy = -kGap; dy <= kGap; ++dy)
        for (Index dx = -kGap; dx <= kGap; ++dx) {
          if (!shape.contains(y + dy, x + dx)) continue;
          const int o = owner[shape.index(y + dy, x + dx)];
          if (o == 0) continue;
          if (o == partner && (dy != 0 || dx != 0)) continue;
          return false;
        }
    }
    return true;
  }

  void paint(const std::vector<Index>& pixels, int id) {
    for (Index p : pixels) owner[p] = id;
  }
};

std::vector<Index> rect_pixels(GridShape s, Index y0, Index x0, Index h, Index w) {
  std::vector<Index> out;
  for (Index y = y0; y < y0 + h; ++y)
    for (Index x = x0; x < x0 + w; ++x)
      if (s.contains(y, x)) out.push_back(s.index(y, x));
      else return {};
  return out;
}

std::vector<Index> ellipse_pixels(GridShape s, double cy, double cx, double ry, double rx) {
  std::vector<Index> out;
  for (Index y = static_cast<Index>(std::floor(cy - ry)); y <= static_cast<Index>(std::ceil(cy + ry)); ++y)
    for (Index x = static_cast<Index>(std::floor(cx - rx)); x <= static_cast<Index>(std::ceil(cx + rx)); ++x) {
      const double u = (static_cast<double>(y) - cy) / ry, v = (static_cast<double>(x) - cx) / rx;
      if (u * u + v * v > 1.0) continue;
      if (!s.contains(y, x)) return {};
      out.push_back(s.index(y, x));
    }
  return out;
}

std::vector<Index> random_blob(SceneRng& rng, GridShape s) {
  const Index n = s.height;
  if (rng.uniform() < 0.5) {
    const Index h = rng.integer(8, std::max<Index>(8, n / 3));
    const Index w = rng.integer(8, std::max<Index>(8, n / 3));
    return rect_pixels(s, rng.integer(0, n - h), rng.integer(0, n - w), h, w);
  }
  const double ry = rng.uniform(4.0, std::max(4.0, static_cast<double>(n) / 6.0));
  const double rx = rng.uniform(4.0, std::max(4.0, static_cast<double>(n) / 6.0));
  return ellipse_pixels(s, rng.uniform(ry, static_cast<double>(n) - ry), rng.uniform(rx, static_cast<double>(n) - rx),
                        ry, rx);
}

/// Two rectangles sharing a full or partial edge.
std::pair<std::vector<Index>, std::vector<Index>> random_pair(SceneRng& rng, GridShape s) {
  const Index n = s.height;
  const Index h = rng.integer(10, std::max<Index>(10, n / 3));
  const Index w = rng.integer(8, std::max<Index>(8, n / 4));
  const Index h2 = rng.integer(10, std::max<Index>(10, n / 3));
  const Index w2 = rng.integer(8, std::max<Index>(8, n / 4));
  const Index y0 = rng.integer(0, n - 1), x0 = rng.integer(0, n - 1);
  std::vector<Index> a = rect_pixels(s, y0, x0, h, w);
  std::vector<Index> b;
  if (rng.uniform() < 0.5) {
    const Index slide = rng.integer(-(h2 - 6), h - 6);  // keep at least 6 shared rows
    b = rect_pixels(s, y0 + slide, x0 + w, h2, w2);
  } else {
    const Index slide = rng.integer(-(w2 - 6), w - 6);
    b = rect_pixels(s, y0 + h, x0 + slide, h2, w2);
  }
  return {a, b};
}

Eigen::Vector3d random_color(SceneRng& rng, const std::vector<Eigen::Vector3d>& used) {
  Eigen::Vector3d best;
  double best_gap = -1.0;
  for (int attempt = 0; attempt < 200; ++attempt) {
    const Eigen::Vector3d c(rng.uniform(0.05, 0.95), rng.uniform(0.05, 0.95), rng.uniform(0.05, 0.95));
    double gap = 1e9;
    for (const auto& u : used) gap = std::min(gap, (c - u).norm());
    if (gap > best_gap) {
      best = c;
      best_gap = gap;
    }
    if (gap >= 0.35) break;
  }
  return best;
}

}  // namespace

SyntheticScene make_scene(const SceneSpec& spec) {
  require(spec.size >= 16, "synthetic scenes need size >= 16");
  require(spec.n_targets >= 1, "synthetic scenes need at least one target");
  require(spec.thing_classes >= 1, "synthetic scenes need at least one thing class");
  require(spec.corruption >= 0.0 && spec.corruption <= 1.0, "corruption must lie in [0,1]");
  require(spec.feature_dims >= 1, "feature_dims must be >= 1");

  SceneRng rng(spec.seed);
  const GridShape shape{spec.size, spec.size};
  Canvas canvas{shape, std::vector<int>(static_cast<std::size_t>(shape.pixels()), 0)};
  std::vector<int> target_class(static_cast<std::size_t>(spec.n_targets) + 1, 0);

  int placed = 0;
  while (placed < spec.n_targets) {
    const bool pair = spec.touching && spec.n_targets - placed >= 2;
    const int cls = static_cast<int>(rng.integer(1, spec.thing_classes));
    bool ok = false;
    for (int attempt = 0; attempt < spec.max_retries && !ok; ++attempt) {
      if (pair) {
        auto [a, b] = random_pair(rng, shape);
        if (!canvas.fits(a, 0)) continue;
        canvas.paint(a, placed + 1);
        if (!canvas.fits(b, placed + 1)) {
          canvas.paint(a, 0);
          continue;
        }
        canvas.paint(b, placed + 2);
        ok = true;
      } else {
        std::vector<Index> blob = random_blob(rng, shape);
        if (!canvas.fits(blob, 0)) continue;
        canvas.paint(blob, placed + 1);
        ok = true;
      }
    }
    if (!ok)
      throw ValidationError("infeasible packing: could not place target " + std::to_string(placed + 1) + " of " +
                            std::to_string(spec.n_targets) + " after " + std::to_string(spec.max_retries) +
                            " attempts");
    const int count = pair ? 2 : 1;
    for (int k = 1; k <= count; ++k) target_class[static_cast<std::size_t>(placed + k)] = cls;
    placed += count;
  }

  // Colors: index 0 is the background.
  std::vector<Eigen::Vector3d> colors;
  for (int t = 0; t <= spec.n_targets; ++t) colors.push_back(random_color(rng, colors));

  // Orthonormal feature prototypes, one per target plus the background.
  const Index dims = std::max<Index>(spec.feature_dims, spec.n_targets + 1);
  Eigen::MatrixXd gaussian(dims, spec.n_targets + 1);
  for (Index c = 0; c < gaussian.cols(); ++c)
    for (Index r = 0; r < dims; ++r) gaussian(r, c) = rng.gaussian();
  const Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(gaussian).householderQ();
  const Eigen::MatrixXd prototypes = q.leftCols(spec.n_targets + 1);

  SyntheticScene scene;
  scene.image = RgbImage<double>(shape.height, shape.width);
  scene.gt = PanopticMap(shape);
  const Index classes = spec.thing_classes + 1;
  scene.semantic = {shape, PixelMatrix<double>::Zero(shape.pixels(), classes)};
  scene.features = {shape, PixelMatrix<double>(shape.pixels(), dims)};

  // Segment ids: 1 is the background, target t gets id t + 1.
  scene.gt.segments[1] = {0, SegmentKind::stuff};
  for (int t = 1; t <= spec.n_targets; ++t)
    scene.gt.segments[t + 1] = {target_class[static_cast<std::size_t>(t)], SegmentKind::thing};

  for (Index i = 0; i < shape.pixels(); ++i) {
    const int t = canvas.owner[static_cast<std::size_t>(i)];
    const int cls = target_class[static_cast<std::size_t>(t)];
    scene.gt.ids(i) = t + 1;
    scene.image.data.row(i) = colors[static_cast<std::size_t>(t)].transpose();
    scene.features.features.row(i) = prototypes.col(t).transpose();
    scene.semantic.probs(i, cls) = 1.0;
  }

  if (spec.corruption > 0.0) {
    for (Index i = 0; i < shape.pixels(); ++i) {
      Eigen::RowVectorXd r(classes);
      for (Index c = 0; c < classes; ++c) r(c) = -std::log(1.0 - rng.uniform());
      r /= r.sum();
      scene.semantic.probs.row(i) = (1.0 - spec.corruption) * scene.semantic.probs.row(i) + spec.corruption * r;
    }
  }
  return scene;
}

}  // namespace pointpan
