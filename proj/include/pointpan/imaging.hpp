#pragma once

#include "pointpan/core.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace pointpan {

/// sRGB image, channel values in [0, 1].
template <typename Scalar>
struct RgbImage {
  GridShape shape;
  PixelMatrix<Scalar, 3> data;

  RgbImage() = default;
  RgbImage(Index height, Index width)
      : shape{height, width}, data(PixelMatrix<Scalar, 3>::Zero(height * width, 3)) {}
};

/// CIE-LAB image (D65), L in [0, 100].
template <typename Scalar>
struct LabImage {
  GridShape shape;
  PixelMatrix<Scalar, 3> data;
};

/// Normalized edge strength in [0, 1] per pixel.
template <typename Scalar>
struct BoundaryMap {
  GridShape shape;
  PixelVector<Scalar> data;
};

struct Offset {
  Index dy = 0;
  Index dx = 0;
  friend bool operator==(const Offset&, const Offset&) = default;
};

struct AffinityEdge {
  Index i = 0;
  Index j = 0;
  bool similar = false;
};

/// Candidate pairs of the dilated neighborhood. Each unordered pair is stored
/// in both directions, matching the double sum over pixels and neighbors.
struct AffinityGraph {
  GridShape shape;
  std::vector<Offset> offsets;
  std::vector<AffinityEdge> edges;

  Index active_edges() const {
    return static_cast<Index>(
        std::count_if(edges.begin(), edges.end(), [](const AffinityEdge& e) { return e.similar; }));
  }
};

template <typename Scalar>
void check_rgb(const RgbImage<Scalar>& img) {
  require(img.shape.height >= 1 && img.shape.width >= 1, "image must be at least 1x1");
  require(img.data.rows() == img.shape.pixels(), "image data does not match its shape");
  for (Index i = 0; i < img.data.rows(); ++i)
    for (Index c = 0; c < 3; ++c) {
      const Scalar v = img.data(i, c);
      require(std::isfinite(static_cast<double>(v)) && v >= Scalar(0) && v <= Scalar(1),
              "rgb value outside [0,1] at pixel " + std::to_string(i));
    }
}

namespace detail {

template <typename Scalar>
Scalar srgb_to_linear(Scalar c) {
  return c <= Scalar(0.04045) ? c / Scalar(12.92) : std::pow((c + Scalar(0.055)) / Scalar(1.055), Scalar(2.4));
}

template <typename Scalar>
Scalar lab_f(Scalar t) {
  constexpr double delta = 6.0 / 29.0;
  if (t > Scalar(delta * delta * delta)) return std::cbrt(t);
  return t / Scalar(3.0 * delta * delta) + Scalar(4.0 / 29.0);
}

}  // namespace detail

/// sRGB (D65) to CIE-LAB. The reference white is the row sum of the
/// linear-RGB to XYZ matrix, so (1,1,1) maps to exactly (100, 0, 0).
template <typename Scalar>
LabImage<Scalar> rgb_to_lab(const RgbImage<Scalar>& img) {
  check_rgb(img);
  Eigen::Matrix<Scalar, 3, 3> to_xyz;
  to_xyz << Scalar(0.4124564), Scalar(0.3575761), Scalar(0.1804375),
            Scalar(0.2126729), Scalar(0.7151522), Scalar(0.0721750),
            Scalar(0.0193339), Scalar(0.1191920), Scalar(0.9503041);
  const Eigen::Matrix<Scalar, 3, 1> white = to_xyz.rowwise().sum();

  LabImage<Scalar> lab{img.shape, PixelMatrix<Scalar, 3>(img.data.rows(), 3)};
  for (Index i = 0; i < img.data.rows(); ++i) {
    Eigen::Matrix<Scalar, 3, 1> linear;
    for (Index c = 0; c < 3; ++c) linear(c) = detail::srgb_to_linear(img.data(i, c));
    const Eigen::Matrix<Scalar, 3, 1> xyz = (to_xyz * linear).cwiseQuotient(white);
    const Scalar fx = detail::lab_f(xyz(0));
    const Scalar fy = detail::lab_f(xyz(1));
    const Scalar fz = detail::lab_f(xyz(2));
    lab.data(i, 0) = Scalar(116) * fy - Scalar(16);
    lab.data(i, 1) = Scalar(500) * (fx - fy);
    lab.data(i, 2) = Scalar(200) * (fy - fz);
  }
  return lab;
}

/// Sobel magnitude over all three LAB channels (replicate padding), divided
/// by the image maximum. A constant image yields all zeros.
template <typename Scalar>
BoundaryMap<Scalar> sobel_boundary(const LabImage<Scalar>& lab) {
  const GridShape s = lab.shape;
  require(lab.data.rows() == s.pixels(), "lab data does not match its shape");
  BoundaryMap<Scalar> out{s, PixelVector<Scalar>::Zero(s.pixels())};

  auto at = [&](Index y, Index x, Index c) {
    y = std::clamp<Index>(y, 0, s.height - 1);
    x = std::clamp<Index>(x, 0, s.width - 1);
    return lab.data(s.index(y, x), c);
  };

  for (Index y = 0; y < s.height; ++y) {
    for (Index x = 0; x < s.width; ++x) {
      Scalar sq = 0;
      for (Index c = 0; c < 3; ++c) {
        const Scalar gx = (at(y - 1, x + 1, c) + 2 * at(y, x + 1, c) + at(y + 1, x + 1, c)) -
                          (at(y - 1, x - 1, c) + 2 * at(y, x - 1, c) + at(y + 1, x - 1, c));
        const Scalar gy = (at(y + 1, x - 1, c) + 2 * at(y + 1, x, c) + at(y + 1, x + 1, c)) -
                          (at(y - 1, x - 1, c) + 2 * at(y - 1, x, c) + at(y - 1, x + 1, c));
        sq += gx * gx + gy * gy;
      }
      out.data(s.index(y, x)) = std::sqrt(sq);
    }
  }
  const Scalar peak = out.data.maxCoeff();
  if (peak > Scalar(0))
    out.data /= peak;
  else
    out.data.setZero();
  return out;
}

/// Offsets of a kernel x kernel lattice with the given dilation, center excluded.
inline std::vector<Offset> dilated_offsets(int kernel, int dilation) {
  require(kernel >= 3 && kernel % 2 == 1, "affinity kernel must be odd and >= 3");
  require(dilation >= 1, "affinity dilation must be >= 1");
  const int r = (kernel - 1) / 2;
  std::vector<Offset> offsets;
  for (int a = -r; a <= r; ++a)
    for (int b = -r; b <= r; ++b)
      if (a != 0 || b != 0) offsets.push_back({Index(a) * dilation, Index(b) * dilation});
  return offsets;
}

/// Color-prior affinity: pair (i, j) is similar when exp(-|lab_i - lab_j| / theta)
/// reaches the threshold. Neighborhoods are clipped at the image border.
template <typename Scalar>
AffinityGraph build_affinity(const LabImage<Scalar>& lab, int kernel, int dilation, double threshold,
                             double theta) {
  require(threshold > 0.0 && threshold < 1.0, "affinity threshold must lie in (0,1)");
  require(theta > 0.0, "affinity theta must be positive");
  const GridShape s = lab.shape;
  AffinityGraph g{s, dilated_offsets(kernel, dilation), {}};
  g.edges.reserve(static_cast<std::size_t>(s.pixels()) * g.offsets.size());
  for (Index y = 0; y < s.height; ++y)
    for (Index x = 0; x < s.width; ++x) {
      const Index i = s.index(y, x);
      for (const Offset& o : g.offsets) {
        if (!s.contains(y + o.dy, x + o.dx)) continue;
        const Index j = s.index(y + o.dy, x + o.dx);
        const double dist = static_cast<double>((lab.data.row(i) - lab.data.row(j)).norm());
        g.edges.push_back({i, j, std::exp(-dist / theta) >= threshold});
      }
    }
  return g;
}

}  // namespace pointpan
