#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>

namespace pointpan {

using Index = Eigen::Index;

/// Row-major pixel-by-channel storage: one row per pixel (y * width + x).
template <typename Scalar, int Channels = Eigen::Dynamic>
using PixelMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Channels, Eigen::RowMajor>;

template <typename Scalar>
using PixelVector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using PixelMask = Eigen::Array<bool, Eigen::Dynamic, 1>;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad arguments, broken invariants, malformed inputs. CLI exit code 2.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Unreadable or unwritable files. CLI exit code 3.
class IoError : public Error {
 public:
  using Error::Error;
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw ValidationError(msg);
}

struct GridShape {
  Index height = 0;
  Index width = 0;

  Index pixels() const { return height * width; }
  Index index(Index y, Index x) const { return y * width + x; }
  Index row(Index i) const { return i / width; }
  Index col(Index i) const { return i % width; }
  bool contains(Index y, Index x) const { return y >= 0 && y < height && x >= 0 && x < width; }
  friend bool operator==(const GridShape&, const GridShape&) = default;
};

/// Pairwise (tree) summation in a fixed order, independent of thread count.
inline double pairwise_sum(std::span<const double> v) {
  if (v.size() <= 8) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
  }
  const std::size_t half = v.size() / 2;
  return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

}  // namespace pointpan
