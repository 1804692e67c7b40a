#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace fedzen {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

/// Tolerance on the Euclidean norm of a search direction.
inline constexpr double kUnitNormTol = 1e-10;

/**
 * Ordered search directions, stored as the columns of a d x r matrix.
 *
 * Directions are grouped into consecutive frames of `frame_size` columns
 * (the last frame may be shorter). Columns inside one frame are orthonormal
 * when `frame_size > 1`. `orthonormal` is true iff the whole set is a single
 * orthonormal frame.
 */
struct DirectionSet {
  Matrix columns;
  bool orthonormal = false;
  Index frame_size = 1;
  std::uint64_t seed = 0;
  std::uint64_t stream_position = 0;

  Index dim() const { return columns.rows(); }
  Index count() const { return columns.cols(); }
  auto direction(Index j) const { return columns.col(j); }

  /// True iff the first `n` directions are known to be orthonormal.
  bool leading_orthonormal(Index n) const {
    if (n > count()) return false;
    return orthonormal || n <= frame_size;
  }

  /// First `n` directions; keeps orthonormality of the leading frame.
  DirectionSet head(Index n) const {
    DirectionSet out;
    out.columns = columns.leftCols(n);
    out.frame_size = std::min(frame_size, n);
    out.orthonormal = leading_orthonormal(n);
    out.seed = seed;
    out.stream_position = stream_position;
    return out;
  }
};

/// Appends `tail` after `front`. Frame structure is kept only when both
/// pieces use the same frame size and `front` ends on a frame boundary.
inline DirectionSet concat(const DirectionSet& front, const DirectionSet& tail) {
  if (front.count() == 0) return tail;
  if (tail.count() == 0) return front;
  if (front.dim() != tail.dim()) {
    throw std::invalid_argument("concat: direction sets differ in dimension");
  }
  DirectionSet out;
  out.columns.resize(front.dim(), front.count() + tail.count());
  out.columns << front.columns, tail.columns;
  out.seed = front.seed;
  out.stream_position = front.stream_position;
  out.orthonormal = false;
  const bool aligned = front.frame_size == tail.frame_size &&
                       front.count() % front.frame_size == 0;
  out.frame_size = aligned ? front.frame_size : std::min(front.frame_size, front.count());
  return out;
}

inline void require_unit(const Eigen::Ref<const Vector>& u, const char* what) {
  if (std::abs(u.norm() - 1.0) > kUnitNormTol) {
    throw std::invalid_argument(std::string(what) + ": direction is not unit-norm");
  }
}

}  // namespace fedzen
