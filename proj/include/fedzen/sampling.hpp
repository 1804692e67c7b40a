#pragma once

/**
 * @file sampling.hpp
 * @brief Search-direction generators.
 *
 * stiefel_sample draws uniformly distributed orthonormal frames as
 * U = X (X^T X)^{-1/2} with X a d x r matrix of i.i.d. standard normals.
 * Each column of U is marginally uniform on the unit sphere. Requests with
 * r > d are served by ceil(r/d) independent frames, concatenated in the order
 * they are drawn, the last one truncated.
 *
 * gaussian_sphere_sample is the usual normalized-Gaussian baseline: r
 * independent uniform unit vectors with no orthogonality.
 */

#include "fedzen/direction_set.hpp"
#include "fedzen/rng.hpp"

#include <Eigen/Eigenvalues>

#include <optional>
#include <stdexcept>

namespace fedzen {

/// Smallest eigenvalue ratio accepted by matrix_inverse_sqrt.
inline constexpr double kInverseSqrtConditionFloor = 1e-12;

/**
 * M^{-1/2} for symmetric positive-definite M, via M = Q L Q^T and
 * Q L^{-1/2} Q^T. Returns nullopt when the smallest eigenvalue is below
 * 1e-12 times the largest.
 */
inline std::optional<Matrix> try_matrix_inverse_sqrt(const Matrix& m) {
  if (m.rows() != m.cols()) throw std::invalid_argument("matrix_inverse_sqrt: matrix not square");
  Eigen::SelfAdjointEigenSolver<Matrix> eig(m);
  if (eig.info() != Eigen::Success) return std::nullopt;
  const Vector& values = eig.eigenvalues();
  const double largest = values.maxCoeff();
  if (!(largest > 0.0) || values.minCoeff() <= kInverseSqrtConditionFloor * largest) {
    return std::nullopt;
  }
  const Matrix& q = eig.eigenvectors();
  Matrix s = q * values.cwiseSqrt().cwiseInverse().asDiagonal() * q.transpose();
  return Matrix(0.5 * (s + s.transpose()));
}

inline Matrix matrix_inverse_sqrt(const Matrix& m) {
  auto s = try_matrix_inverse_sqrt(m);
  if (!s) throw std::domain_error("matrix_inverse_sqrt: matrix is not safely positive definite");
  return *std::move(s);
}

namespace detail {

inline Matrix gaussian_matrix(Index rows, Index cols, RngStream& rng) {
  Matrix x(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) x(i, j) = rng.normal();
  return x;
}

/**
 * One uniform frame with `cols <= rows` orthonormal columns. X^T X squares
 * the condition number of X, so the product is refined with Newton-Schulz
 * steps U <- U (3I - U^T U) / 2, which converge quadratically to the same
 * polar factor.
 */
inline Matrix stiefel_frame(Index rows, Index cols, RngStream& rng) {
  for (;;) {
    Matrix x = gaussian_matrix(rows, cols, rng);
    auto s = try_matrix_inverse_sqrt(x.transpose() * x);
    if (!s) continue;
    Matrix u = x * *s;
    const Matrix eye = Matrix::Identity(cols, cols);
    for (int it = 0; it < 3; ++it) {
      const Matrix gram = u.transpose() * u;
      if ((gram - eye).cwiseAbs().maxCoeff() <= 1e-15) break;
      u = u * (1.5 * eye - 0.5 * gram);
    }
    return u;
  }
}

inline void check_sizes(Index d, Index r, const char* what) {
  if (d < 1 || r < 1) throw std::invalid_argument(std::string(what) + ": d and r must be positive");
}

}  // namespace detail

inline DirectionSet stiefel_sample(Index d, Index r, RngStream& rng) {
  detail::check_sizes(d, r, "stiefel_sample");
  DirectionSet out;
  out.seed = rng.seed();
  out.stream_position = rng.position();
  out.columns.resize(d, r);
  Index filled = 0;
  while (filled < r) {
    const Index cols = std::min(d, r - filled);
    out.columns.middleCols(filled, cols) = detail::stiefel_frame(d, cols, rng);
    filled += cols;
  }
  out.orthonormal = r <= d;
  out.frame_size = std::min(d, r);
  return out;
}

inline DirectionSet gaussian_sphere_sample(Index d, Index r, RngStream& rng) {
  detail::check_sizes(d, r, "gaussian_sphere_sample");
  DirectionSet out;
  out.seed = rng.seed();
  out.stream_position = rng.position();
  out.columns.resize(d, r);
  for (Index j = 0; j < r; ++j) {
    Vector v(d);
    double norm = 0.0;
    while (norm == 0.0) {
      for (Index i = 0; i < d; ++i) v(i) = rng.normal();
      norm = v.norm();
    }
    out.columns.col(j) = v / norm;
  }
  out.orthonormal = false;
  out.frame_size = 1;
  return out;
}

/// Ordered canonical basis e_1..e_d as a single orthonormal frame.
inline DirectionSet canonical_basis(Index d) {
  DirectionSet out;
  out.columns = Matrix::Identity(d, d);
  out.orthonormal = true;
  out.frame_size = d;
  return out;
}

/// Wraps explicit columns; they must be unit-norm. Orthonormality is
/// detected numerically with tolerance 1e-10.
inline DirectionSet make_directions(const Matrix& columns) {
  DirectionSet out;
  out.columns = columns;
  for (Index j = 0; j < columns.cols(); ++j) require_unit(columns.col(j), "make_directions");
  const Index r = columns.cols();
  const Matrix gram = columns.transpose() * columns;
  const bool ortho = r <= columns.rows() &&
                     (gram - Matrix::Identity(r, r)).cwiseAbs().maxCoeff() <= 1e-10;
  out.orthonormal = ortho;
  out.frame_size = ortho ? r : 1;
  return out;
}

}  // namespace fedzen
