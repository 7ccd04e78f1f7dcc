#pragma once

#include "fgcltp/core.hpp"

#include <Eigen/SVD>

#include <limits>
#include <vector>

namespace fgcltp {

template <typename Scalar>
struct PrincipalAxis {
  Scalar angle_deg;         // [0, 180)
  Scalar singularity_ratio; // sigma1 / sigma2, +inf for rank-1 sets
};

/// Dominant in-plane direction of a 2 x n point set: the top left-singular vector of the
/// centered coordinate matrix. Requires n >= 2.
template <typename Derived>
PrincipalAxis<typename Derived::Scalar> principal_axis_svd(const Eigen::MatrixBase<Derived>& points) {
  using Scalar = typename Derived::Scalar;
  using Mat = Eigen::Matrix<Scalar, 2, Eigen::Dynamic>;
  Mat centered = points.derived();
  centered.colwise() -= centered.rowwise().mean();
  Eigen::JacobiSVD<Mat> svd(centered, Eigen::ComputeFullU);
  const auto sv = svd.singularValues();
  const Eigen::Matrix<Scalar, 2, 1> dir = svd.matrixU().col(0);
  Scalar angle = std::atan2(dir.y(), dir.x()) * Scalar(kRadToDeg);
  angle = wrap_angle(angle, Scalar(180));
  // Snap values that round to 180 back to 0.
  if (Scalar(180) - angle < Scalar(1e-9)) angle = Scalar(0);
  const Scalar ratio = sv(1) > Scalar(0) ? sv(0) / sv(1) : std::numeric_limits<Scalar>::infinity();
  return {angle, ratio};
}

/// Gathers the in-plane rest coordinates of the selected markers into a 2 x n matrix.
template <typename Index>
Eigen::Matrix<double, 2, Eigen::Dynamic> plane_points(const MarkerGrid& rest, const std::vector<Index>& idx) {
  Eigen::Matrix<double, 2, Eigen::Dynamic> pts(2, static_cast<Eigen::Index>(idx.size()));
  for (std::size_t k = 0; k < idx.size(); ++k) {
    pts(0, k) = rest(idx[k], 0);
    pts(1, k) = rest(idx[k], 1);
  }
  return pts;
}

}  // namespace fgcltp
