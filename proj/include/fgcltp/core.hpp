#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace fgcltp {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using Vector2d = Eigen::Vector2d;
using Vector3d = Eigen::Vector3d;

inline constexpr int kGridSide = 23;
inline constexpr int kNumMarkers = kGridSide * kGridSide;  // 529
inline constexpr int kPointFeatures = 6;
inline constexpr int kTargetChannels = 8;

/// One marker per row, columns are (x, y, z) in sensor-local millimeters.
using MarkerGrid = Eigen::Matrix<double, kNumMarkers, 3, Eigen::RowMajor>;

class StructuralError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SensorExtent {
  double width_mm = 20.0;
  double height_mm = 20.0;
  double gel_depth_mm = 4.0;

  bool operator==(const SensorExtent&) const = default;
};

/// Rest grid for the given extent: row-major over (row = y index, col = x index).
MarkerGrid rest_grid(const SensorExtent& extent);

/// Grid spacing along x and y.
Vector2d grid_spacing(const SensorExtent& extent);

/// Rest and deformed marker positions, index-aligned.
struct MarkerFrame {
  MarkerGrid rest;
  MarkerGrid deformed;
  SensorExtent extent;

  static MarkerFrame at_rest(const SensorExtent& extent = {});

  /// Throws StructuralError if the frame violates the grid invariants.
  void validate() const;
};

/// Per-marker displacement; column 2 is the normal component.
struct DeformationField {
  MarkerGrid displacement;

  auto normal() const { return displacement.col(2); }
  auto tangential() const { return displacement.leftCols<2>(); }
};

DeformationField deformation_field(const MarkerFrame& frame);

enum class Twist : std::uint8_t { kClockwise, kCounterclockwise, kNone };
enum class Shape : std::uint8_t { kSphere, kCylinder, kEdge, kEllipse, kRidge, kIrregular };
enum class Texture : std::uint8_t { kSmooth, kBumpy, kRidged };

inline constexpr std::array<Shape, 6> kAllShapes = {Shape::kSphere,  Shape::kCylinder, Shape::kEdge,
                                                    Shape::kEllipse, Shape::kRidge,    Shape::kIrregular};
inline constexpr std::array<Texture, 3> kAllTextures = {Texture::kSmooth, Texture::kBumpy, Texture::kRidged};

std::string_view to_string(Twist t);
std::string_view to_string(Shape s);
std::string_view to_string(Texture t);
Twist parse_twist(std::string_view s);
Shape parse_shape(std::string_view s);
Texture parse_texture(std::string_view s);

/// Annotated physical contact state. Unset optionals are INVALID attributes.
struct ContactState {
  double depth_mm = 0.0;
  std::optional<Vector2d> centroid;  // normalized (u, v)
  double area_fraction = 0.0;
  std::optional<double> principal_axis_deg;  // [0, 180)
  std::optional<double> slide_deg;           // [0, 360)
  std::optional<Twist> twist;
  Shape shape = Shape::kIrregular;
  Texture texture = Texture::kSmooth;
  bool depth_valid = true;

  bool operator==(const ContactState&) const = default;
};

using PointFeatures = Eigen::Matrix<double, kNumMarkers, kPointFeatures, Eigen::RowMajor>;
using TargetVector = Eigen::Matrix<double, kTargetChannels, 1>;
using TargetMask = Eigen::Matrix<double, kTargetChannels, 1>;

/// Encoder-ready sample. Target channels:
/// [depth, u, v, area, sin(2*principal), cos(2*principal), sin(slide), cos(slide)].
struct NormalizedSample {
  PointFeatures points;
  TargetVector targets;
  TargetMask target_mask;  // 1 valid, 0 masked
};

NormalizedSample normalize(const MarkerFrame& frame, const ContactState& state);

/// Raw attribute values recovered from a normalized target vector (inverse affine map).
struct RawTargets {
  double depth_mm = 0.0;
  std::optional<Vector2d> centroid;
  double area_fraction = 0.0;
  std::optional<double> principal_axis_deg;
  std::optional<double> slide_deg;
};

RawTargets denormalize(const TargetVector& targets, const TargetMask& mask, const SensorExtent& extent);

/// Affine map of [lo, hi] onto [-1, 1] and back.
template <typename Scalar>
constexpr Scalar to_unit_range(Scalar v, Scalar lo, Scalar hi) {
  return Scalar(2) * (v - lo) / (hi - lo) - Scalar(1);
}
template <typename Scalar>
constexpr Scalar from_unit_range(Scalar v, Scalar lo, Scalar hi) {
  return lo + (v + Scalar(1)) * Scalar(0.5) * (hi - lo);
}

/// Wraps an angle into [0, period).
template <typename Scalar>
Scalar wrap_angle(Scalar deg, Scalar period) {
  Scalar r = std::fmod(deg, period);
  if (r < Scalar(0)) r += period;
  if (r >= period) r -= period;
  return r;
}

/// Smallest absolute difference between two angles of the given period.
template <typename Scalar>
Scalar angular_distance(Scalar a, Scalar b, Scalar period) {
  Scalar d = wrap_angle(a - b, period);
  return std::min(d, period - d);
}

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kDegToRad = kPi / 180.0;
inline constexpr double kRadToDeg = 180.0 / kPi;

}  // namespace fgcltp
