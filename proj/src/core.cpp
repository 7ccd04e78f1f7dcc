#include "fgcltp/core.hpp"

#include <cmath>

namespace fgcltp {

MarkerGrid rest_grid(const SensorExtent& extent) {
  MarkerGrid grid;
  const Vector2d step = grid_spacing(extent);
  for (int r = 0; r < kGridSide; ++r) {
    for (int c = 0; c < kGridSide; ++c) {
      grid.row(r * kGridSide + c) << c * step.x(), r * step.y(), 0.0;
    }
  }
  return grid;
}

Vector2d grid_spacing(const SensorExtent& extent) {
  return {extent.width_mm / (kGridSide - 1), extent.height_mm / (kGridSide - 1)};
}

MarkerFrame MarkerFrame::at_rest(const SensorExtent& extent) {
  MarkerFrame f;
  f.extent = extent;
  f.rest = rest_grid(extent);
  f.deformed = f.rest;
  return f;
}

void MarkerFrame::validate() const {
  if (!(extent.width_mm > 0 && extent.height_mm > 0 && extent.gel_depth_mm > 0)) {
    throw StructuralError("sensor extent must be positive");
  }
  if (!rest.allFinite() || !deformed.allFinite()) {
    throw StructuralError("marker coordinates must be finite");
  }
  const MarkerGrid expected = rest_grid(extent);
  if ((rest - expected).cwiseAbs().maxCoeff() > 1e-4) {
    throw StructuralError("rest markers do not form the regular sensor grid");
  }
}

DeformationField deformation_field(const MarkerFrame& frame) {
  return {frame.deformed - frame.rest};
}

std::string_view to_string(Twist t) {
  switch (t) {
    case Twist::kClockwise: return "clockwise";
    case Twist::kCounterclockwise: return "counterclockwise";
    case Twist::kNone: return "none";
  }
  return "none";
}

std::string_view to_string(Shape s) {
  switch (s) {
    case Shape::kSphere: return "sphere";
    case Shape::kCylinder: return "cylinder";
    case Shape::kEdge: return "edge";
    case Shape::kEllipse: return "ellipse";
    case Shape::kRidge: return "ridge";
    case Shape::kIrregular: return "irregular";
  }
  return "irregular";
}

std::string_view to_string(Texture t) {
  switch (t) {
    case Texture::kSmooth: return "smooth";
    case Texture::kBumpy: return "bumpy";
    case Texture::kRidged: return "ridged";
  }
  return "smooth";
}

Twist parse_twist(std::string_view s) {
  if (s == "clockwise") return Twist::kClockwise;
  if (s == "counterclockwise") return Twist::kCounterclockwise;
  if (s == "none") return Twist::kNone;
  throw std::invalid_argument("unknown twist label: " + std::string(s));
}

Shape parse_shape(std::string_view s) {
  for (Shape shape : kAllShapes) {
    if (to_string(shape) == s) return shape;
  }
  throw std::invalid_argument("unknown shape label: " + std::string(s));
}

Texture parse_texture(std::string_view s) {
  for (Texture t : kAllTextures) {
    if (to_string(t) == s) return t;
  }
  throw std::invalid_argument("unknown texture label: " + std::string(s));
}

namespace {

double clamp_unit(double v) { return std::clamp(v, -1.0, 1.0); }

}  // namespace

NormalizedSample normalize(const MarkerFrame& frame, const ContactState& state) {
  const SensorExtent& ext = frame.extent;
  const double gel = ext.gel_depth_mm;
  NormalizedSample out;

  const DeformationField field = deformation_field(frame);
  for (int i = 0; i < kNumMarkers; ++i) {
    out.points(i, 0) = clamp_unit(to_unit_range(frame.rest(i, 0), 0.0, ext.width_mm));
    out.points(i, 1) = clamp_unit(to_unit_range(frame.rest(i, 1), 0.0, ext.height_mm));
    out.points(i, 2) = clamp_unit(frame.rest(i, 2) / gel);
    for (int k = 0; k < 3; ++k) out.points(i, 3 + k) = clamp_unit(field.displacement(i, k) / gel);
  }

  out.targets.setZero();
  out.target_mask.setZero();
  if (state.depth_valid) {
    out.targets(0) = to_unit_range(std::clamp(state.depth_mm, 0.0, gel), 0.0, gel);
    out.target_mask(0) = 1;
  }
  if (state.centroid) {
    out.targets(1) = to_unit_range(state.centroid->x(), 0.0, 1.0);
    out.targets(2) = to_unit_range(state.centroid->y(), 0.0, 1.0);
    out.target_mask(1) = out.target_mask(2) = 1;
  }
  out.targets(3) = to_unit_range(std::clamp(state.area_fraction, 0.0, 1.0), 0.0, 1.0);
  out.target_mask(3) = 1;
  if (state.principal_axis_deg) {
    const double a = 2.0 * *state.principal_axis_deg * kDegToRad;
    out.targets(4) = std::sin(a);
    out.targets(5) = std::cos(a);
    out.target_mask(4) = out.target_mask(5) = 1;
  }
  if (state.slide_deg) {
    const double a = *state.slide_deg * kDegToRad;
    out.targets(6) = std::sin(a);
    out.targets(7) = std::cos(a);
    out.target_mask(6) = out.target_mask(7) = 1;
  }
  return out;
}

RawTargets denormalize(const TargetVector& t, const TargetMask& mask, const SensorExtent& extent) {
  RawTargets raw;
  if (mask(0) > 0) raw.depth_mm = from_unit_range(t(0), 0.0, extent.gel_depth_mm);
  if (mask(1) > 0 && mask(2) > 0) {
    raw.centroid = Vector2d(from_unit_range(t(1), 0.0, 1.0), from_unit_range(t(2), 0.0, 1.0));
  }
  if (mask(3) > 0) raw.area_fraction = from_unit_range(t(3), 0.0, 1.0);
  if (mask(4) > 0 && mask(5) > 0) {
    raw.principal_axis_deg = wrap_angle(0.5 * std::atan2(t(4), t(5)) * kRadToDeg, 180.0);
  }
  if (mask(6) > 0 && mask(7) > 0) {
    raw.slide_deg = wrap_angle(std::atan2(t(6), t(7)) * kRadToDeg, 360.0);
  }
  return raw;
}

}  // namespace fgcltp
