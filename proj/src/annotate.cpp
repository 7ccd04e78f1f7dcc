#include "fgcltp/annotate.hpp"

#include "fgcltp/geometry.hpp"

#include <cmath>

namespace fgcltp::annotate {

void AnnotatorConfig::validate() const {
  if (!(contact_threshold_mm > 0 && twist_amplitude_min_rad > 0 && slide_magnitude_min_mm > 0)) {
    throw std::invalid_argument("annotator thresholds must be positive");
  }
  if (!(svd_singularity_ratio_min >= 1)) throw std::invalid_argument("svd_singularity_ratio_min must be >= 1");
  if (twist_min_radius_mm < 0) throw std::invalid_argument("twist_min_radius_mm must be non-negative");
}

AnnotatorConfig AnnotatorConfig::from_json(const io::json& j) {
  AnnotatorConfig c;
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& k = it.key();
    const double v = it.value().get<double>();
    if (k == "contact_threshold_mm") c.contact_threshold_mm = v;
    else if (k == "svd_singularity_ratio_min") c.svd_singularity_ratio_min = v;
    else if (k == "twist_amplitude_min_rad") c.twist_amplitude_min_rad = v;
    else if (k == "slide_magnitude_min_mm") c.slide_magnitude_min_mm = v;
    else if (k == "twist_min_radius_mm") c.twist_min_radius_mm = v;
    else throw std::invalid_argument("unknown key '" + k + "'");
  }
  c.validate();
  return c;
}

io::json AnnotatorConfig::to_json() const {
  return {{"contact_threshold_mm", contact_threshold_mm},
          {"svd_singularity_ratio_min", svd_singularity_ratio_min},
          {"twist_amplitude_min_rad", twist_amplitude_min_rad},
          {"slide_magnitude_min_mm", slide_magnitude_min_mm},
          {"twist_min_radius_mm", twist_min_radius_mm}};
}

double estimate_depth(const DeformationField& field) {
  return std::max(0.0, field.normal().cwiseAbs().maxCoeff());
}

Region extract_contact_region(const DeformationField& field, const AnnotatorConfig& config) {
  Region region;
  for (int i = 0; i < kNumMarkers; ++i) {
    if (std::abs(field.displacement(i, 2)) > config.contact_threshold_mm) region.push_back(i);
  }
  return region;
}

CentroidArea estimate_centroid_area(const Region& region, const MarkerFrame& frame) {
  CentroidArea out;
  out.area_fraction = static_cast<double>(region.size()) / kNumMarkers;
  if (region.empty()) return out;
  const Vector2d mean = plane_points(frame.rest, region).rowwise().mean();
  out.centroid = Vector2d(mean.x() / frame.extent.width_mm, mean.y() / frame.extent.height_mm);
  return out;
}

std::optional<double> estimate_principal_axis(const Region& region, const MarkerFrame& frame,
                                              const AnnotatorConfig& config) {
  if (region.size() < 3) return std::nullopt;
  const auto axis = principal_axis_svd(plane_points(frame.rest, region));
  if (!(axis.singularity_ratio >= config.svd_singularity_ratio_min)) return std::nullopt;
  return axis.angle_deg;
}

std::optional<double> estimate_slide(const Region& region, const DeformationField& field,
                                     const AnnotatorConfig& config) {
  if (region.empty()) return std::nullopt;
  Vector2d mean = Vector2d::Zero();
  for (int i : region) mean += field.displacement.row(i).head<2>().transpose();
  mean /= static_cast<double>(region.size());
  if (mean.norm() < config.slide_magnitude_min_mm) return std::nullopt;
  return wrap_angle(std::atan2(mean.y(), mean.x()) * kRadToDeg, 360.0);
}

std::optional<double> mean_rotation_rad(const Region& region, const DeformationField& field, const MarkerFrame& frame,
                                        const AnnotatorConfig& config) {
  if (region.empty()) return std::nullopt;
  Vector2d centroid = Vector2d::Zero(), mean_shift = Vector2d::Zero();
  for (int i : region) {
    centroid += frame.rest.row(i).head<2>().transpose();
    mean_shift += field.displacement.row(i).head<2>().transpose();
  }
  centroid /= static_cast<double>(region.size());
  mean_shift /= static_cast<double>(region.size());

  double total = 0.0;
  int counted = 0;
  for (int i : region) {
    const Vector2d r = frame.rest.row(i).head<2>().transpose() - centroid;
    if (r.norm() < config.twist_min_radius_mm) continue;
    const Vector2d moved = r + field.displacement.row(i).head<2>().transpose() - mean_shift;
    const double cross = r.x() * moved.y() - r.y() * moved.x();
    total += std::atan2(cross, r.dot(moved));
    ++counted;
  }
  if (counted == 0) return 0.0;
  return total / counted;
}

std::optional<Twist> estimate_twist(const Region& region, const DeformationField& field, const MarkerFrame& frame,
                                    const AnnotatorConfig& config) {
  const auto rot = mean_rotation_rad(region, field, frame, config);
  if (!rot) return std::nullopt;
  if (std::abs(*rot) < config.twist_amplitude_min_rad) return Twist::kNone;
  return *rot > 0 ? Twist::kCounterclockwise : Twist::kClockwise;
}

ContactState annotate(const MarkerFrame& frame, const AnnotatorConfig& config, const ContactState* labels) {
  const DeformationField field = deformation_field(frame);
  const Region region = extract_contact_region(field, config);
  const CentroidArea ca = estimate_centroid_area(region, frame);

  ContactState s;
  s.depth_mm = region.empty() ? 0.0 : estimate_depth(field);
  s.centroid = ca.centroid;
  s.area_fraction = ca.area_fraction;
  s.principal_axis_deg = estimate_principal_axis(region, frame, config);
  s.slide_deg = estimate_slide(region, field, config);
  s.twist = region.empty() ? std::optional<Twist>(Twist::kNone) : estimate_twist(region, field, frame, config);
  if (labels) {
    s.shape = labels->shape;
    s.texture = labels->texture;
  }
  return s;
}

}  // namespace fgcltp::annotate
