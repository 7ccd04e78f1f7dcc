#pragma once

#include "fgcltp/core.hpp"
#include "fgcltp/io.hpp"

#include <optional>
#include <vector>

namespace fgcltp::annotate {

struct AnnotatorConfig {
  double contact_threshold_mm = 0.1;
  double svd_singularity_ratio_min = 2.0;
  double twist_amplitude_min_rad = 0.02;
  double slide_magnitude_min_mm = 0.05;
  /// Markers closer than this to the centroid carry no usable angular increment.
  double twist_min_radius_mm = 0.5;

  void validate() const;
  static AnnotatorConfig from_json(const io::json& j);
  io::json to_json() const;
};

using Region = std::vector<int>;

double estimate_depth(const DeformationField& field);

Region extract_contact_region(const DeformationField& field, const AnnotatorConfig& config = {});

struct CentroidArea {
  std::optional<Vector2d> centroid;  // normalized
  double area_fraction = 0.0;
};

CentroidArea estimate_centroid_area(const Region& region, const MarkerFrame& frame);

/// Principal axis in [0, 180), or nullopt when the region has fewer than three markers
/// or fails the singularity-ratio gate.
std::optional<double> estimate_principal_axis(const Region& region, const MarkerFrame& frame,
                                              const AnnotatorConfig& config = {});

/// Mean tangential displacement direction in [0, 360); +x is 0, +y is 90.
std::optional<double> estimate_slide(const Region& region, const DeformationField& field,
                                     const AnnotatorConfig& config = {});

/// Mean angular increment (radians, counterclockwise positive) of the region markers about
/// the region centroid after removing the mean tangential displacement.
std::optional<double> mean_rotation_rad(const Region& region, const DeformationField& field, const MarkerFrame& frame,
                                        const AnnotatorConfig& config = {});

std::optional<Twist> estimate_twist(const Region& region, const DeformationField& field, const MarkerFrame& frame,
                                    const AnnotatorConfig& config = {});

/// Analytic contact state from a frame. Shape and texture come from `labels` when given.
ContactState annotate(const MarkerFrame& frame, const AnnotatorConfig& config = {},
                      const ContactState* labels = nullptr);

}  // namespace fgcltp::annotate
