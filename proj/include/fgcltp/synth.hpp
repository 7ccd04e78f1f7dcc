#pragma once

#include "fgcltp/core.hpp"
#include "fgcltp/io.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <variant>
#include <vector>

namespace fgcltp::synth {

class GenerationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Sphere { double radius; };
/// Flat-ended punch.
struct Cylinder { double radius; };
/// Rectangular bar with a rounded cross-section.
struct Edge { double length, width; };
/// Elliptic paraboloid cap, semi-axis a along the indenter's local s axis.
struct Ellipse { double a, b; };
/// `count` parallel bars, each shaped like an Edge, spaced 2.5 widths apart.
struct Ridge { double length, width; int count; };
struct Lobe {
  Vector2d offset;  // mm, indenter-local
  double radius;
  double lift;  // extra clearance, mm
};
/// Union of spherical lobes; lobe 0 sits at the indenter center with zero lift.
struct Irregular { std::array<Lobe, 3> lobes; };

using ShapeParams = std::variant<Sphere, Cylinder, Edge, Ellipse, Ridge, Irregular>;

struct TextureParams {
  Texture kind = Texture::kSmooth;
  double amplitude_mm = 0.15;
  double spacing_mm = 1.5;  // bump spacing or ridge period
};

struct Indenter {
  ShapeParams shape = Sphere{3.0};
  TextureParams texture;
  Vector2d center_uv{0.5, 0.5};
  double rotation_deg = 0.0;
};

Shape shape_label(const ShapeParams& s);

enum class Primitive : std::uint8_t { kPress, kPressSlide, kPressTwist };
std::string_view to_string(Primitive p);
Primitive parse_primitive(std::string_view s);

struct ContactScript {
  Primitive primitive = Primitive::kPress;
  double depth_mm = 1.0;
  double slide_direction_deg = 0.0;
  double slide_distance_mm = 0.0;
  Twist twist_chirality = Twist::kNone;
  double twist_angle_deg = 0.0;
  double approach_tilt_deg = 0.0;  // within the 15 degree approach cone
  double tilt_azimuth_deg = 0.0;
  double noise_sigma_mm = 0.0;
  std::uint64_t seed = 0;

  static ContactScript press(double depth) { return {.depth_mm = depth}; }
  static ContactScript press_slide(double depth, double direction_deg, double distance_mm) {
    return {.primitive = Primitive::kPressSlide,
            .depth_mm = depth,
            .slide_direction_deg = direction_deg,
            .slide_distance_mm = distance_mm};
  }
  static ContactScript press_twist(double depth, Twist chirality, double angle_deg) {
    return {.primitive = Primitive::kPressTwist,
            .depth_mm = depth,
            .twist_chirality = chirality,
            .twist_angle_deg = angle_deg};
  }
};

struct MembraneParams {
  double sigma_mm = 1.0;
  /// Markers whose raw engagement does not exceed this are not counted as in contact.
  double contact_tolerance_mm = 0.1;
  double force_gain_n_per_mm = 1.0;
};

using MarkerMask = Eigen::Array<bool, kNumMarkers, 1>;

struct IndentResult {
  MarkerFrame frame;
  ContactState state;
  MarkerMask contact_mask;      // noiseless pre-kernel contact
  double normal_force_proxy_n;  // metadata only
};

/// Indenter clearance above the undeformed gel at a sensor-plane point (mm); infinity
/// outside the indenter footprint.
double clearance(const Indenter& indenter, const Vector2d& point_mm, const SensorExtent& extent,
                 double tilt_deg = 0.0, double tilt_azimuth_deg = 0.0);

/// Radius of the circle (around the center) containing the indenter footprint.
double footprint_radius(const ShapeParams& shape);

IndentResult indent(const Indenter& indenter, const ContactScript& script, const SensorExtent& extent = {},
                    const MembraneParams& membrane = {});

/// Minimum SVD singular-value ratio for a principal axis to count as defined.
inline constexpr double kDefaultSingularityRatio = 2.0;

std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t sample_seed(std::uint64_t base_seed, std::uint64_t index);

struct Range {
  double lo, hi;
};

struct CorpusConfig {
  std::array<double, 6> shape_weights{1, 1, 1, 1, 1, 1};
  std::array<double, 3> texture_weights{1, 1, 1};
  std::array<double, 3> primitive_weights{1, 1, 1};
  Range depth_mm{0.3, 3.8};
  Range slide_distance_mm{0.2, 2.0};
  Range twist_angle_deg{5.0, 15.0};
  double max_tilt_deg = 15.0;
  double noise_sigma_mm = 0.02;
  double membrane_sigma_mm = 1.0;
  double texture_amplitude_mm = 0.15;
  double texture_spacing_mm = 1.5;
  SensorExtent extent;

  static CorpusConfig from_json(const io::json& j);
  io::json to_json() const;
};

struct Sample {
  std::string id;
  std::uint64_t seed;
  Indenter indenter;
  ContactScript script;
  IndentResult result;

  io::LabelRecord label() const;
};

std::string sample_id(std::size_t index);

Sample generate_sample(const CorpusConfig& config, std::uint64_t base_seed, std::size_t index);

/// Generates n samples in memory; any thread count yields identical output.
std::vector<Sample> generate(const CorpusConfig& config, std::size_t n, std::uint64_t base_seed,
                             unsigned threads = 1);

/// Writes <id>.fgt frames and labels.jsonl under out_dir.
void generate_corpus(const CorpusConfig& config, std::size_t n, std::uint64_t base_seed,
                     const std::filesystem::path& out_dir, unsigned threads = 1);

}  // namespace fgcltp::synth
