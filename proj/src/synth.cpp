#include "fgcltp/synth.hpp"

#include "fgcltp/geometry.hpp"

#include <Eigen/Geometry>

#include <cmath>
#include <limits>
#include <random>
#include <thread>

namespace fgcltp::synth {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kEdgeProfileMm = 0.6;
constexpr double kRidgeProfileMm = 0.4;
constexpr double kEllipseProfileMm = 2.0;
constexpr double kRidgeSpacingWidths = 2.5;

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};

double bar_clearance(double s, double t, double length, double width, double profile) {
  if (std::abs(s) > 0.5 * length || std::abs(t) > 0.5 * width) return kInf;
  const double q = 2.0 * t / width;
  return profile * q * q;
}

double sphere_clearance(double rho2, double r) {
  if (rho2 > r * r) return kInf;
  return r - std::sqrt(r * r - rho2);
}

double ridge_offset(int k, int count) { return (k - (count - 1) / 2) * 1.0; }

double shape_clearance(const ShapeParams& shape, double s, double t) {
  return std::visit(
      Overloaded{
          [&](const Sphere& p) { return sphere_clearance(s * s + t * t, p.radius); },
          [&](const Cylinder& p) { return s * s + t * t <= p.radius * p.radius ? 0.0 : kInf; },
          [&](const Edge& p) { return bar_clearance(s, t, p.length, p.width, kEdgeProfileMm); },
          [&](const Ellipse& p) {
            const double q = (s / p.a) * (s / p.a) + (t / p.b) * (t / p.b);
            return q <= 1.0 ? kEllipseProfileMm * q : kInf;
          },
          [&](const Ridge& p) {
            double best = kInf;
            const double spacing = kRidgeSpacingWidths * p.width;
            for (int k = 0; k < p.count; ++k) {
              const double tk = ridge_offset(k, p.count) * spacing;
              best = std::min(best, bar_clearance(s, t - tk, p.length, p.width, kRidgeProfileMm));
            }
            return best;
          },
          [&](const Irregular& p) {
            double best = kInf;
            for (const Lobe& l : p.lobes) {
              const double ds = s - l.offset.x(), dt = t - l.offset.y();
              best = std::min(best, l.lift + sphere_clearance(ds * ds + dt * dt, l.radius));
            }
            return best;
          },
      },
      shape);
}

double texture_clearance(const TextureParams& tex, double s, double t) {
  const double w = 2.0 * kPi / tex.spacing_mm;
  switch (tex.kind) {
    case Texture::kSmooth: return 0.0;
    case Texture::kBumpy: return tex.amplitude_mm * 0.25 * (2.0 - std::cos(w * s) - std::cos(w * t));
    case Texture::kRidged: return tex.amplitude_mm * 0.5 * (1.0 - std::cos(w * s));
  }
  return 0.0;
}

/// Separable Gaussian blur over the marker grid, renormalized at the borders.
Eigen::Matrix<double, kNumMarkers, 1> membrane_blur(const Eigen::Matrix<double, kNumMarkers, 1>& v,
                                                    double sigma_mm, const Vector2d& step) {
  if (sigma_mm <= 0) return v;
  auto pass = [&](const Eigen::Matrix<double, kNumMarkers, 1>& in, bool along_x) {
    const double h = along_x ? step.x() : step.y();
    const int radius = static_cast<int>(std::ceil(3.0 * sigma_mm / h));
    std::vector<double> w(2 * radius + 1);
    for (int k = -radius; k <= radius; ++k) w[k + radius] = std::exp(-0.5 * (k * h) * (k * h) / (sigma_mm * sigma_mm));
    Eigen::Matrix<double, kNumMarkers, 1> out;
    for (int r = 0; r < kGridSide; ++r) {
      for (int c = 0; c < kGridSide; ++c) {
        double acc = 0, norm = 0;
        for (int k = -radius; k <= radius; ++k) {
          const int rr = along_x ? r : r + k;
          const int cc = along_x ? c + k : c;
          if (rr < 0 || rr >= kGridSide || cc < 0 || cc >= kGridSide) continue;
          acc += w[k + radius] * in(rr * kGridSide + cc);
          norm += w[k + radius];
        }
        out(r * kGridSide + c) = acc / norm;
      }
    }
    return out;
  };
  return pass(pass(v, true), false);
}

}  // namespace

Shape shape_label(const ShapeParams& s) {
  return std::visit(Overloaded{
                        [](const Sphere&) { return Shape::kSphere; },
                        [](const Cylinder&) { return Shape::kCylinder; },
                        [](const Edge&) { return Shape::kEdge; },
                        [](const Ellipse&) { return Shape::kEllipse; },
                        [](const Ridge&) { return Shape::kRidge; },
                        [](const Irregular&) { return Shape::kIrregular; },
                    },
                    s);
}

std::string_view to_string(Primitive p) {
  switch (p) {
    case Primitive::kPress: return "press";
    case Primitive::kPressSlide: return "press_slide";
    case Primitive::kPressTwist: return "press_twist";
  }
  return "press";
}

Primitive parse_primitive(std::string_view s) {
  if (s == "press") return Primitive::kPress;
  if (s == "press_slide") return Primitive::kPressSlide;
  if (s == "press_twist") return Primitive::kPressTwist;
  throw std::invalid_argument("unknown primitive: " + std::string(s));
}

double footprint_radius(const ShapeParams& shape) {
  return std::visit(Overloaded{
                        [](const Sphere& p) { return p.radius; },
                        [](const Cylinder& p) { return p.radius; },
                        [](const Edge& p) { return std::hypot(0.5 * p.length, 0.5 * p.width); },
                        [](const Ellipse& p) { return std::max(p.a, p.b); },
                        [](const Ridge& p) {
                          const double spacing = kRidgeSpacingWidths * p.width;
                          double t = 0;
                          for (int k = 0; k < p.count; ++k) {
                            t = std::max(t, std::abs(ridge_offset(k, p.count)) * spacing + 0.5 * p.width);
                          }
                          return std::hypot(0.5 * p.length, t);
                        },
                        [](const Irregular& p) {
                          double r = 0;
                          for (const Lobe& l : p.lobes) r = std::max(r, l.offset.norm() + l.radius);
                          return r;
                        },
                    },
                    shape);
}

double clearance(const Indenter& ind, const Vector2d& point_mm, const SensorExtent& extent, double tilt_deg,
                 double tilt_azimuth_deg) {
  const Vector2d center(ind.center_uv.x() * extent.width_mm, ind.center_uv.y() * extent.height_mm);
  Vector2d w = point_mm - center;
  if (tilt_deg != 0.0) {
    // An oblique approach foreshortens the footprint along the tilt azimuth.
    const Vector2d a(std::cos(tilt_azimuth_deg * kDegToRad), std::sin(tilt_azimuth_deg * kDegToRad));
    const double along = w.dot(a);
    w += (std::cos(tilt_deg * kDegToRad) - 1.0) * along * a;
  }
  const double phi = ind.rotation_deg * kDegToRad;
  const double s = std::cos(phi) * w.x() + std::sin(phi) * w.y();
  const double t = -std::sin(phi) * w.x() + std::cos(phi) * w.y();
  const double base = shape_clearance(ind.shape, s, t);
  if (!std::isfinite(base)) return kInf;
  return base + texture_clearance(ind.texture, s, t);
}

IndentResult indent(const Indenter& ind, const ContactScript& script, const SensorExtent& extent,
                    const MembraneParams& membrane) {
  if (!(script.depth_mm > 0.0 && script.depth_mm <= extent.gel_depth_mm)) {
    throw GenerationError("scripted depth must lie in (0, gel_depth]");
  }
  if (std::abs(script.approach_tilt_deg) > 15.0) throw GenerationError("approach tilt exceeds the 15 degree cone");
  if (script.noise_sigma_mm < 0) throw GenerationError("noise sigma must be non-negative");
  const double tilt_scale = 1.0 / std::cos(script.approach_tilt_deg * kDegToRad);
  const double reach = footprint_radius(ind.shape) * tilt_scale;
  const Vector2d center(ind.center_uv.x() * extent.width_mm, ind.center_uv.y() * extent.height_mm);
  if (ind.center_uv.minCoeff() < 0.1 - 1e-12 || ind.center_uv.maxCoeff() > 0.9 + 1e-12 ||
      center.x() - reach < 0 || center.y() - reach < 0 || center.x() + reach > extent.width_mm ||
      center.y() + reach > extent.height_mm) {
    throw GenerationError("indenter footprint does not fit inside the sensor plane");
  }

  IndentResult res;
  res.frame = MarkerFrame::at_rest(extent);
  const MarkerGrid& rest = res.frame.rest;
  const double depth = script.depth_mm;

  Eigen::Matrix<double, kNumMarkers, 1> raw;
  for (int i = 0; i < kNumMarkers; ++i) {
    const double c = clearance(ind, rest.row(i).head<2>().transpose(), extent, script.approach_tilt_deg,
                               script.tilt_azimuth_deg);
    raw(i) = std::isfinite(c) ? std::max(0.0, depth - c) : 0.0;
  }
  res.contact_mask = raw.array() > membrane.contact_tolerance_mm;

  // The gel conforms to the indenter inside contact and sags smoothly around it.
  const Eigen::Matrix<double, kNumMarkers, 1> normal =
      raw.cwiseMax(membrane_blur(raw, membrane.sigma_mm, grid_spacing(extent)));
  const Eigen::Matrix<double, kNumMarkers, 1> engagement = normal / depth;

  std::vector<int> contact;
  for (int i = 0; i < kNumMarkers; ++i) {
    if (res.contact_mask(i)) contact.push_back(i);
  }

  ContactState& st = res.state;
  st.depth_mm = depth;
  st.shape = shape_label(ind.shape);
  st.texture = ind.texture.kind;
  st.area_fraction = static_cast<double>(contact.size()) / kNumMarkers;
  Vector2d centroid_mm = center;
  if (!contact.empty()) {
    const auto pts = plane_points(rest, contact);
    centroid_mm = pts.rowwise().mean();
    st.centroid = Vector2d(centroid_mm.x() / extent.width_mm, centroid_mm.y() / extent.height_mm);
    if (contact.size() >= 3 && !std::holds_alternative<Sphere>(ind.shape) &&
        !std::holds_alternative<Cylinder>(ind.shape)) {
      const auto axis = principal_axis_svd(pts);
      if (axis.singularity_ratio >= kDefaultSingularityRatio) {
        st.principal_axis_deg = axis.angle_deg;
      }
    }
  }
  st.twist = Twist::kNone;

  MarkerGrid disp = MarkerGrid::Zero();
  disp.col(2) = -normal;
  switch (script.primitive) {
    case Primitive::kPress: break;
    case Primitive::kPressSlide: {
      const double a = script.slide_direction_deg * kDegToRad;
      const Vector2d dir(std::cos(a), std::sin(a));
      for (int i = 0; i < kNumMarkers; ++i) {
        disp.row(i).head<2>() = (script.slide_distance_mm * engagement(i)) * dir.transpose();
      }
      st.slide_deg = wrap_angle(script.slide_direction_deg, 360.0);
      break;
    }
    case Primitive::kPressTwist: {
      if (script.twist_chirality == Twist::kNone) throw GenerationError("press_twist needs a chirality");
      const double sign = script.twist_chirality == Twist::kCounterclockwise ? 1.0 : -1.0;
      const double theta = sign * std::abs(script.twist_angle_deg) * kDegToRad;
      const Eigen::Rotation2Dd rot(theta);
      const Eigen::Matrix2d delta = rot.toRotationMatrix() - Eigen::Matrix2d::Identity();
      for (int i = 0; i < kNumMarkers; ++i) {
        const Vector2d r = rest.row(i).head<2>().transpose() - centroid_mm;
        disp.row(i).head<2>() = (engagement(i) * (delta * r)).transpose();
      }
      st.twist = script.twist_chirality;
      break;
    }
  }

  if (script.noise_sigma_mm > 0) {
    std::mt19937_64 rng(script.seed);
    std::normal_distribution<double> noise(0.0, script.noise_sigma_mm);
    for (int i = 0; i < kNumMarkers; ++i) {
      for (int k = 0; k < 3; ++k) disp(i, k) += noise(rng);
    }
  }
  res.frame.deformed = rest + disp;
  res.normal_force_proxy_n = membrane.force_gain_n_per_mm * normal.sum();
  return res;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t sample_seed(std::uint64_t base_seed, std::uint64_t index) {
  return splitmix64(base_seed ^ splitmix64(index));
}

std::string sample_id(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "s%06zu", index);
  return buf;
}

namespace {

constexpr int kMinTwistContactMarkers = 9;

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

template <std::size_t N>
std::size_t pick(std::mt19937_64& rng, const std::array<double, N>& weights) {
  return std::discrete_distribution<std::size_t>(weights.begin(), weights.end())(rng);
}

ShapeParams draw_shape(Shape kind, std::mt19937_64& rng) {
  switch (kind) {
    case Shape::kSphere: return Sphere{uniform(rng, 2.0, 5.0)};
    case Shape::kCylinder: return Cylinder{uniform(rng, 1.5, 4.0)};
    case Shape::kEdge: return Edge{uniform(rng, 8.0, 14.0), uniform(rng, 1.5, 3.0)};
    case Shape::kEllipse: {
      const double b = uniform(rng, 1.2, 2.5);
      return Ellipse{std::min(6.0, b * uniform(rng, 2.0, 3.5)), b};
    }
    case Shape::kRidge: {
      const int count = std::uniform_int_distribution<int>(2, 3)(rng);
      return Ridge{uniform(rng, 9.0, 12.0), uniform(rng, 0.8, 1.1), count};
    }
    case Shape::kIrregular: {
      Irregular ir;
      ir.lobes[0] = {Vector2d::Zero(), uniform(rng, 1.5, 3.0), 0.0};
      for (int k = 1; k < 3; ++k) {
        const double ang = uniform(rng, 0.0, 2.0 * kPi);
        const double dist = uniform(rng, 1.0, 2.5);
        ir.lobes[k] = {Vector2d(dist * std::cos(ang), dist * std::sin(ang)), uniform(rng, 1.5, 3.0),
                       uniform(rng, 0.1, 0.5)};
      }
      return ir;
    }
  }
  return Sphere{3.0};
}

/// Picks a marker node for the indenter center so the apex lands on a marker.
Vector2d draw_center(double reach, const SensorExtent& ext, std::mt19937_64& rng) {
  const Vector2d step = grid_spacing(ext);
  auto axis = [&](double size, double h) {
    const double lo = std::max(0.1 * size, reach), hi = std::min(0.9 * size, size - reach);
    const int first = static_cast<int>(std::ceil(lo / h - 1e-9));
    const int last = static_cast<int>(std::floor(hi / h + 1e-9));
    if (last < first) throw GenerationError("indenter too large for the sensor");
    const int node = std::uniform_int_distribution<int>(first, last)(rng);
    return node * h / size;
  };
  const double u = axis(ext.width_mm, step.x());
  const double v = axis(ext.height_mm, step.y());
  return {u, v};
}

}  // namespace

Sample generate_sample(const CorpusConfig& cfg, std::uint64_t base_seed, std::size_t index) {
  Sample s;
  s.id = sample_id(index);
  s.seed = sample_seed(base_seed, index);
  std::mt19937_64 rng(s.seed);

  const Shape kind = kAllShapes[pick(rng, cfg.shape_weights)];
  s.indenter.shape = draw_shape(kind, rng);
  s.indenter.rotation_deg = uniform(rng, 0.0, 360.0);
  s.indenter.texture.kind = kAllTextures[pick(rng, cfg.texture_weights)];
  s.indenter.texture.amplitude_mm = cfg.texture_amplitude_mm;
  s.indenter.texture.spacing_mm = cfg.texture_spacing_mm;

  ContactScript& sc = s.script;
  sc.primitive = static_cast<Primitive>(pick(rng, cfg.primitive_weights));
  sc.depth_mm = uniform(rng, cfg.depth_mm.lo, cfg.depth_mm.hi);
  sc.approach_tilt_deg = uniform(rng, 0.0, cfg.max_tilt_deg);
  sc.tilt_azimuth_deg = uniform(rng, 0.0, 360.0);
  if (sc.primitive == Primitive::kPressSlide) {
    sc.slide_direction_deg = uniform(rng, 0.0, 360.0);
    sc.slide_distance_mm = uniform(rng, cfg.slide_distance_mm.lo, cfg.slide_distance_mm.hi);
  } else if (sc.primitive == Primitive::kPressTwist) {
    sc.twist_chirality = std::bernoulli_distribution(0.5)(rng) ? Twist::kCounterclockwise : Twist::kClockwise;
    sc.twist_angle_deg = uniform(rng, cfg.twist_angle_deg.lo, cfg.twist_angle_deg.hi);
  }
  sc.noise_sigma_mm = cfg.noise_sigma_mm;
  sc.seed = splitmix64(s.seed);

  const double reach = footprint_radius(s.indenter.shape) / std::cos(sc.approach_tilt_deg * kDegToRad);
  s.indenter.center_uv = draw_center(reach, cfg.extent, rng);

  const MembraneParams membrane{.sigma_mm = cfg.membrane_sigma_mm};
  s.result = indent(s.indenter, sc, cfg.extent, membrane);
  // A twist is unobservable on a patch of a few markers; press deeper until it is not.
  for (int attempt = 0; sc.primitive == Primitive::kPressTwist && attempt < 32 &&
                        s.result.contact_mask.count() < kMinTwistContactMarkers;
       ++attempt) {
    sc.depth_mm = uniform(rng, sc.depth_mm, cfg.depth_mm.hi);
    s.result = indent(s.indenter, sc, cfg.extent, membrane);
  }
  return s;
}

io::LabelRecord Sample::label() const {
  io::LabelRecord rec;
  rec.id = id;
  rec.seed = seed;
  rec.state = result.state;
  rec.meta = {{"primitive", std::string(to_string(script.primitive))},
              {"center_uv", {indenter.center_uv.x(), indenter.center_uv.y()}},
              {"rotation_deg", indenter.rotation_deg},
              {"approach_tilt_deg", script.approach_tilt_deg},
              {"slide_distance_mm", script.slide_distance_mm},
              {"twist_angle_deg", script.twist_angle_deg},
              {"noise_sigma_mm", script.noise_sigma_mm},
              {"normal_force_proxy_n", result.normal_force_proxy_n},
              {"file", id + ".fgt"}};
  return rec;
}

std::vector<Sample> generate(const CorpusConfig& cfg, std::size_t n, std::uint64_t base_seed, unsigned threads) {
  if (n == 0) throw GenerationError("corpus size must be at least 1");
  std::vector<Sample> out(n);
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(n)));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) out[i] = generate_sample(cfg, base_seed, i);
    return out;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(threads);
  for (unsigned t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      try {
        for (std::size_t i = t; i < n; i += threads) out[i] = generate_sample(cfg, base_seed, i);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

void generate_corpus(const CorpusConfig& cfg, std::size_t n, std::uint64_t base_seed,
                     const std::filesystem::path& out_dir, unsigned threads) {
  if (n == 0) throw GenerationError("corpus size must be at least 1");
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw GenerationError("cannot create output directory " + out_dir.string() + ": " + ec.message());
  const auto samples = generate(cfg, n, base_seed, threads);
  std::vector<io::LabelRecord> labels;
  labels.reserve(n);
  for (const Sample& s : samples) {
    io::write_frame(out_dir / (s.id + ".fgt"), s.result.frame);
    labels.push_back(s.label());
  }
  io::write_labels(out_dir / "labels.jsonl", labels);
}

namespace {

Range range_from(const io::json& j) {
  if (!j.is_array() || j.size() != 2) throw std::invalid_argument("range must be [lo, hi]");
  Range r{j[0].get<double>(), j[1].get<double>()};
  if (r.hi < r.lo) throw std::invalid_argument("range has hi < lo");
  return r;
}

template <std::size_t N>
std::array<double, N> weights_from(const io::json& j, const std::array<std::string_view, N>& names) {
  std::array<double, N> w{};
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool found = false;
    for (std::size_t k = 0; k < N; ++k) {
      if (it.key() == names[k]) {
        w[k] = it.value().get<double>();
        found = true;
      }
    }
    if (!found) throw std::invalid_argument("unknown mixture key '" + it.key() + "'");
  }
  return w;
}

constexpr std::array<std::string_view, 6> kShapeNames = {"sphere", "cylinder", "edge", "ellipse", "ridge", "irregular"};
constexpr std::array<std::string_view, 3> kTextureNames = {"smooth", "bumpy", "ridged"};
constexpr std::array<std::string_view, 3> kPrimitiveNames = {"press", "press_slide", "press_twist"};

template <std::size_t N>
io::json weights_to(const std::array<double, N>& w, const std::array<std::string_view, N>& names) {
  io::json j = io::json::object();
  for (std::size_t k = 0; k < N; ++k) j[std::string(names[k])] = w[k];
  return j;
}

}  // namespace

CorpusConfig CorpusConfig::from_json(const io::json& j) {
  CorpusConfig c;
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& k = it.key();
    const io::json& v = it.value();
    if (k == "shape_weights") c.shape_weights = weights_from(v, kShapeNames);
    else if (k == "texture_weights") c.texture_weights = weights_from(v, kTextureNames);
    else if (k == "primitive_weights") c.primitive_weights = weights_from(v, kPrimitiveNames);
    else if (k == "depth_mm") c.depth_mm = range_from(v);
    else if (k == "slide_distance_mm") c.slide_distance_mm = range_from(v);
    else if (k == "twist_angle_deg") c.twist_angle_deg = range_from(v);
    else if (k == "max_tilt_deg") c.max_tilt_deg = v.get<double>();
    else if (k == "noise_sigma_mm") c.noise_sigma_mm = v.get<double>();
    else if (k == "membrane_sigma_mm") c.membrane_sigma_mm = v.get<double>();
    else if (k == "texture_amplitude_mm") c.texture_amplitude_mm = v.get<double>();
    else if (k == "texture_spacing_mm") c.texture_spacing_mm = v.get<double>();
    else if (k == "sensor_extent") {
      if (!v.is_array() || v.size() != 3) throw std::invalid_argument("sensor_extent must be [w, h, gel_depth]");
      c.extent = {v[0].get<double>(), v[1].get<double>(), v[2].get<double>()};
    } else {
      throw std::invalid_argument("unknown key '" + k + "'");
    }
  }
  if (c.depth_mm.lo <= 0 || c.depth_mm.hi > c.extent.gel_depth_mm) {
    throw std::invalid_argument("depth_mm must lie in (0, gel_depth]");
  }
  if (c.max_tilt_deg < 0 || c.max_tilt_deg > 15) throw std::invalid_argument("max_tilt_deg must lie in [0, 15]");
  if (c.noise_sigma_mm < 0) throw std::invalid_argument("noise_sigma_mm must be non-negative");
  return c;
}

io::json CorpusConfig::to_json() const {
  return {{"shape_weights", weights_to(shape_weights, kShapeNames)},
          {"texture_weights", weights_to(texture_weights, kTextureNames)},
          {"primitive_weights", weights_to(primitive_weights, kPrimitiveNames)},
          {"depth_mm", {depth_mm.lo, depth_mm.hi}},
          {"slide_distance_mm", {slide_distance_mm.lo, slide_distance_mm.hi}},
          {"twist_angle_deg", {twist_angle_deg.lo, twist_angle_deg.hi}},
          {"max_tilt_deg", max_tilt_deg},
          {"noise_sigma_mm", noise_sigma_mm},
          {"membrane_sigma_mm", membrane_sigma_mm},
          {"texture_amplitude_mm", texture_amplitude_mm},
          {"texture_spacing_mm", texture_spacing_mm},
          {"sensor_extent", {extent.width_mm, extent.height_mm, extent.gel_depth_mm}}};
}

}  // namespace fgcltp::synth
