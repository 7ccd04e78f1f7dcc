#include "fgcltp/io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace fgcltp::io {

namespace {

constexpr char kMagic[4] = {'F', 'G', 'T', '1'};
constexpr std::size_t kHeaderBytes = 4 + 4 + 4 + 3 * 4;
constexpr std::size_t kFrameBytes = kHeaderBytes + 2 * kNumMarkers * 3 * 4;

static_assert(std::endian::native == std::endian::little, "FGT1 writer assumes a little-endian host");

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_f32(std::vector<std::uint8_t>& out, double v) {
  put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  return std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) | (std::uint32_t(p[2]) << 16) |
         (std::uint32_t(p[3]) << 24);
}

double get_f32(const std::uint8_t* p) { return std::bit_cast<float>(get_u32(p)); }

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

std::vector<std::uint8_t> encode_frame(const MarkerFrame& frame) {
  std::vector<std::uint8_t> out;
  out.reserve(kFrameBytes);
  out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
  put_u32(out, kGridSide);
  put_u32(out, kGridSide);
  put_f32(out, frame.extent.width_mm);
  put_f32(out, frame.extent.height_mm);
  put_f32(out, frame.extent.gel_depth_mm);
  for (const MarkerGrid* g : {&frame.rest, &frame.deformed}) {
    for (int i = 0; i < kNumMarkers; ++i) {
      for (int k = 0; k < 3; ++k) put_f32(out, (*g)(i, k));
    }
  }
  return out;
}

MarkerFrame decode_frame(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < kHeaderBytes || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw StructuralError("not an FGT1 frame");
  }
  const std::uint32_t w = get_u32(bytes.data() + 4);
  const std::uint32_t h = get_u32(bytes.data() + 8);
  if (w != kGridSide || h != kGridSide) {
    throw StructuralError("FGT1 grid must be 23x23, got " + std::to_string(w) + "x" + std::to_string(h));
  }
  if (bytes.size() != kFrameBytes) throw StructuralError("FGT1 payload length mismatch");
  MarkerFrame f;
  f.extent = {get_f32(bytes.data() + 12), get_f32(bytes.data() + 16), get_f32(bytes.data() + 20)};
  const std::uint8_t* p = bytes.data() + kHeaderBytes;
  for (MarkerGrid* g : {&f.rest, &f.deformed}) {
    for (int i = 0; i < kNumMarkers; ++i) {
      for (int k = 0; k < 3; ++k, p += 4) (*g)(i, k) = get_f32(p);
    }
  }
  f.validate();
  return f;
}

void write_frame(const std::filesystem::path& path, const MarkerFrame& frame) {
  write_bytes(path, encode_frame(frame));
}

MarkerFrame read_frame(const std::filesystem::path& path) { return decode_frame(read_bytes(path)); }

json to_json(const ContactState& s) {
  json j;
  j["depth_mm"] = s.depth_mm;
  j["centroid"] = s.centroid ? json::array({s.centroid->x(), s.centroid->y()}) : json(nullptr);
  j["area_fraction"] = s.area_fraction;
  j["principal_axis_deg"] = optional_number(s.principal_axis_deg);
  j["slide_deg"] = optional_number(s.slide_deg);
  j["twist"] = s.twist ? json(std::string(to_string(*s.twist))) : json(nullptr);
  j["shape"] = std::string(to_string(s.shape));
  j["texture"] = std::string(to_string(s.texture));
  j["validity"] = {{"depth", s.depth_valid},
                   {"centroid", s.centroid.has_value()},
                   {"principal_axis", s.principal_axis_deg.has_value()},
                   {"slide", s.slide_deg.has_value()},
                   {"twist", s.twist.has_value()}};
  return j;
}

ContactState contact_state_from_json(const json& j) {
  ContactState s;
  s.depth_mm = j.at("depth_mm").get<double>();
  if (const auto& c = j.at("centroid"); !c.is_null()) s.centroid = Vector2d(c.at(0), c.at(1));
  s.area_fraction = j.at("area_fraction").get<double>();
  if (const auto& a = j.at("principal_axis_deg"); !a.is_null()) s.principal_axis_deg = a.get<double>();
  if (const auto& a = j.at("slide_deg"); !a.is_null()) s.slide_deg = a.get<double>();
  if (const auto& t = j.at("twist"); !t.is_null()) s.twist = parse_twist(t.get<std::string>());
  s.shape = parse_shape(j.at("shape").get<std::string>());
  s.texture = parse_texture(j.at("texture").get<std::string>());
  if (j.contains("validity")) s.depth_valid = j["validity"].value("depth", true);
  return s;
}

json to_json(const LabelRecord& rec) {
  json j = to_json(rec.state);
  j["id"] = rec.id;
  j["seed"] = rec.seed;
  if (rec.estimated) j["estimated"] = true;
  if (!rec.meta.empty()) j["meta"] = rec.meta;
  return j;
}

LabelRecord label_from_json(const json& j) {
  LabelRecord rec;
  rec.id = j.at("id").get<std::string>();
  rec.seed = j.value("seed", std::uint64_t{0});
  rec.state = contact_state_from_json(j);
  rec.estimated = j.value("estimated", false);
  if (j.contains("meta")) rec.meta = j["meta"];
  return rec;
}

void write_jsonl(const std::filesystem::path& path, const std::vector<json>& lines) {
  std::ostringstream os;
  for (const json& l : lines) os << l.dump() << '\n';
  write_text(path, os.str());
}

std::vector<json> read_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<json> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      out.push_back(json::parse(line));
    } catch (const json::parse_error& e) {
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

void write_labels(const std::filesystem::path& path, const std::vector<LabelRecord>& labels) {
  std::vector<json> lines;
  lines.reserve(labels.size());
  for (const auto& l : labels) lines.push_back(to_json(l));
  write_jsonl(path, lines);
}

std::vector<LabelRecord> read_labels(const std::filesystem::path& path) {
  std::vector<LabelRecord> out;
  for (const json& j : read_jsonl(path)) out.push_back(label_from_json(j));
  return out;
}

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::uint64_t fnv1a(const void* data, std::size_t size, std::uint64_t seed) {
  auto* p = static_cast<const std::uint8_t*>(data);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < size; ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
  return h;
}

std::uint64_t fnv1a(std::string_view s) { return fnv1a(s.data(), s.size()); }

std::string hex64(std::uint64_t v) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4) s[i] = digits[v & 0xf];
  return s;
}

std::string file_hash(const std::filesystem::path& path) {
  const auto bytes = read_bytes(path);
  return hex64(fnv1a(bytes.data(), bytes.size()));
}

}  // namespace fgcltp::io
