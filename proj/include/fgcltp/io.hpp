#pragma once

#include "fgcltp/core.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace fgcltp::io {

using nlohmann::json;

/// Encodes a frame in the FGT1 layout: magic, u32 grid_w, u32 grid_h, 3 x f32 extent,
/// then 529 x 3 rest and 529 x 3 deformed little-endian f32.
std::vector<std::uint8_t> encode_frame(const MarkerFrame& frame);
MarkerFrame decode_frame(const std::vector<std::uint8_t>& bytes);

void write_frame(const std::filesystem::path& path, const MarkerFrame& frame);
MarkerFrame read_frame(const std::filesystem::path& path);

/// One line of a labels file.
struct LabelRecord {
  std::string id;
  std::uint64_t seed = 0;
  ContactState state;
  bool estimated = false;
  json meta = json::object();  // generator metadata (primitive, indenter, force proxy, ...)
};

json to_json(const ContactState& state);
ContactState contact_state_from_json(const json& j);

json to_json(const LabelRecord& rec);
LabelRecord label_from_json(const json& j);

void write_jsonl(const std::filesystem::path& path, const std::vector<json>& lines);
std::vector<json> read_jsonl(const std::filesystem::path& path);

void write_labels(const std::filesystem::path& path, const std::vector<LabelRecord>& labels);
std::vector<LabelRecord> read_labels(const std::filesystem::path& path);

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path);
void write_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);
void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

/// FNV-1a 64-bit.
std::uint64_t fnv1a(const void* data, std::size_t size, std::uint64_t seed = 14695981039346656037ULL);
std::uint64_t fnv1a(std::string_view s);
std::string hex64(std::uint64_t v);
std::string file_hash(const std::filesystem::path& path);

}  // namespace fgcltp::io
