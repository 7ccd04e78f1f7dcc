#pragma once

#include "fgcltp/core.hpp"
#include "fgcltp/io.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace fgcltp::lang {

inline constexpr int kMaxTokens = 64;
inline constexpr int kNumVariants = 10;

class RangeError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

class TokenTypeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class Attribute : std::uint8_t { kDepth, kArea, kPrincipal, kSlide, kPosX, kPosY };

/// Bin geometry of one numeric attribute.
struct BinSpec {
  std::string_view prefix;
  double step;
  int first, last;  // inclusive bin index range
  double period;    // 0 for linear attributes
};

const BinSpec& bin_spec(Attribute a);

/// Token of the nearest bin center, round-half-up. Throws RangeError outside the attribute's
/// physical range.
std::string bin_encode(Attribute a, double value);

/// Bin center of a numeric token. Throws TokenTypeError for non-numeric tokens.
double bin_decode(std::string_view token);

std::string twist_token(Twist t);

class Vocabulary {
 public:
  /// Vocabulary closed over the built-in template bank.
  static const Vocabulary& standard();

  Vocabulary(std::vector<std::string> base_words, std::vector<std::string> numeric_tokens);

  int size() const { return static_cast<int>(tokens_.size()); }
  int num_base() const { return num_base_; }
  int pad_id() const { return 0; }
  int unk_id() const { return 1; }

  int id(std::string_view token) const;  // <unk> id when absent
  bool contains(std::string_view token) const;
  const std::string& token(int id) const { return tokens_.at(static_cast<std::size_t>(id)); }
  bool learnable(int id) const { return id >= num_base_; }
  const std::vector<std::string>& tokens() const { return tokens_; }
  std::vector<std::uint8_t> learnable_mask() const;

  std::uint64_t hash() const { return hash_; }

  io::json to_json() const;
  static Vocabulary from_json(const io::json& j);

 private:
  std::vector<std::string> tokens_;
  int num_base_ = 0;
  std::unordered_map<std::string, int> index_;
  std::uint64_t hash_ = 0;
};

/// Fixed-length id sequence padded with <pad> as a suffix.
struct TokenSequence {
  std::array<std::int32_t, kMaxTokens> ids{};
  int length = 0;  // non-pad prefix length

  bool operator==(const TokenSequence&) const = default;
};

enum class Style : std::uint8_t { kPlain, kTokenized };
Style parse_style(std::string_view s);
std::string_view to_string(Style s);

struct Description {
  std::string text;
  TokenSequence tokens;
};

/// Splits text into lowercase words, dropping commas and periods.
std::vector<std::string> split_words(std::string_view text);

TokenSequence encode(const std::vector<std::string>& words, const Vocabulary& vocab);

Description describe(const ContactState& state, Style style, int variant,
                     const Vocabulary& vocab = Vocabulary::standard());

}  // namespace fgcltp::lang
