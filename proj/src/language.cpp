#include "fgcltp/language.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <set>

namespace fgcltp::lang {

namespace {

// Slots: T texture, S shape, D depth, P position, A area, X axis, L slide, W twist.
// A clause holding an INVALID slot is dropped.
constexpr std::array<std::array<std::string_view, 9>, kNumVariants> kTemplates = {{
    {"a {T} {S} object", ", pressed {D}", " at {P}", " with a {A} contact area", ", oriented along {X}",
     ", sliding towards {L}", " and twisting {W}", "."},
    {"a {S} object with a {T} surface", " is pressed {D}", " near {P}", ", covering a {A} contact area",
     ", its axis along {X}", ", moving towards {L}", ", twisting {W}"},
    {"pressed {D}", " at {P}", ", a {T} {S} object", " makes a {A} contact area", " aligned with {X}",
     ", slides towards {L}", " and twists {W}"},
    {"contact with a {T} {S} object", " at {P}", ", depth {D}", ", area {A}", ", principal axis {X}",
     ", sliding direction {L}", ", twist {W}"},
    {"the sensor feels a {T} {S} object", " pressed {D}", " with a {A} contact patch", " centered at {P}",
     " oriented along {X}", " sliding towards {L}", " twisting {W}"},
    {"a {A} contact area", " from a {T} {S} object", " pressed {D}", " at {P}", ", oriented along {X}",
     ", sliding towards {L}", ", twisting {W}"},
    {"twisting {W}", " and sliding towards {L}", ", a {T} {S} object", " is pressed {D}", " at {P}", " along {X}",
     " over a {A} contact area"},
    {"at {P}", " a {T} {S} object", " presses {D}", ", oriented along {X}", ", with a {A} contact area",
     ", twisting {W}", " while sliding towards {L}"},
    {"a {S} object", " of {T} texture", " pressed {D}", " into the gel at {P}", " with {A} contact area",
     ", axis along {X}", ", sliding towards {L}", ", twisting {W}"},
    {"{T} {S} contact", " pressed {D}", " located at {P}", " spanning a {A} area", " oriented {X}", " sliding {L}",
     " twisting {W}"},
}};

constexpr std::array<std::string_view, 3> kDepthWords = {"lightly", "moderately", "deeply"};
constexpr std::array<std::string_view, 3> kColumnWords = {"left", "center", "right"};
constexpr std::array<std::string_view, 3> kRowWords = {"bottom", "middle", "top"};
constexpr std::array<std::string_view, 3> kAreaWords = {"small", "medium", "large"};
constexpr std::array<std::string_view, 4> kAxisWords = {"the horizontal direction", "the diagonal direction",
                                                        "the vertical direction", "the antidiagonal direction"};
constexpr std::array<std::string_view, 8> kCompassWords = {"the right", "the upper right", "the top",
                                                           "the upper left", "the left", "the lower left",
                                                           "the bottom", "the lower right"};
constexpr std::array<std::string_view, 3> kTwistWords = {"clockwise", "counterclockwise", "not at all"};

constexpr double kAreaMin = 0.005;

const std::array<BinSpec, 6> kBins = {{
    {"depth", 0.1, 0, 40, 0.0},
    {"area", 0.01, 1, 100, 0.0},
    {"principal", 1.0, 0, 359, 180.0},
    {"slide", 1.0, 0, 359, 360.0},
    {"posx", 0.05, 0, 19, 0.0},
    {"posy", 0.05, 0, 19, 0.0},
}};

std::string token_name(Attribute a, int k) {
  const BinSpec& b = bin_spec(a);
  char buf[48];
  switch (a) {
    case Attribute::kDepth: std::snprintf(buf, sizeof(buf), "<depth_%.1f>", k * b.step); break;
    case Attribute::kArea:
      if (k == b.last) std::snprintf(buf, sizeof(buf), "<area_1.0>");
      else std::snprintf(buf, sizeof(buf), "<area_%.2f>", k * b.step);
      break;
    default: std::snprintf(buf, sizeof(buf), "<%s_%d>", std::string(b.prefix).c_str(), k); break;
  }
  return buf;
}

std::vector<std::string> numeric_token_list() {
  std::vector<std::string> out;
  for (Attribute a : {Attribute::kDepth, Attribute::kArea, Attribute::kPrincipal, Attribute::kSlide,
                      Attribute::kPosX, Attribute::kPosY}) {
    const BinSpec& b = bin_spec(a);
    for (int k = b.first; k <= b.last; ++k) out.push_back(token_name(a, k));
  }
  for (Twist t : {Twist::kClockwise, Twist::kCounterclockwise, Twist::kNone}) out.push_back(twist_token(t));
  return out;
}

std::vector<std::string> base_word_list() {
  std::set<std::string> words;
  auto add = [&](std::string_view text) {
    for (auto& w : split_words(text)) {
      if (w.front() != '{') words.insert(w);
    }
  };
  for (const auto& tpl : kTemplates) {
    for (std::string_view clause : tpl) {
      // Slot markers may be glued to punctuation; strip them before harvesting.
      std::string cleaned;
      for (std::size_t i = 0; i < clause.size(); ++i) {
        if (clause[i] == '{') {
          i += 2;
          cleaned += ' ';
        } else {
          cleaned += clause[i];
        }
      }
      add(cleaned);
    }
  }
  for (auto list : {std::vector<std::string_view>(kDepthWords.begin(), kDepthWords.end()),
                    std::vector<std::string_view>(kColumnWords.begin(), kColumnWords.end()),
                    std::vector<std::string_view>(kRowWords.begin(), kRowWords.end()),
                    std::vector<std::string_view>(kAreaWords.begin(), kAreaWords.end()),
                    std::vector<std::string_view>(kAxisWords.begin(), kAxisWords.end()),
                    std::vector<std::string_view>(kCompassWords.begin(), kCompassWords.end()),
                    std::vector<std::string_view>(kTwistWords.begin(), kTwistWords.end())}) {
    for (auto w : list) add(w);
  }
  add("the");
  for (Shape s : kAllShapes) add(to_string(s));
  for (Texture t : kAllTextures) add(to_string(t));
  std::vector<std::string> out{"<pad>", "<unk>"};
  out.insert(out.end(), words.begin(), words.end());
  return out;
}

std::uint64_t vocab_hash(const std::vector<std::string>& tokens, int num_base) {
  std::uint64_t h = 14695981039346656037ULL;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    h = io::fnv1a(tokens[i].data(), tokens[i].size(), h);
    const char sep[2] = {'\x1f', static_cast<int>(i) >= num_base ? '1' : '0'};
    h = io::fnv1a(sep, 2, h);
  }
  return h;
}

int bin_index(Attribute a, double v) {
  const BinSpec& b = bin_spec(a);
  if (!std::isfinite(v)) throw RangeError("non-finite attribute value");
  switch (a) {
    case Attribute::kDepth:
      if (v < 0.0 || v > b.last * b.step + 1e-9) throw RangeError("depth out of range: " + std::to_string(v));
      return std::min(b.last, static_cast<int>(std::floor(v / b.step + 0.5 + 1e-9)));
    case Attribute::kArea:
      if (v < kAreaMin - 1e-12 || v > 1.0 + 1e-9) throw RangeError("area out of range: " + std::to_string(v));
      return std::clamp(static_cast<int>(std::floor(v / b.step + 0.5 + 1e-9)), b.first, b.last);
    case Attribute::kPrincipal:
    case Attribute::kSlide: {
      if (v < 0.0 || v >= 360.0) throw RangeError("angle out of range: " + std::to_string(v));
      const double canonical = wrap_angle(v, b.period);
      return static_cast<int>(std::floor(canonical + 0.5 + 1e-9)) % static_cast<int>(b.period);
    }
    case Attribute::kPosX:
    case Attribute::kPosY:
      if (v < 0.0 || v > 1.0) throw RangeError("position out of range: " + std::to_string(v));
      return std::min(b.last, static_cast<int>(std::floor(v / b.step + 1e-9)));
  }
  return 0;
}

double bin_center(Attribute a, int k) {
  const BinSpec& b = bin_spec(a);
  if (a == Attribute::kPosX || a == Attribute::kPosY) return (k + 0.5) * b.step;
  return k * b.step;
}

}  // namespace

const BinSpec& bin_spec(Attribute a) { return kBins[static_cast<std::size_t>(a)]; }

std::string bin_encode(Attribute a, double value) { return token_name(a, bin_index(a, value)); }

double bin_decode(std::string_view token) {
  static const std::unordered_map<std::string, double> table = [] {
    std::unordered_map<std::string, double> m;
    for (int i = 0; i < static_cast<int>(kBins.size()); ++i) {
      const Attribute a = static_cast<Attribute>(i);
      for (int k = kBins[i].first; k <= kBins[i].last; ++k) m.emplace(token_name(a, k), bin_center(a, k));
    }
    return m;
  }();
  const auto it = table.find(std::string(token));
  if (it == table.end()) throw TokenTypeError("not a numeric bin token: " + std::string(token));
  return it->second;
}

std::string twist_token(Twist t) {
  switch (t) {
    case Twist::kClockwise: return "<twist_cw>";
    case Twist::kCounterclockwise: return "<twist_ccw>";
    case Twist::kNone: return "<twist_none>";
  }
  return "<twist_none>";
}

std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) out.push_back(std::move(cur));
    cur.clear();
  };
  for (char ch : text) {
    if (std::isspace(static_cast<unsigned char>(ch))) {
      flush();
    } else if ((ch == ',' || ch == '.') && (cur.empty() || cur.front() != '<')) {
      flush();
    } else {
      cur += static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
      // A closing bracket ends a numeric token even when punctuation follows directly.
      if (ch == '>' && cur.front() == '<') flush();
    }
  }
  flush();
  return out;
}

Vocabulary::Vocabulary(std::vector<std::string> base_words, std::vector<std::string> numeric_tokens) {
  num_base_ = static_cast<int>(base_words.size());
  tokens_ = std::move(base_words);
  tokens_.insert(tokens_.end(), numeric_tokens.begin(), numeric_tokens.end());
  for (int i = 0; i < size(); ++i) {
    if (!index_.emplace(tokens_[i], i).second) throw std::invalid_argument("duplicate token " + tokens_[i]);
  }
  if (num_base_ < 2 || tokens_[0] != "<pad>" || tokens_[1] != "<unk>") {
    throw std::invalid_argument("vocabulary must start with <pad>, <unk>");
  }
  hash_ = vocab_hash(tokens_, num_base_);
}

const Vocabulary& Vocabulary::standard() {
  static const Vocabulary v(base_word_list(), numeric_token_list());
  return v;
}

int Vocabulary::id(std::string_view token) const {
  const auto it = index_.find(std::string(token));
  return it == index_.end() ? unk_id() : it->second;
}

bool Vocabulary::contains(std::string_view token) const { return index_.count(std::string(token)) > 0; }

std::vector<std::uint8_t> Vocabulary::learnable_mask() const {
  std::vector<std::uint8_t> m(tokens_.size(), 0);
  for (int i = num_base_; i < size(); ++i) m[i] = 1;
  return m;
}

io::json Vocabulary::to_json() const {
  io::json toks = io::json::object();
  for (int i = 0; i < size(); ++i) toks[tokens_[i]] = {{"id", i}, {"learnable", learnable(i)}};
  return {{"version", 1}, {"size", size()}, {"num_base", num_base_}, {"hash", io::hex64(hash_)}, {"tokens", toks}};
}

Vocabulary Vocabulary::from_json(const io::json& j) {
  const auto& toks = j.at("tokens");
  std::vector<std::string> ordered(toks.size());
  std::vector<int> learn(toks.size(), -1);
  for (auto it = toks.begin(); it != toks.end(); ++it) {
    const int id = it.value().at("id").get<int>();
    if (id < 0 || id >= static_cast<int>(ordered.size()) || !ordered[id].empty()) {
      throw std::invalid_argument("vocabulary ids must be dense and unique");
    }
    ordered[id] = it.key();
    learn[id] = it.value().at("learnable").get<bool>() ? 1 : 0;
  }
  int num_base = 0;
  while (num_base < static_cast<int>(learn.size()) && learn[num_base] == 0) ++num_base;
  for (std::size_t i = num_base; i < learn.size(); ++i) {
    if (learn[i] != 1) throw std::invalid_argument("learnable tokens must follow all base tokens");
  }
  std::vector<std::string> base(ordered.begin(), ordered.begin() + num_base);
  std::vector<std::string> numeric(ordered.begin() + num_base, ordered.end());
  Vocabulary v(std::move(base), std::move(numeric));
  if (j.contains("hash") && j["hash"].get<std::string>() != io::hex64(v.hash())) {
    throw std::invalid_argument("vocabulary hash mismatch");
  }
  return v;
}

Style parse_style(std::string_view s) {
  if (s == "plain") return Style::kPlain;
  if (s == "tokenized") return Style::kTokenized;
  throw std::invalid_argument("unknown description style: " + std::string(s));
}

std::string_view to_string(Style s) { return s == Style::kPlain ? "plain" : "tokenized"; }

TokenSequence encode(const std::vector<std::string>& words, const Vocabulary& vocab) {
  TokenSequence seq;
  seq.ids.fill(vocab.pad_id());
  seq.length = std::min<int>(kMaxTokens, static_cast<int>(words.size()));
  for (int i = 0; i < seq.length; ++i) seq.ids[i] = vocab.id(words[i]);
  return seq;
}

namespace {

template <std::size_t N>
std::string_view bucket(const std::array<std::string_view, N>& words, double v, std::initializer_list<double> cuts) {
  std::size_t k = 0;
  for (double c : cuts) {
    if (v >= c) ++k;
  }
  return words[std::min(k, N - 1)];
}

std::optional<std::string> slot_fill(char slot, const ContactState& s, Style style) {
  const bool tok = style == Style::kTokenized;
  switch (slot) {
    case 'T': return std::string(to_string(s.texture));
    case 'S': return std::string(to_string(s.shape));
    case 'D':
      if (!s.depth_valid) return std::nullopt;
      return tok ? bin_encode(Attribute::kDepth, std::clamp(s.depth_mm, 0.0, 4.0))
                 : std::string(bucket(kDepthWords, s.depth_mm, {0.5, 2.0}));
    case 'P': {
      if (!s.centroid) return std::nullopt;
      const double u = std::clamp(s.centroid->x(), 0.0, 1.0), v = std::clamp(s.centroid->y(), 0.0, 1.0);
      if (tok) return bin_encode(Attribute::kPosX, u) + " " + bin_encode(Attribute::kPosY, v);
      return "the " + std::string(bucket(kRowWords, v, {1.0 / 3, 2.0 / 3})) + " " +
             std::string(bucket(kColumnWords, u, {1.0 / 3, 2.0 / 3}));
    }
    case 'A':
      if (s.area_fraction < kAreaMin) return std::nullopt;
      return tok ? bin_encode(Attribute::kArea, std::min(s.area_fraction, 1.0))
                 : std::string(bucket(kAreaWords, s.area_fraction, {0.05, 0.15}));
    case 'X': {
      if (!s.principal_axis_deg) return std::nullopt;
      const double a = wrap_angle(*s.principal_axis_deg, 180.0);
      if (tok) return bin_encode(Attribute::kPrincipal, a);
      return std::string(kAxisWords[static_cast<int>(std::floor(a / 45.0 + 0.5)) % 4]);
    }
    case 'L': {
      if (!s.slide_deg) return std::nullopt;
      const double a = wrap_angle(*s.slide_deg, 360.0);
      if (tok) return bin_encode(Attribute::kSlide, a);
      return std::string(kCompassWords[static_cast<int>(std::floor(a / 45.0 + 0.5)) % 8]);
    }
    case 'W':
      if (!s.twist) return std::nullopt;
      return tok ? twist_token(*s.twist) : std::string(kTwistWords[static_cast<int>(*s.twist)]);
  }
  throw std::logic_error("unknown template slot");
}

}  // namespace

Description describe(const ContactState& state, Style style, int variant, const Vocabulary& vocab) {
  if (!state.depth_valid) throw std::invalid_argument("describe needs a valid depth attribute");
  if (variant < 0 || variant >= kNumVariants) throw std::out_of_range("template variant must be in [0, 10)");
  std::string text;
  for (std::string_view clause : kTemplates[variant]) {
    if (clause.empty()) continue;
    std::string filled;
    bool keep = true;
    for (std::size_t i = 0; i < clause.size(); ++i) {
      if (clause[i] == '{') {
        const auto fill = slot_fill(clause[i + 1], state, style);
        if (!fill) {
          keep = false;
          break;
        }
        filled += *fill;
        i += 2;
      } else {
        filled += clause[i];
      }
    }
    if (keep) text += filled;
  }
  if (!text.empty() && text.front() == ',') text.erase(0, 1);
  while (!text.empty() && text.front() == ' ') text.erase(0, 1);
  return {text, encode(split_words(text), vocab)};
}

}  // namespace fgcltp::lang
