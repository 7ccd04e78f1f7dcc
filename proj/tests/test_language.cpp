#include "fgcltp/language.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <set>

using namespace fgcltp;
using namespace fgcltp::lang;

namespace {

ContactState full_state() {
  ContactState s;
  s.depth_mm = 1.23;
  s.centroid = Vector2d(0.31, 0.77);
  s.area_fraction = 0.18;
  s.principal_axis_deg = 42.4;
  s.slide_deg = 250.2;
  s.twist = Twist::kClockwise;
  s.shape = Shape::kRidge;
  s.texture = Texture::kBumpy;
  return s;
}

std::multiset<std::string> numeric_tokens(const TokenSequence& seq, const Vocabulary& v) {
  std::multiset<std::string> out;
  for (int i = 0; i < seq.length; ++i) {
    if (v.learnable(seq.ids[i])) out.insert(v.token(seq.ids[i]));
  }
  return out;
}

}  // namespace

TEST(BinEncode, Examples) {
  EXPECT_EQ(bin_encode(Attribute::kDepth, 0.0), "<depth_0.0>");
  EXPECT_EQ(bin_encode(Attribute::kDepth, 1.23), "<depth_1.2>");
  EXPECT_EQ(bin_encode(Attribute::kDepth, 4.0), "<depth_4.0>");
  EXPECT_EQ(bin_encode(Attribute::kArea, 1.0), "<area_1.0>");
  EXPECT_EQ(bin_encode(Attribute::kArea, 0.01), "<area_0.01>");
  EXPECT_EQ(bin_encode(Attribute::kPrincipal, 0.0), "<principal_0>");
  EXPECT_EQ(bin_encode(Attribute::kPrincipal, 179.6), "<principal_0>");
  EXPECT_EQ(bin_encode(Attribute::kSlide, 359.4), "<slide_359>");
  EXPECT_EQ(bin_encode(Attribute::kPosX, 0.0), "<posx_0>");
  EXPECT_EQ(bin_encode(Attribute::kPosY, 1.0), "<posy_19>");
}

TEST(BinEncode, RoundHalfUpAtEdges) {
  EXPECT_EQ(bin_encode(Attribute::kDepth, 1.25), "<depth_1.3>");
  EXPECT_EQ(bin_encode(Attribute::kDepth, 0.05), "<depth_0.1>");
  EXPECT_EQ(bin_encode(Attribute::kSlide, 10.5), "<slide_11>");
}

TEST(BinEncode, OutOfRange) {
  EXPECT_THROW(bin_encode(Attribute::kDepth, -0.1), RangeError);
  EXPECT_THROW(bin_encode(Attribute::kDepth, 4.2), RangeError);
  EXPECT_THROW(bin_encode(Attribute::kArea, 1.5), RangeError);
  EXPECT_THROW(bin_encode(Attribute::kSlide, 360.0), RangeError);
  EXPECT_THROW(bin_encode(Attribute::kPosX, std::nan("")), RangeError);
}

TEST(BinDecode, Examples) {
  EXPECT_DOUBLE_EQ(bin_decode("<area_0.50>"), 0.50);
  EXPECT_DOUBLE_EQ(bin_decode("<principal_179>"), 179.0);
  EXPECT_DOUBLE_EQ(bin_decode("<depth_4.0>"), 4.0);
  EXPECT_THROW(bin_decode("pressed"), TokenTypeError);
  EXPECT_THROW(bin_decode("<twist_cw>"), TokenTypeError);
}

TEST(BinRoundTrip, WithinHalfABinEverywhere) {
  std::mt19937_64 rng(15);
  const std::map<Attribute, std::pair<double, double>> ranges = {
      {Attribute::kDepth, {0.0, 4.0}},     {Attribute::kArea, {0.005, 1.0}}, {Attribute::kPrincipal, {0.0, 180.0}},
      {Attribute::kSlide, {0.0, 360.0}},   {Attribute::kPosX, {0.0, 1.0}},   {Attribute::kPosY, {0.0, 1.0}},
  };
  for (const auto& [attr, r] : ranges) {
    std::uniform_real_distribution<double> u(r.first, r.second);
    const BinSpec& b = bin_spec(attr);
    for (int k = 0; k < 1000; ++k) {
      const double v = u(rng);
      const double back = bin_decode(bin_encode(attr, v));
      const double err = b.period > 0 ? angular_distance(back, v, b.period) : std::abs(back - v);
      ASSERT_LE(err, b.step / 2 + 1e-9) << b.prefix << " " << v;
    }
  }
}

TEST(BinEncode, DistinctCentersGiveDistinctTokens) {
  for (Attribute a : {Attribute::kDepth, Attribute::kArea, Attribute::kSlide, Attribute::kPosX}) {
    const BinSpec& b = bin_spec(a);
    std::set<std::string> seen;
    for (int k = b.first; k <= b.last; ++k) {
      const double center = a == Attribute::kPosX ? (k + 0.5) * b.step : k * b.step;
      seen.insert(bin_encode(a, center));
    }
    EXPECT_EQ(seen.size(), static_cast<std::size_t>(b.last - b.first + 1)) << b.prefix;
  }
}

TEST(Vocabulary, LayoutAndMask) {
  const Vocabulary& v = Vocabulary::standard();
  EXPECT_EQ(v.token(v.pad_id()), "<pad>");
  EXPECT_EQ(v.token(v.unk_id()), "<unk>");
  EXPECT_EQ(v.size() - v.num_base(), 41 + 100 + 360 + 360 + 20 + 20 + 3);
  const auto mask = v.learnable_mask();
  for (int i = 0; i < v.size(); ++i) {
    EXPECT_EQ(mask[i] == 1, v.token(i).front() == '<' && i >= 2) << v.token(i);
  }
  for (const char* t : {"<depth_0.0>", "<depth_4.0>", "<area_0.01>", "<area_1.0>", "<principal_359>", "<posy_19>",
                        "<twist_ccw>"}) {
    EXPECT_TRUE(v.contains(t)) << t;
  }
  EXPECT_EQ(v.id("zebra"), v.unk_id());
}

TEST(Vocabulary, DeterministicAndSerializable) {
  const Vocabulary& v = Vocabulary::standard();
  const Vocabulary back = Vocabulary::from_json(v.to_json());
  EXPECT_EQ(back.tokens(), v.tokens());
  EXPECT_EQ(back.num_base(), v.num_base());
  EXPECT_EQ(back.hash(), v.hash());
  std::vector<std::string> numeric(v.tokens().begin() + v.num_base(), v.tokens().end());
  std::vector<std::string> base(v.tokens().begin(), v.tokens().begin() + v.num_base());
  EXPECT_EQ(Vocabulary(base, numeric).hash(), v.hash());
  base.push_back("extra");
  EXPECT_NE(Vocabulary(base, numeric).hash(), v.hash());
}

TEST(Describe, DepthOnlyTokenized) {
  ContactState s;
  s.depth_mm = 1.2;
  s.area_fraction = 0.0;
  const Description d = describe(s, Style::kTokenized, 0);
  const auto nums = numeric_tokens(d.tokens, Vocabulary::standard());
  EXPECT_EQ(nums.count("<depth_1.2>"), 1u);
  for (const auto& t : nums) {
    EXPECT_EQ(t.find("slide"), std::string::npos);
    EXPECT_EQ(t.find("twist"), std::string::npos);
    EXPECT_EQ(t.find("principal"), std::string::npos);
  }
}

TEST(Describe, VariantsParaphraseWithoutChangingContent) {
  const ContactState s = full_state();
  const Vocabulary& v = Vocabulary::standard();
  const Description d0 = describe(s, Style::kTokenized, 0);
  const auto ref = numeric_tokens(d0.tokens, v);
  for (int k = 1; k < kNumVariants; ++k) {
    const Description dk = describe(s, Style::kTokenized, k);
    EXPECT_NE(dk.tokens, d0.tokens) << k;
    EXPECT_EQ(numeric_tokens(dk.tokens, v), ref) << k;
  }
}

TEST(Describe, FullStateCarriesEverySlotFamily) {
  const Vocabulary& v = Vocabulary::standard();
  for (int k = 0; k < kNumVariants; ++k) {
    const Description d = describe(full_state(), Style::kTokenized, k);
    std::string joined;
    for (const auto& t : numeric_tokens(d.tokens, v)) joined += t;
    for (const char* family : {"<depth_", "<posx_", "<posy_", "<area_", "<principal_", "<slide_", "<twist_"}) {
      EXPECT_NE(joined.find(family), std::string::npos) << family << " variant " << k;
    }
    EXPECT_NE(d.text.find("bumpy"), std::string::npos);
    EXPECT_NE(d.text.find("ridge"), std::string::npos);
    // Every word is in vocabulary.
    for (int i = 0; i < d.tokens.length; ++i) EXPECT_NE(d.tokens.ids[i], v.unk_id()) << d.text;
  }
}

TEST(Describe, PlainStyleUsesQualitativeWords) {
  const Vocabulary& v = Vocabulary::standard();
  ContactState s = full_state();
  for (auto [depth, word] : std::vector<std::pair<double, std::string>>{{0.3, "lightly"}, {1.2, "moderately"}, {2.5, "deeply"}}) {
    s.depth_mm = depth;
    const Description d = describe(s, Style::kPlain, 0);
    EXPECT_NE(d.text.find(word), std::string::npos) << d.text;
    EXPECT_TRUE(numeric_tokens(d.tokens, v).empty()) << d.text;
  }
}

TEST(Describe, DepthChangeTouchesOnlyTheDepthToken) {
  ContactState a = full_state(), b = full_state();
  b.depth_mm = a.depth_mm + 0.4;
  for (int k = 0; k < kNumVariants; ++k) {
    const TokenSequence ta = describe(a, Style::kTokenized, k).tokens;
    const TokenSequence tb = describe(b, Style::kTokenized, k).tokens;
    ASSERT_EQ(ta.length, tb.length);
    int diffs = 0;
    for (int i = 0; i < ta.length; ++i) diffs += ta.ids[i] != tb.ids[i];
    EXPECT_EQ(diffs, 1) << k;
  }
}

TEST(Describe, Errors) {
  ContactState s;
  s.depth_valid = false;
  EXPECT_THROW(describe(s, Style::kTokenized, 0), std::invalid_argument);
  EXPECT_THROW(describe(full_state(), Style::kTokenized, 10), std::out_of_range);
}

TEST(TokenSequence, PaddingIsASuffix) {
  const Description d = describe(full_state(), Style::kTokenized, 3);
  ASSERT_GT(d.tokens.length, 0);
  for (int i = 0; i < kMaxTokens; ++i) {
    EXPECT_EQ(d.tokens.ids[i] == 0, i >= d.tokens.length);
    EXPECT_LT(d.tokens.ids[i], Vocabulary::standard().size());
  }
}

TEST(SplitWords, LowercasesAndDropsPunctuation) {
  EXPECT_EQ(split_words("A Bumpy, ridge object."), (std::vector<std::string>{"a", "bumpy", "ridge", "object"}));
  EXPECT_EQ(split_words("pressed <depth_1.2> at"), (std::vector<std::string>{"pressed", "<depth_1.2>", "at"}));
}

TEST(Style, Parse) {
  EXPECT_EQ(parse_style("plain"), Style::kPlain);
  EXPECT_EQ(parse_style(to_string(Style::kTokenized)), Style::kTokenized);
  EXPECT_THROW(parse_style("fancy"), std::invalid_argument);
}
