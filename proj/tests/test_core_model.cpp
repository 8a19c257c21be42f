#include <doctest.h>

#include "ctxforge/core_model.hpp"
#include "ctxforge/text.hpp"
#include "support.hpp"

using namespace ctxforge;

TEST_CASE("utf8 decoding is total and round-trips valid input") {
  const std::string s = "喜び joy ÉLAN 😀";
  CHECK(text::encode_utf8(text::decode_utf8(s)) == s);
  const std::string bad = "a\xff\xfe" "b";
  const auto cps = text::decode_utf8(bad);
  REQUIRE(cps.size() == 4);
  CHECK(cps[1] == 0xFFFD);
  CHECK(text::length_cp("喜び") == 2);
}

TEST_CASE("script classification") {
  CHECK(text::script_of(U'あ') == text::Script::Hiragana);
  CHECK(text::script_of(U'ア') == text::Script::Katakana);
  CHECK(text::script_of(U'喜') == text::Script::Han);
  CHECK(text::script_of(U'a') == text::Script::Latin);
  CHECK(text::script_of(U'д') == text::Script::Cyrillic);
  CHECK(text::script_of(U'한') == text::Script::Hangul);
  CHECK(text::is_simplified_only_han(U'们'));
  CHECK_FALSE(text::is_simplified_only_han(U'喜'));
}

TEST_CASE("fnv1a64 reference values") {
  CHECK(text::fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(text::fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(text::fnv1a64("foobar") == 0x85944171f73967e8ULL);
}

TEST_CASE("canonicalize_word punctuation fixtures") {
  struct Case {
    const char* raw;
    const char* expected;
  };
  const Case cases[] = {
      {"喜び。", "喜び"},
      {"「喜び」", "喜び"},
      {"  Joy! ", "joy"},
      {"ＪＯＹ", "joy"},
      {"(期待)", "期待"},
      {"『信頼』、", "信頼"},
      {"**驚き**", "驚き"},
      {"...", ""},
      {"喜び　です", "喜び です"},
      {"anti\t \tcipation", "anti cipation"},
      {"悲しみ…", "悲しみ"},
      {"“trust”", "trust"},
      {"【共感】", "共感"},
      {"喜び！？", "喜び"},
      {"-共感-", "共感"},
      {"Ｆｅａｒ.", "fear"},
      {"〜穏やか〜", "穏やか"},
      {"ÉLAN", "élan"},
      {"挨拶：", "挨拶"},
      {"'quiet'", "quiet"},
      {"well-being", "well-being"},
      {"", ""},
  };
  for (const auto& c : cases) {
    CAPTURE(c.raw);
    CHECK(canonicalize_word(c.raw) == c.expected);
    CHECK(canonicalize_word(canonicalize_word(c.raw)) == canonicalize_word(c.raw));
  }
}

TEST_CASE("default registry maps synonyms to canonical categories") {
  const auto reg = CategoryRegistry::defaults();
  CHECK(reg.emotion_of("joy") == EmotionCategory::Joy);
  CHECK(reg.emotion_of("喜び") == EmotionCategory::Joy);
  CHECK(reg.emotion_of("「悲しみ」") == EmotionCategory::Sadness);
  CHECK(reg.style_of("丁寧") == StyleCategory::Polite);
  CHECK(reg.style_of("Polite") == StyleCategory::Polite);
  CHECK_FALSE(reg.emotion_of("共感").has_value());
  for (auto e : kEmotionCategories) CHECK(reg.is_emotion(to_string(e)));
  for (auto s : kStyleCategories) CHECK(reg.is_style(to_string(s)));
  // Round trip through JSON keeps every mapping.
  const auto again = CategoryRegistry::from_json(reg.to_json());
  CHECK(again.emotion_of("嬉しさ") == EmotionCategory::Joy);
}

TEST_CASE("registry rejects malformed JSON") {
  CHECK_THROWS_AS(CategoryRegistry::from_json("{"), ValidationError);
  CHECK_THROWS_AS(CategoryRegistry::from_json(R"({"emotion": {"bogus": ["x"]}})"), ValidationError);
  CHECK_THROWS_AS(CategoryRegistry::from_json(R"({"emotion": {"joy": "x"}})"), ValidationError);
}

TEST_CASE("enum names round trip") {
  for (auto g : kGroundTruthEmotions) CHECK(parse_ground_truth(to_string(g)) == g);
  for (auto e : kEmotionCategories) CHECK(parse_emotion_category(to_string(e)) == e);
  for (auto s : kStyleCategories) CHECK(parse_style_category(to_string(s)) == s);
  for (auto s : kSlots) CHECK(parse_slot(to_string(s)) == s);
  CHECK(parse_ground_truth("happy") == GroundTruthEmotion::Happy);
  CHECK_FALSE(parse_ground_truth("excited").has_value());
}

TEST_CASE("dialogue validation") {
  auto d = fixtures::make_dialogue("d1", 4);
  CHECK_NOTHROW(validate(d));
  CHECK(d.turn(4).index == 4);
  CHECK_THROWS_AS((void)d.turn(5), std::out_of_range);

  auto gap = d;
  gap.turns[2].index = 7;
  CHECK_THROWS_AS(validate(gap), ValidationError);

  auto blank = d;
  blank.turns[1].content = "   ";
  CHECK_THROWS_AS(validate(blank), ValidationError);

  Dialogue empty;
  empty.id = "e";
  CHECK_THROWS_AS(validate(empty), ValidationError);
}

TEST_CASE("reliability score range") {
  CHECK(ReliabilityScore::make(1, "a", 0).value == 1);
  CHECK(ReliabilityScore::make(5, "a", 0).value == 5);
  CHECK_THROWS_AS(ReliabilityScore::make(0, "a", 0), ValidationError);
  CHECK_THROWS_AS(ReliabilityScore::make(6, "a", 0), ValidationError);
}

TEST_CASE("turn window") {
  TurnWindow w{3, 7};
  CHECK(w.size() == 5);
  CHECK(w.contains(3));
  CHECK(w.contains(7));
  CHECK_FALSE(w.contains(8));
  CHECK(w.label() == "3-7");
}
