#include "ctxforge/core_model.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "ctxforge/text.hpp"
#include "default_categories.hpp"

namespace ctxforge {

namespace {

template <typename Enum, std::size_t N>
std::optional<Enum> parse_named(std::string_view s, const std::array<Enum, N>& all) {
  const std::string want = canonicalize_word(s);
  for (Enum e : all) {
    if (to_string(e) == want) return e;
  }
  return std::nullopt;
}

std::string lower_ascii(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

}  // namespace

std::string_view to_string(GroundTruthEmotion e) {
  switch (e) {
    case GroundTruthEmotion::Neutral: return "Neutral";
    case GroundTruthEmotion::Happy: return "Happy";
    case GroundTruthEmotion::Angry: return "Angry";
    case GroundTruthEmotion::Sad: return "Sad";
  }
  return "?";
}

std::string_view to_string(EmotionCategory e) {
  switch (e) {
    case EmotionCategory::Neutral: return "neutral";
    case EmotionCategory::Joy: return "joy";
    case EmotionCategory::Anticipation: return "anticipation";
    case EmotionCategory::Anger: return "anger";
    case EmotionCategory::Disgust: return "disgust";
    case EmotionCategory::Sadness: return "sadness";
    case EmotionCategory::Surprise: return "surprise";
    case EmotionCategory::Fear: return "fear";
    case EmotionCategory::Trust: return "trust";
  }
  return "?";
}

std::string_view to_string(StyleCategory s) {
  switch (s) {
    case StyleCategory::Cute: return "cute";
    case StyleCategory::Cool: return "cool";
    case StyleCategory::Quiet: return "quiet";
    case StyleCategory::Polite: return "polite";
    case StyleCategory::Intellectual: return "intellectual";
    case StyleCategory::Honest: return "honest";
    case StyleCategory::Clear: return "clear";
    case StyleCategory::Gentle: return "gentle";
    case StyleCategory::Gravelly: return "gravelly";
    case StyleCategory::Vibrant: return "vibrant";
  }
  return "?";
}

std::string_view to_string(Slot s) {
  switch (s) {
    case Slot::Intention: return "intention";
    case Slot::Emotion: return "emotion";
    case Slot::Style: return "style";
  }
  return "?";
}

std::optional<GroundTruthEmotion> parse_ground_truth(std::string_view s) {
  const std::string want = lower_ascii(text::trim_ascii(s));
  for (auto e : kGroundTruthEmotions) {
    if (lower_ascii(to_string(e)) == want) return e;
  }
  return std::nullopt;
}

std::optional<EmotionCategory> parse_emotion_category(std::string_view s) {
  return parse_named(s, kEmotionCategories);
}

std::optional<StyleCategory> parse_style_category(std::string_view s) {
  return parse_named(s, kStyleCategories);
}

std::optional<Slot> parse_slot(std::string_view s) { return parse_named(s, kSlots); }

const Turn& Dialogue::turn(int index) const {
  if (index < 1 || index > size()) {
    throw std::out_of_range("turn " + std::to_string(index) + " outside dialogue " + id);
  }
  return turns[static_cast<std::size_t>(index - 1)];
}

void validate(const Dialogue& dialogue) {
  if (dialogue.id.empty()) throw ValidationError("dialogue id is empty");
  if (dialogue.turns.empty()) throw ValidationError("dialogue " + dialogue.id + " has no turns");
  int expected = 1;
  for (const auto& t : dialogue.turns) {
    if (t.index != expected) {
      throw ValidationError("dialogue " + dialogue.id + ": expected turn index " +
                            std::to_string(expected) + ", got " + std::to_string(t.index));
    }
    if (t.dialogue_id != dialogue.id) {
      throw ValidationError("turn " + std::to_string(t.index) + " belongs to dialogue '" +
                            t.dialogue_id + "', not '" + dialogue.id + "'");
    }
    const auto cps = text::decode_utf8(t.content);
    if (std::all_of(cps.begin(), cps.end(), [](char32_t c) { return text::is_space(c); })) {
      throw ValidationError("dialogue " + dialogue.id + " turn " + std::to_string(t.index) +
                            ": content is blank");
    }
    ++expected;
  }
}

std::string TurnWindow::label() const { return std::to_string(start) + "-" + std::to_string(end); }

const std::string& TurnAnnotation::word(Slot slot) const {
  switch (slot) {
    case Slot::Intention: return intention;
    case Slot::Emotion: return emotion;
    case Slot::Style: return style;
  }
  return intention;
}

ReliabilityScore ReliabilityScore::make(int value, std::string annotator, std::int64_t timestamp_ms) {
  if (value < kMinReliability || value > kMaxReliability) {
    throw ValidationError("reliability score must be an integer in 1..5, got " + std::to_string(value));
  }
  return ReliabilityScore{value, std::move(annotator), timestamp_ms};
}

std::string canonicalize_word(std::string_view raw) {
  const auto cps = text::decode_utf8(raw);
  std::u32string folded;
  folded.reserve(cps.size());
  for (char32_t cp : cps) folded.push_back(text::to_lower(text::fold_width(cp)));

  std::size_t b = 0;
  std::size_t e = folded.size();
  while (b < e && !text::is_word_char(folded[b])) ++b;
  while (e > b && !text::is_word_char(folded[e - 1])) --e;
  if (b == e) return {};

  std::u32string out;
  out.reserve(e - b);
  bool in_space = false;
  for (std::size_t i = b; i < e; ++i) {
    const char32_t cp = folded[i];
    if (text::is_space(cp)) {
      in_space = true;
      continue;
    }
    if (in_space) out.push_back(U' ');
    in_space = false;
    out.push_back(cp);
  }
  return text::encode_utf8(out);
}

CategoryRegistry CategoryRegistry::defaults() { return from_json(kDefaultCategoriesJson); }

CategoryRegistry CategoryRegistry::canonical_only() {
  CategoryRegistry r;
  for (auto c : kEmotionCategories) r.emotion_synonyms_[c] = {};
  for (auto c : kStyleCategories) r.style_synonyms_[c] = {};
  r.rebuild_index();
  return r;
}

CategoryRegistry CategoryRegistry::from_json(std::string_view json_text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(std::string("category registry: ") + e.what());
  }
  if (!doc.is_object()) throw ValidationError("category registry: top level must be an object");

  CategoryRegistry r = canonical_only();
  auto read_section = [&](const char* key, auto parse, auto& target) {
    if (!doc.contains(key)) return;
    const auto& section = doc.at(key);
    if (!section.is_object()) throw ValidationError(std::string("category registry: '") + key + "' must be an object");
    for (const auto& [name, syns] : section.items()) {
      auto cat = parse(name);
      if (!cat) throw ValidationError(std::string("category registry: unknown ") + key + " category '" + name + "'");
      if (!syns.is_array()) throw ValidationError("category registry: synonyms of '" + name + "' must be an array");
      auto& list = target[*cat];
      list.clear();
      for (const auto& s : syns) {
        if (!s.is_string()) throw ValidationError("category registry: synonym of '" + name + "' is not a string");
        std::string canon = canonicalize_word(s.template get<std::string>());
        if (canon.empty()) throw ValidationError("category registry: empty synonym for '" + name + "'");
        if (std::find(list.begin(), list.end(), canon) == list.end()) list.push_back(std::move(canon));
      }
    }
  };
  read_section("emotion", parse_emotion_category, r.emotion_synonyms_);
  read_section("style", parse_style_category, r.style_synonyms_);
  r.rebuild_index();
  return r;
}

CategoryRegistry CategoryRegistry::from_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open category registry " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

void CategoryRegistry::rebuild_index() {
  emotion_index_.clear();
  style_index_.clear();
  for (const auto& [cat, syns] : emotion_synonyms_) {
    emotion_index_.emplace(std::string(to_string(cat)), cat);
    for (const auto& s : syns) {
      auto [it, inserted] = emotion_index_.emplace(s, cat);
      if (!inserted && it->second != cat) {
        throw ValidationError("category registry: emotion synonym '" + s + "' maps to two categories");
      }
    }
  }
  for (const auto& [cat, syns] : style_synonyms_) {
    style_index_.emplace(std::string(to_string(cat)), cat);
    for (const auto& s : syns) {
      auto [it, inserted] = style_index_.emplace(s, cat);
      if (!inserted && it->second != cat) {
        throw ValidationError("category registry: style synonym '" + s + "' maps to two categories");
      }
    }
  }
}

std::optional<EmotionCategory> CategoryRegistry::emotion_of(std::string_view word) const {
  auto it = emotion_index_.find(canonicalize_word(word));
  if (it == emotion_index_.end()) return std::nullopt;
  return it->second;
}

std::optional<StyleCategory> CategoryRegistry::style_of(std::string_view word) const {
  auto it = style_index_.find(canonicalize_word(word));
  if (it == style_index_.end()) return std::nullopt;
  return it->second;
}

const std::vector<std::string>& CategoryRegistry::synonyms(EmotionCategory c) const {
  return emotion_synonyms_.at(c);
}

const std::vector<std::string>& CategoryRegistry::synonyms(StyleCategory c) const {
  return style_synonyms_.at(c);
}

std::string CategoryRegistry::to_json() const {
  nlohmann::ordered_json doc;
  doc["emotion"] = nlohmann::ordered_json::object();
  doc["style"] = nlohmann::ordered_json::object();
  for (auto c : kEmotionCategories) doc["emotion"][std::string(to_string(c))] = emotion_synonyms_.at(c);
  for (auto c : kStyleCategories) doc["style"][std::string(to_string(c))] = style_synonyms_.at(c);
  return doc.dump(2);
}

}  // namespace ctxforge
