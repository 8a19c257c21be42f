#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace ctxforge {

/// Raised when a value violates a domain-type invariant.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class GroundTruthEmotion { Neutral, Happy, Angry, Sad };

// Neutral plus the eight Plutchik emotions.
enum class EmotionCategory { Neutral, Joy, Anticipation, Anger, Disgust, Sadness, Surprise, Fear, Trust };

enum class StyleCategory { Cute, Cool, Quiet, Polite, Intellectual, Honest, Clear, Gentle, Gravelly, Vibrant };

enum class Slot { Intention, Emotion, Style };

inline constexpr std::array kGroundTruthEmotions{GroundTruthEmotion::Neutral, GroundTruthEmotion::Happy,
                                                 GroundTruthEmotion::Angry, GroundTruthEmotion::Sad};

inline constexpr std::array kEmotionCategories{
    EmotionCategory::Neutral, EmotionCategory::Joy,     EmotionCategory::Anticipation,
    EmotionCategory::Anger,   EmotionCategory::Disgust, EmotionCategory::Sadness,
    EmotionCategory::Surprise, EmotionCategory::Fear,   EmotionCategory::Trust};

inline constexpr std::array kStyleCategories{
    StyleCategory::Cute,   StyleCategory::Cool,  StyleCategory::Quiet,  StyleCategory::Polite,
    StyleCategory::Intellectual, StyleCategory::Honest, StyleCategory::Clear, StyleCategory::Gentle,
    StyleCategory::Gravelly, StyleCategory::Vibrant};

inline constexpr std::array kSlots{Slot::Intention, Slot::Emotion, Slot::Style};

std::string_view to_string(GroundTruthEmotion e);
std::string_view to_string(EmotionCategory e);
std::string_view to_string(StyleCategory s);
std::string_view to_string(Slot s);

// Case-insensitive on the canonical names.
std::optional<GroundTruthEmotion> parse_ground_truth(std::string_view s);
std::optional<EmotionCategory> parse_emotion_category(std::string_view s);
std::optional<StyleCategory> parse_style_category(std::string_view s);
std::optional<Slot> parse_slot(std::string_view s);

struct Turn {
  std::string dialogue_id;
  int index = 0;  // 1-based
  std::string speaker;
  std::string content;
  std::optional<GroundTruthEmotion> ground_truth_emotion;
};

struct Dialogue {
  std::string id;
  std::string setting;
  std::vector<Turn> turns;

  [[nodiscard]] int size() const { return static_cast<int>(turns.size()); }
  /// 1-based lookup; throws std::out_of_range.
  [[nodiscard]] const Turn& turn(int index) const;
};

/// Throws ValidationError unless turns are non-empty, indexed 1..N without
/// gaps, carry the dialogue's id and have non-blank content.
void validate(const Dialogue& dialogue);

/// Inclusive 1-based turn range.
struct TurnWindow {
  int start = 1;
  int end = 1;

  [[nodiscard]] int size() const { return end - start + 1; }
  [[nodiscard]] bool contains(int index) const { return index >= start && index <= end; }
  [[nodiscard]] std::string label() const;  // "start-end"
  friend bool operator==(const TurnWindow&, const TurnWindow&) = default;
};

struct TurnAnnotation {
  int turn_index = 0;
  std::string intention;
  std::string emotion;
  bool emotion_in_vocabulary = false;
  std::string style;
  bool style_in_vocabulary = false;
  std::string source_window;

  [[nodiscard]] const std::string& word(Slot slot) const;
  friend bool operator==(const TurnAnnotation&, const TurnAnnotation&) = default;
};

struct ReliabilityScore {
  int value = 0;
  std::string annotator;
  std::int64_t timestamp_ms = 0;

  /// Throws ValidationError when value is outside 1..5.
  static ReliabilityScore make(int value, std::string annotator, std::int64_t timestamp_ms);
  friend bool operator==(const ReliabilityScore&, const ReliabilityScore&) = default;
};

inline constexpr int kMinReliability = 1;
inline constexpr int kMaxReliability = 5;

/// Trims surrounding whitespace and punctuation, folds full-width ASCII to
/// half-width, lowercases cased scripts and collapses inner whitespace runs.
/// Returns "" when the input holds no word character. Idempotent.
std::string canonicalize_word(std::string_view raw);

/// Maps canonical category names and their registered synonyms to the closed
/// emotion and style vocabularies.
class CategoryRegistry {
 public:
  /// Built from the shipped data/categories.ja.json.
  static CategoryRegistry defaults();
  /// Bare canonical names, no synonyms.
  static CategoryRegistry canonical_only();
  /// { "emotion": {canonical: [synonyms...]}, "style": {...} }
  static CategoryRegistry from_json(std::string_view json_text);
  static CategoryRegistry from_file(const std::string& path);

  [[nodiscard]] std::optional<EmotionCategory> emotion_of(std::string_view word) const;
  [[nodiscard]] std::optional<StyleCategory> style_of(std::string_view word) const;
  [[nodiscard]] bool is_emotion(std::string_view word) const { return emotion_of(word).has_value(); }
  [[nodiscard]] bool is_style(std::string_view word) const { return style_of(word).has_value(); }

  [[nodiscard]] const std::vector<std::string>& synonyms(EmotionCategory c) const;
  [[nodiscard]] const std::vector<std::string>& synonyms(StyleCategory c) const;

  [[nodiscard]] std::string to_json() const;

 private:
  std::map<EmotionCategory, std::vector<std::string>> emotion_synonyms_;
  std::map<StyleCategory, std::vector<std::string>> style_synonyms_;
  std::map<std::string, EmotionCategory, std::less<>> emotion_index_;
  std::map<std::string, StyleCategory, std::less<>> style_index_;

  void rebuild_index();
};

}  // namespace ctxforge
