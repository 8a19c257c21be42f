#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "ctxforge/core_model.hpp"

namespace ctxforge {

class TemplateError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Prompt template split around the dialogue-lines block.
///
/// Template files are UTF-8 text with named placeholders. `{{lines}}` must
/// occur exactly once; text before it is the setting preamble (must contain
/// `{{setting}}`), text after it is the request suffix (must contain
/// `{{emotion_categories}}` and `{{style_categories}}`). `{{answer_format}}`
/// and `{{language}}` are optional: when absent the standard answer-format and
/// answer-language instructions are appended to the suffix.
struct PromptTemplate {
  std::string setting_preamble;
  std::string request_suffix;
  std::string target_language = "ja";
  std::string default_setting;
  std::string version;

  static PromptTemplate builtin(std::string target_language = "ja");
  static PromptTemplate from_text(std::string_view text, std::string target_language, std::string version);
  static PromptTemplate from_file(const std::string& path, std::string target_language = "ja");
};

struct Prompt {
  std::string text;
  TurnWindow window;
  std::string dialogue_id;
  std::string template_version;

  friend bool operator==(const Prompt&, const Prompt&) = default;
};

/// "<index> <speaker> <content>" on a single line; newlines inside fields
/// become single spaces and surrounding whitespace is dropped.
std::string render_line(const Turn& turn);

struct RenderedLine {
  int index = 0;
  std::string speaker;
  std::string content;
};

/// Inverse of render_line for speakers without inner whitespace.
std::optional<RenderedLine> parse_rendered_line(std::string_view line);

/// English display name for a language tag ("ja" -> "Japanese").
std::string language_name(std::string_view tag);

/// "neutral, joy, ..." or, when the registry carries target-language
/// synonyms, "中立 (neutral), 喜び (joy), ...".
std::string render_emotion_categories(const CategoryRegistry& registry, bool with_synonyms);
std::string render_style_categories(const CategoryRegistry& registry, bool with_synonyms);

/// Renders the request suffix alone (used to check the category-list invariant).
std::string render_request_suffix(const PromptTemplate& tmpl, const CategoryRegistry& registry);

/// Preamble with the setting substituted, the window's rendered lines, then
/// the request suffix. Throws std::out_of_range when the window is outside
/// the dialogue.
Prompt build_prompt(const Dialogue& dialogue, TurnWindow window, const PromptTemplate& tmpl,
                    const CategoryRegistry& registry);

/// The one-line-per-turn answer-format instruction embedded in every prompt.
std::string_view answer_format_instruction();

}  // namespace ctxforge
