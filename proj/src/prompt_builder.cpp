#include "ctxforge/prompt_builder.hpp"

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <vector>

#include "ctxforge/text.hpp"

namespace ctxforge {

namespace {

constexpr std::string_view kBuiltinTemplate =
    "You are helping to annotate an empathetic conversation.\n"
    "Dialogue setting: {{setting}}\n"
    "\n"
    "Each line below has the form \"<turn ID> <speaker> <utterance>\".\n"
    "\n"
    "{{lines}}\n"
    "\n"
    "For every line above, give three context words: (1) the intention of the speaker, "
    "(2) the emotion of the speaker, and (3) the speaking style that suits the line.\n"
    "Choose the emotion from: {{emotion_categories}}.\n"
    "Choose the speaking style from: {{style_categories}}.\n"
    "{{answer_format}}\n"
    "{{language}}\n";

constexpr std::string_view kBuiltinVersion = "builtin-1";

constexpr std::string_view kDefaultSetting =
    "Chit-chat at a school between a teacher, who listens with empathy, and students.";

constexpr std::string_view kAnswerFormat =
    "Answer with exactly one line per dialogue line, in the form "
    "\"<turn ID>: <intention> / <emotion> / <style>\", using a single word for each item "
    "and writing nothing else.";

constexpr std::array<std::string_view, 6> kKnownPlaceholders{
    "setting", "lines", "emotion_categories", "style_categories", "answer_format", "language"};

std::size_t count_occurrences(std::string_view hay, std::string_view needle) {
  std::size_t n = 0;
  for (auto pos = hay.find(needle); pos != std::string_view::npos; pos = hay.find(needle, pos + needle.size())) ++n;
  return n;
}

// Single pass so substituted text is never re-scanned for placeholders.
std::string substitute(std::string_view tmpl, const std::map<std::string, std::string, std::less<>>& values) {
  std::string out;
  out.reserve(tmpl.size() + 256);
  std::size_t i = 0;
  while (i < tmpl.size()) {
    auto open = tmpl.find("{{", i);
    if (open == std::string_view::npos) {
      out.append(tmpl.substr(i));
      break;
    }
    auto close = tmpl.find("}}", open + 2);
    if (close == std::string_view::npos) {
      out.append(tmpl.substr(i));
      break;
    }
    out.append(tmpl.substr(i, open - i));
    auto name = tmpl.substr(open + 2, close - open - 2);
    auto it = values.find(name);
    if (it != values.end()) {
      out.append(it->second);
    } else {
      out.append(tmpl.substr(open, close + 2 - open));
    }
    i = close + 2;
  }
  return out;
}

void check_placeholders(std::string_view text) {
  for (auto open = text.find("{{"); open != std::string_view::npos; open = text.find("{{", open + 2)) {
    auto close = text.find("}}", open + 2);
    if (close == std::string_view::npos) throw TemplateError("unterminated placeholder in prompt template");
    auto name = text.substr(open + 2, close - open - 2);
    bool known = false;
    for (auto k : kKnownPlaceholders) known = known || k == name;
    if (!known) throw TemplateError("unknown placeholder {{" + std::string(name) + "}} in prompt template");
  }
}

std::string flatten_field(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '\r') {
      if (i + 1 < s.size() && s[i + 1] == '\n') ++i;
      out.push_back(' ');
    } else if (s[i] == '\n') {
      out.push_back(' ');
    } else {
      out.push_back(s[i]);
    }
  }
  // Trim ASCII and ideographic whitespace at both ends.
  auto cps = text::decode_utf8(out);
  std::size_t b = 0, e = cps.size();
  while (b < e && text::is_space(cps[b])) ++b;
  while (e > b && text::is_space(cps[e - 1])) --e;
  return text::encode_utf8(std::u32string_view(cps).substr(b, e - b));
}

template <typename Cat, std::size_t N>
std::string render_categories(const std::array<Cat, N>& all, const CategoryRegistry& registry, bool with_synonyms) {
  std::string out;
  for (std::size_t i = 0; i < N; ++i) {
    if (i) out += ", ";
    const auto& syns = registry.synonyms(all[i]);
    if (with_synonyms && !syns.empty()) {
      out += syns.front();
      out += " (";
      out += to_string(all[i]);
      out += ")";
    } else {
      out += to_string(all[i]);
    }
  }
  return out;
}

std::string language_instruction(std::string_view tag) {
  return "Write every word of the answer in " + language_name(tag) + ".";
}

}  // namespace

std::string_view answer_format_instruction() { return kAnswerFormat; }

std::string language_name(std::string_view tag) {
  static const std::map<std::string, std::string, std::less<>> names{
      {"ja", "Japanese"}, {"en", "English"}, {"zh", "Chinese"}, {"ko", "Korean"}};
  auto it = names.find(tag);
  return it == names.end() ? std::string(tag) : it->second;
}

PromptTemplate PromptTemplate::builtin(std::string target_language) {
  return from_text(kBuiltinTemplate, std::move(target_language), std::string(kBuiltinVersion));
}

PromptTemplate PromptTemplate::from_text(std::string_view text, std::string target_language, std::string version) {
  check_placeholders(text);
  constexpr std::string_view kLines = "{{lines}}";
  if (count_occurrences(text, kLines) != 1) throw TemplateError("prompt template must contain {{lines}} exactly once");
  const auto pos = text.find(kLines);
  PromptTemplate t;
  t.setting_preamble = std::string(text.substr(0, pos));
  t.request_suffix = std::string(text.substr(pos + kLines.size()));
  if (t.setting_preamble.find("{{setting}}") == std::string::npos) {
    throw TemplateError("prompt template preamble must contain {{setting}}");
  }
  for (std::string_view key : {"{{emotion_categories}}", "{{style_categories}}"}) {
    if (count_occurrences(t.request_suffix, key) != 1) {
      throw TemplateError("prompt template request must contain " + std::string(key) + " exactly once");
    }
  }
  t.target_language = std::move(target_language);
  t.default_setting = std::string(kDefaultSetting);
  t.version = std::move(version);
  return t;
}

PromptTemplate PromptTemplate::from_file(const std::string& path, std::string target_language) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw TemplateError("cannot open prompt template " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  const std::string body = ss.str();
  char hash[17];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(text::fnv1a64(body)));
  const std::string version = "file:" + std::filesystem::path(path).stem().string() + ":" + std::string(hash, 8);
  return from_text(body, std::move(target_language), version);
}

std::string render_line(const Turn& turn) {
  std::string line = std::to_string(turn.index);
  line += ' ';
  line += flatten_field(turn.speaker);
  line += ' ';
  line += flatten_field(turn.content);
  return line;
}

std::optional<RenderedLine> parse_rendered_line(std::string_view line) {
  auto sp1 = line.find(' ');
  if (sp1 == std::string_view::npos || sp1 == 0) return std::nullopt;
  auto sp2 = line.find(' ', sp1 + 1);
  if (sp2 == std::string_view::npos || sp2 == sp1 + 1) return std::nullopt;
  int index = 0;
  for (char c : line.substr(0, sp1)) {
    if (c < '0' || c > '9') return std::nullopt;
    index = index * 10 + (c - '0');
    if (index > 1'000'000) return std::nullopt;
  }
  return RenderedLine{index, std::string(line.substr(sp1 + 1, sp2 - sp1 - 1)), std::string(line.substr(sp2 + 1))};
}

std::string render_emotion_categories(const CategoryRegistry& registry, bool with_synonyms) {
  return render_categories(kEmotionCategories, registry, with_synonyms);
}

std::string render_style_categories(const CategoryRegistry& registry, bool with_synonyms) {
  return render_categories(kStyleCategories, registry, with_synonyms);
}

std::string render_request_suffix(const PromptTemplate& tmpl, const CategoryRegistry& registry) {
  const bool with_synonyms = tmpl.target_language != "en";
  std::map<std::string, std::string, std::less<>> values{
      {"emotion_categories", render_emotion_categories(registry, with_synonyms)},
      {"style_categories", render_style_categories(registry, with_synonyms)},
      {"answer_format", std::string(kAnswerFormat)},
      {"language", language_instruction(tmpl.target_language)},
  };
  std::string suffix = substitute(tmpl.request_suffix, values);
  if (tmpl.request_suffix.find("{{answer_format}}") == std::string::npos) {
    if (!suffix.empty() && suffix.back() != '\n') suffix += '\n';
    suffix += kAnswerFormat;
    suffix += '\n';
  }
  if (tmpl.request_suffix.find("{{language}}") == std::string::npos) {
    if (!suffix.empty() && suffix.back() != '\n') suffix += '\n';
    suffix += language_instruction(tmpl.target_language);
    suffix += '\n';
  }
  return suffix;
}

Prompt build_prompt(const Dialogue& dialogue, TurnWindow window, const PromptTemplate& tmpl,
                    const CategoryRegistry& registry) {
  if (window.start < 1 || window.end > dialogue.size() || window.start > window.end) {
    throw std::out_of_range("window " + window.label() + " outside dialogue " + dialogue.id + " (" +
                            std::to_string(dialogue.size()) + " turns)");
  }
  const std::string setting =
      flatten_field(dialogue.setting).empty() ? tmpl.default_setting : flatten_field(dialogue.setting);
  std::string text = substitute(tmpl.setting_preamble, {{"setting", setting}});
  for (int i = window.start; i <= window.end; ++i) {
    text += render_line(dialogue.turn(i));
    if (i != window.end) text += '\n';
  }
  text += render_request_suffix(tmpl, registry);
  return Prompt{std::move(text), window, dialogue.id, tmpl.version};
}

}  // namespace ctxforge
