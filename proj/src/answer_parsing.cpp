#include "ctxforge/answer_parsing.hpp"

#include <algorithm>
#include <cstdio>
#include <optional>
#include <set>

namespace ctxforge {

namespace {

struct IdLine {
  int line_no = 0;
  int turn_id = 0;
  std::vector<std::string> words;  // canonical, possibly empty entries
};

struct Scan {
  std::vector<IdLine> id_lines;
  std::vector<std::pair<int, std::string>> other_lines;
};

std::u32string trim_space(std::u32string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && text::is_space(s[b])) ++b;
  while (e > b && text::is_space(s[e - 1])) --e;
  return std::u32string(s.substr(b, e - b));
}

bool is_list_marker(char32_t cp) {
  switch (cp) {
    case U'-':
    case U'*':
    case U'+':
    case U'>':
    case 0x2022:  // •
    case 0x30FB:  // ・
    case 0x00B7:  // ·
    case 0x25CF:  // ●
    case 0x25CB:  // ○
    case 0x25A0:  // ■
    case 0x2013:  // –
      return true;
    default:
      return false;
  }
}

std::u32string strip_list_markers(std::u32string s) {
  for (;;) {
    s = trim_space(s);
    if (!s.empty() && is_list_marker(s.front())) {
      s.erase(0, 1);
      continue;
    }
    return s;
  }
}

// Parses "<digits>" or "[<digits>]" at the start of head. Returns the id and
// the rest of the head after it.
std::optional<std::pair<int, std::u32string>> leading_id(std::u32string_view head) {
  std::size_t i = 0;
  bool bracketed = false;
  if (i < head.size() && (head[i] == U'[' || head[i] == U'(')) {
    bracketed = true;
    ++i;
  }
  const std::size_t digits_start = i;
  long long id = 0;
  while (i < head.size() && head[i] >= U'0' && head[i] <= U'9') {
    id = id * 10 + (head[i] - U'0');
    if (id > 1'000'000) return std::nullopt;
    ++i;
  }
  if (i == digits_start) return std::nullopt;
  if (bracketed) {
    if (i >= head.size() || (head[i] != U']' && head[i] != U')')) return std::nullopt;
    ++i;
  } else if (i < head.size() && (head[i] == U'.' || head[i] == U')')) {
    ++i;
  }
  return std::make_pair(static_cast<int>(id), trim_space(head.substr(i)));
}

Scan scan_lines(std::string_view answer, const std::set<std::string>& speakers) {
  Scan scan;
  const auto all = text::fold_width(text::decode_utf8(answer));
  std::size_t pos = 0;
  int line_no = 0;
  while (pos <= all.size()) {
    auto nl = all.find_first_of(U"\n\r", pos);
    const auto raw = std::u32string_view(all).substr(pos, nl == std::u32string::npos ? std::u32string::npos : nl - pos);
    pos = (nl == std::u32string::npos) ? all.size() + 1 : nl + 1;
    ++line_no;
    const auto line = strip_list_markers(std::u32string(raw));
    if (line.empty()) continue;
    // Markdown emphasis around the whole line does not change its meaning.
    std::u32string body = line;
    body.erase(std::remove(body.begin(), body.end(), U'*'), body.end());
    const auto colon = body.find(U':');
    bool matched = false;
    if (colon != std::u32string::npos) {
      if (auto id = leading_id(trim_space(std::u32string_view(body).substr(0, colon)))) {
        const std::string echo = canonicalize_word(text::encode_utf8(id->second));
        if (echo.empty() || speakers.count(echo)) {
          IdLine il;
          il.line_no = line_no;
          il.turn_id = id->first;
          const std::u32string tail = body.substr(colon + 1);
          std::size_t start = 0;
          for (;;) {
            const auto slash = tail.find(U'/', start);
            const auto piece = tail.substr(start, slash == std::u32string::npos ? std::u32string::npos : slash - start);
            il.words.push_back(canonicalize_word(text::encode_utf8(piece)));
            if (slash == std::u32string::npos) break;
            start = slash + 1;
          }
          scan.id_lines.push_back(std::move(il));
          matched = true;
        }
      }
    }
    if (!matched) scan.other_lines.emplace_back(line_no, text::encode_utf8(line));
  }
  return scan;
}

std::string percent(double f) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.0f%%", f * 100.0);
  return buf;
}

std::string clip(std::string_view s, std::size_t max_cp = 40) {
  auto cps = text::decode_utf8(s);
  if (cps.size() <= max_cp) return std::string(s);
  return text::encode_utf8(std::u32string_view(cps).substr(0, max_cp)) + "...";
}

std::optional<FailureReason> check_language(const Scan& scan, const ParseOptions& options) {
  const auto scripts = target_scripts(options.target_language);
  std::size_t letters = 0, in_target = 0;
  bool has_kana = false, has_simplified = false;
  for (const auto& il : scan.id_lines) {
    for (const auto& w : il.words) {
      for (char32_t cp : text::decode_utf8(w)) {
        if (!text::is_letter(cp)) continue;
        ++letters;
        const auto s = text::script_of(cp);
        if (std::find(scripts.begin(), scripts.end(), s) != scripts.end()) ++in_target;
        has_kana = has_kana || s == text::Script::Hiragana || s == text::Script::Katakana;
        has_simplified = has_simplified || text::is_simplified_only_han(cp);
      }
    }
  }
  const std::string lang = options.target_language;
  if (letters == 0) return FailureReason{FailureKind::WrongLanguage, "answer words contain no letters"};
  const double fraction = static_cast<double>(in_target) / static_cast<double>(letters);
  if (fraction < options.min_target_script_fraction) {
    return FailureReason{FailureKind::WrongLanguage, "only " + percent(fraction) + " of answer letters are in the " +
                                                         lang + " script(s), need " +
                                                         percent(options.min_target_script_fraction)};
  }
  if (lang == "ja" && !has_kana && has_simplified) {
    return FailureReason{FailureKind::WrongLanguage,
                         "answer uses simplified Chinese characters and no kana; looks like Chinese"};
  }
  return std::nullopt;
}

std::optional<FailureReason> check_extraneous(const Scan& scan, TurnWindow window, const Dialogue& dialogue,
                                              const ParseOptions& options, const std::set<std::string>& speakers) {
  if (!scan.other_lines.empty()) {
    const auto& [no, line] = scan.other_lines.front();
    return FailureReason{FailureKind::ExtraneousContent,
                         "line " + std::to_string(no) + " is not a context-word line: \"" + clip(line) + "\""};
  }
  std::vector<std::string> contents;
  for (int i = window.start; i <= window.end && i <= dialogue.size(); ++i) {
    if (i >= 1) contents.push_back(canonicalize_word(dialogue.turn(i).content));
  }
  for (const auto& il : scan.id_lines) {
    for (const auto& w : il.words) {
      if (w.empty()) continue;
      const auto len = static_cast<int>(text::length_cp(w));
      if (len > options.max_word_length) {
        return FailureReason{FailureKind::ExtraneousContent,
                             "line " + std::to_string(il.line_no) + ": \"" + clip(w) + "\" has " + std::to_string(len) +
                                 " characters (max " + std::to_string(options.max_word_length) + ")"};
      }
      if (speakers.count(w)) {
        return FailureReason{FailureKind::ExtraneousContent,
                             "line " + std::to_string(il.line_no) + ": \"" + w + "\" is a speaker name"};
      }
      if (len >= options.content_match_min) {
        for (const auto& c : contents) {
          if (c.find(w) != std::string::npos) {
            return FailureReason{FailureKind::ExtraneousContent,
                                 "line " + std::to_string(il.line_no) + ": \"" + w + "\" is copied from the dialogue"};
          }
        }
      }
    }
  }
  return std::nullopt;
}

std::optional<FailureReason> check_structure(const Scan& scan, TurnWindow window) {
  std::set<int> seen;
  for (const auto& il : scan.id_lines) {
    const bool triple = il.words.size() == 3 &&
                        std::none_of(il.words.begin(), il.words.end(), [](const std::string& w) { return w.empty(); });
    if (!triple) {
      return FailureReason{FailureKind::StructuralMismatch,
                           "line " + std::to_string(il.line_no) + " (turn " + std::to_string(il.turn_id) +
                               ") does not hold three words"};
    }
    if (!window.contains(il.turn_id)) {
      return FailureReason{FailureKind::StructuralMismatch,
                           "turn id " + std::to_string(il.turn_id) + " is outside window " + window.label()};
    }
    if (!seen.insert(il.turn_id).second) {
      return FailureReason{FailureKind::StructuralMismatch, "turn id " + std::to_string(il.turn_id) + " appears twice"};
    }
  }
  if (static_cast<int>(seen.size()) != window.size()) {
    return FailureReason{FailureKind::StructuralMismatch, "answer covers " + std::to_string(seen.size()) + " of " +
                                                              std::to_string(window.size()) + " turns in window " +
                                                              window.label()};
  }
  return std::nullopt;
}

}  // namespace

std::string_view to_string(FailureKind k) {
  switch (k) {
    case FailureKind::NoContextWords: return "NoContextWords";
    case FailureKind::ExtraneousContent: return "ExtraneousContent";
    case FailureKind::WrongLanguage: return "WrongLanguage";
    case FailureKind::StructuralMismatch: return "StructuralMismatch";
  }
  return "?";
}

std::optional<FailureKind> parse_failure_kind(std::string_view s) {
  for (auto k : {FailureKind::NoContextWords, FailureKind::ExtraneousContent, FailureKind::WrongLanguage,
                 FailureKind::StructuralMismatch}) {
    if (to_string(k) == s) return k;
  }
  return std::nullopt;
}

std::vector<text::Script> target_scripts(std::string_view tag) {
  using text::Script;
  if (tag == "ja") return {Script::Hiragana, Script::Katakana, Script::Han};
  if (tag == "zh") return {Script::Han};
  if (tag == "en") return {Script::Latin};
  if (tag == "ko") return {Script::Hangul};
  if (tag == "ru") return {Script::Cyrillic};
  throw std::invalid_argument("unsupported target language '" + std::string(tag) + "'");
}

ParseOutcome parse_answer(std::string_view answer, TurnWindow window, const Dialogue& dialogue,
                          const ParseOptions& options, const CategoryRegistry& registry) {
  std::set<std::string> speakers;
  for (const auto& t : dialogue.turns) {
    auto s = canonicalize_word(t.speaker);
    if (!s.empty()) speakers.insert(std::move(s));
  }

  const Scan scan = scan_lines(answer, speakers);
  const bool any_word = std::any_of(scan.id_lines.begin(), scan.id_lines.end(), [](const IdLine& il) {
    return std::any_of(il.words.begin(), il.words.end(), [](const std::string& w) { return !w.empty(); });
  });
  if (!any_word) {
    if (scan.id_lines.empty() && scan.other_lines.empty()) {
      return FailureReason{FailureKind::NoContextWords, "answer is empty"};
    }
    return FailureReason{FailureKind::NoContextWords, "no \"<turn ID>: <intention> / <emotion> / <style>\" line found"};
  }
  if (auto f = check_language(scan, options)) return *f;
  if (auto f = check_extraneous(scan, window, dialogue, options, speakers)) return *f;
  if (auto f = check_structure(scan, window)) return *f;

  std::vector<TurnAnnotation> out;
  out.reserve(scan.id_lines.size());
  const std::string source = window.label();
  for (const auto& il : scan.id_lines) {
    TurnAnnotation a;
    a.turn_index = il.turn_id;
    a.intention = il.words[0];
    a.emotion = il.words[1];
    a.emotion_in_vocabulary = registry.is_emotion(a.emotion);
    a.style = il.words[2];
    a.style_in_vocabulary = registry.is_style(a.style);
    a.source_window = source;
    out.push_back(std::move(a));
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.turn_index < b.turn_index; });
  return out;
}

RetryDecision classify_for_retry(const ParseOutcome& outcome) {
  return outcome.ok() ? RetryDecision::Accept : RetryDecision::Retry;
}

}  // namespace ctxforge
