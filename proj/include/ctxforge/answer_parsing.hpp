#pragma once

#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "ctxforge/core_model.hpp"
#include "ctxforge/text.hpp"

namespace ctxforge {

/// Why an answer must be re-queried. The first three mirror the human resend
/// rules (no context words, extra sentences, wrong answer language);
/// StructuralMismatch covers answers whose lines do not match the window.
enum class FailureKind { NoContextWords, ExtraneousContent, WrongLanguage, StructuralMismatch };

std::string_view to_string(FailureKind k);
std::optional<FailureKind> parse_failure_kind(std::string_view s);

struct FailureReason {
  FailureKind kind = FailureKind::NoContextWords;
  std::string detail;  // never empty

  friend bool operator==(const FailureReason&, const FailureReason&) = default;
};

class ParseOutcome {
 public:
  ParseOutcome(std::vector<TurnAnnotation> annotations) : value_(std::move(annotations)) {}  // NOLINT implicit
  ParseOutcome(FailureReason failure) : value_(std::move(failure)) {}                       // NOLINT implicit

  [[nodiscard]] bool ok() const { return std::holds_alternative<std::vector<TurnAnnotation>>(value_); }
  [[nodiscard]] const std::vector<TurnAnnotation>& annotations() const {
    return std::get<std::vector<TurnAnnotation>>(value_);
  }
  [[nodiscard]] const FailureReason& failure() const { return std::get<FailureReason>(value_); }

  friend bool operator==(const ParseOutcome&, const ParseOutcome&) = default;

 private:
  std::variant<std::vector<TurnAnnotation>, FailureReason> value_;
};

struct ParseOptions {
  std::string target_language = "ja";
  int max_word_length = 10;     // code points
  int content_match_min = 5;    // code points
  double min_target_script_fraction = 0.5;
};

/// Scripts that count as "in the target language". Throws
/// std::invalid_argument for an unsupported tag.
std::vector<text::Script> target_scripts(std::string_view language_tag);

/// Tolerant parser for "<id>: intention / emotion / style" answers.
///
/// Accepts full-width colons and slashes, leading list markers, a bracketed
/// id and a speaker-name echo before the colon. Checks run in a fixed order
/// and the first failing one is reported: no id-headed line at all
/// (NoContextWords), target-script fraction (WrongLanguage), non-word lines,
/// over-long words, copied dialogue text or speaker names
/// (ExtraneousContent), then line/id agreement with the window
/// (StructuralMismatch). Total: never throws for any answer text.
ParseOutcome parse_answer(std::string_view answer, TurnWindow window, const Dialogue& dialogue,
                          const ParseOptions& options, const CategoryRegistry& registry);

enum class RetryDecision { Retry, Accept };

/// Every failure is retried; any success is accepted, out-of-vocabulary
/// words included.
RetryDecision classify_for_retry(const ParseOutcome& outcome);

}  // namespace ctxforge
