#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "ctxforge/answer_parsing.hpp"
#include "ctxforge/llm_gateway.hpp"
#include "ctxforge/prompt_builder.hpp"

namespace ctxforge {

enum class RecordStatus { PendingReview, Reviewed, Failed };

std::string_view to_string(RecordStatus s);
std::optional<RecordStatus> parse_record_status(std::string_view s);

/// One dispatch of a record's prompt. A transport failure leaves `outcome`
/// empty and fills `transport_error`.
struct Attempt {
  RawAnswer answer;
  std::optional<ParseOutcome> outcome;
  std::string transport_error;
  std::int64_t dispatched_at_ms = 0;

  friend bool operator==(const Attempt&, const Attempt&) = default;
};

struct Exhausted {
  std::string detail;
  friend bool operator==(const Exhausted&, const Exhausted&) = default;
};

using FinalOutcome = std::variant<ParseOutcome, Exhausted>;

/// A window query's prompt, every attempt, the accepted parse (or
/// exhaustion), and the human reliability score.
struct AnnotationRecord {
  std::string record_id;
  std::string dialogue_id;
  TurnWindow window;
  Prompt prompt;
  std::vector<Attempt> attempts;
  FinalOutcome final_outcome = Exhausted{"not dispatched"};
  std::optional<ReliabilityScore> reliability;
  RecordStatus status = RecordStatus::Failed;
  bool requery_pending = false;
  std::int64_t updated_at_ms = 0;

  [[nodiscard]] bool accepted() const;
  /// Annotations of the accepted answer; empty when not accepted.
  [[nodiscard]] const std::vector<TurnAnnotation>& accepted_annotations() const;
  [[nodiscard]] const Attempt* latest_attempt() const { return attempts.empty() ? nullptr : &attempts.back(); }

  friend bool operator==(const AnnotationRecord&, const AnnotationRecord&) = default;
};

std::string make_record_id(const std::string& dialogue_id, TurnWindow window, std::int64_t epoch);

/// Throws ValidationError when status/outcome/reliability disagree.
void check_invariants(const AnnotationRecord& record);

/// Single JSON line. Wall-clock values (dispatch times, latencies, score and
/// update times) are confined to the "timestamps" object.
std::string record_to_json(const AnnotationRecord& record);
AnnotationRecord record_from_json(std::string_view line);
/// record_to_json with the "timestamps" object removed.
std::string record_to_json_without_timestamps(const AnnotationRecord& record);

class StoreError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Append-only JSONL record store keyed by record_id; the last line per key
/// wins on load. All access is serialized.
class RecordStore {
 public:
  /// Opens (creating lazily) the JSONL file; an empty path keeps records in
  /// memory only.
  explicit RecordStore(std::filesystem::path path = {});

  void put(const AnnotationRecord& record);
  [[nodiscard]] std::optional<AnnotationRecord> get(const std::string& record_id) const;
  /// Sorted by (dialogue_id, window start, record_id).
  [[nodiscard]] std::vector<AnnotationRecord> all() const;
  [[nodiscard]] std::vector<AnnotationRecord> for_dialogue(const std::string& dialogue_id) const;
  [[nodiscard]] std::size_t size() const;

  /// Read-modify-write under the store lock. Returns nullopt when the id is
  /// unknown; exceptions from `fn` leave the record untouched.
  std::optional<AnnotationRecord> update(const std::string& record_id,
                                         const std::function<void(AnnotationRecord&)>& fn);

  /// Makes subsequent writes fail (used to exercise store-unavailable paths).
  void set_unavailable(bool unavailable);

  [[nodiscard]] const std::filesystem::path& path() const { return path_; }

 private:
  void append_line(const std::string& line);

  std::filesystem::path path_;
  mutable std::mutex mu_;
  std::map<std::string, AnnotationRecord> records_;
  bool unavailable_ = false;
};

}  // namespace ctxforge
