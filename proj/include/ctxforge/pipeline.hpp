#pragma once

#include <array>
#include <map>
#include <stdexcept>
#include <vector>

#include "ctxforge/answer_parsing.hpp"
#include "ctxforge/llm_gateway.hpp"
#include "ctxforge/prompt_builder.hpp"
#include "ctxforge/records.hpp"
#include "ctxforge/window_planner.hpp"

namespace ctxforge {

struct RetryPolicy {
  int max_attempts = 3;
  /// Wait before attempt k+1 is backoff_ms[min(k-1, size-1)]; empty = no wait.
  std::vector<std::int64_t> backoff_ms{1000};

  [[nodiscard]] std::int64_t backoff_after(int attempt) const;
  void validate() const;
};

/// Everything annotate_dialogue needs besides the dialogue itself.
struct PipelineDeps {
  const PromptTemplate& prompt_template;
  const CategoryRegistry& registry;
  Gateway& gateway;
  ParseOptions parse;
  int max_window = kDefaultMaxWindow;
  int stride = kDefaultStride;
  RecordStore* store = nullptr;  // optional; records are persisted before return
  std::int64_t epoch = 0;
};

/// A fatal gateway error aborted the dialogue. Records created so far
/// (including the aborted one, marked failed) were persisted.
class PipelineAborted : public std::runtime_error {
 public:
  PipelineAborted(const std::string& what, std::vector<AnnotationRecord> partial)
      : std::runtime_error(what), partial_(std::move(partial)) {}
  [[nodiscard]] const std::vector<AnnotationRecord>& partial_records() const { return partial_; }

 private:
  std::vector<AnnotationRecord> partial_;
};

/// One record per planned window, processed in plan order. Each window is
/// dispatched until its answer is accepted or the attempt budget runs out;
/// an exhausted window is marked failed without affecting its siblings.
std::vector<AnnotationRecord> annotate_dialogue(const Dialogue& dialogue, const PipelineDeps& deps,
                                                const RetryPolicy& policy);

/// Dispatches one more attempt for an existing record (human-requested
/// re-query). Accepted answers return the record to pending_review with any
/// previous score cleared; rejected ones mark it failed.
AnnotationRecord reattempt(AnnotationRecord record, const Dialogue& dialogue, const PipelineDeps& deps);

struct SlotCandidate {
  std::string word;
  int window_start = 0;
  friend bool operator==(const SlotCandidate&, const SlotCandidate&) = default;
};

struct TurnCandidates {
  int turn_index = 0;
  std::array<std::vector<SlotCandidate>, 3> slots;  // indexed by Slot

  [[nodiscard]] const std::vector<SlotCandidate>& of(Slot s) const { return slots[static_cast<std::size_t>(s)]; }
  [[nodiscard]] bool covered() const { return !slots[0].empty(); }
};

struct CandidateSet {
  std::map<int, TurnCandidates> turns;  // covered turns only
  std::vector<int> uncovered;
};

/// Per turn, the words from every accepted record whose window contains it,
/// in window order. Failed records are skipped; turns no accepted record
/// covers are listed in `uncovered`.
CandidateSet collect_turn_candidates(const std::vector<AnnotationRecord>& records, const Dialogue& dialogue);

}  // namespace ctxforge
