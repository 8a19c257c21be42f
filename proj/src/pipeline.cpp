#include "ctxforge/pipeline.hpp"

#include <algorithm>

namespace ctxforge {

std::int64_t RetryPolicy::backoff_after(int attempt) const {
  if (backoff_ms.empty() || attempt < 1) return 0;
  const auto i = std::min<std::size_t>(static_cast<std::size_t>(attempt - 1), backoff_ms.size() - 1);
  return backoff_ms[i];
}

void RetryPolicy::validate() const {
  if (max_attempts < 1) throw ConfigError("retries.max must be >= 1");
  for (auto b : backoff_ms) {
    if (b < 0) throw ConfigError("retries.backoff_ms entries must be >= 0");
  }
}

namespace {

// Runs one gateway attempt and appends it to the record. Returns true when
// the answer was accepted. ConfigError propagates.
bool run_attempt(AnnotationRecord& record, const Dialogue& dialogue, const PipelineDeps& deps, int attempt_index) {
  Clock& clock = deps.gateway.clock();
  Attempt attempt;
  attempt.dispatched_at_ms = clock.wall_ms();
  try {
    attempt.answer = deps.gateway.complete(record.prompt, attempt_index);
    attempt.outcome = parse_answer(attempt.answer.text, record.window, dialogue, deps.parse, deps.registry);
  } catch (const GatewayError& e) {
    attempt.answer = RawAnswer{"", 0, attempt_index, deps.gateway.backend_kind()};
    attempt.transport_error = e.what();
  }
  const bool accepted = attempt.outcome && classify_for_retry(*attempt.outcome) == RetryDecision::Accept;
  if (accepted) record.final_outcome = *attempt.outcome;
  record.attempts.push_back(std::move(attempt));
  record.updated_at_ms = clock.wall_ms();
  return accepted;
}

std::string last_problem(const AnnotationRecord& record) {
  const auto* a = record.latest_attempt();
  if (a == nullptr) return "no attempts";
  if (!a->outcome) return "transport error: " + a->transport_error;
  const auto& f = a->outcome->failure();
  return std::string(to_string(f.kind)) + ": " + f.detail;
}

}  // namespace

std::vector<AnnotationRecord> annotate_dialogue(const Dialogue& dialogue, const PipelineDeps& deps,
                                                const RetryPolicy& policy) {
  validate(dialogue);
  policy.validate();
  const auto plan = plan_windows(dialogue.size(), deps.max_window, deps.stride);
  Clock& clock = deps.gateway.clock();

  std::vector<AnnotationRecord> records;
  records.reserve(plan.windows.size());
  for (const auto& window : plan.windows) {
    AnnotationRecord rec;
    rec.record_id = make_record_id(dialogue.id, window, deps.epoch);
    rec.dialogue_id = dialogue.id;
    rec.window = window;
    rec.prompt = build_prompt(dialogue, window, deps.prompt_template, deps.registry);

    bool accepted = false;
    try {
      for (int attempt = 1; attempt <= policy.max_attempts && !accepted; ++attempt) {
        if (attempt > 1) clock.sleep_for_ms(policy.backoff_after(attempt - 1));
        accepted = run_attempt(rec, dialogue, deps, attempt);
      }
    } catch (const ConfigError& e) {
      rec.final_outcome = Exhausted{std::string("aborted: ") + e.what()};
      rec.status = RecordStatus::Failed;
      rec.updated_at_ms = clock.wall_ms();
      if (deps.store) deps.store->put(rec);
      records.push_back(std::move(rec));
      throw PipelineAborted("dialogue " + dialogue.id + " aborted at window " + window.label() + ": " + e.what(),
                            records);
    }
    if (accepted) {
      rec.status = RecordStatus::PendingReview;
    } else {
      rec.final_outcome = Exhausted{"no accepted answer after " + std::to_string(rec.attempts.size()) +
                                    " attempts; last: " + last_problem(rec)};
      rec.status = RecordStatus::Failed;
    }
    if (deps.store) deps.store->put(rec);
    records.push_back(std::move(rec));
  }
  return records;
}

AnnotationRecord reattempt(AnnotationRecord record, const Dialogue& dialogue, const PipelineDeps& deps) {
  if (record.dialogue_id != dialogue.id) {
    throw std::invalid_argument("record " + record.record_id + " does not belong to dialogue " + dialogue.id);
  }
  const int next = record.attempts.empty() ? 1 : record.attempts.back().answer.attempt_index + 1;
  const bool accepted = run_attempt(record, dialogue, deps, next);
  record.requery_pending = false;
  record.reliability.reset();
  if (accepted) {
    record.status = RecordStatus::PendingReview;
  } else {
    record.final_outcome = Exhausted{"re-query attempt " + std::to_string(next) + " rejected; " + last_problem(record)};
    record.status = RecordStatus::Failed;
  }
  return record;
}

CandidateSet collect_turn_candidates(const std::vector<AnnotationRecord>& records, const Dialogue& dialogue) {
  std::vector<const AnnotationRecord*> ordered;
  for (const auto& r : records) {
    if (r.dialogue_id == dialogue.id && r.accepted()) ordered.push_back(&r);
  }
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const auto* a, const auto* b) { return a->window.start < b->window.start; });

  CandidateSet out;
  for (const auto* r : ordered) {
    for (const auto& a : r->accepted_annotations()) {
      if (a.turn_index < 1 || a.turn_index > dialogue.size()) continue;
      auto& tc = out.turns[a.turn_index];
      tc.turn_index = a.turn_index;
      for (auto slot : kSlots) {
        tc.slots[static_cast<std::size_t>(slot)].push_back({a.word(slot), r->window.start});
      }
    }
  }
  for (int i = 1; i <= dialogue.size(); ++i) {
    if (!out.turns.count(i)) out.uncovered.push_back(i);
  }
  return out;
}

}  // namespace ctxforge
