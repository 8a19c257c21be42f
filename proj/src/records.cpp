#include "ctxforge/records.hpp"

#include <algorithm>
#include <fstream>

#include <json.hpp>

namespace ctxforge {

using ojson = nlohmann::ordered_json;

std::string_view to_string(RecordStatus s) {
  switch (s) {
    case RecordStatus::PendingReview: return "pending_review";
    case RecordStatus::Reviewed: return "reviewed";
    case RecordStatus::Failed: return "failed";
  }
  return "?";
}

std::optional<RecordStatus> parse_record_status(std::string_view s) {
  for (auto st : {RecordStatus::PendingReview, RecordStatus::Reviewed, RecordStatus::Failed}) {
    if (to_string(st) == s) return st;
  }
  return std::nullopt;
}

bool AnnotationRecord::accepted() const {
  const auto* o = std::get_if<ParseOutcome>(&final_outcome);
  return o != nullptr && o->ok();
}

const std::vector<TurnAnnotation>& AnnotationRecord::accepted_annotations() const {
  static const std::vector<TurnAnnotation> kEmpty;
  return accepted() ? std::get<ParseOutcome>(final_outcome).annotations() : kEmpty;
}

std::string make_record_id(const std::string& dialogue_id, TurnWindow window, std::int64_t epoch) {
  return dialogue_id + ":" + window.label() + "@" + std::to_string(epoch);
}

void check_invariants(const AnnotationRecord& r) {
  if (r.record_id.empty() || r.dialogue_id.empty()) throw ValidationError("record without an id");
  const bool exhausted = std::holds_alternative<Exhausted>(r.final_outcome);
  if ((r.status == RecordStatus::Failed) != exhausted) {
    throw ValidationError("record " + r.record_id + ": status failed must coincide with an exhausted outcome");
  }
  if (r.status == RecordStatus::Reviewed && !r.reliability) {
    throw ValidationError("record " + r.record_id + ": reviewed without a reliability score");
  }
  if (!exhausted && !r.accepted()) {
    throw ValidationError("record " + r.record_id + ": final outcome must be an accepted parse or exhausted");
  }
}

namespace {

ojson outcome_to_json(const ParseOutcome& o) {
  ojson j;
  if (o.ok()) {
    j["ok"] = true;
    j["annotations"] = ojson::array();
    for (const auto& a : o.annotations()) {
      ojson aj;
      aj["turn"] = a.turn_index;
      aj["intention"] = a.intention;
      aj["emotion"] = a.emotion;
      aj["emotion_in_vocabulary"] = a.emotion_in_vocabulary;
      aj["style"] = a.style;
      aj["style_in_vocabulary"] = a.style_in_vocabulary;
      aj["source_window"] = a.source_window;
      j["annotations"].push_back(std::move(aj));
    }
  } else {
    j["ok"] = false;
    j["failure"] = std::string(to_string(o.failure().kind));
    j["detail"] = o.failure().detail;
  }
  return j;
}

ParseOutcome outcome_from_json(const nlohmann::json& j) {
  if (j.at("ok").get<bool>()) {
    std::vector<TurnAnnotation> anns;
    for (const auto& aj : j.at("annotations")) {
      TurnAnnotation a;
      a.turn_index = aj.at("turn").get<int>();
      a.intention = aj.at("intention").get<std::string>();
      a.emotion = aj.at("emotion").get<std::string>();
      a.emotion_in_vocabulary = aj.at("emotion_in_vocabulary").get<bool>();
      a.style = aj.at("style").get<std::string>();
      a.style_in_vocabulary = aj.at("style_in_vocabulary").get<bool>();
      a.source_window = aj.at("source_window").get<std::string>();
      anns.push_back(std::move(a));
    }
    return anns;
  }
  const auto kind = parse_failure_kind(j.at("failure").get<std::string>());
  if (!kind) throw ValidationError("unknown failure kind " + j.at("failure").get<std::string>());
  return FailureReason{*kind, j.at("detail").get<std::string>()};
}

ojson record_json(const AnnotationRecord& r, bool with_timestamps) {
  ojson j;
  j["record_id"] = r.record_id;
  j["dialogue_id"] = r.dialogue_id;
  j["window"] = {r.window.start, r.window.end};
  j["prompt"] = {{"text", r.prompt.text}, {"template_version", r.prompt.template_version}};
  j["attempts"] = ojson::array();
  ojson ts_attempts = ojson::array();
  for (const auto& a : r.attempts) {
    ojson aj;
    aj["attempt_index"] = a.answer.attempt_index;
    aj["backend"] = std::string(to_string(a.answer.backend));
    aj["text"] = a.answer.text;
    if (a.outcome) {
      aj["outcome"] = outcome_to_json(*a.outcome);
    } else {
      aj["transport_error"] = a.transport_error;
    }
    j["attempts"].push_back(std::move(aj));
    ts_attempts.push_back({{"dispatched_at_ms", a.dispatched_at_ms}, {"latency_ms", a.answer.latency_ms}});
  }
  if (const auto* e = std::get_if<Exhausted>(&r.final_outcome)) {
    j["final_outcome"] = {{"exhausted", true}, {"detail", e->detail}};
  } else {
    j["final_outcome"] = outcome_to_json(std::get<ParseOutcome>(r.final_outcome));
  }
  if (r.reliability) {
    j["reliability"] = {{"value", r.reliability->value}, {"annotator", r.reliability->annotator}};
  } else {
    j["reliability"] = nullptr;
  }
  j["status"] = std::string(to_string(r.status));
  j["requery_pending"] = r.requery_pending;
  if (with_timestamps) {
    ojson ts;
    ts["attempts"] = std::move(ts_attempts);
    ts["reliability_at_ms"] = r.reliability ? ojson(r.reliability->timestamp_ms) : ojson(nullptr);
    ts["updated_at_ms"] = r.updated_at_ms;
    j["timestamps"] = std::move(ts);
  }
  return j;
}

}  // namespace

std::string record_to_json(const AnnotationRecord& record) { return record_json(record, true).dump(); }

std::string record_to_json_without_timestamps(const AnnotationRecord& record) {
  return record_json(record, false).dump();
}

AnnotationRecord record_from_json(std::string_view line) {
  try {
    const auto j = nlohmann::json::parse(line);
    AnnotationRecord r;
    r.record_id = j.at("record_id").get<std::string>();
    r.dialogue_id = j.at("dialogue_id").get<std::string>();
    r.window = {j.at("window").at(0).get<int>(), j.at("window").at(1).get<int>()};
    r.prompt.text = j.at("prompt").at("text").get<std::string>();
    r.prompt.template_version = j.at("prompt").at("template_version").get<std::string>();
    r.prompt.window = r.window;
    r.prompt.dialogue_id = r.dialogue_id;
    const nlohmann::json* ts = j.contains("timestamps") ? &j.at("timestamps") : nullptr;
    std::size_t i = 0;
    for (const auto& aj : j.at("attempts")) {
      Attempt a;
      a.answer.attempt_index = aj.at("attempt_index").get<int>();
      a.answer.backend = aj.at("backend").get<std::string>() == "live" ? BackendKind::Live : BackendKind::Mock;
      a.answer.text = aj.at("text").get<std::string>();
      if (aj.contains("outcome")) {
        a.outcome = outcome_from_json(aj.at("outcome"));
      } else {
        a.transport_error = aj.value("transport_error", "");
      }
      if (ts && ts->contains("attempts") && i < ts->at("attempts").size()) {
        const auto& tj = ts->at("attempts").at(i);
        a.dispatched_at_ms = tj.value("dispatched_at_ms", std::int64_t{0});
        a.answer.latency_ms = tj.value("latency_ms", std::int64_t{0});
      }
      r.attempts.push_back(std::move(a));
      ++i;
    }
    const auto& fj = j.at("final_outcome");
    if (fj.value("exhausted", false)) {
      r.final_outcome = Exhausted{fj.value("detail", "")};
    } else {
      r.final_outcome = outcome_from_json(fj);
    }
    if (!j.at("reliability").is_null()) {
      const auto& rj = j.at("reliability");
      std::int64_t at = 0;
      if (ts && ts->contains("reliability_at_ms") && !ts->at("reliability_at_ms").is_null()) {
        at = ts->at("reliability_at_ms").get<std::int64_t>();
      }
      r.reliability = ReliabilityScore::make(rj.at("value").get<int>(), rj.at("annotator").get<std::string>(), at);
    }
    const auto st = parse_record_status(j.at("status").get<std::string>());
    if (!st) throw ValidationError("unknown record status");
    r.status = *st;
    r.requery_pending = j.value("requery_pending", false);
    if (ts) r.updated_at_ms = ts->value("updated_at_ms", std::int64_t{0});
    check_invariants(r);
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed annotation record: ") + e.what());
  }
}

RecordStore::RecordStore(std::filesystem::path path) : path_(std::move(path)) {
  if (path_.empty() || !std::filesystem::exists(path_)) return;
  std::ifstream in(path_, std::ios::binary);
  if (!in) throw StoreError("cannot read record store " + path_.string());
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      auto r = record_from_json(line);
      records_.insert_or_assign(r.record_id, std::move(r));
    } catch (const ValidationError& e) {
      throw StoreError(path_.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
}

void RecordStore::append_line(const std::string& line) {
  if (unavailable_) throw StoreError("record store unavailable");
  if (path_.empty()) return;
  std::ofstream out(path_, std::ios::binary | std::ios::app);
  if (!out) throw StoreError("cannot append to record store " + path_.string());
  const std::string buf = line + "\n";
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  out.flush();
  if (!out) throw StoreError("write to record store " + path_.string() + " failed");
}

void RecordStore::put(const AnnotationRecord& record) {
  check_invariants(record);
  std::lock_guard lock(mu_);
  append_line(record_to_json(record));
  records_.insert_or_assign(record.record_id, record);
}

std::optional<AnnotationRecord> RecordStore::get(const std::string& record_id) const {
  std::lock_guard lock(mu_);
  if (unavailable_) throw StoreError("record store unavailable");
  auto it = records_.find(record_id);
  if (it == records_.end()) return std::nullopt;
  return it->second;
}

std::vector<AnnotationRecord> RecordStore::all() const {
  std::lock_guard lock(mu_);
  if (unavailable_) throw StoreError("record store unavailable");
  std::vector<AnnotationRecord> out;
  out.reserve(records_.size());
  for (const auto& [_, r] : records_) out.push_back(r);
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    if (a.dialogue_id != b.dialogue_id) return a.dialogue_id < b.dialogue_id;
    if (a.window.start != b.window.start) return a.window.start < b.window.start;
    return a.record_id < b.record_id;
  });
  return out;
}

std::vector<AnnotationRecord> RecordStore::for_dialogue(const std::string& dialogue_id) const {
  auto rs = all();
  std::erase_if(rs, [&](const auto& r) { return r.dialogue_id != dialogue_id; });
  return rs;
}

std::size_t RecordStore::size() const {
  std::lock_guard lock(mu_);
  return records_.size();
}

std::optional<AnnotationRecord> RecordStore::update(const std::string& record_id,
                                                    const std::function<void(AnnotationRecord&)>& fn) {
  std::lock_guard lock(mu_);
  if (unavailable_) throw StoreError("record store unavailable");
  auto it = records_.find(record_id);
  if (it == records_.end()) return std::nullopt;
  AnnotationRecord copy = it->second;
  fn(copy);
  check_invariants(copy);
  append_line(record_to_json(copy));
  it->second = copy;
  return copy;
}

void RecordStore::set_unavailable(bool unavailable) {
  std::lock_guard lock(mu_);
  unavailable_ = unavailable;
}

}  // namespace ctxforge
