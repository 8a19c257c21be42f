#include "ctxforge/review_service.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <filesystem>

#include "ctxforge/text.hpp"

namespace ctxforge {

using nlohmann::json;

int ReviewError::http_status() const {
  switch (kind_) {
    case ReviewErrorKind::Validation: return 422;
    case ReviewErrorKind::NotFound: return 404;
    case ReviewErrorKind::Conflict: return 409;
    case ReviewErrorKind::Unavailable: return 503;
    case ReviewErrorKind::Unauthorized: return 401;
    case ReviewErrorKind::BadRequest: return 400;
  }
  return 500;
}

namespace {

std::string_view kind_name(ReviewErrorKind k) {
  switch (k) {
    case ReviewErrorKind::Validation: return "validation";
    case ReviewErrorKind::NotFound: return "not_found";
    case ReviewErrorKind::Conflict: return "conflict";
    case ReviewErrorKind::Unavailable: return "unavailable";
    case ReviewErrorKind::Unauthorized: return "unauthorized";
    case ReviewErrorKind::BadRequest: return "bad_request";
  }
  return "error";
}

std::int64_t wall_now_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::system_clock::now().time_since_epoch())
      .count();
}

json annotation_json(const TurnAnnotation& a) {
  return {{"turn", a.turn_index},
          {"intention", a.intention},
          {"emotion", a.emotion},
          {"emotion_in_vocabulary", a.emotion_in_vocabulary},
          {"style", a.style},
          {"style_in_vocabulary", a.style_in_vocabulary}};
}

}  // namespace

constexpr std::size_t kPreviewCodepoints = 120;

json to_json(const ReviewItem& item, bool summary) {
  json j;
  j["record_id"] = item.record_id;
  j["dialogue_id"] = item.dialogue_id;
  j["window"] = {{"start", item.window.start}, {"end", item.window.end}};
  j["status"] = std::string(to_string(item.status));
  j["attempts"] = item.attempts;
  j["requery_pending"] = item.requery_pending;
  j["reliability"] = item.reliability ? json{{"score", item.reliability->value},
                                             {"annotator", item.reliability->annotator}}
                                      : json(nullptr);
  if (summary) {
    const auto cps = text::decode_utf8(item.latest_answer);
    j["preview"] = text::encode_utf8(std::u32string_view(cps).substr(0, kPreviewCodepoints));
    return j;
  }
  j["prompt"] = item.prompt_text;
  j["latest_answer"] = item.latest_answer;
  j["annotations"] = json::array();
  for (const auto& a : item.annotations) j["annotations"].push_back(annotation_json(a));
  j["failure"] = item.failure ? json(*item.failure) : json(nullptr);
  j["excerpt"] = json::array();
  for (const auto& t : item.excerpt) {
    j["excerpt"].push_back({{"index", t.index}, {"speaker", t.speaker}, {"content", t.content}});
  }
  return j;
}

// ---------------------------------------------------------------------------

RequeryWorker::RequeryWorker(Handler handler) : handler_(std::move(handler)), thread_([this] { run(); }) {}

RequeryWorker::~RequeryWorker() {
  {
    std::lock_guard lock(mu_);
    stop_ = true;
  }
  cv_.notify_all();
  thread_.join();
}

void RequeryWorker::enqueue(const std::string& record_id) {
  {
    std::lock_guard lock(mu_);
    queue_.push_back(record_id);
  }
  cv_.notify_one();
}

void RequeryWorker::drain() {
  std::unique_lock lock(mu_);
  idle_cv_.wait(lock, [this] { return queue_.empty() && !busy_; });
}

std::size_t RequeryWorker::processed() const {
  std::lock_guard lock(mu_);
  return processed_;
}

std::vector<std::string> RequeryWorker::errors() const {
  std::lock_guard lock(mu_);
  return errors_;
}

void RequeryWorker::run() {
  std::unique_lock lock(mu_);
  for (;;) {
    cv_.wait(lock, [this] { return stop_ || !queue_.empty(); });
    if (queue_.empty()) return;  // stop requested and nothing left
    std::string id = std::move(queue_.front());
    queue_.pop_front();
    busy_ = true;
    lock.unlock();
    std::string error;
    try {
      handler_(id);
    } catch (const std::exception& e) {
      error = id + ": " + e.what();
    }
    lock.lock();
    busy_ = false;
    ++processed_;
    if (!error.empty()) errors_.push_back(std::move(error));
    if (queue_.empty()) idle_cv_.notify_all();
  }
}

RequeryWorker::Handler make_requery_handler(RecordStore& store, const DialogueIndex& dialogues,
                                            const PipelineDeps& deps) {
  return [&store, &dialogues, deps](const std::string& record_id) {
    auto record = store.get(record_id);
    if (!record) throw std::runtime_error("record vanished before re-query");
    auto d = dialogues.find(record->dialogue_id);
    AnnotationRecord result;
    try {
      if (d == dialogues.end()) throw std::runtime_error("dialogue " + record->dialogue_id + " not loaded");
      result = reattempt(*record, d->second, deps);
    } catch (...) {
      store.update(record_id, [](AnnotationRecord& r) { r.requery_pending = false; });
      throw;
    }
    store.update(record_id, [&result](AnnotationRecord& r) { r = result; });
  };
}

// ---------------------------------------------------------------------------

ReviewService::ReviewService(RecordStore& store, const DialogueIndex& dialogues, int max_attempts,
                             Scheduler schedule)
    : store_(store), dialogues_(dialogues), max_attempts_(max_attempts), schedule_(std::move(schedule)) {
  if (max_attempts_ < 1) throw std::invalid_argument("max_attempts must be >= 1");
}

ReviewItem ReviewService::snapshot(const AnnotationRecord& r) const {
  ReviewItem item;
  item.record_id = r.record_id;
  item.dialogue_id = r.dialogue_id;
  item.window = r.window;
  item.prompt_text = r.prompt.text;
  if (const auto* a = r.latest_attempt()) item.latest_answer = a->answer.text;
  item.status = r.status;
  item.attempts = static_cast<int>(r.attempts.size());
  item.reliability = r.reliability;
  item.requery_pending = r.requery_pending;
  if (r.accepted()) {
    item.annotations = r.accepted_annotations();
  } else if (const auto* ex = std::get_if<Exhausted>(&r.final_outcome)) {
    item.failure = ex->detail;
  }
  if (auto d = dialogues_.find(r.dialogue_id); d != dialogues_.end()) {
    for (int i = r.window.start; i <= r.window.end && i <= d->second.size(); ++i) {
      item.excerpt.push_back(d->second.turn(i));
    }
  }
  return item;
}

Page ReviewService::list(std::optional<RecordStatus> status, std::size_t page, std::size_t page_size) const {
  if (page < 1) throw ReviewError(ReviewErrorKind::Validation, "page must be >= 1");
  if (page_size < 1 || page_size > 500) throw ReviewError(ReviewErrorKind::Validation, "page_size must be in 1..500");
  std::vector<AnnotationRecord> all;
  try {
    all = store_.all();
  } catch (const StoreError& e) {
    throw ReviewError(ReviewErrorKind::Unavailable, e.what());
  }
  std::erase_if(all, [&](const AnnotationRecord& r) {
    if (!status) return false;
    if (r.status != *status) return true;
    // A pending item waiting on a re-query is not ready for scoring.
    return *status == RecordStatus::PendingReview && (r.requery_pending || r.reliability.has_value());
  });
  Page out;
  out.total = all.size();
  out.page = page;
  out.page_size = page_size;
  const std::size_t begin = (page - 1) * page_size;
  for (std::size_t i = begin; i < all.size() && i < begin + page_size; ++i) out.items.push_back(snapshot(all[i]));
  return out;
}

Page ReviewService::list_pending(std::size_t page, std::size_t page_size) const {
  return list(RecordStatus::PendingReview, page, page_size);
}

ReviewItem ReviewService::get(const std::string& record_id) const {
  std::optional<AnnotationRecord> r;
  try {
    r = store_.get(record_id);
  } catch (const StoreError& e) {
    throw ReviewError(ReviewErrorKind::Unavailable, e.what());
  }
  if (!r) throw ReviewError(ReviewErrorKind::NotFound, "no record " + record_id);
  return snapshot(*r);
}

ReviewItem ReviewService::submit_reliability(const std::string& record_id, int score, const std::string& annotator) {
  if (score < kMinReliability || score > kMaxReliability) {
    throw ReviewError(ReviewErrorKind::Validation, "score must be an integer in 1..5, got " + std::to_string(score));
  }
  std::optional<AnnotationRecord> updated;
  try {
    updated = store_.update(record_id, [&](AnnotationRecord& r) {
      if (r.status == RecordStatus::Failed) {
        throw ReviewError(ReviewErrorKind::Conflict, "record " + record_id + " failed; re-query it before scoring");
      }
      if (r.requery_pending) {
        throw ReviewError(ReviewErrorKind::Conflict, "record " + record_id + " has a re-query in flight");
      }
      r.reliability = ReliabilityScore::make(score, annotator, wall_now_ms());
      r.status = RecordStatus::Reviewed;
      r.updated_at_ms = r.reliability->timestamp_ms;
    });
  } catch (const StoreError& e) {
    throw ReviewError(ReviewErrorKind::Unavailable, e.what());
  }
  if (!updated) throw ReviewError(ReviewErrorKind::NotFound, "no record " + record_id);
  return snapshot(*updated);
}

ReviewItem ReviewService::request_requery(const std::string& record_id, bool force) {
  std::optional<AnnotationRecord> updated;
  try {
    updated = store_.update(record_id, [&](AnnotationRecord& r) {
      if (r.requery_pending) {
        throw ReviewError(ReviewErrorKind::Conflict, "record " + record_id + " already has a re-query in flight");
      }
      if (!force && static_cast<int>(r.attempts.size()) >= max_attempts_) {
        throw ReviewError(ReviewErrorKind::Conflict, "attempt budget of " + std::to_string(max_attempts_) +
                                                         " exhausted for " + record_id + "; pass force to override");
      }
      r.requery_pending = true;
      r.updated_at_ms = wall_now_ms();
    });
  } catch (const StoreError& e) {
    throw ReviewError(ReviewErrorKind::Unavailable, e.what());
  }
  if (!updated) throw ReviewError(ReviewErrorKind::NotFound, "no record " + record_id);
  if (schedule_) schedule_(record_id);
  return snapshot(*updated);
}

// ---------------------------------------------------------------------------

namespace {

bool constant_time_equal(std::string_view a, std::string_view b) {
  unsigned char diff = a.size() == b.size() ? 0 : 1;
  const std::size_t n = std::max(a.size(), b.size());
  for (std::size_t i = 0; i < n; ++i) {
    const unsigned char x = i < a.size() ? static_cast<unsigned char>(a[i]) : 0;
    const unsigned char y = i < b.size() ? static_cast<unsigned char>(b[i]) : 0;
    diff |= static_cast<unsigned char>(x ^ y);
  }
  return diff == 0;
}

std::size_t query_count(const std::map<std::string, std::string>& q, const std::string& key, std::size_t fallback) {
  auto it = q.find(key);
  if (it == q.end() || it->second.empty()) return fallback;
  std::size_t v = 0;
  const auto* first = it->second.data();
  const auto* last = first + it->second.size();
  auto [p, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || p != last) {
    throw ReviewError(ReviewErrorKind::Validation, key + " must be a non-negative integer");
  }
  return v;
}

json parse_body(const std::string& body) {
  if (body.empty()) return json::object();
  try {
    auto j = json::parse(body);
    if (!j.is_object()) throw ReviewError(ReviewErrorKind::BadRequest, "request body must be a JSON object");
    return j;
  } catch (const json::parse_error& e) {
    throw ReviewError(ReviewErrorKind::BadRequest, std::string("malformed JSON body: ") + e.what());
  }
}

json page_json(const Page& p) {
  json items = json::array();
  for (const auto& it : p.items) items.push_back(to_json(it, true));
  return {{"items", items}, {"total", p.total}, {"page", p.page}, {"page_size", p.page_size}};
}

}  // namespace

ReviewApi::ReviewApi(ReviewService& service, std::string token) : service_(service), token_(std::move(token)) {
  if (token_.empty()) throw std::invalid_argument("review API requires a non-empty bearer token");
}

ApiResponse ReviewApi::handle(const ApiRequest& req) const {
  try {
    constexpr std::string_view kBearer = "Bearer ";
    const std::string_view auth = req.authorization;
    if (auth.substr(0, kBearer.size()) != kBearer || !constant_time_equal(auth.substr(kBearer.size()), token_)) {
      throw ReviewError(ReviewErrorKind::Unauthorized, "missing or invalid bearer token");
    }

    constexpr std::string_view kPrefix = "/api/records";
    std::string_view path = req.path;
    if (path.substr(0, kPrefix.size()) != kPrefix) throw ReviewError(ReviewErrorKind::NotFound, "no such endpoint");
    path.remove_prefix(kPrefix.size());

    if (path.empty() || path == "/") {
      if (req.method != "GET") throw ReviewError(ReviewErrorKind::NotFound, "no such endpoint");
      std::optional<RecordStatus> status = RecordStatus::PendingReview;
      if (auto it = req.query.find("status"); it != req.query.end()) {
        if (it->second == "all") {
          status.reset();
        } else if (it->second == "pending") {
          status = RecordStatus::PendingReview;
        } else if (auto s = parse_record_status(it->second)) {
          status = *s;
        } else {
          throw ReviewError(ReviewErrorKind::Validation, "unknown status filter '" + it->second + "'");
        }
      }
      const auto page = query_count(req.query, "page", 1);
      const auto page_size = query_count(req.query, "page_size", 20);
      return {200, page_json(service_.list(status, page, page_size))};
    }

    path.remove_prefix(1);  // leading '/'
    std::string id;
    std::string action;
    if (auto slash = path.rfind('/'); slash != std::string_view::npos) {
      id = std::string(path.substr(0, slash));
      action = std::string(path.substr(slash + 1));
    } else {
      id = std::string(path);
    }
    if (id.empty()) throw ReviewError(ReviewErrorKind::NotFound, "no such endpoint");

    if (action.empty() && req.method == "GET") return {200, to_json(service_.get(id))};

    if (action == "reliability" && req.method == "POST") {
      const auto body = parse_body(req.body);
      if (!body.contains("score") || !body["score"].is_number_integer()) {
        throw ReviewError(ReviewErrorKind::Validation, "score must be an integer in 1..5");
      }
      const auto raw = body["score"].get<std::int64_t>();
      if (raw < kMinReliability || raw > kMaxReliability) {
        throw ReviewError(ReviewErrorKind::Validation, "score must be an integer in 1..5, got " + std::to_string(raw));
      }
      std::string annotator = "anonymous";
      if (body.contains("annotator")) {
        if (!body["annotator"].is_string()) throw ReviewError(ReviewErrorKind::Validation, "annotator must be a string");
        annotator = body["annotator"].get<std::string>();
      }
      return {200, to_json(service_.submit_reliability(id, static_cast<int>(raw), annotator))};
    }

    if (action == "requery" && req.method == "POST") {
      const auto body = parse_body(req.body);
      bool force = false;
      if (body.contains("force")) {
        if (!body["force"].is_boolean()) throw ReviewError(ReviewErrorKind::Validation, "force must be a boolean");
        force = body["force"].get<bool>();
      }
      return {202, to_json(service_.request_requery(id, force))};
    }

    throw ReviewError(ReviewErrorKind::NotFound, "no such endpoint");
  } catch (const ReviewError& e) {
    return {e.http_status(), {{"error", std::string(kind_name(e.kind()))}, {"message", e.what()}}};
  } catch (const StoreError& e) {
    return {503, {{"error", "unavailable"}, {"message", e.what()}}};
  } catch (const std::exception& e) {
    return {500, {{"error", "internal"}, {"message", e.what()}}};
  }
}

std::pair<std::string, int> parse_addr(const std::string& addr) {
  const auto colon = addr.rfind(':');
  if (colon == std::string::npos || colon == 0 || colon + 1 == addr.size()) {
    throw std::invalid_argument("address must be host:port, got '" + addr + "'");
  }
  std::string host = addr.substr(0, colon);
  if (host.size() >= 2 && host.front() == '[' && host.back() == ']') host = host.substr(1, host.size() - 2);
  int port = 0;
  const auto* first = addr.data() + colon + 1;
  const auto* last = addr.data() + addr.size();
  auto [p, ec] = std::from_chars(first, last, port);
  if (ec != std::errc() || p != last || port < 0 || port > 65535) {
    throw std::invalid_argument("invalid port in '" + addr + "'");
  }
  return {host, port};
}

}  // namespace ctxforge
