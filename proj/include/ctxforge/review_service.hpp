#pragma once

#include <condition_variable>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "ctxforge/analysis.hpp"
#include "ctxforge/pipeline.hpp"
#include "ctxforge/records.hpp"

namespace ctxforge {

enum class ReviewErrorKind { Validation, NotFound, Conflict, Unavailable, Unauthorized, BadRequest };

class ReviewError : public std::runtime_error {
 public:
  ReviewError(ReviewErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  [[nodiscard]] ReviewErrorKind kind() const { return kind_; }
  [[nodiscard]] int http_status() const;

 private:
  ReviewErrorKind kind_;
};

/// Read-only snapshot of a record for annotators.
struct ReviewItem {
  std::string record_id;
  std::string dialogue_id;
  TurnWindow window;
  std::string prompt_text;
  std::string latest_answer;
  std::vector<TurnAnnotation> annotations;
  std::optional<std::string> failure;  // "<kind>: <detail>" when not accepted
  std::vector<Turn> excerpt;
  RecordStatus status = RecordStatus::Failed;
  int attempts = 0;
  std::optional<ReliabilityScore> reliability;
  bool requery_pending = false;
};

nlohmann::json to_json(const ReviewItem& item, bool summary = false);

struct Page {
  std::vector<ReviewItem> items;
  std::size_t total = 0;
  std::size_t page = 1;
  std::size_t page_size = 20;
};

/// Processes re-query jobs on a background thread, one at a time.
class RequeryWorker {
 public:
  using Handler = std::function<void(const std::string& record_id)>;
  explicit RequeryWorker(Handler handler);
  ~RequeryWorker();
  RequeryWorker(const RequeryWorker&) = delete;
  RequeryWorker& operator=(const RequeryWorker&) = delete;

  void enqueue(const std::string& record_id);
  /// Blocks until every job enqueued so far has finished.
  void drain();
  [[nodiscard]] std::size_t processed() const;
  [[nodiscard]] std::vector<std::string> errors() const;

 private:
  void run();

  Handler handler_;
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::condition_variable idle_cv_;
  std::deque<std::string> queue_;
  bool busy_ = false;
  bool stop_ = false;
  std::size_t processed_ = 0;
  std::vector<std::string> errors_;
  std::thread thread_;
};

/// Re-runs one attempt for a record and writes the result back. A handler
/// built here clears requery_pending even when the dispatch throws.
RequeryWorker::Handler make_requery_handler(RecordStore& store, const DialogueIndex& dialogues,
                                            const PipelineDeps& deps);

class ReviewService {
 public:
  using Scheduler = std::function<void(const std::string& record_id)>;

  /// `dialogues` must outlive the service. `max_attempts` is the per-record
  /// attempt budget a non-forced re-query may not exceed.
  ReviewService(RecordStore& store, const DialogueIndex& dialogues, int max_attempts, Scheduler schedule);

  /// Pending-review records with no re-query in flight, ordered by
  /// (dialogue_id, window start); `page` is 1-based.
  [[nodiscard]] Page list(std::optional<RecordStatus> status, std::size_t page, std::size_t page_size) const;
  [[nodiscard]] Page list_pending(std::size_t page, std::size_t page_size) const;
  [[nodiscard]] ReviewItem get(const std::string& record_id) const;
  ReviewItem submit_reliability(const std::string& record_id, int score, const std::string& annotator);
  ReviewItem request_requery(const std::string& record_id, bool force);

  [[nodiscard]] int max_attempts() const { return max_attempts_; }

 private:
  [[nodiscard]] ReviewItem snapshot(const AnnotationRecord& r) const;

  RecordStore& store_;
  const DialogueIndex& dialogues_;
  int max_attempts_;
  Scheduler schedule_;
};

struct ApiRequest {
  std::string method;
  std::string path;
  std::map<std::string, std::string> query;
  std::string body;
  std::string authorization;  // raw Authorization header value
};

struct ApiResponse {
  int status = 200;
  nlohmann::json body;
};

/// JSON API over a ReviewService, independent of any socket layer.
class ReviewApi {
 public:
  ReviewApi(ReviewService& service, std::string token);
  [[nodiscard]] ApiResponse handle(const ApiRequest& request) const;

 private:
  ReviewService& service_;
  std::string token_;
};

struct ServerOptions {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string static_dir;  // served at "/" when it exists
};

/// httplib front end for a ReviewApi.
class ReviewServer {
 public:
  ReviewServer(ReviewApi& api, ServerOptions options);
  ~ReviewServer();
  ReviewServer(const ReviewServer&) = delete;
  ReviewServer& operator=(const ReviewServer&) = delete;

  /// Binds the socket; port 0 picks a free one. Returns the bound port.
  int bind();
  /// Blocks serving requests until stop() is called.
  void listen();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Parses "host:port"; throws std::invalid_argument on malformed input.
std::pair<std::string, int> parse_addr(const std::string& addr);

}  // namespace ctxforge
