#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <stdexcept>
#include <string>
#include <vector>

#include "ctxforge/config.hpp"
#include "ctxforge/prompt_builder.hpp"

namespace ctxforge {

/// Transport failure, HTTP non-success or timeout. Safe to retry.
class GatewayError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class BackendKind { Live, Mock };

std::string_view to_string(BackendKind k);

struct RawAnswer {
  std::string text;
  std::int64_t latency_ms = 0;
  int attempt_index = 1;
  BackendKind backend = BackendKind::Mock;

  friend bool operator==(const RawAnswer&, const RawAnswer&) = default;
};

struct GatewayConfig {
  std::string endpoint_url = "https://api.openai.com/v1/chat/completions";
  std::string model_name = "gpt-3.5-turbo";
  double request_timeout_s = 60.0;
  int max_concurrent_requests = 1;
  std::int64_t min_request_interval_ms = 1000;
  std::string api_key_env_name = "CONTEXT_LLM_API_KEY";
  bool redact_content = false;
  std::optional<double> temperature;
  std::optional<double> top_p;

  /// Throws ConfigError on a non-positive timeout or concurrency below 1.
  void validate() const;
};

/// Monotonic time source; injectable so rate limiting and backoff are testable.
class Clock {
 public:
  virtual ~Clock() = default;
  virtual std::int64_t now_ms() = 0;
  virtual void sleep_until_ms(std::int64_t t) = 0;
  /// Wall-clock milliseconds since the epoch, for persisted timestamps.
  virtual std::int64_t wall_ms() = 0;
  void sleep_for_ms(std::int64_t d) { sleep_until_ms(now_ms() + d); }
};

class SystemClock final : public Clock {
 public:
  std::int64_t now_ms() override;
  void sleep_until_ms(std::int64_t t) override;
  std::int64_t wall_ms() override;
};

/// Test clock: sleeping advances time instantly; never goes backwards.
class ManualClock final : public Clock {
 public:
  explicit ManualClock(std::int64_t start_ms = 0) : now_(start_ms) {}
  std::int64_t now_ms() override { return now_.load(); }
  void sleep_until_ms(std::int64_t t) override;
  std::int64_t wall_ms() override { return now_.load(); }
  void advance(std::int64_t d) { now_ += d; }

 private:
  std::atomic<std::int64_t> now_;
};

using LogSink = std::function<void(const std::string&)>;

class Backend {
 public:
  virtual ~Backend() = default;
  [[nodiscard]] virtual BackendKind kind() const = 0;
  [[nodiscard]] virtual bool rate_limited() const = 0;
  /// Throws ConfigError when the backend cannot be used at all.
  virtual void check_ready(const GatewayConfig& config) const = 0;
  /// One request. Throws GatewayError on retryable failure.
  virtual std::string send(const Prompt& prompt, const GatewayConfig& config) = 0;
};

/// One scripted mock reply. An empty key joins the fallback sequence; a key
/// "<dialogue_id>:<start>-<end>" only serves prompts for that window.
struct ScriptEntry {
  std::optional<std::string> answer;  // nullopt = scripted failure
  std::string failure_message;
  std::string key;

  static ScriptEntry ok(std::string text, std::string key = {}) { return {std::move(text), {}, std::move(key)}; }
  static ScriptEntry fail(std::string message = "scripted failure", std::string key = {}) {
    return {std::nullopt, std::move(message), std::move(key)};
  }
};

std::string script_key(const Prompt& prompt);

/// Replays a script in order, then repeats its final entry. Calls are
/// serialized so concurrent callers see a total order on consumption.
class MockBackend final : public Backend {
 public:
  explicit MockBackend(std::vector<ScriptEntry> script, bool rate_limited = false);

  /// JSONL: {"answer": "..."} or {"failure": "..."}, optional "key".
  static std::vector<ScriptEntry> load_script(const std::string& path);

  [[nodiscard]] BackendKind kind() const override { return BackendKind::Mock; }
  [[nodiscard]] bool rate_limited() const override { return rate_limited_; }
  void check_ready(const GatewayConfig&) const override {}
  std::string send(const Prompt& prompt, const GatewayConfig& config) override;

  [[nodiscard]] std::size_t calls() const;

 private:
  struct Sequence {
    std::vector<ScriptEntry> entries;
    std::size_t cursor = 0;
  };
  mutable std::mutex mu_;
  Sequence fallback_;
  std::map<std::string, Sequence> keyed_;
  std::size_t calls_ = 0;
  bool rate_limited_;
};

/// Throws std::invalid_argument on an empty script.
std::shared_ptr<MockBackend> mock_backend(std::vector<ScriptEntry> script, bool rate_limited = false);

/// Chat-completion JSON over HTTP(S): {model, messages:[{role:"user", content}]},
/// answer read from choices[0].message.content.
class HttpChatBackend final : public Backend {
 public:
  [[nodiscard]] BackendKind kind() const override { return BackendKind::Live; }
  [[nodiscard]] bool rate_limited() const override { return true; }
  void check_ready(const GatewayConfig& config) const override;
  std::string send(const Prompt& prompt, const GatewayConfig& config) override;

  static std::string request_body(const Prompt& prompt, const GatewayConfig& config);
  /// Throws GatewayError when the body is not a chat-completion response.
  static std::string extract_answer(const std::string& response_body);
};

/// Shared entry point for all pipeline workers. Dispatch is serialized
/// through a min-interval limiter; at most max_concurrent_requests requests
/// are in flight.
class Gateway {
 public:
  Gateway(GatewayConfig config, std::shared_ptr<Backend> backend, std::shared_ptr<Clock> clock = nullptr,
          LogSink log = {});

  /// Throws GatewayError (retryable) or ConfigError (fatal, raised before any
  /// network activity).
  RawAnswer complete(const Prompt& prompt, int attempt_index = 1);

  [[nodiscard]] const GatewayConfig& config() const { return config_; }
  [[nodiscard]] Clock& clock() { return *clock_; }
  [[nodiscard]] BackendKind backend_kind() const { return backend_->kind(); }
  /// Clock readings at which rate-limited requests were dispatched.
  [[nodiscard]] std::vector<std::int64_t> dispatch_times() const;

 private:
  std::int64_t reserve_slot();
  void log(const std::string& line) const;

  GatewayConfig config_;
  std::shared_ptr<Backend> backend_;
  std::shared_ptr<Clock> clock_;
  LogSink log_;
  std::counting_semaphore<1024> in_flight_;
  mutable std::mutex limiter_mu_;
  std::optional<std::int64_t> next_slot_;
  std::vector<std::int64_t> dispatch_times_;
};

struct HttpResponse {
  int status = 0;
  std::string body;
};

/// POST a JSON body; throws GatewayError on transport failure or timeout.
HttpResponse http_post_json(const std::string& url, const std::string& body,
                            const std::vector<std::pair<std::string, std::string>>& headers, double timeout_s);

}  // namespace ctxforge
