#include "ctxforge/llm_gateway.hpp"

#include <cstdlib>
#include <fstream>
#include <thread>

#include <json.hpp>

namespace ctxforge {

using nlohmann::json;

std::string_view to_string(BackendKind k) { return k == BackendKind::Live ? "live" : "mock"; }

void GatewayConfig::validate() const {
  if (!(request_timeout_s > 0)) throw ConfigError("api.timeout_s must be > 0");
  if (max_concurrent_requests < 1) throw ConfigError("api.max_concurrent must be >= 1");
  if (max_concurrent_requests > 1024) throw ConfigError("api.max_concurrent must be <= 1024");
  if (min_request_interval_ms < 0) throw ConfigError("api.min_interval_ms must be >= 0");
  if (api_key_env_name.empty()) throw ConfigError("api.key_env must name an environment variable");
}

std::int64_t SystemClock::now_ms() {
  using namespace std::chrono;
  return duration_cast<milliseconds>(steady_clock::now().time_since_epoch()).count();
}

void SystemClock::sleep_until_ms(std::int64_t t) {
  const auto d = t - now_ms();
  if (d > 0) std::this_thread::sleep_for(std::chrono::milliseconds(d));
}

std::int64_t SystemClock::wall_ms() {
  using namespace std::chrono;
  return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
}

void ManualClock::sleep_until_ms(std::int64_t t) {
  auto cur = now_.load();
  while (cur < t && !now_.compare_exchange_weak(cur, t)) {
  }
}

std::string script_key(const Prompt& prompt) { return prompt.dialogue_id + ":" + prompt.window.label(); }

MockBackend::MockBackend(std::vector<ScriptEntry> script, bool rate_limited) : rate_limited_(rate_limited) {
  for (auto& e : script) {
    if (e.key.empty()) {
      fallback_.entries.push_back(std::move(e));
    } else {
      keyed_[e.key].entries.push_back(std::move(e));
    }
  }
}

std::vector<ScriptEntry> MockBackend::load_script(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open mock script " + path);
  std::vector<ScriptEntry> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ConfigError("mock script line " + std::to_string(line_no) + ": " + e.what());
    }
    const std::string key = j.value("key", "");
    if (j.contains("answer") && j["answer"].is_string()) {
      out.push_back(ScriptEntry::ok(j["answer"].get<std::string>(), key));
    } else if (j.contains("failure")) {
      out.push_back(ScriptEntry::fail(j["failure"].is_string() ? j["failure"].get<std::string>() : "scripted failure", key));
    } else {
      throw ConfigError("mock script line " + std::to_string(line_no) + ": needs \"answer\" or \"failure\"");
    }
  }
  if (out.empty()) throw ConfigError("mock script " + path + " is empty");
  return out;
}

std::string MockBackend::send(const Prompt& prompt, const GatewayConfig&) {
  std::lock_guard lock(mu_);
  ++calls_;
  Sequence* seq = &fallback_;
  if (auto it = keyed_.find(script_key(prompt)); it != keyed_.end()) seq = &it->second;
  if (seq->entries.empty()) throw GatewayError("mock: no script entry for " + script_key(prompt));
  const auto& entry = seq->entries[std::min(seq->cursor, seq->entries.size() - 1)];
  if (seq->cursor < seq->entries.size()) ++seq->cursor;
  if (!entry.answer) throw GatewayError("mock: " + entry.failure_message);
  return *entry.answer;
}

std::size_t MockBackend::calls() const {
  std::lock_guard lock(mu_);
  return calls_;
}

std::shared_ptr<MockBackend> mock_backend(std::vector<ScriptEntry> script, bool rate_limited) {
  if (script.empty()) throw std::invalid_argument("mock_backend: script must be non-empty");
  return std::make_shared<MockBackend>(std::move(script), rate_limited);
}

namespace {

const char* credential(const GatewayConfig& config) {
  const char* v = std::getenv(config.api_key_env_name.c_str());
  return (v != nullptr && *v != '\0') ? v : nullptr;
}

}  // namespace

void HttpChatBackend::check_ready(const GatewayConfig& config) const {
  if (credential(config) == nullptr) {
    throw ConfigError("missing API credential: environment variable " + config.api_key_env_name + " is not set");
  }
  if (config.endpoint_url.rfind("http://", 0) != 0 && config.endpoint_url.rfind("https://", 0) != 0) {
    throw ConfigError("api.endpoint must be an http(s) URL, got '" + config.endpoint_url + "'");
  }
}

std::string HttpChatBackend::request_body(const Prompt& prompt, const GatewayConfig& config) {
  json body;
  body["model"] = config.model_name;
  body["messages"] = json::array({json{{"role", "user"}, {"content", prompt.text}}});
  if (config.temperature) body["temperature"] = *config.temperature;
  if (config.top_p) body["top_p"] = *config.top_p;
  return body.dump();
}

std::string HttpChatBackend::extract_answer(const std::string& response_body) {
  json j;
  try {
    j = json::parse(response_body);
  } catch (const json::parse_error& e) {
    throw GatewayError(std::string("chat completion: response is not JSON: ") + e.what());
  }
  try {
    return j.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const json::exception&) {
    throw GatewayError("chat completion: response has no choices[0].message.content");
  }
}

std::string HttpChatBackend::send(const Prompt& prompt, const GatewayConfig& config) {
  const char* key = credential(config);
  if (key == nullptr) throw ConfigError("missing API credential: " + config.api_key_env_name);
  const auto resp = http_post_json(config.endpoint_url, request_body(prompt, config),
                                   {{"Authorization", std::string("Bearer ") + key}}, config.request_timeout_s);
  if (resp.status < 200 || resp.status >= 300) {
    throw GatewayError("chat completion: HTTP " + std::to_string(resp.status));
  }
  return extract_answer(resp.body);
}

Gateway::Gateway(GatewayConfig config, std::shared_ptr<Backend> backend, std::shared_ptr<Clock> clock, LogSink log)
    : config_(std::move(config)),
      backend_(std::move(backend)),
      clock_(clock ? std::move(clock) : std::make_shared<SystemClock>()),
      log_(std::move(log)),
      in_flight_(1) {
  config_.validate();
  if (!backend_) throw ConfigError("gateway needs a backend");
  // Semaphore starts at 1; release the remaining permits.
  if (config_.max_concurrent_requests > 1) in_flight_.release(config_.max_concurrent_requests - 1);
}

std::int64_t Gateway::reserve_slot() {
  std::lock_guard lock(limiter_mu_);
  const auto now = clock_->now_ms();
  const auto slot = next_slot_ ? std::max(now, *next_slot_) : now;
  next_slot_ = slot + config_.min_request_interval_ms;
  dispatch_times_.push_back(slot);
  return slot;
}

std::vector<std::int64_t> Gateway::dispatch_times() const {
  std::lock_guard lock(limiter_mu_);
  return dispatch_times_;
}

void Gateway::log(const std::string& line) const {
  if (log_) log_(line);
}

RawAnswer Gateway::complete(const Prompt& prompt, int attempt_index) {
  if (attempt_index < 1) throw std::invalid_argument("attempt_index must be >= 1");
  backend_->check_ready(config_);

  in_flight_.acquire();
  struct Release {
    std::counting_semaphore<1024>& s;
    ~Release() { s.release(); }
  } release{in_flight_};

  if (backend_->rate_limited()) clock_->sleep_until_ms(reserve_slot());

  std::string head = "dispatch " + script_key(prompt) + " attempt=" + std::to_string(attempt_index) +
                     " backend=" + std::string(to_string(backend_->kind())) +
                     " bytes=" + std::to_string(prompt.text.size());
  if (!config_.redact_content) head += " body=" + prompt.text;
  log(head);

  const auto start = clock_->now_ms();
  std::string text;
  try {
    text = backend_->send(prompt, config_);
  } catch (const GatewayError& e) {
    log("failure " + script_key(prompt) + " attempt=" + std::to_string(attempt_index) + " error=" + e.what());
    throw;
  }
  const auto latency = clock_->now_ms() - start;

  std::string tail = "answer " + script_key(prompt) + " attempt=" + std::to_string(attempt_index) +
                     " latency_ms=" + std::to_string(latency) + " bytes=" + std::to_string(text.size());
  if (!config_.redact_content) tail += " text=" + text;
  log(tail);
  return RawAnswer{std::move(text), latency, attempt_index, backend_->kind()};
}

}  // namespace ctxforge
