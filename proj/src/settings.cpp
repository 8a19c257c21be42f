#include "ctxforge/settings.hpp"

#include <algorithm>
#include <array>
#include <filesystem>
#include <limits>

namespace ctxforge {

namespace {

constexpr std::array kKnownKeys = {
    "workspace.dir",         "api.endpoint",       "api.model",
    "api.timeout_s",         "api.min_interval_ms", "api.max_concurrent",
    "api.key_env",           "api.redact_content", "api.temperature",
    "api.top_p",             "window.max",         "window.stride",
    "retries.max",           "retries.backoff_ms", "parse.max_word_length",
    "parse.content_match_min", "parse.min_target_script_fraction", "prompt.template_path",
    "prompt.language",       "categories.path",    "embed.dim",
    "embed.endpoint",        "projection.seed",    "export.zero_fill_uncovered",
    "run.epoch",             "run.workers",        "review.token_env",
    "review.static_dir",
};

int to_int(long long v, const char* key) {
  if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max()) {
    throw ConfigError(std::string(key) + " is out of range");
  }
  return static_cast<int>(v);
}

}  // namespace

Settings Settings::from_config(const Config& c) {
  for (const auto& [k, v] : c.values()) {
    if (std::find(kKnownKeys.begin(), kKnownKeys.end(), k) == kKnownKeys.end()) {
      throw ConfigError("unknown config key '" + k + "'");
    }
  }
  Settings s;
  s.workspace_dir = c.get_string("workspace.dir", s.workspace_dir);

  auto& g = s.gateway;
  g.endpoint_url = c.get_string("api.endpoint", g.endpoint_url);
  g.model_name = c.get_string("api.model", g.model_name);
  g.request_timeout_s = c.get_double("api.timeout_s", g.request_timeout_s);
  g.min_request_interval_ms = c.get_int("api.min_interval_ms", g.min_request_interval_ms);
  g.max_concurrent_requests = to_int(c.get_int("api.max_concurrent", g.max_concurrent_requests), "api.max_concurrent");
  g.api_key_env_name = c.get_string("api.key_env", g.api_key_env_name);
  g.redact_content = c.get_bool("api.redact_content", g.redact_content);
  g.temperature = c.get_optional_double("api.temperature");
  g.top_p = c.get_optional_double("api.top_p");
  if (g.min_request_interval_ms < 0) throw ConfigError("api.min_interval_ms must be >= 0");
  g.validate();

  s.window_max = to_int(c.get_int("window.max", s.window_max), "window.max");
  s.window_stride = to_int(c.get_int("window.stride", s.window_stride), "window.stride");
  if (s.window_max < 1) throw ConfigError("window.max must be >= 1");
  if (s.window_stride < 1 || s.window_stride >= s.window_max) {
    throw ConfigError("window.stride must be in 1..window.max-1");
  }

  s.retry.max_attempts = to_int(c.get_int("retries.max", s.retry.max_attempts), "retries.max");
  std::vector<long long> def(s.retry.backoff_ms.begin(), s.retry.backoff_ms.end());
  const auto backoff = c.get_int_list("retries.backoff_ms", def);
  s.retry.backoff_ms.assign(backoff.begin(), backoff.end());
  s.retry.validate();

  auto& p = s.parse;
  p.max_word_length = to_int(c.get_int("parse.max_word_length", p.max_word_length), "parse.max_word_length");
  p.content_match_min = to_int(c.get_int("parse.content_match_min", p.content_match_min), "parse.content_match_min");
  p.min_target_script_fraction = c.get_double("parse.min_target_script_fraction", p.min_target_script_fraction);
  if (p.max_word_length < 1) throw ConfigError("parse.max_word_length must be >= 1");
  if (p.content_match_min < 1) throw ConfigError("parse.content_match_min must be >= 1");
  if (p.min_target_script_fraction < 0.0 || p.min_target_script_fraction > 1.0) {
    throw ConfigError("parse.min_target_script_fraction must be in [0,1]");
  }

  s.template_path = c.get_string("prompt.template_path", "");
  s.language = c.get_string("prompt.language", s.language);
  p.target_language = s.language;
  try {
    (void)target_scripts(s.language);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("prompt.language: ") + e.what());
  }
  s.categories_path = c.get_string("categories.path", "");

  const auto dim = c.get_int("embed.dim", static_cast<long long>(s.embed_dim));
  if (dim < 1) throw ConfigError("embed.dim must be >= 1");
  s.embed_dim = static_cast<std::size_t>(dim);
  s.embed_endpoint = c.get_string("embed.endpoint", "");
  const auto seed = c.get_int("projection.seed", 0);
  if (seed < 0) throw ConfigError("projection.seed must be >= 0");
  s.projection_seed = static_cast<std::uint64_t>(seed);
  s.zero_fill_uncovered = c.get_bool("export.zero_fill_uncovered", false);
  s.epoch = c.get_int("run.epoch", 0);
  if (s.epoch < 0) throw ConfigError("run.epoch must be >= 0");
  s.workers = to_int(c.get_int("run.workers", 1), "run.workers");
  if (s.workers < 1 || s.workers > 64) throw ConfigError("run.workers must be in 1..64");

  s.review_token_env = c.get_string("review.token_env", s.review_token_env);
  s.review_static_dir = c.get_string("review.static_dir", "");
  return s;
}

Settings Settings::from_file(const std::string& path) { return from_config(Config::from_file(path)); }

PromptTemplate Settings::load_template() const {
  if (template_path.empty()) return PromptTemplate::builtin(language);
  return PromptTemplate::from_file(template_path, language);
}

CategoryRegistry Settings::load_registry() const {
  if (categories_path.empty()) return CategoryRegistry::defaults();
  return CategoryRegistry::from_file(categories_path);
}

std::shared_ptr<EmbeddingProvider> Settings::make_embedder() const {
  std::shared_ptr<EmbeddingProvider> inner;
  if (embed_endpoint.empty()) {
    inner = std::make_shared<StubEmbedder>(embed_dim);
  } else {
    inner = std::make_shared<HttpEmbeddingProvider>(embed_endpoint, embed_dim);
  }
  return std::make_shared<CachingProvider>(std::move(inner));
}

std::string Settings::dialogues_path() const {
  return (std::filesystem::path(workspace_dir) / "dialogues.jsonl").string();
}

std::string Settings::records_path() const {
  return (std::filesystem::path(workspace_dir) / "records.jsonl").string();
}

std::string Settings::settings_snapshot_path() const {
  return (std::filesystem::path(workspace_dir) / "settings.toml").string();
}

}  // namespace ctxforge
