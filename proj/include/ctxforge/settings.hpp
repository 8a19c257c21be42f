#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include "ctxforge/answer_parsing.hpp"
#include "ctxforge/config.hpp"
#include "ctxforge/core_model.hpp"
#include "ctxforge/embedding.hpp"
#include "ctxforge/llm_gateway.hpp"
#include "ctxforge/pipeline.hpp"
#include "ctxforge/prompt_builder.hpp"

namespace ctxforge {

/// Typed view of a Config. Every recognised key:
///
///   workspace.dir                     ./ctxforge-data
///   api.endpoint / api.model / api.timeout_s / api.min_interval_ms
///   api.max_concurrent / api.key_env / api.redact_content
///   api.temperature / api.top_p       (unset: provider default)
///   window.max / window.stride        5 / 2
///   retries.max / retries.backoff_ms  3 / [1000]
///   parse.max_word_length / parse.content_match_min / parse.min_target_script_fraction
///   prompt.template_path / prompt.language
///   categories.path                   synonym map JSON (default: built in)
///   embed.dim / embed.endpoint        768 / (stub embedder)
///   projection.seed                   0
///   export.zero_fill_uncovered        false
///   run.epoch / run.workers           0 / 1
///   review.token_env / review.static_dir
struct Settings {
  std::string workspace_dir = "./ctxforge-data";
  GatewayConfig gateway;
  RetryPolicy retry;
  int window_max = kDefaultMaxWindow;
  int window_stride = kDefaultStride;
  ParseOptions parse;
  std::string template_path;
  std::string language = "ja";
  std::string categories_path;
  std::size_t embed_dim = kWordEmbeddingDim;
  std::string embed_endpoint;
  std::uint64_t projection_seed = 0;
  bool zero_fill_uncovered = false;
  std::int64_t epoch = 0;
  int workers = 1;
  std::string review_token_env = "CTXFORGE_REVIEW_TOKEN";
  std::string review_static_dir;

  /// Throws ConfigError on unknown keys or invalid values.
  static Settings from_config(const Config& config);
  static Settings from_file(const std::string& path);

  [[nodiscard]] PromptTemplate load_template() const;
  [[nodiscard]] CategoryRegistry load_registry() const;
  [[nodiscard]] std::shared_ptr<EmbeddingProvider> make_embedder() const;

  [[nodiscard]] std::string dialogues_path() const;
  [[nodiscard]] std::string records_path() const;
  [[nodiscard]] std::string settings_snapshot_path() const;
};

}  // namespace ctxforge
