#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "ctxforge/analysis.hpp"
#include "ctxforge/embedding.hpp"
#include "ctxforge/pipeline.hpp"

namespace ctxforge {

struct CorpusRunOptions {
  /// Dialogues annotated concurrently. Windows of one dialogue always run in
  /// plan order on one worker.
  int workers = 1;
  /// Skip dialogues whose planned records all exist in the store already.
  bool resume = true;
  LogSink log;
};

struct CorpusRunSummary {
  std::size_t dialogues = 0;
  std::size_t skipped = 0;
  std::size_t records = 0;
  std::size_t accepted = 0;
  std::size_t failed = 0;
  std::vector<std::string> aborted;  // "<dialogue_id>: <reason>", corpus order
};

/// annotate_dialogue over a corpus. `deps.store` is required. An aborted
/// dialogue does not stop the others.
CorpusRunSummary annotate_corpus(const std::vector<Dialogue>& corpus, const PipelineDeps& deps,
                                 const RetryPolicy& policy, const CorpusRunOptions& options = {});

struct FeatureExportSummary {
  std::size_t lines = 0;
  std::size_t dialogues = 0;
  std::size_t zero_filled = 0;
  std::size_t skipped_turns = 0;
};

/// Builds context vectors for every dialogue of the corpus (in corpus order)
/// from the accepted records, and writes the feature JSONL plus its metadata
/// sidecar.
FeatureExportSummary export_features(const std::vector<AnnotationRecord>& records,
                                     const std::vector<Dialogue>& corpus, EmbeddingProvider& provider,
                                     const ProjectionWeights& weights, const FeatureOptions& options,
                                     const std::string& template_version, const std::string& path,
                                     const LogSink& log = {});

}  // namespace ctxforge
