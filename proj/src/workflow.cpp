#include "ctxforge/workflow.hpp"

#include <atomic>
#include <filesystem>
#include <mutex>
#include <optional>
#include <thread>

namespace ctxforge {

namespace {

struct DialogueResult {
  bool skipped = false;
  std::vector<AnnotationRecord> records;
  std::optional<std::string> aborted;
};

bool already_done(const Dialogue& d, const PipelineDeps& deps) {
  const auto plan = plan_windows(d.size(), deps.max_window, deps.stride);
  for (const auto& w : plan.windows) {
    if (!deps.store->get(make_record_id(d.id, w, deps.epoch))) return false;
  }
  return true;
}

}  // namespace

CorpusRunSummary annotate_corpus(const std::vector<Dialogue>& corpus, const PipelineDeps& deps,
                                 const RetryPolicy& policy, const CorpusRunOptions& options) {
  if (deps.store == nullptr) throw std::invalid_argument("annotate_corpus needs a record store");
  if (options.workers < 1) throw std::invalid_argument("workers must be >= 1");

  std::mutex log_mu;
  auto log = [&](const std::string& line) {
    if (!options.log) return;
    std::lock_guard lock(log_mu);
    options.log(line);
  };

  std::vector<DialogueResult> results(corpus.size());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < corpus.size(); i = next++) {
      const auto& d = corpus[i];
      auto& out = results[i];
      if (options.resume && already_done(d, deps)) {
        out.skipped = true;
        log("skip " + d.id + ": already annotated");
        continue;
      }
      try {
        out.records = annotate_dialogue(d, deps, policy);
        std::size_t ok = 0;
        for (const auto& r : out.records) ok += r.accepted();
        log("done " + d.id + ": " + std::to_string(ok) + "/" + std::to_string(out.records.size()) + " windows accepted");
      } catch (const PipelineAborted& e) {
        out.records = e.partial_records();
        out.aborted = e.what();
        log("abort " + d.id + ": " + e.what());
      }
    }
  };

  const auto n_threads = std::min<std::size_t>(static_cast<std::size_t>(options.workers), corpus.size());
  if (n_threads <= 1) {
    work();
  } else {
    std::vector<std::thread> threads;
    threads.reserve(n_threads);
    for (std::size_t t = 0; t < n_threads; ++t) threads.emplace_back(work);
    for (auto& t : threads) t.join();
  }

  CorpusRunSummary summary;
  summary.dialogues = corpus.size();
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto& r = results[i];
    summary.skipped += r.skipped;
    summary.records += r.records.size();
    for (const auto& rec : r.records) {
      if (rec.accepted()) {
        ++summary.accepted;
      } else {
        ++summary.failed;
      }
    }
    if (r.aborted) summary.aborted.push_back(corpus[i].id + ": " + *r.aborted);
  }
  return summary;
}

FeatureExportSummary export_features(const std::vector<AnnotationRecord>& records,
                                     const std::vector<Dialogue>& corpus, EmbeddingProvider& provider,
                                     const ProjectionWeights& weights, const FeatureOptions& options,
                                     const std::string& template_version, const std::string& path,
                                     const LogSink& log) {
  weights.validate();
  std::map<std::string, std::vector<AnnotationRecord>, std::less<>> by_dialogue;
  for (const auto& r : records) by_dialogue[r.dialogue_id].push_back(r);

  FeatureExportSummary summary;
  std::vector<ContextVector> vectors;
  for (const auto& d : corpus) {
    auto it = by_dialogue.find(d.id);
    if (it == by_dialogue.end()) continue;
    const auto candidates = collect_turn_candidates(it->second, d);
    auto built = build_context_vectors(d, candidates, provider, weights, options);
    ++summary.dialogues;
    summary.skipped_turns += built.skipped_turns.size();
    for (const auto& v : built.vectors) summary.zero_filled += v.zero_filled;
    if (log && !candidates.uncovered.empty()) {
      std::string turns;
      for (int t : candidates.uncovered) turns += (turns.empty() ? "" : ",") + std::to_string(t);
      log("warning: " + d.id + " has uncovered turns [" + turns + "]" +
          (options.zero_fill_uncovered ? ", zero-filled" : ", skipped"));
    }
    for (auto& v : built.vectors) vectors.push_back(std::move(v));
  }
  summary.lines = vectors.size();

  const std::string tmp = path + ".tmp";
  FeatureMetadata meta{provider.id(), weights.seed, template_version, weights.in_dim, weights.out_dim, 0};
  try {
    write_features(tmp, vectors, meta);
    std::filesystem::rename(tmp, path);
    std::filesystem::rename(tmp + ".meta.json", path + ".meta.json");
  } catch (...) {
    std::error_code ec;
    std::filesystem::remove(tmp, ec);
    std::filesystem::remove(tmp + ".meta.json", ec);
    throw;
  }
  return summary;
}

}  // namespace ctxforge
