#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ctxforge/embedding.hpp"
#include "ctxforge/records.hpp"

namespace ctxforge {

/// One turn of one accepted record. A record's reliability score is
/// attributed to every turn it covers.
struct SliceEntry {
  std::string record_id;
  TurnAnnotation annotation;
  std::optional<int> reliability;
};

/// All (record, turn) pairs whose turn carries the given ground-truth label.
/// By default only reviewed records take part; `include_unreviewed` widens
/// the slice to every accepted record (scores then cover the reviewed subset).
struct LabelSlice {
  GroundTruthEmotion label = GroundTruthEmotion::Neutral;
  std::vector<SliceEntry> entries;
};

using DialogueIndex = std::map<std::string, Dialogue, std::less<>>;

DialogueIndex index_dialogues(const std::vector<Dialogue>& dialogues);

struct SliceOptions {
  bool include_unreviewed = false;
};

/// Only final accepted answers contribute; earlier rejected attempts do not.
LabelSlice make_slice(const std::vector<AnnotationRecord>& records, const DialogueIndex& dialogues,
                      GroundTruthEmotion label, const SliceOptions& options = {});

/// Mean score over scored entries; nullopt when none is scored.
std::optional<double> mean_reliability(const LabelSlice& slice);

struct WordCount {
  std::string word;
  std::size_t count = 0;
  friend bool operator==(const WordCount&, const WordCount&) = default;
};

std::map<std::string, std::size_t> word_frequencies(const LabelSlice& slice, Slot slot);

/// Modal word; ties go to the bytewise-smallest word. nullopt on an empty slice.
std::optional<WordCount> most_frequent_word(const LabelSlice& slice, Slot slot);

std::size_t unique_word_counts(const LabelSlice& slice, Slot slot);
std::size_t unique_word_counts(const std::vector<AnnotationRecord>& records, const DialogueIndex& dialogues, Slot slot,
                               GroundTruthEmotion label, const SliceOptions& options = {});

/// Fraction of distinct words occurring at most k times; nullopt when the
/// slice has no words.
std::optional<double> tail_fraction(const LabelSlice& slice, Slot slot, std::size_t k = 5);
std::optional<double> tail_fraction(const std::vector<AnnotationRecord>& records, const DialogueIndex& dialogues,
                                    Slot slot, GroundTruthEmotion label, std::size_t k = 5,
                                    const SliceOptions& options = {});

struct ExportedWord {
  std::string word;
  std::vector<std::string> slots;   // subset of intention/emotion/style
  std::vector<std::string> labels;  // ground-truth labels, "unlabeled" for turns without one
};

/// Unique context words over the records in scope whose dialogue is known,
/// sorted bytewise.
std::vector<ExportedWord> unique_context_words(const std::vector<AnnotationRecord>& records,
                                               const DialogueIndex& dialogues, const SliceOptions& options = {});

/// Writes embeddings.tsv (header + one row per unique word) and labels.tsv
/// (word, slots, labels) into `dir`. On a provider failure neither file is
/// left behind.
void export_embedding_matrix(const std::vector<AnnotationRecord>& records, const DialogueIndex& dialogues,
                             EmbeddingProvider& provider, const std::filesystem::path& dir,
                             const SliceOptions& options = {});

/// table1.csv, table2.csv, tail.csv, embeddings.tsv, labels.tsv and report.md.
void write_report(const std::vector<AnnotationRecord>& records, const DialogueIndex& dialogues,
                  EmbeddingProvider& provider, const std::filesystem::path& dir, std::size_t tail_k = 5,
                  const SliceOptions& options = {});

}  // namespace ctxforge
