#include "ctxforge/analysis.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace ctxforge {

namespace fs = std::filesystem;

namespace {
bool in_scope(const AnnotationRecord& r, const SliceOptions& options) {
  if (!r.accepted()) return false;
  return options.include_unreviewed || r.status == RecordStatus::Reviewed;
}
}  // namespace

DialogueIndex index_dialogues(const std::vector<Dialogue>& dialogues) {
  DialogueIndex idx;
  for (const auto& d : dialogues) idx.emplace(d.id, d);
  return idx;
}

LabelSlice make_slice(const std::vector<AnnotationRecord>& records, const DialogueIndex& dialogues,
                      GroundTruthEmotion label, const SliceOptions& options) {
  LabelSlice slice;
  slice.label = label;
  for (const auto& r : records) {
    if (!in_scope(r, options)) continue;
    auto d = dialogues.find(r.dialogue_id);
    if (d == dialogues.end()) continue;
    for (const auto& a : r.accepted_annotations()) {
      if (a.turn_index < 1 || a.turn_index > d->second.size()) continue;
      const auto& gt = d->second.turn(a.turn_index).ground_truth_emotion;
      if (!gt || *gt != label) continue;
      SliceEntry e{r.record_id, a, std::nullopt};
      if (r.status == RecordStatus::Reviewed && r.reliability) e.reliability = r.reliability->value;
      slice.entries.push_back(std::move(e));
    }
  }
  return slice;
}

std::optional<double> mean_reliability(const LabelSlice& slice) {
  long long sum = 0;
  std::size_t n = 0;
  for (const auto& e : slice.entries) {
    if (!e.reliability) continue;
    sum += *e.reliability;
    ++n;
  }
  if (n == 0) return std::nullopt;
  return static_cast<double>(sum) / static_cast<double>(n);
}

std::map<std::string, std::size_t> word_frequencies(const LabelSlice& slice, Slot slot) {
  std::map<std::string, std::size_t> freq;
  for (const auto& e : slice.entries) ++freq[e.annotation.word(slot)];
  return freq;
}

std::optional<WordCount> most_frequent_word(const LabelSlice& slice, Slot slot) {
  const auto freq = word_frequencies(slice, slot);
  std::optional<WordCount> best;
  // std::map iterates in bytewise order, so strict > keeps the smallest word on ties.
  for (const auto& [w, c] : freq) {
    if (!best || c > best->count) best = WordCount{w, c};
  }
  return best;
}

std::size_t unique_word_counts(const LabelSlice& slice, Slot slot) { return word_frequencies(slice, slot).size(); }

std::size_t unique_word_counts(const std::vector<AnnotationRecord>& records, const DialogueIndex& dialogues, Slot slot,
                               GroundTruthEmotion label, const SliceOptions& options) {
  return unique_word_counts(make_slice(records, dialogues, label, options), slot);
}

std::optional<double> tail_fraction(const LabelSlice& slice, Slot slot, std::size_t k) {
  const auto freq = word_frequencies(slice, slot);
  if (freq.empty()) return std::nullopt;
  const auto tail = std::count_if(freq.begin(), freq.end(), [k](const auto& p) { return p.second <= k; });
  return static_cast<double>(tail) / static_cast<double>(freq.size());
}

std::optional<double> tail_fraction(const std::vector<AnnotationRecord>& records, const DialogueIndex& dialogues,
                                    Slot slot, GroundTruthEmotion label, std::size_t k,
                                    const SliceOptions& options) {
  return tail_fraction(make_slice(records, dialogues, label, options), slot, k);
}

std::vector<ExportedWord> unique_context_words(const std::vector<AnnotationRecord>& records,
                                               const DialogueIndex& dialogues, const SliceOptions& options) {
  struct Tags {
    std::set<Slot> slots;
    std::set<std::string> labels;
  };
  std::map<std::string, Tags> words;
  for (const auto& r : records) {
    if (!in_scope(r, options)) continue;
    const auto d = dialogues.find(r.dialogue_id);
    if (d == dialogues.end()) continue;
    for (const auto& a : r.accepted_annotations()) {
      std::string label = "unlabeled";
      if (a.turn_index >= 1 && a.turn_index <= d->second.size()) {
        if (const auto& gt = d->second.turn(a.turn_index).ground_truth_emotion) label = std::string(to_string(*gt));
      }
      for (auto slot : kSlots) {
        auto& t = words[a.word(slot)];
        t.slots.insert(slot);
        t.labels.insert(label);
      }
    }
  }
  // Labels listed in Neutral, Happy, Angry, Sad order, "unlabeled" last.
  std::vector<ExportedWord> out;
  out.reserve(words.size());
  for (const auto& [w, t] : words) {
    ExportedWord ew{w, {}, {}};
    for (auto s : t.slots) ew.slots.emplace_back(to_string(s));
    for (auto gt : kGroundTruthEmotions) {
      if (t.labels.count(std::string(to_string(gt)))) ew.labels.emplace_back(to_string(gt));
    }
    if (t.labels.count("unlabeled")) ew.labels.emplace_back("unlabeled");
    out.push_back(std::move(ew));
  }
  return out;
}

namespace {

std::string join(const std::vector<std::string>& xs, const char* sep) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += sep;
    out += xs[i];
  }
  return out;
}

std::string fmt_double(double x, int precision) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", precision, x);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

void write_file(const fs::path& p, const std::string& contents) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << contents;
  if (!out) throw std::runtime_error("write to " + p.string() + " failed");
}

}  // namespace

void export_embedding_matrix(const std::vector<AnnotationRecord>& records, const DialogueIndex& dialogues,
                             EmbeddingProvider& provider, const fs::path& dir, const SliceOptions& options) {
  fs::create_directories(dir);
  const auto words = unique_context_words(records, dialogues, options);
  const fs::path emb_tmp = dir / ".embeddings.tsv.tmp";
  const fs::path lab_tmp = dir / ".labels.tsv.tmp";
  try {
    std::ostringstream emb;
    std::ostringstream lab;
    for (std::size_t i = 0; i < provider.dim(); ++i) emb << (i ? "\t" : "") << "dim_" << i;
    emb << '\n';
    lab << "word\tslots\tlabels\n";
    for (const auto& w : words) {
      const auto e = embed_word(w.word, provider);
      for (std::size_t i = 0; i < e.vector.size(); ++i) {
        char buf[40];
        std::snprintf(buf, sizeof buf, "%.17g", e.vector[i]);
        emb << (i ? "\t" : "") << buf;
      }
      emb << '\n';
      lab << w.word << '\t' << join(w.slots, ",") << '\t' << join(w.labels, ",") << '\n';
    }
    write_file(emb_tmp, emb.str());
    write_file(lab_tmp, lab.str());
    fs::rename(emb_tmp, dir / "embeddings.tsv");
    fs::rename(lab_tmp, dir / "labels.tsv");
  } catch (...) {
    std::error_code ec;
    fs::remove(emb_tmp, ec);
    fs::remove(lab_tmp, ec);
    throw;
  }
}

void write_report(const std::vector<AnnotationRecord>& records, const DialogueIndex& dialogues,
                  EmbeddingProvider& provider, const fs::path& dir, std::size_t tail_k,
                  const SliceOptions& options) {
  fs::create_directories(dir);
  std::vector<LabelSlice> slices;
  for (auto gt : kGroundTruthEmotions) slices.push_back(make_slice(records, dialogues, gt, options));

  std::ostringstream t1, t2, tail, md;
  t1 << "label,mean_reliability,scored_turns,intention,intention_count,emotion,emotion_count,style,style_count\n";
  t2 << "label,intention,emotion,style\n";
  tail << "label,slot,unique_words,k,tail_words,tail_fraction\n";

  md << "# Context-word analysis\n\n";
  md << "Records: " << records.size() << " (accepted: "
     << std::count_if(records.begin(), records.end(), [](const auto& r) { return r.accepted(); })
     << ", reviewed: "
     << std::count_if(records.begin(), records.end(),
                      [](const auto& r) { return r.status == RecordStatus::Reviewed; })
     << ")\n\n";
  md << "## Reliability and most frequent words\n\n";
  md << "| Label | Reliability | Intention | Emotion | Style |\n|---|---|---|---|---|\n";

  for (const auto& s : slices) {
    const auto label = std::string(to_string(s.label));
    const auto mean = mean_reliability(s);
    const auto scored = std::count_if(s.entries.begin(), s.entries.end(), [](const auto& e) { return e.reliability; });
    t1 << label << ',' << (mean ? fmt_double(*mean, 4) : "") << ',' << scored;
    md << "| " << label << " | " << (mean ? fmt_double(*mean, 2) : "n/a");
    for (auto slot : kSlots) {
      const auto top = most_frequent_word(s, slot);
      t1 << ',' << (top ? csv_field(top->word) : "") << ',' << (top ? std::to_string(top->count) : "");
      md << " | " << (top ? top->word + " (" + std::to_string(top->count) + ")" : "n/a");
    }
    t1 << '\n';
    md << " |\n";

    t2 << label;
    for (auto slot : kSlots) t2 << ',' << unique_word_counts(s, slot);
    t2 << '\n';

    for (auto slot : kSlots) {
      const auto freq = word_frequencies(s, slot);
      const auto n_tail =
          std::count_if(freq.begin(), freq.end(), [tail_k](const auto& p) { return p.second <= tail_k; });
      const auto frac = tail_fraction(s, slot, tail_k);
      tail << label << ',' << to_string(slot) << ',' << freq.size() << ',' << tail_k << ',' << n_tail << ','
           << (frac ? fmt_double(*frac, 4) : "") << '\n';
    }
  }

  md << "\n## Unique context words\n\n| Label | Intention | Emotion | Style |\n|---|---|---|---|\n";
  for (const auto& s : slices) {
    md << "| " << to_string(s.label);
    for (auto slot : kSlots) md << " | " << unique_word_counts(s, slot);
    md << " |\n";
  }
  md << "\n## Frequency tail (k = " << tail_k << ")\n\n| Label | Intention | Emotion | Style |\n|---|---|---|---|\n";
  for (const auto& s : slices) {
    md << "| " << to_string(s.label);
    for (auto slot : kSlots) {
      const auto f = tail_fraction(s, slot, tail_k);
      md << " | " << (f ? fmt_double(*f * 100.0, 1) + "%" : "n/a");
    }
    md << " |\n";
  }
  md << "\nEmbedding matrix: embeddings.tsv with labels.tsv (" << unique_context_words(records, dialogues, options).size()
     << " unique words, provider " << provider.id() << ").\n";
  md << "Scope: " << (options.include_unreviewed ? "all accepted records" : "reviewed records only") << ".\n";

  export_embedding_matrix(records, dialogues, provider, dir, options);
  write_file(dir / "table1.csv", t1.str());
  write_file(dir / "table2.csv", t2.str());
  write_file(dir / "tail.csv", tail.str());
  write_file(dir / "report.md", md.str());
}

}  // namespace ctxforge
