#pragma once

#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ctxforge/analysis.hpp"
#include "ctxforge/corpus.hpp"

namespace fixtures {

inline constexpr double kReliabilityTolerance = 1e-12;
inline constexpr double kTailTolerance = 1e-12;

struct AnalysisFixture {
  std::vector<ctxforge::AnnotationRecord> records;
  ctxforge::DialogueIndex dialogues;
  nlohmann::json expected;
};

inline AnalysisFixture load_analysis_fixture(const std::string& dir) {
  AnalysisFixture f;
  f.dialogues = ctxforge::index_dialogues(ctxforge::load_dialogues(dir + "/dialogues.jsonl"));
  f.records = ctxforge::RecordStore(dir + "/records.jsonl").all();
  std::ifstream in(dir + "/expected.json", std::ios::binary);
  f.expected = nlohmann::json::parse(in);
  return f;
}

/// Every disagreement between the library and the frozen expectations, as
/// human-readable lines; empty means the regression holds.
inline std::vector<std::string> analysis_mismatches(const AnalysisFixture& f) {
  using namespace ctxforge;
  std::vector<std::string> bad;
  auto note = [&](const std::string& what) { bad.push_back(what); };
  if (f.records.size() != f.expected.at("records").get<std::size_t>()) {
    note("record count " + std::to_string(f.records.size()));
  }
  for (const char* scope : {"reviewed", "all"}) {
    const SliceOptions opts{std::string(scope) == "all"};
    const auto& exp = f.expected.at(scope);
    for (auto gt : kGroundTruthEmotions) {
      const std::string label(to_string(gt));
      const auto& row = exp.at("labels").at(label);
      const auto where = std::string(scope) + "/" + label;
      const auto slice = make_slice(f.records, f.dialogues, gt, opts);
      if (slice.entries.size() != row.at("entries").get<std::size_t>()) note(where + " entries");
      const auto mean = mean_reliability(slice);
      if (row.at("mean_reliability").is_null() != !mean.has_value() ||
          (mean && std::abs(*mean - row.at("mean_reliability").get<double>()) > kReliabilityTolerance)) {
        note(where + " mean reliability");
      }
      for (auto slot : kSlots) {
        const std::string s(to_string(slot));
        const auto top = most_frequent_word(slice, slot);
        const auto& et = row.at("top").at(s);
        if (et.is_null() != !top.has_value() ||
            (top && (top->word != et.at(0).get<std::string>() || top->count != et.at(1).get<std::size_t>()))) {
          note(where + " top " + s);
        }
        if (unique_word_counts(slice, slot) != row.at("unique").at(s).get<std::size_t>()) note(where + " unique " + s);
        for (auto [key, k] : {std::pair{"tail5", std::size_t{5}}, std::pair{"tail1", std::size_t{1}}}) {
          const auto frac = tail_fraction(slice, slot, k);
          const auto& ef = row.at(key).at(s);
          if (ef.is_null() != !frac.has_value() ||
              (frac && std::abs(*frac - ef.get<double>()) > kTailTolerance)) {
            note(where + " " + key + " " + s);
          }
        }
      }
    }
    const auto words = unique_context_words(f.records, f.dialogues, opts);
    const auto& ew = exp.at("words");
    if (words.size() != ew.size()) {
      note(std::string(scope) + " unique word count " + std::to_string(words.size()));
      continue;
    }
    for (std::size_t i = 0; i < words.size(); ++i) {
      if (words[i].word != ew[i].at(0).get<std::string>() ||
          words[i].slots != ew[i].at(1).get<std::vector<std::string>>() ||
          words[i].labels != ew[i].at(2).get<std::vector<std::string>>()) {
        note(std::string(scope) + " word " + words[i].word);
      }
    }
  }
  return bad;
}

}  // namespace fixtures
