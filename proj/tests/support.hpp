#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "ctxforge/core_model.hpp"
#include "ctxforge/corpus.hpp"
#include "ctxforge/prompt_builder.hpp"

namespace fixtures {

inline const std::vector<std::string> kIntentions = {"挨拶", "質問", "共感", "同意", "感謝",
                                                     "説明", "提案", "励まし", "謝罪", "確認"};
inline const std::vector<std::string> kEmotions = {"喜び", "期待", "怒り", "悲しみ", "驚き", "信頼", "中立", "不安"};
inline const std::vector<std::string> kStyles = {"明るい", "丁寧", "穏やか", "元気", "クール", "知的"};

inline std::string teacher() { return "先生"; }
inline std::string student() { return "学生"; }

/// Dialogue with turns alternating teacher/student; ground-truth labels cycle
/// Neutral, Happy, Angry, Sad unless `labelled` is false.
inline ctxforge::Dialogue make_dialogue(const std::string& id, int n, bool labelled = true) {
  ctxforge::Dialogue d;
  d.id = id;
  d.setting = "放課後の教室での雑談";
  for (int i = 1; i <= n; ++i) {
    ctxforge::Turn t;
    t.dialogue_id = id;
    t.index = i;
    t.speaker = (i % 2 == 1) ? teacher() : student();
    t.content = "これは" + id + "の" + std::to_string(i) + "番目の発話です。今日は天気がいいですね";
    if (labelled) t.ground_truth_emotion = ctxforge::kGroundTruthEmotions[static_cast<std::size_t>((i - 1) % 4)];
    d.turns.push_back(std::move(t));
  }
  return d;
}

/// Deterministic triple for (dialogue, turn, window start, salt).
inline std::array<std::string, 3> triple_for(const std::string& dialogue_id, int turn, int window_start, int salt = 0) {
  const auto h = std::hash<std::string>{}(dialogue_id) + static_cast<std::size_t>(turn * 31 + window_start * 7 + salt);
  return {kIntentions[h % kIntentions.size()], kEmotions[(h / 3) % kEmotions.size()],
          kStyles[(h / 7) % kStyles.size()]};
}

inline std::string valid_answer(const std::string& dialogue_id, ctxforge::TurnWindow w, int salt = 0) {
  std::ostringstream out;
  for (int i = w.start; i <= w.end; ++i) {
    const auto t = triple_for(dialogue_id, i, w.start, salt);
    out << i << ": " << t[0] << " / " << t[1] << " / " << t[2] << "\n";
  }
  return out.str();
}

class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("ctxforge-test-" + std::to_string(rd()) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  [[nodiscard]] const std::filesystem::path& path() const { return path_; }
  [[nodiscard]] std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << s;
}

}  // namespace fixtures
