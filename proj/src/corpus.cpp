#include "ctxforge/corpus.hpp"

#include <fstream>
#include <set>

#include <json.hpp>

namespace ctxforge {

using nlohmann::json;

namespace {

std::string require_string(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key) || !j.at(key).is_string()) {
    throw ValidationError(where + ": field \"" + key + "\" must be a string");
  }
  return j.at(key).get<std::string>();
}

}  // namespace

Dialogue dialogue_from_json(std::string_view line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ValidationError("dialogue must be a JSON object");

  Dialogue d;
  if (j.contains("id") && j["id"].is_number_integer()) {
    d.id = std::to_string(j["id"].get<long long>());
  } else {
    d.id = require_string(j, "id", "dialogue");
  }
  const std::string where = "dialogue " + d.id;
  if (j.contains("setting") && !j["setting"].is_null()) d.setting = require_string(j, "setting", where);
  if (!j.contains("turns") || !j["turns"].is_array()) throw ValidationError(where + ": \"turns\" must be an array");
  for (const auto& t : j["turns"]) {
    if (!t.is_object()) throw ValidationError(where + ": each turn must be an object");
    Turn turn;
    turn.dialogue_id = d.id;
    if (!t.contains("index") || !t["index"].is_number_integer()) {
      throw ValidationError(where + ": turn \"index\" must be an integer");
    }
    turn.index = t["index"].get<int>();
    const std::string twhere = where + " turn " + std::to_string(turn.index);
    turn.speaker = require_string(t, "speaker", twhere);
    turn.content = require_string(t, "content", twhere);
    if (t.contains("emotion") && !t["emotion"].is_null()) {
      const auto label = require_string(t, "emotion", twhere);
      turn.ground_truth_emotion = parse_ground_truth(label);
      if (!turn.ground_truth_emotion) {
        throw ValidationError(twhere + ": unknown emotion label \"" + label + "\" (expected Neutral, Happy, Angry, Sad)");
      }
    }
    d.turns.push_back(std::move(turn));
  }
  validate(d);
  return d;
}

std::string dialogue_to_json(const Dialogue& dialogue) {
  nlohmann::ordered_json j;
  j["id"] = dialogue.id;
  j["setting"] = dialogue.setting;
  j["turns"] = nlohmann::ordered_json::array();
  for (const auto& t : dialogue.turns) {
    nlohmann::ordered_json tj;
    tj["index"] = t.index;
    tj["speaker"] = t.speaker;
    tj["content"] = t.content;
    if (t.ground_truth_emotion) tj["emotion"] = std::string(to_string(*t.ground_truth_emotion));
    j["turns"].push_back(std::move(tj));
  }
  return j.dump();
}

std::vector<Dialogue> load_dialogues(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open dialogue file " + path);
  std::vector<Dialogue> out;
  std::set<std::string> ids;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      auto d = dialogue_from_json(line);
      if (!ids.insert(d.id).second) throw ValidationError("duplicate dialogue id " + d.id);
      out.push_back(std::move(d));
    } catch (const ValidationError& e) {
      throw ValidationError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

void save_dialogues(const std::string& path, const std::vector<Dialogue>& dialogues) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError("cannot write dialogue file " + path);
  for (const auto& d : dialogues) out << dialogue_to_json(d) << '\n';
}

}  // namespace ctxforge
