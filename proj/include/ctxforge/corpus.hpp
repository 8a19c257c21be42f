#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "ctxforge/core_model.hpp"

namespace ctxforge {

/// One ingest line: {"id", "setting", "turns":[{"index","speaker","content","emotion"?}]}.
/// Throws ValidationError on schema or invariant violations.
Dialogue dialogue_from_json(std::string_view line);
std::string dialogue_to_json(const Dialogue& dialogue);

/// Reads a dialogue JSONL file; errors carry the offending line number.
/// Rejects duplicate dialogue ids.
std::vector<Dialogue> load_dialogues(const std::string& path);
void save_dialogues(const std::string& path, const std::vector<Dialogue>& dialogues);

}  // namespace ctxforge
