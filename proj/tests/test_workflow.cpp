#include <doctest.h>

#include <json.hpp>

#include "ctxforge/workflow.hpp"
#include "support.hpp"

using namespace ctxforge;

namespace {

class PickyBackend final : public Backend {
 public:
  explicit PickyBackend(std::shared_ptr<MockBackend> inner) : inner_(std::move(inner)) {}
  [[nodiscard]] BackendKind kind() const override { return BackendKind::Mock; }
  [[nodiscard]] bool rate_limited() const override { return false; }
  void check_ready(const GatewayConfig&) const override {}
  std::string send(const Prompt& p, const GatewayConfig& c) override {
    if (p.dialogue_id == "bad") throw ConfigError("model rejected the credential");
    return inner_->send(p, c);
  }

 private:
  std::shared_ptr<MockBackend> inner_;
};

std::vector<Dialogue> corpus() {
  std::vector<Dialogue> out;
  for (int i = 0; i < 8; ++i) out.push_back(fixtures::make_dialogue("w" + std::to_string(i), 3 + 2 * i));
  return out;
}

std::vector<ScriptEntry> keyed_script(const std::vector<Dialogue>& ds) {
  std::vector<ScriptEntry> s;
  for (const auto& d : ds) {
    for (const auto& w : plan_windows(d.size(), 5, 2).windows) {
      if (d.id == "w3" && w.start == 3) {
        s.push_back(ScriptEntry::fail("nope", d.id + ":" + w.label()));
      } else {
        s.push_back(ScriptEntry::ok(fixtures::valid_answer(d.id, w), d.id + ":" + w.label()));
      }
    }
  }
  s.push_back(ScriptEntry::fail("unscripted"));
  return s;
}

struct Run {
  PromptTemplate tmpl = PromptTemplate::builtin();
  CategoryRegistry reg = CategoryRegistry::defaults();
  RecordStore store;
  std::unique_ptr<Gateway> gateway;

  explicit Run(std::shared_ptr<Backend> backend) {
    GatewayConfig cfg;
    cfg.min_request_interval_ms = 0;
    cfg.max_concurrent_requests = 4;
    gateway = std::make_unique<Gateway>(cfg, std::move(backend), std::make_shared<ManualClock>());
  }
  PipelineDeps deps() { return PipelineDeps{tmpl, reg, *gateway, ParseOptions{}, 5, 2, &store, 0}; }
};

std::vector<std::string> stripped(const RecordStore& store) {
  std::vector<std::string> out;
  for (const auto& r : store.all()) out.push_back(record_to_json_without_timestamps(r));
  return out;
}

RetryPolicy quick() {
  RetryPolicy p;
  p.backoff_ms = {};
  return p;
}

}  // namespace

TEST_CASE("corpus annotation is the same with one or four workers") {
  const auto ds = corpus();
  Run serial(mock_backend(keyed_script(ds)));
  const auto s1 = annotate_corpus(ds, serial.deps(), quick(), {1, true, {}});
  Run parallel(mock_backend(keyed_script(ds)));
  std::vector<std::string> lines;
  const auto s4 = annotate_corpus(ds, parallel.deps(), quick(), {4, true, [&](const std::string& l) { lines.push_back(l); }});
  CHECK(stripped(serial.store) == stripped(parallel.store));
  CHECK(s1.records == s4.records);
  CHECK(s4.dialogues == 8);
  CHECK(s4.failed == 1);
  CHECK(s4.accepted + s4.failed == s4.records);
  std::size_t planned = 0;
  for (const auto& d : ds) planned += plan_windows(d.size(), 5, 2).windows.size();
  CHECK(s4.records == planned);
  CHECK(lines.size() == 8);
}

TEST_CASE("resume skips finished dialogues and keeps their review state") {
  const auto ds = corpus();
  Run run(mock_backend(keyed_script(ds)));
  (void)annotate_corpus(ds, run.deps(), quick());
  const auto id = make_record_id("w0", {1, 3}, 0);
  run.store.update(id, [](AnnotationRecord& r) {
    r.reliability = ReliabilityScore::make(4, "a", 0);
    r.status = RecordStatus::Reviewed;
  });
  const auto again = annotate_corpus(ds, run.deps(), quick());
  CHECK(again.skipped == 8);
  CHECK(again.records == 0);
  CHECK(run.store.get(id)->status == RecordStatus::Reviewed);

  auto fresh = run.deps();
  fresh.epoch = 1;
  CHECK(annotate_corpus(ds, fresh, quick()).skipped == 0);
}

TEST_CASE("an aborted dialogue does not stop the rest") {
  auto ds = corpus();
  ds.insert(ds.begin() + 2, fixtures::make_dialogue("bad", 6));
  Run run(std::make_shared<PickyBackend>(mock_backend(keyed_script(ds))));
  const auto s = annotate_corpus(ds, run.deps(), quick(), {3, true, {}});
  REQUIRE(s.aborted.size() == 1);
  CHECK(s.aborted[0].rfind("bad: ", 0) == 0);
  CHECK(run.store.for_dialogue("bad").size() == 1);
  CHECK(run.store.for_dialogue("w7").size() == plan_windows(17, 5, 2).windows.size());
}

TEST_CASE("feature export: one line per covered turn, deterministic bytes") {
  const auto ds = corpus();
  Run run(mock_backend(keyed_script(ds)));
  (void)annotate_corpus(ds, run.deps(), quick());
  const auto records = run.store.all();
  StubEmbedder stub;
  const auto w = ProjectionWeights::from_seed(5);
  fixtures::TempDir dir;

  std::vector<std::string> warnings;
  const auto a = export_features(records, ds, stub, w, {}, "builtin-1", dir.file("a.jsonl"),
                                 [&](const std::string& l) { warnings.push_back(l); });
  // w3 has 9 turns; window 3-7 failed, so turns 3 and 4 are covered only by 1-5,
  // and nothing is uncovered.
  std::size_t turns = 0;
  for (const auto& d : ds) turns += static_cast<std::size_t>(d.size());
  CHECK(a.lines == turns);
  CHECK(a.skipped_turns == 0);
  CHECK(warnings.empty());
  CHECK(a.dialogues == 8);

  const auto b = export_features(records, ds, stub, w, {}, "builtin-1", dir.file("b.jsonl"));
  CHECK(b.lines == a.lines);
  CHECK(fixtures::read_file(dir.file("a.jsonl")) == fixtures::read_file(dir.file("b.jsonl")));
  const auto meta = nlohmann::json::parse(fixtures::read_file(dir.file("a.jsonl") + ".meta.json"));
  CHECK(meta["lines"] == a.lines);
  CHECK(meta["projected_dim"] == 256);
  CHECK_FALSE(std::filesystem::exists(dir.file("a.jsonl.tmp")));
}

TEST_CASE("feature export with holes: skip or zero-fill") {
  const auto d = fixtures::make_dialogue("holes", 9);  // windows 1-5, 3-7, 5-9
  Run run(mock_backend({ScriptEntry::ok(fixtures::valid_answer("holes", {1, 5}), "holes:1-5"),
                        ScriptEntry::fail("x", "holes:3-7"), ScriptEntry::fail("x", "holes:5-9")}));
  (void)annotate_corpus({d}, run.deps(), quick());
  StubEmbedder stub;
  const auto w = ProjectionWeights::from_seed(5);
  fixtures::TempDir dir;
  std::vector<std::string> warnings;
  const auto skip = export_features(run.store.all(), {d}, stub, w, {}, "v", dir.file("s.jsonl"),
                                    [&](const std::string& l) { warnings.push_back(l); });
  CHECK(skip.lines == 5);
  CHECK(skip.skipped_turns == 4);
  REQUIRE(warnings.size() == 1);
  CHECK(warnings[0].find("[6,7,8,9]") != std::string::npos);
  const auto fill = export_features(run.store.all(), {d}, stub, w, FeatureOptions{true}, "v", dir.file("z.jsonl"));
  CHECK(fill.lines == 9);
  CHECK(fill.zero_filled == 4);
}
