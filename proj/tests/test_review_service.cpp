#include <doctest.h>

#include <thread>

#include <httplib.h>

#include "ctxforge/review_service.hpp"
#include "support.hpp"

using namespace ctxforge;

namespace {

constexpr const char* kToken = "s3cret-token";

// Three dialogues: "ra" (4 turns, accepted), "rb" (7 turns: 1-5 accepted,
// 3-7 failed after three attempts), "rc" (6 turns, both windows accepted).
struct World {
  PromptTemplate tmpl = PromptTemplate::builtin();
  CategoryRegistry reg = CategoryRegistry::defaults();
  std::vector<Dialogue> corpus = {fixtures::make_dialogue("ra", 4), fixtures::make_dialogue("rb", 7),
                                  fixtures::make_dialogue("rc", 6)};
  DialogueIndex idx = index_dialogues(corpus);
  std::shared_ptr<MockBackend> mock;
  std::unique_ptr<Gateway> gateway;
  RecordStore store;

  World() {
    std::vector<ScriptEntry> script = {
        ScriptEntry::ok(fixtures::valid_answer("ra", {1, 4}), "ra:1-4"),
        ScriptEntry::ok(fixtures::valid_answer("rb", {1, 5}), "rb:1-5"),
        ScriptEntry::fail("flaky", "rb:3-7"),
        ScriptEntry::fail("flaky", "rb:3-7"),
        ScriptEntry::fail("flaky", "rb:3-7"),
        ScriptEntry::ok(fixtures::valid_answer("rb", {3, 7}, 9), "rb:3-7"),
        ScriptEntry::ok(fixtures::valid_answer("rc", {1, 5}), "rc:1-5"),
        ScriptEntry::ok(fixtures::valid_answer("rc", {3, 6}), "rc:3-6"),
        ScriptEntry::ok(fixtures::valid_answer("ra", {1, 4}, 5), "ra:1-4"),
    };
    mock = mock_backend(std::move(script));
    GatewayConfig cfg;
    cfg.min_request_interval_ms = 0;
    gateway = std::make_unique<Gateway>(cfg, mock, std::make_shared<ManualClock>());
    RetryPolicy policy;
    policy.backoff_ms = {};
    for (const auto& d : corpus) (void)annotate_dialogue(d, deps(), policy);
  }

  PipelineDeps deps() { return PipelineDeps{tmpl, reg, *gateway, ParseOptions{}, 5, 2, &store, 0}; }
};

ApiRequest req(std::string method, std::string path, std::string body = {}, std::string auth = std::string("Bearer ") + kToken) {
  ApiRequest r;
  r.method = std::move(method);
  r.path = std::move(path);
  r.body = std::move(body);
  r.authorization = std::move(auth);
  return r;
}

std::string reliability_path(const std::string& id) { return "/api/records/" + id + "/reliability"; }

}  // namespace

TEST_CASE("pending list excludes failed, reviewed and in-flight records; pagination") {
  World w;
  ReviewService svc(w.store, w.idx, 3, {});
  auto page = svc.list_pending(1, 2);
  CHECK(page.total == 4);
  REQUIRE(page.items.size() == 2);
  CHECK(page.items[0].record_id == "ra:1-4@0");
  CHECK(page.items[1].record_id == "rb:1-5@0");
  CHECK(svc.list_pending(2, 2).items.size() == 2);
  CHECK(svc.list_pending(3, 2).items.empty());

  svc.submit_reliability("ra:1-4@0", 4, "ann");
  page = svc.list_pending(1, 2);
  CHECK(page.total == 3);
  CHECK(page.items[0].record_id == "rb:1-5@0");
  CHECK(svc.list_pending(2, 2).items.size() == 1);
  CHECK(svc.list(RecordStatus::Failed, 1, 10).items.at(0).record_id == "rb:3-7@0");
  CHECK(svc.list(RecordStatus::Reviewed, 1, 10).total == 1);
  CHECK(svc.list(std::nullopt, 1, 500).total == 5);
  CHECK_THROWS_AS((void)svc.list_pending(0, 2), ReviewError);
  CHECK_THROWS_AS((void)svc.list_pending(1, 501), ReviewError);
}

TEST_CASE("item detail carries prompt, answer, annotations and the dialogue excerpt") {
  World w;
  ReviewService svc(w.store, w.idx, 3, {});
  const auto ok = svc.get("rc:3-6@0");
  CHECK(ok.window == TurnWindow{3, 6});
  CHECK(ok.annotations.size() == 4);
  REQUIRE(ok.excerpt.size() == 4);
  CHECK(ok.excerpt[0].index == 3);
  CHECK_FALSE(ok.failure.has_value());
  CHECK(ok.prompt_text.find(w.corpus[2].turns[2].content) != std::string::npos);
  const auto failed = svc.get("rb:3-7@0");
  CHECK(failed.status == RecordStatus::Failed);
  CHECK(failed.attempts == 3);
  REQUIRE(failed.failure.has_value());
  CHECK(failed.failure->find("flaky") != std::string::npos);
  try {
    (void)svc.get("nope");
    FAIL("expected not found");
  } catch (const ReviewError& e) {
    CHECK(e.http_status() == 404);
  }
}

TEST_CASE("scores: bounds, overwrite, failed records") {
  World w;
  ReviewService svc(w.store, w.idx, 3, {});
  for (int bad : {0, 6, -1, 100}) {
    try {
      (void)svc.submit_reliability("ra:1-4@0", bad, "a");
      FAIL("expected validation error");
    } catch (const ReviewError& e) {
      CHECK(e.http_status() == 422);
    }
  }
  CHECK(w.store.get("ra:1-4@0")->status == RecordStatus::PendingReview);
  CHECK(svc.submit_reliability("ra:1-4@0", 1, "a").reliability->value == 1);
  CHECK(svc.submit_reliability("ra:1-4@0", 5, "b").reliability->value == 5);
  const auto stored = w.store.get("ra:1-4@0");
  CHECK(stored->status == RecordStatus::Reviewed);
  CHECK(stored->reliability->annotator == "b");
  try {
    (void)svc.submit_reliability("rb:3-7@0", 3, "a");
    FAIL("expected conflict");
  } catch (const ReviewError& e) {
    CHECK(e.http_status() == 409);
  }
}

TEST_CASE("concurrent submissions leave one consistent score") {
  World w;
  ReviewService svc(w.store, w.idx, 3, {});
  std::vector<std::thread> ts;
  for (int k = 1; k <= 5; ++k) {
    ts.emplace_back([&, k] {
      for (int i = 0; i < 20; ++i) (void)svc.submit_reliability("rc:1-5@0", k, "t" + std::to_string(k));
    });
  }
  for (auto& t : ts) t.join();
  const auto r = w.store.get("rc:1-5@0");
  REQUIRE(r->reliability.has_value());
  CHECK(r->reliability->annotator == "t" + std::to_string(r->reliability->value));
  CHECK(r->status == RecordStatus::Reviewed);
}

TEST_CASE("re-query: budget, force, in-flight conflicts and the worker") {
  World w;
  DialogueIndex idx = w.idx;
  RequeryWorker worker(make_requery_handler(w.store, idx, w.deps()));
  ReviewService svc(w.store, idx, 3, [&](const std::string& id) { worker.enqueue(id); });

  try {
    (void)svc.request_requery("rb:3-7@0", false);
    FAIL("expected budget conflict");
  } catch (const ReviewError& e) {
    CHECK(e.http_status() == 409);
  }
  CHECK_FALSE(w.store.get("rb:3-7@0")->requery_pending);

  const auto queued = svc.request_requery("rb:3-7@0", true);
  CHECK(queued.requery_pending);
  worker.drain();
  auto r = w.store.get("rb:3-7@0");
  CHECK(r->attempts.size() == 4);
  CHECK(r->status == RecordStatus::PendingReview);
  CHECK_FALSE(r->requery_pending);
  CHECK(svc.list_pending(1, 10).total == 5);

  svc.submit_reliability("ra:1-4@0", 2, "a");
  (void)svc.request_requery("ra:1-4@0", false);
  worker.drain();
  r = w.store.get("ra:1-4@0");
  CHECK(r->attempts.size() == 2);
  CHECK(r->status == RecordStatus::PendingReview);
  CHECK_FALSE(r->reliability.has_value());
  CHECK(worker.errors().empty());
  CHECK(worker.processed() == 2);
}

TEST_CASE("re-query in flight blocks scoring and a second re-query") {
  World w;
  std::vector<std::string> scheduled;
  ReviewService svc(w.store, w.idx, 3, [&](const std::string& id) { scheduled.push_back(id); });
  (void)svc.request_requery("rc:1-5@0", false);
  CHECK(scheduled == std::vector<std::string>{"rc:1-5@0"});
  CHECK(svc.list_pending(1, 10).total == 3);
  for (auto call : {0, 1}) {
    try {
      if (call == 0) (void)svc.submit_reliability("rc:1-5@0", 3, "a");
      else (void)svc.request_requery("rc:1-5@0", true);
      FAIL("expected conflict");
    } catch (const ReviewError& e) {
      CHECK(e.http_status() == 409);
    }
  }
}

TEST_CASE("a failing re-query clears the in-flight flag") {
  World w;
  DialogueIndex missing;  // the handler cannot find the dialogue
  RequeryWorker worker(make_requery_handler(w.store, missing, w.deps()));
  ReviewService svc(w.store, w.idx, 3, [&](const std::string& id) { worker.enqueue(id); });
  (void)svc.request_requery("ra:1-4@0", false);
  worker.drain();
  CHECK_FALSE(w.store.get("ra:1-4@0")->requery_pending);
  REQUIRE(worker.errors().size() == 1);
  CHECK(worker.errors()[0].find("not loaded") != std::string::npos);
}

TEST_CASE("API: authentication, routing and error mapping") {
  World w;
  ReviewService svc(w.store, w.idx, 3, {});
  CHECK_THROWS_AS(ReviewApi(svc, ""), std::invalid_argument);
  ReviewApi api(svc, kToken);

  for (const std::string auth : {"", "Bearer", "Bearer wrong", "Basic s3cret-token", "Bearer s3cret-token2"}) {
    const auto out = api.handle(req("GET", "/api/records", {}, auth));
    CHECK(out.status == 401);
    CHECK(out.body["error"] == "unauthorized");
  }

  auto out = api.handle(req("GET", "/api/records"));
  CHECK(out.status == 200);
  CHECK(out.body["total"] == 4);
  CHECK(out.body["items"][0].contains("preview"));

  ApiRequest paged = req("GET", "/api/records");
  paged.query = {{"page", "2"}, {"page_size", "3"}};
  out = api.handle(paged);
  CHECK(out.body["items"].size() == 1);
  paged.query = {{"status", "failed"}};
  CHECK(api.handle(paged).body["total"] == 1);
  paged.query = {{"status", "all"}};
  CHECK(api.handle(paged).body["total"] == 5);
  paged.query = {{"status", "bogus"}};
  CHECK(api.handle(paged).status == 422);
  paged.query = {{"page", "x"}};
  CHECK(api.handle(paged).status == 422);
  paged.query = {{"page", "0"}};
  CHECK(api.handle(paged).status == 422);

  out = api.handle(req("GET", "/api/records/rc:1-5@0"));
  CHECK(out.status == 200);
  CHECK(out.body["annotations"].size() == 5);
  CHECK(out.body["excerpt"].size() == 5);
  CHECK(api.handle(req("GET", "/api/records/missing")).status == 404);
  CHECK(api.handle(req("GET", "/api/other")).status == 404);
  CHECK(api.handle(req("DELETE", "/api/records/rc:1-5@0")).status == 404);

  const auto rp = reliability_path("rc:1-5@0");
  CHECK(api.handle(req("POST", rp, R"({"score": 0})")).status == 422);
  CHECK(api.handle(req("POST", rp, R"({"score": 6})")).status == 422);
  CHECK(api.handle(req("POST", rp, R"({"score": 3.5})")).status == 422);
  CHECK(api.handle(req("POST", rp, R"({"score": "3"})")).status == 422);
  CHECK(api.handle(req("POST", rp, R"({})")).status == 422);
  CHECK(api.handle(req("POST", rp, R"({"score": 3, "annotator": 7})")).status == 422);
  CHECK(api.handle(req("POST", rp, R"({"score": )")).status == 400);
  CHECK(api.handle(req("POST", rp, R"([1])")).status == 400);
  out = api.handle(req("POST", rp, R"({"score": 1})"));
  CHECK(out.status == 200);
  CHECK(out.body["reliability"]["annotator"] == "anonymous");
  out = api.handle(req("POST", rp, R"({"score": 5, "annotator": "kim"})"));
  CHECK(out.body["reliability"]["score"] == 5);
  CHECK(out.body["status"] == "reviewed");
  CHECK(api.handle(req("POST", reliability_path("missing"), R"({"score": 3})")).status == 404);
  CHECK(api.handle(req("POST", reliability_path("rb:3-7@0"), R"({"score": 3})")).status == 409);

  CHECK(api.handle(req("POST", "/api/records/rb:3-7@0/requery", "")).status == 409);
  CHECK(api.handle(req("POST", "/api/records/rb:3-7@0/requery", R"({"force": "yes"})")).status == 422);
  out = api.handle(req("POST", "/api/records/rb:3-7@0/requery", R"({"force": true})"));
  CHECK(out.status == 202);
  CHECK(out.body["requery_pending"] == true);

  w.store.set_unavailable(true);
  CHECK(api.handle(req("GET", "/api/records")).status == 503);
  CHECK(api.handle(req("GET", "/api/records/ra:1-4@0")).status == 503);
  out = api.handle(req("POST", reliability_path("ra:1-4@0"), R"({"score": 3})"));
  CHECK(out.status == 503);
  CHECK(out.body["error"] == "unavailable");
  w.store.set_unavailable(false);
  CHECK(w.store.get("ra:1-4@0")->status == RecordStatus::PendingReview);
}

TEST_CASE("list preview cuts multibyte answers on a character boundary") {
  ReviewItem item;
  item.record_id = "x:1-5@0";
  item.latest_answer.clear();
  for (int i = 0; i < 100; ++i) item.latest_answer += "喜び";
  const auto j = to_json(item, true);
  const auto preview = j["preview"].get<std::string>();
  CHECK(preview.size() == 120 * 3);
  CHECK_NOTHROW((void)j.dump());
  CHECK(to_json(item, false)["latest_answer"] == item.latest_answer);
}

TEST_CASE("address parsing") {
  CHECK(parse_addr("127.0.0.1:8080") == std::pair<std::string, int>{"127.0.0.1", 8080});
  CHECK(parse_addr("[::1]:9000") == std::pair<std::string, int>{"::1", 9000});
  CHECK(parse_addr("localhost:0").second == 0);
  for (const char* bad : {"nohost", ":80", "host:", "host:99999", "host:12ab"}) {
    CHECK_THROWS_AS(parse_addr(bad), std::invalid_argument);
  }
}

TEST_CASE("HTTP server round trip over a real socket") {
  World w;
  ReviewService svc(w.store, w.idx, 3, {});
  ReviewApi api(svc, kToken);
  ReviewServer server(api, ServerOptions{"127.0.0.1", 0, ""});
  const int port = server.bind();
  std::thread th([&] { server.listen(); });

  httplib::Client cli("127.0.0.1", port);
  cli.set_connection_timeout(5);
  const httplib::Headers auth = {{"Authorization", std::string("Bearer ") + kToken}};

  auto res = cli.Get("/api/records?page_size=1", auth);
  REQUIRE(res);
  CHECK(res->status == 200);
  auto body = nlohmann::json::parse(res->body);
  CHECK(body["total"] == 4);
  CHECK(body["items"].size() == 1);

  res = cli.Get("/api/records");
  REQUIRE(res);
  CHECK(res->status == 401);
  CHECK(res->get_header_value("WWW-Authenticate") == "Bearer");

  res = cli.Post("/api/records/ra:1-4@0/reliability", auth, R"({"score": 4, "annotator": "web"})", "application/json");
  REQUIRE(res);
  CHECK(res->status == 200);
  CHECK(w.store.get("ra:1-4@0")->reliability->value == 4);

  res = cli.Post("/api/records/ra%3A1-4%400/reliability", auth, R"({"score": 2})", "application/json");
  REQUIRE(res);
  CHECK(res->status == 200);
  CHECK(w.store.get("ra:1-4@0")->reliability->value == 2);

  res = cli.Get("/");
  REQUIRE(res);
  CHECK(res->status == 200);
  CHECK(res->body.find("/api/records") != std::string::npos);

  server.stop();
  th.join();
}
