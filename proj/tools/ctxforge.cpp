#include <CLI11.hpp>

#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <pthread.h>
#include <thread>

#include "ctxforge/analysis.hpp"
#include "ctxforge/corpus.hpp"
#include "ctxforge/review_service.hpp"
#include "ctxforge/settings.hpp"
#include "ctxforge/workflow.hpp"

using namespace ctxforge;
namespace fs = std::filesystem;

namespace {

struct Common {
  std::string config_path;
  std::string workspace;

  [[nodiscard]] Settings settings() const {
    Settings s = config_path.empty() ? Settings::from_config(Config{}) : Settings::from_file(config_path);
    if (!workspace.empty()) s.workspace_dir = workspace;
    return s;
  }
};

void log_err(const std::string& line) { std::cerr << line << '\n'; }

std::vector<Dialogue> workspace_dialogues(const Settings& s) {
  if (!fs::exists(s.dialogues_path())) {
    throw std::runtime_error("no dialogues in workspace " + s.workspace_dir + "; run `ctxforge ingest` first");
  }
  return load_dialogues(s.dialogues_path());
}

std::shared_ptr<Backend> make_backend(const std::string& mock_script) {
  if (!mock_script.empty()) return mock_backend(MockBackend::load_script(mock_script));
  return std::make_shared<HttpChatBackend>();
}

int cmd_ingest(const Common& common, const std::string& input, bool replace) {
  const auto s = common.settings();
  const auto incoming = load_dialogues(input);
  std::vector<Dialogue> merged;
  if (fs::exists(s.dialogues_path())) merged = load_dialogues(s.dialogues_path());
  std::map<std::string, std::size_t> pos;
  for (std::size_t i = 0; i < merged.size(); ++i) pos[merged[i].id] = i;

  std::size_t added = 0, updated = 0, unchanged = 0;
  for (const auto& d : incoming) {
    auto it = pos.find(d.id);
    if (it == pos.end()) {
      pos[d.id] = merged.size();
      merged.push_back(d);
      ++added;
    } else if (dialogue_to_json(merged[it->second]) == dialogue_to_json(d)) {
      ++unchanged;
    } else if (replace) {
      merged[it->second] = d;
      ++updated;
    } else {
      throw std::runtime_error("dialogue '" + d.id + "' already ingested with different content (use --replace)");
    }
  }
  fs::create_directories(s.workspace_dir);
  save_dialogues(s.dialogues_path(), merged);
  std::cout << "ingested " << incoming.size() << " dialogues into " << s.dialogues_path() << " (" << added
            << " new, " << updated << " replaced, " << unchanged << " unchanged, " << merged.size() << " total)\n";
  return 0;
}

int cmd_annotate(const Common& common, const std::string& mock_script, int workers_override, bool no_resume) {
  if (common.config_path.empty()) throw ConfigError("annotate needs --config <path>");
  const auto s = common.settings();
  const auto dialogues = workspace_dialogues(s);
  const auto tmpl = s.load_template();
  const auto reg = s.load_registry();

  auto backend = make_backend(mock_script);
  backend->check_ready(s.gateway);
  Gateway gateway(s.gateway, backend, nullptr, log_err);
  RecordStore store(s.records_path());
  PipelineDeps deps{tmpl, reg, gateway, s.parse, s.window_max, s.window_stride, &store, s.epoch};

  fs::create_directories(s.workspace_dir);
  fs::copy_file(common.config_path, s.settings_snapshot_path(), fs::copy_options::overwrite_existing);

  CorpusRunOptions options;
  options.workers = workers_override > 0 ? workers_override : s.workers;
  options.resume = !no_resume;
  options.log = log_err;
  const auto summary = annotate_corpus(dialogues, deps, s.retry, options);

  std::cout << "annotated " << (summary.dialogues - summary.skipped) << "/" << summary.dialogues << " dialogues ("
            << summary.skipped << " already done): " << summary.records << " records, " << summary.accepted
            << " accepted, " << summary.failed << " failed\n";
  for (const auto& a : summary.aborted) std::cout << "aborted " << a << '\n';
  return summary.aborted.empty() ? 0 : 3;
}

int cmd_export(const Common& common, const std::string& out) {
  const auto s = common.settings();
  const auto dialogues = workspace_dialogues(s);
  const auto records = RecordStore(s.records_path()).all();
  auto embedder = s.make_embedder();
  const auto weights = ProjectionWeights::from_seed(s.projection_seed, kFeatureDim, embedder->dim());
  FeatureOptions options;
  options.zero_fill_uncovered = s.zero_fill_uncovered;
  if (const auto parent = fs::path(out).parent_path(); !parent.empty()) fs::create_directories(parent);
  const auto summary =
      export_features(records, dialogues, *embedder, weights, options, s.load_template().version, out, log_err);
  std::cout << "wrote " << summary.lines << " feature lines for " << summary.dialogues << " dialogues to " << out
            << " (" << summary.skipped_turns << " uncovered turns skipped, " << summary.zero_filled
            << " zero-filled)\n";
  return 0;
}

int cmd_analyze(const Common& common, const std::string& report_dir, bool include_unreviewed, std::size_t tail_k) {
  const auto s = common.settings();
  const auto index = index_dialogues(workspace_dialogues(s));
  const auto records = RecordStore(s.records_path()).all();
  auto embedder = s.make_embedder();
  SliceOptions options;
  options.include_unreviewed = include_unreviewed;
  fs::create_directories(report_dir);
  write_report(records, index, *embedder, report_dir, tail_k, options);
  std::cout << "report for " << records.size() << " records written to " << report_dir << '\n';
  return 0;
}

int cmd_serve(const Common& common, const std::string& addr, const std::string& mock_script) {
  const auto s = common.settings();
  const char* token = std::getenv(s.review_token_env.c_str());
  if (token == nullptr || *token == '\0') {
    throw ConfigError("refusing to start: set " + s.review_token_env + " to the bearer token reviewers must present");
  }
  const auto [host, port] = parse_addr(addr);
  // Block before any thread starts so only the waiter below sees the signals.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);
  const auto index = index_dialogues(workspace_dialogues(s));
  const auto tmpl = s.load_template();
  const auto reg = s.load_registry();
  auto backend = make_backend(mock_script);
  Gateway gateway(s.gateway, backend, nullptr, log_err);
  RecordStore store(s.records_path());
  PipelineDeps deps{tmpl, reg, gateway, s.parse, s.window_max, s.window_stride, &store, s.epoch};

  RequeryWorker worker(make_requery_handler(store, index, deps));
  ReviewService service(store, index, s.retry.max_attempts, [&](const std::string& id) { worker.enqueue(id); });
  ReviewApi api(service, token);
  ReviewServer server(api, ServerOptions{host, port, s.review_static_dir});

  const int bound = server.bind();
  std::cout << "review service listening on http://" << host << ":" << bound << std::endl;
  std::thread waiter([&] {
    int sig = 0;
    sigwait(&signals, &sig);
    server.stop();
  });
  server.listen();
  if (waiter.joinable()) {
    pthread_kill(waiter.native_handle(), SIGTERM);
    waiter.join();
  }
  worker.drain();
  std::cout << "review service stopped\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ctxforge: dialogue context-word annotation pipeline"};
  app.require_subcommand(1);
  app.fallthrough();
  Common common;
  app.add_option("--config", common.config_path, "TOML-style settings file")->check(CLI::ExistingFile);
  app.add_option("--workspace", common.workspace, "Workspace directory (overrides workspace.dir)");

  auto* ingest = app.add_subcommand("ingest", "Validate a dialogue JSONL file and add it to the workspace");
  std::string ingest_path;
  bool replace = false;
  ingest->add_option("dialogues", ingest_path, "Dialogue JSONL")->required()->check(CLI::ExistingFile);
  ingest->add_flag("--replace", replace, "Overwrite dialogues already ingested under the same id");

  auto* annotate = app.add_subcommand("annotate", "Query the model for every planned window");
  std::string mock_script;
  int workers = 0;
  bool no_resume = false;
  annotate->add_option("--mock", mock_script, "Scripted mock answers (JSONL) instead of the live endpoint")
      ->check(CLI::ExistingFile);
  annotate->add_option("--workers", workers, "Dialogues annotated concurrently (overrides run.workers)")
      ->check(CLI::Range(1, 64));
  annotate->add_flag("--no-resume", no_resume, "Re-run dialogues whose records already exist");

  auto* exp = app.add_subcommand("export-features", "Write per-turn context vectors");
  std::string out;
  exp->add_option("--out", out, "Feature JSONL path")->required();

  auto* analyze = app.add_subcommand("analyze", "Write the analysis tables and embedding export");
  std::string report_dir;
  bool include_unreviewed = false;
  std::size_t tail_k = 5;
  analyze->add_option("--report", report_dir, "Output directory")->required();
  analyze->add_flag("--include-unreviewed", include_unreviewed, "Count accepted records that are not reviewed yet");
  analyze->add_option("--tail-k", tail_k, "Frequency threshold for the tail table")->check(CLI::PositiveNumber);

  auto* review = app.add_subcommand("review", "Reliability review service");
  review->require_subcommand(1);
  review->fallthrough();
  auto* serve = review->add_subcommand("serve", "Serve the review API");
  std::string addr = "127.0.0.1:8080";
  std::string serve_mock;
  serve->add_option("--addr", addr, "host:port to bind");
  serve->add_option("--mock", serve_mock, "Scripted mock answers used for re-queries")->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*ingest) return cmd_ingest(common, ingest_path, replace);
    if (*annotate) return cmd_annotate(common, mock_script, workers, no_resume);
    if (*exp) return cmd_export(common, out);
    if (*analyze) return cmd_analyze(common, report_dir, include_unreviewed, tail_k);
    if (*serve) return cmd_serve(common, addr, serve_mock);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
