#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <set>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "ctxforge/embedding.hpp"
#include "support.hpp"

using namespace ctxforge;

namespace {

// Reference values computed by an independent Python transcription of the
// stub embedder and the seeded projection.
const std::vector<double> kStubJoyJa = {0.5926121223287076,  -0.6002159804709827,   -0.06344326825991985,
                                        0.521203860076747,   0.025664175191992964,  -0.11051917173791485};
const std::vector<double> kStubJoyEn = {0.1485255185365028,  0.5928039341093828,  -0.17479663083119149,
                                        -0.16646921490681985, 0.3458536653386243, 0.6698082162515712};
const std::vector<double> kSeed7Matrix = {-0.12721364884597644, -0.5579648164594946,   0.4627585736580036,
                                          0.09575965400747087,  -0.054915369434554454, -0.28933155612098577};
const std::vector<double> kSeed7Bias = {-0.037004683277285635, -0.1985198818605214};

double norm(const Vector& v) {
  double s = 0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

double max_abs_diff(const Vector& a, const Vector& b) {
  REQUIRE(a.size() == b.size());
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

class FixedProvider final : public EmbeddingProvider {
 public:
  explicit FixedProvider(Vector v, std::size_t dim) : v_(std::move(v)), dim_(dim) {}
  [[nodiscard]] std::string id() const override { return "fixed"; }
  [[nodiscard]] std::size_t dim() const override { return dim_; }
  Vector embed(const std::string&) override {
    ++calls;
    return v_;
  }
  int calls = 0;

 private:
  Vector v_;
  std::size_t dim_;
};

std::vector<WordEmbedding> random_candidates(std::mt19937_64& rng, std::size_t n, std::size_t dim) {
  std::uniform_real_distribution<double> u(-1, 1);
  std::vector<WordEmbedding> out;
  for (std::size_t i = 0; i < n; ++i) {
    WordEmbedding e{"w" + std::to_string(rng() % 1000), Vector(dim)};
    for (auto& x : e.vector) x = u(rng);
    out.push_back(std::move(e));
  }
  return out;
}

CandidateSet candidates_for(const Dialogue& d, const std::vector<std::vector<std::array<std::string, 3>>>& per_turn) {
  CandidateSet cs;
  for (int t = 1; t <= d.size(); ++t) {
    const auto& words = per_turn[static_cast<std::size_t>(t - 1)];
    if (words.empty()) {
      cs.uncovered.push_back(t);
      continue;
    }
    auto& tc = cs.turns[t];
    tc.turn_index = t;
    for (std::size_t k = 0; k < words.size(); ++k) {
      for (std::size_t s = 0; s < 3; ++s) tc.slots[s].push_back({words[k][s], static_cast<int>(1 + 2 * k)});
    }
  }
  return cs;
}

}  // namespace

TEST_CASE("stub embedder matches reference values") {
  CHECK(max_abs_diff(stub_embedder("喜び", 6), kStubJoyJa) <= 1e-15);
  CHECK(max_abs_diff(stub_embedder("joy", 6), kStubJoyEn) <= 1e-15);
  CHECK(stub_embedder("喜び") == stub_embedder("喜び"));
  CHECK(stub_embedder("喜び") != stub_embedder("喜び "));
}

TEST_CASE("stub embeddings have unit norm") {
  for (const auto& w : fixtures::kEmotions) CHECK(std::abs(norm(stub_embedder(w)) - 1.0) <= 1e-6);
  for (const auto& w : fixtures::kStyles) CHECK(std::abs(norm(stub_embedder(w, 32)) - 1.0) <= 1e-6);
}

TEST_CASE("seeded projection weights match reference values") {
  const auto w = ProjectionWeights::from_seed(7, 2, 3);
  CHECK(max_abs_diff(w.matrix, kSeed7Matrix) <= 1e-15);
  CHECK(max_abs_diff(w.bias, kSeed7Bias) <= 1e-15);
  CHECK(w.at(1, 0) == kSeed7Matrix[3]);
  const auto big = ProjectionWeights::from_seed(42);
  CHECK(big.matrix.size() == kFeatureDim * kWordEmbeddingDim);
  const double bound = 1.0 / std::sqrt(static_cast<double>(kWordEmbeddingDim));
  CHECK(std::all_of(big.matrix.begin(), big.matrix.end(), [&](double x) { return std::abs(x) <= bound; }));
  CHECK(ProjectionWeights::from_seed(42).matrix == big.matrix);
  CHECK(ProjectionWeights::from_seed(43).matrix != big.matrix);
}

TEST_CASE("slot mean equals a naive sum divided by the count") {
  std::mt19937_64 rng(99);
  for (std::size_t n : {1u, 2u, 3u, 7u, 20u}) {
    const auto c = random_candidates(rng, n, 768);
    Vector naive(768, 0.0);
    for (const auto& e : c) {
      for (std::size_t i = 0; i < 768; ++i) naive[i] += e.vector[i];
    }
    for (auto& x : naive) x /= static_cast<double>(n);
    CHECK(max_abs_diff(aggregate_slot(c), naive) <= 1e-12);
  }
}

TEST_CASE("slot mean is bit-identical under permutation") {
  std::mt19937_64 rng(5);
  auto c = random_candidates(rng, 9, 768);
  const auto ref = aggregate_slot(c);
  for (int k = 0; k < 20; ++k) {
    std::shuffle(c.begin(), c.end(), rng);
    CHECK(aggregate_slot(c) == ref);
  }
}

TEST_CASE("projection equals an explicit double loop") {
  const auto w = ProjectionWeights::from_seed(2024);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-3, 3);
  for (int trial = 0; trial < 5; ++trial) {
    Vector v(kWordEmbeddingDim);
    for (auto& x : v) x = u(rng);
    Vector expect(kFeatureDim);
    for (std::size_t r = 0; r < kFeatureDim; ++r) {
      double acc = w.bias[r];
      for (std::size_t c = 0; c < kWordEmbeddingDim; ++c) acc += w.at(r, c) * v[c];
      expect[r] = acc;
    }
    CHECK(max_abs_diff(project(v, w), expect) <= 1e-10);
  }
}

TEST_CASE("projection is affine: P(a x + b y) - b0 = a (P x - b0) + b (P y - b0)") {
  const auto w = ProjectionWeights::from_seed(77);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1, 1);
  Vector x(kWordEmbeddingDim), y(kWordEmbeddingDim);
  for (auto& e : x) e = u(rng);
  for (auto& e : y) e = u(rng);
  const double a = 2.5, b = -0.75;
  Vector mix(kWordEmbeddingDim);
  for (std::size_t i = 0; i < mix.size(); ++i) mix[i] = a * x[i] + b * y[i];
  const auto px = project(x, w), py = project(y, w), pm = project(mix, w);
  Vector lhs(kFeatureDim), rhs(kFeatureDim);
  for (std::size_t r = 0; r < kFeatureDim; ++r) {
    lhs[r] = pm[r] - w.bias[r];
    rhs[r] = a * (px[r] - w.bias[r]) + b * (py[r] - w.bias[r]);
  }
  CHECK(max_abs_diff(lhs, rhs) <= 1e-8);
  const auto zero = project(Vector(kWordEmbeddingDim, 0.0), w);
  CHECK(zero == w.bias);
}

TEST_CASE("contract errors") {
  FixedProvider short_vec(Vector(5, 0.1), 6);
  CHECK_THROWS_AS(embed_word("x", short_vec), ContractError);
  FixedProvider nan_vec(Vector(6, std::numeric_limits<double>::quiet_NaN()), 6);
  CHECK_THROWS_AS(embed_word("x", nan_vec), ContractError);
  StubEmbedder stub(6);
  CHECK_THROWS_AS(embed_word("", stub), ContractError);
  CHECK_THROWS_AS(aggregate_slot({}), ContractError);
  std::vector<WordEmbedding> mixed = {{"a", Vector(3)}, {"b", Vector(4)}};
  CHECK_THROWS_AS(aggregate_slot(mixed), ContractError);
  CHECK_THROWS_AS(compose_context(Vector(3), Vector(3), Vector(2)), ContractError);
  CHECK_THROWS_AS(project(Vector(5), ProjectionWeights::from_seed(1, 2, 4)), ContractError);
  auto bad = ProjectionWeights::from_seed(1, 2, 4);
  bad.bias.pop_back();
  CHECK_THROWS_AS(bad.validate(), ContractError);
  CHECK_THROWS_AS(project(Vector(4), bad), ContractError);

  const auto d = fixtures::make_dialogue("ce", 1);
  const auto cs = candidates_for(d, {{{"a", "b", "c"}}});
  StubEmbedder wrong(32);
  CHECK_THROWS_AS(build_context_vectors(d, cs, wrong, ProjectionWeights::from_seed(1)), ContractError);
}

TEST_CASE("caching provider calls the inner provider once per word") {
  auto inner = std::make_shared<FixedProvider>(Vector(4, 0.5), 4);
  CachingProvider cache(inner);
  std::vector<std::thread> ts;
  for (int k = 0; k < 4; ++k) {
    ts.emplace_back([&] {
      for (int i = 0; i < 50; ++i) (void)cache.embed("w" + std::to_string(i % 5));
    });
  }
  for (auto& t : ts) t.join();
  CHECK(cache.cached() == 5);
  CHECK(inner->calls >= 5);
  CHECK(inner->calls <= 20);
  CHECK(cache.id() == "fixed");
}

TEST_CASE("context vectors: mean per slot, summed, projected; uncovered turns") {
  const auto d = fixtures::make_dialogue("cv", 3);
  const auto cs = candidates_for(d, {{{"挨拶", "喜び", "丁寧"}, {"質問", "喜び", "明るい"}}, {}, {{"共感", "信頼", "穏やか"}}});
  StubEmbedder stub(16);
  const auto w = ProjectionWeights::from_seed(9, 4, 16);

  const auto built = build_context_vectors(d, cs, stub, w);
  REQUIRE(built.vectors.size() == 2);
  CHECK(built.skipped_turns == std::vector<int>{2});
  const auto& v1 = built.vectors[0];
  CHECK(v1.turn_index == 1);
  CHECK(v1.provenance[0] == std::vector<std::string>{"挨拶", "質問"});
  Vector expect(16);
  for (std::size_t i = 0; i < 16; ++i) {
    expect[i] = (stub_embedder("挨拶", 16)[i] + stub_embedder("質問", 16)[i]) / 2 + stub_embedder("喜び", 16)[i] +
                (stub_embedder("丁寧", 16)[i] + stub_embedder("明るい", 16)[i]) / 2;
  }
  CHECK(max_abs_diff(v1.pre_projection, expect) <= 1e-12);
  CHECK(v1.projected == project(v1.pre_projection, w));

  const auto filled = build_context_vectors(d, cs, stub, w, FeatureOptions{true});
  REQUIRE(filled.vectors.size() == 3);
  CHECK(filled.skipped_turns.empty());
  CHECK(filled.vectors[1].zero_filled);
  CHECK(filled.vectors[1].pre_projection == Vector(16, 0.0));
  CHECK(filled.vectors[1].projected == w.bias);
}

TEST_CASE("feature JSONL and metadata sidecar") {
  const auto d = fixtures::make_dialogue("fj", 2);
  const auto cs = candidates_for(d, {{{"挨拶", "喜び", "丁寧"}}, {}});
  StubEmbedder stub(8);
  const auto w = ProjectionWeights::from_seed(11, 3, 8);
  const auto built = build_context_vectors(d, cs, stub, w, FeatureOptions{true});

  fixtures::TempDir dir;
  const auto path = dir.file("features.jsonl");
  write_features(path, built.vectors, FeatureMetadata{stub.id(), 11, "builtin-1", 8, 3, 0});
  const auto text = fixtures::read_file(path);
  const auto nl = text.find('\n');
  REQUIRE(nl != std::string::npos);
  const auto first = nlohmann::json::parse(text.substr(0, nl));
  CHECK(first["dialogue_id"] == "fj");
  CHECK(first["turn"] == 1);
  CHECK(first["words"]["emotion"] == nlohmann::json::array({"喜び"}));
  CHECK(first["pre_projection"].get<Vector>() == built.vectors[0].pre_projection);
  CHECK(first["projected"].get<Vector>() == built.vectors[0].projected);
  CHECK_FALSE(first.contains("zero_filled"));
  const auto second = nlohmann::json::parse(text.substr(nl + 1));
  CHECK(second["zero_filled"] == true);

  const auto meta = nlohmann::json::parse(fixtures::read_file(path + ".meta.json"));
  CHECK(meta["embed_provider"] == "stub-fnv1a-splitmix64/8");
  CHECK(meta["projection_seed"] == 11);
  CHECK(meta["pre_projection_dim"] == 8);
  CHECK(meta["projected_dim"] == 3);
  CHECK(meta["lines"] == 2);
}

TEST_CASE("HTTP embedding provider") {
  httplib::Server srv;
  srv.Post("/ok", [](const httplib::Request& req, httplib::Response& res) {
    const auto word = nlohmann::json::parse(req.body).at("word").get<std::string>();
    res.set_content(nlohmann::json(Vector(4, static_cast<double>(word.size()))).dump(), "application/json");
  });
  srv.Post("/busy", [](const httplib::Request&, httplib::Response& res) { res.status = 503; });
  srv.Post("/bad", [](const httplib::Request&, httplib::Response& res) { res.status = 400; });
  srv.Post("/junk", [](const httplib::Request&, httplib::Response& res) { res.set_content("{", "application/json"); });
  const int port = srv.bind_to_any_port("127.0.0.1");
  std::thread th([&] { srv.listen_after_bind(); });
  srv.wait_until_ready();
  const auto base = "http://127.0.0.1:" + std::to_string(port);

  HttpEmbeddingProvider ok(base + "/ok", 4, 5);
  CHECK(embed_word("abc", ok).vector == Vector(4, 3.0));
  HttpEmbeddingProvider wrong_dim(base + "/ok", 5, 5);
  CHECK_THROWS_AS(embed_word("abc", wrong_dim), ContractError);
  HttpEmbeddingProvider busy(base + "/busy", 4, 5);
  CHECK_THROWS_AS(busy.embed("a"), ProviderUnavailable);
  HttpEmbeddingProvider bad(base + "/bad", 4, 5);
  CHECK_THROWS_AS(bad.embed("a"), ContractError);
  HttpEmbeddingProvider junk(base + "/junk", 4, 5);
  CHECK_THROWS_AS(junk.embed("a"), ContractError);

  srv.stop();
  th.join();
  HttpEmbeddingProvider gone(base + "/ok", 4, 1);
  CHECK_THROWS_AS(gone.embed("a"), ProviderUnavailable);
}

TEST_CASE("selector projection returns the leading components") {
  auto w = ProjectionWeights::zeros();
  for (std::size_t r = 0; r < kFeatureDim; ++r) w.at(r, r) = 1.0;
  Vector v(kWordEmbeddingDim);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<double>(i) * 0.5 - 7.0;
  const auto out = project(v, w);
  CHECK(out == Vector(v.begin(), v.begin() + kFeatureDim));
  CHECK(project(Vector(kWordEmbeddingDim, 0.0), ProjectionWeights::zeros()) == Vector(kFeatureDim, 0.0));
}

TEST_CASE("compose: sum of slot means, zero and scale cases") {
  const auto a = stub_embedder("挨拶"), b = stub_embedder("喜び"), c = stub_embedder("丁寧");
  const Vector zero(kWordEmbeddingDim, 0.0);
  CHECK(compose_context(zero, zero, zero) == zero);
  CHECK(compose_context(a, zero, zero) == a);
  const double alpha = -1.75;
  Vector sa(a), sb(b), sc(c);
  for (auto* v : {&sa, &sb, &sc}) {
    for (auto& x : *v) x *= alpha;
  }
  auto scaled = compose_context(a, b, c);
  for (auto& x : scaled) x *= alpha;
  CHECK(max_abs_diff(compose_context(sa, sb, sc), scaled) <= 1e-12);
  const std::vector<WordEmbedding> same = {{"x", a}, {"x", a}};
  CHECK(aggregate_slot(same) == a);
}

TEST_CASE("stub embeddings of distinct words differ") {
  std::set<Vector> seen;
  for (int i = 0; i < 1000; ++i) seen.insert(stub_embedder("語" + std::to_string(i)));
  CHECK(seen.size() == 1000);
  const auto ea = stub_embedder("a"), eb = stub_embedder("b");
  double dot = 0;
  for (std::size_t i = 0; i < ea.size(); ++i) dot += ea[i] * eb[i];
  CHECK(dot < 1.0);
}
