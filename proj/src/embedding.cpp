#include "ctxforge/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <Eigen/Core>
#include <json.hpp>

#include "ctxforge/llm_gateway.hpp"
#include "ctxforge/text.hpp"

namespace ctxforge {

std::uint64_t splitmix64_next(std::uint64_t& state) {
  state += 0x9E3779B97F4A7C15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

namespace {

double unit_fraction(std::uint64_t x) { return static_cast<double>(x >> 11) * 0x1.0p-53; }

void require_finite(std::span<const double> v, const std::string& what) {
  for (double x : v) {
    if (!std::isfinite(x)) throw ContractError(what + " has a non-finite component");
  }
}

}  // namespace

Vector stub_embedder(std::string_view word, std::size_t dim) {
  std::uint64_t state = text::fnv1a64(word);
  Vector v(dim);
  for (auto& x : v) x = 2.0 * unit_fraction(splitmix64_next(state)) - 1.0;
  double sq = 0.0;
  for (double x : v) sq += x * x;
  const double norm = std::sqrt(sq);
  for (auto& x : v) x /= norm;
  return v;
}

HttpEmbeddingProvider::HttpEmbeddingProvider(std::string endpoint, std::size_t dim, double timeout_s)
    : endpoint_(std::move(endpoint)), dim_(dim), timeout_s_(timeout_s) {}

Vector HttpEmbeddingProvider::embed(const std::string& word) {
  HttpResponse resp;
  try {
    resp = http_post_json(endpoint_, nlohmann::json{{"word", word}}.dump(), {}, timeout_s_);
  } catch (const GatewayError& e) {
    throw ProviderUnavailable(std::string("embedding endpoint: ") + e.what());
  }
  if (resp.status == 429 || resp.status >= 500) {
    throw ProviderUnavailable("embedding endpoint: HTTP " + std::to_string(resp.status));
  }
  if (resp.status < 200 || resp.status >= 300) {
    throw ContractError("embedding endpoint: HTTP " + std::to_string(resp.status));
  }
  try {
    return nlohmann::json::parse(resp.body).get<Vector>();
  } catch (const nlohmann::json::exception& e) {
    throw ContractError(std::string("embedding endpoint: expected a JSON float array: ") + e.what());
  }
}

Vector CachingProvider::embed(const std::string& word) {
  {
    std::lock_guard lock(mu_);
    if (auto it = cache_.find(word); it != cache_.end()) return it->second;
  }
  Vector v = inner_->embed(word);
  std::lock_guard lock(mu_);
  // A concurrent caller may have filled it first; keep the first vector.
  return cache_.emplace(word, std::move(v)).first->second;
}

std::size_t CachingProvider::cached() const {
  std::lock_guard lock(mu_);
  return cache_.size();
}

WordEmbedding embed_word(std::string_view word, EmbeddingProvider& provider) {
  if (word.empty()) throw ContractError("embed_word: empty word");
  Vector v = provider.embed(std::string(word));
  if (v.size() != provider.dim()) {
    throw ContractError("embedding provider " + provider.id() + " returned " + std::to_string(v.size()) +
                        " components, expected " + std::to_string(provider.dim()));
  }
  require_finite(v, "embedding of '" + std::string(word) + "'");
  return WordEmbedding{std::string(word), std::move(v)};
}

Vector aggregate_slot(std::span<const WordEmbedding> candidates) {
  if (candidates.empty()) throw ContractError("aggregate_slot: no candidates");
  const std::size_t dim = candidates.front().vector.size();
  std::vector<const WordEmbedding*> order;
  order.reserve(candidates.size());
  for (const auto& c : candidates) {
    if (c.vector.size() != dim) throw ContractError("aggregate_slot: candidates differ in dimension");
    order.push_back(&c);
  }
  std::stable_sort(order.begin(), order.end(), [](const auto* a, const auto* b) { return a->word < b->word; });

  Vector sum(dim, 0.0);
  for (const auto* c : order) {
    for (std::size_t i = 0; i < dim; ++i) sum[i] += c->vector[i];
  }
  const auto n = static_cast<double>(order.size());
  for (auto& x : sum) x /= n;
  return sum;
}

Vector compose_context(std::span<const double> intention_mean, std::span<const double> emotion_mean,
                       std::span<const double> style_mean) {
  if (intention_mean.size() != emotion_mean.size() || intention_mean.size() != style_mean.size()) {
    throw ContractError("compose_context: slot means differ in dimension");
  }
  Vector out(intention_mean.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = intention_mean[i] + emotion_mean[i] + style_mean[i];
  return out;
}

ProjectionWeights ProjectionWeights::from_seed(std::uint64_t seed, std::size_t out_dim, std::size_t in_dim) {
  ProjectionWeights w;
  w.out_dim = out_dim;
  w.in_dim = in_dim;
  w.seed = seed;
  w.matrix.resize(out_dim * in_dim);
  w.bias.resize(out_dim);
  const double bound = 1.0 / std::sqrt(static_cast<double>(in_dim));
  std::uint64_t state = seed;
  for (auto& x : w.matrix) x = bound * (2.0 * unit_fraction(splitmix64_next(state)) - 1.0);
  for (auto& x : w.bias) x = bound * (2.0 * unit_fraction(splitmix64_next(state)) - 1.0);
  return w;
}

ProjectionWeights ProjectionWeights::zeros(std::size_t out_dim, std::size_t in_dim) {
  ProjectionWeights w;
  w.out_dim = out_dim;
  w.in_dim = in_dim;
  w.matrix.assign(out_dim * in_dim, 0.0);
  w.bias.assign(out_dim, 0.0);
  return w;
}

void ProjectionWeights::validate() const {
  if (matrix.size() != out_dim * in_dim || bias.size() != out_dim) {
    throw ContractError("projection weights: shape does not match out_dim x in_dim");
  }
  require_finite(matrix, "projection matrix");
  require_finite(bias, "projection bias");
}

Vector project(std::span<const double> v, const ProjectionWeights& weights) {
  if (v.size() != weights.in_dim) {
    throw ContractError("project: input has " + std::to_string(v.size()) + " components, weights expect " +
                        std::to_string(weights.in_dim));
  }
  if (weights.matrix.size() != weights.out_dim * weights.in_dim || weights.bias.size() != weights.out_dim) {
    throw ContractError("project: malformed weights");
  }
  using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  const Eigen::Map<const RowMajor> m(weights.matrix.data(), static_cast<Eigen::Index>(weights.out_dim),
                                     static_cast<Eigen::Index>(weights.in_dim));
  const Eigen::Map<const Eigen::VectorXd> x(v.data(), static_cast<Eigen::Index>(v.size()));
  const Eigen::Map<const Eigen::VectorXd> b(weights.bias.data(), static_cast<Eigen::Index>(weights.out_dim));
  const Eigen::VectorXd y = m * x + b;
  return Vector(y.data(), y.data() + y.size());
}

FeatureBuild build_context_vectors(const Dialogue& dialogue, const CandidateSet& candidates,
                                   EmbeddingProvider& provider, const ProjectionWeights& weights,
                                   const FeatureOptions& options) {
  if (provider.dim() != weights.in_dim) {
    throw ContractError("embedding dimension " + std::to_string(provider.dim()) + " does not match projection input " +
                        std::to_string(weights.in_dim));
  }
  FeatureBuild out;
  for (int turn = 1; turn <= dialogue.size(); ++turn) {
    ContextVector cv;
    cv.dialogue_id = dialogue.id;
    cv.turn_index = turn;
    auto it = candidates.turns.find(turn);
    if (it == candidates.turns.end() || !it->second.covered()) {
      if (!options.zero_fill_uncovered) {
        out.skipped_turns.push_back(turn);
        continue;
      }
      cv.pre_projection.assign(weights.in_dim, 0.0);
      cv.zero_filled = true;
    } else {
      std::array<Vector, 3> means;
      for (auto slot : kSlots) {
        const auto& cands = it->second.of(slot);
        std::vector<WordEmbedding> embs;
        embs.reserve(cands.size());
        for (const auto& c : cands) {
          embs.push_back(embed_word(c.word, provider));
          cv.provenance[static_cast<std::size_t>(slot)].push_back(c.word);
        }
        means[static_cast<std::size_t>(slot)] = aggregate_slot(embs);
      }
      cv.pre_projection = compose_context(means[0], means[1], means[2]);
    }
    cv.projected = project(cv.pre_projection, weights);
    out.vectors.push_back(std::move(cv));
  }
  return out;
}

std::string feature_to_json(const ContextVector& v) {
  nlohmann::ordered_json j;
  j["dialogue_id"] = v.dialogue_id;
  j["turn"] = v.turn_index;
  j["words"] = {{"intention", v.provenance[0]}, {"emotion", v.provenance[1]}, {"style", v.provenance[2]}};
  if (v.zero_filled) j["zero_filled"] = true;
  j["pre_projection"] = v.pre_projection;
  j["projected"] = v.projected;
  return j.dump();
}

std::string metadata_to_json(const FeatureMetadata& meta) {
  nlohmann::ordered_json j;
  j["embed_provider"] = meta.embed_provider;
  j["projection_seed"] = meta.projection_seed;
  j["template_version"] = meta.template_version;
  j["pre_projection_dim"] = meta.pre_projection_dim;
  j["projected_dim"] = meta.projected_dim;
  j["lines"] = meta.lines;
  return j.dump();
}

void write_features(const std::string& path, const std::vector<ContextVector>& vectors, FeatureMetadata meta) {
  {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write features to " + path);
    for (const auto& v : vectors) out << feature_to_json(v) << '\n';
    if (!out) throw std::runtime_error("write to " + path + " failed");
  }
  meta.lines = vectors.size();
  std::ofstream side(path + ".meta.json", std::ios::binary | std::ios::trunc);
  if (!side) throw std::runtime_error("cannot write feature metadata for " + path);
  side << metadata_to_json(meta) << '\n';
}

}  // namespace ctxforge
