#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ctxforge/core_model.hpp"
#include "ctxforge/pipeline.hpp"

namespace ctxforge {

inline constexpr std::size_t kWordEmbeddingDim = 768;
inline constexpr std::size_t kFeatureDim = 256;

using Vector = std::vector<double>;

/// Provider temporarily unavailable; the call may be retried.
class ProviderUnavailable : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Dimension mismatch or non-finite data: a broken contract, not retryable.
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

struct WordEmbedding {
  std::string word;
  Vector vector;
};

class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  [[nodiscard]] virtual std::string id() const = 0;
  [[nodiscard]] virtual std::size_t dim() const = 0;
  virtual Vector embed(const std::string& word) = 0;
};

/// Deterministic stand-in for a pretrained encoder. Seed = FNV-1a 64 of the
/// UTF-8 bytes; components come from splitmix64 (high 53 bits as a fraction
/// in [0,1), mapped to [-1,1)); the result is scaled to unit norm.
Vector stub_embedder(std::string_view word, std::size_t dim = kWordEmbeddingDim);

class StubEmbedder final : public EmbeddingProvider {
 public:
  explicit StubEmbedder(std::size_t dim = kWordEmbeddingDim) : dim_(dim) {}
  [[nodiscard]] std::string id() const override { return "stub-fnv1a-splitmix64/" + std::to_string(dim_); }
  [[nodiscard]] std::size_t dim() const override { return dim_; }
  Vector embed(const std::string& word) override { return stub_embedder(word, dim_); }

 private:
  std::size_t dim_;
};

/// POSTs {"word": w} to an endpoint that answers with a JSON float array.
class HttpEmbeddingProvider final : public EmbeddingProvider {
 public:
  HttpEmbeddingProvider(std::string endpoint, std::size_t dim = kWordEmbeddingDim, double timeout_s = 30.0);
  [[nodiscard]] std::string id() const override { return "http:" + endpoint_; }
  [[nodiscard]] std::size_t dim() const override { return dim_; }
  Vector embed(const std::string& word) override;

 private:
  std::string endpoint_;
  std::size_t dim_;
  double timeout_s_;
};

/// Memoizes another provider; identical words always get identical vectors.
class CachingProvider final : public EmbeddingProvider {
 public:
  explicit CachingProvider(std::shared_ptr<EmbeddingProvider> inner) : inner_(std::move(inner)) {}
  [[nodiscard]] std::string id() const override { return inner_->id(); }
  [[nodiscard]] std::size_t dim() const override { return inner_->dim(); }
  Vector embed(const std::string& word) override;
  [[nodiscard]] std::size_t cached() const;

 private:
  std::shared_ptr<EmbeddingProvider> inner_;
  mutable std::mutex mu_;
  std::map<std::string, Vector, std::less<>> cache_;
};

/// Throws ContractError on an empty word, wrong dimension or non-finite data.
WordEmbedding embed_word(std::string_view word, EmbeddingProvider& provider);

/// Componentwise mean. Candidates are summed in canonical-word order so the
/// result does not depend on input order, bit for bit.
Vector aggregate_slot(std::span<const WordEmbedding> candidates);

/// intention + emotion + style, componentwise.
Vector compose_context(std::span<const double> intention_mean, std::span<const double> emotion_mean,
                       std::span<const double> style_mean);

/// Linear layer weights, row-major out_dim x in_dim.
struct ProjectionWeights {
  std::size_t out_dim = kFeatureDim;
  std::size_t in_dim = kWordEmbeddingDim;
  std::vector<double> matrix;
  Vector bias;
  std::uint64_t seed = 0;

  /// Matrix then bias drawn uniformly from [-1/sqrt(in), 1/sqrt(in)] using
  /// the splitmix64 stream seeded with `seed`.
  static ProjectionWeights from_seed(std::uint64_t seed, std::size_t out_dim = kFeatureDim,
                                     std::size_t in_dim = kWordEmbeddingDim);
  static ProjectionWeights zeros(std::size_t out_dim = kFeatureDim, std::size_t in_dim = kWordEmbeddingDim);

  [[nodiscard]] double at(std::size_t row, std::size_t col) const { return matrix[row * in_dim + col]; }
  double& at(std::size_t row, std::size_t col) { return matrix[row * in_dim + col]; }
  void validate() const;
};

/// matrix * v + bias. Throws ContractError on a dimension mismatch.
Vector project(std::span<const double> v, const ProjectionWeights& weights);

/// splitmix64 step: advances state and returns the next output.
std::uint64_t splitmix64_next(std::uint64_t& state);

struct ContextVector {
  std::string dialogue_id;
  int turn_index = 0;
  Vector pre_projection;
  Vector projected;
  std::array<std::vector<std::string>, 3> provenance;  // words per Slot, window order
  bool zero_filled = false;
};

struct FeatureOptions {
  bool zero_fill_uncovered = false;
};

struct FeatureBuild {
  std::vector<ContextVector> vectors;
  std::vector<int> skipped_turns;
};

/// Per covered turn: mean embedding per slot, summed, then projected.
/// Uncovered turns are skipped, or get a zero pre-projection vector when
/// zero_fill_uncovered is set.
FeatureBuild build_context_vectors(const Dialogue& dialogue, const CandidateSet& candidates,
                                   EmbeddingProvider& provider, const ProjectionWeights& weights,
                                   const FeatureOptions& options = {});

struct FeatureMetadata {
  std::string embed_provider;
  std::uint64_t projection_seed = 0;
  std::string template_version;
  std::size_t pre_projection_dim = kWordEmbeddingDim;
  std::size_t projected_dim = kFeatureDim;
  std::size_t lines = 0;
};

std::string feature_to_json(const ContextVector& v);
std::string metadata_to_json(const FeatureMetadata& meta);

/// Writes the feature JSONL to `path` and the one-line metadata sidecar to
/// `path` + ".meta.json".
void write_features(const std::string& path, const std::vector<ContextVector>& vectors, FeatureMetadata meta);

}  // namespace ctxforge
