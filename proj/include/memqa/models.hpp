#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "memqa/embeddings.hpp"
#include "memqa/graph.hpp"
#include "memqa/rng.hpp"
#include "memqa/tensor.hpp"

namespace memqa {

enum class Architecture { kCosineMax, kCosineSum, kCosineAvg, kCosineCoatt, kChrWrdFF, kTeff, kTeffCh };

std::string ArchitectureName(Architecture arch);
// Accepts the names produced by ArchitectureName. Throws UsageError.
Architecture ParseArchitecture(std::string_view name);
bool IsProbabilistic(Architecture arch);
bool UsesCharCnn(Architecture arch);

struct CharCnnConfig {
  std::vector<std::size_t> widths{1, 2};
  std::size_t filters = 128;
  std::size_t out_dim = 108;
  std::size_t char_dim = 16;
  // Includes PAD and UNK. Filled in from the training corpus.
  std::size_t vocab_size = 0;

  friend bool operator==(const CharCnnConfig&, const CharCnnConfig&) = default;
};

struct ModelConfig {
  Architecture arch = Architecture::kTeff;
  std::size_t embed_dim = 300;
  std::size_t hidden = 694;
  std::size_t layers = 2;
  // ChrWrdFF hidden width.
  std::size_t ff_hidden = 256;
  CharCnnConfig charcnn;
  double dropout = 0.1;
  std::size_t max_len = 10;
  std::size_t max_word_len = 8;

  // Reference configuration per architecture: TEFF 2x694, TEFFCH 2x736.
  static ModelConfig Defaults(Architecture arch);
  // Throws UsageError.
  void Validate() const;
  // Per-word feature width seen by the encoder.
  std::size_t WordDim() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct ParamSpec {
  std::string name;
  Shape shape;
  bool is_bias = false;
  std::size_t fan_in = 0;
  std::size_t fan_out = 0;
};

// Names and shapes of every trainable tensor, in declaration order. Empty for
// the cosine baselines.
std::vector<ParamSpec> ParamSchema(const ModelConfig& config);
std::size_t CountParams(const ModelConfig& config);
// Glorot-uniform weights, zero biases.
ParamStore InitParams(const ModelConfig& config, RngStream& rng);

// ---- cosine baselines (parameter free) ----

enum class AggKind { kMax, kSum, kAvg, kCoatt };

// Column-wise aggregate over unmasked rows; zeros if there are none.
std::vector<double> Aggregate(const FeatureMatrix& e, AggKind kind);

struct CoattentionResult {
  // [L_q, L_m] and [L_m, L_q]: attention of each question word over the
  // memory and of each memory word over the question. Masked rows and columns
  // are zero, every other row sums to one.
  Tensor a_q;
  Tensor a_m;
  // [L_q, d] and [L_m, d]; rows at masked positions are zero.
  Tensor c_q;
  Tensor c_m;
};

CoattentionResult Coattention(const FeatureMatrix& e_q, const FeatureMatrix& e_m);

// Cosine of the two aggregates; 0 when either has zero norm.
double CosineScore(const FeatureMatrix& e_q, const FeatureMatrix& e_m, AggKind kind);

// ---- probabilistic models ----

struct ForwardOptions {
  bool train = false;
  // Required when train is set and dropout > 0.
  RngStream* rng = nullptr;
};

// Per-word features [B, L, WordDim] for a batch of utterances, combining the
// pretrained vectors with the CharCNN output when the architecture uses it.
Var EmbedUtterances(Graph& g, const ModelConfig& config, const ParamStore& params,
                    std::span<const EncodedUtterance* const> batch);

// chars: ids for n words, [n * W]. Returns [n, out_dim].
Var CharCnnEmbed(Graph& g, const ModelConfig& config, const ParamStore& params,
                 std::span<const std::int32_t> chars, std::size_t n_words);

// e_q, e_m: [B, L, D] word features with masks of B*L flags. Return [B, 2].
Var ChrWrdFFForward(Graph& g, const ModelConfig& config, const ParamStore& params, Var e_q,
                    std::span<const std::uint8_t> mask_q, Var e_m, std::span<const std::uint8_t> mask_m,
                    const ForwardOptions& options);
Var TeffForward(Graph& g, const ModelConfig& config, const ParamStore& params, Var e_q,
                std::span<const std::uint8_t> mask_q, Var e_m, std::span<const std::uint8_t> mask_m,
                const ForwardOptions& options);

// Probabilities [B, 2] (column 1 = relevant) for B question/memory pairs.
Var ForwardProbs(Graph& g, const ModelConfig& config, const ParamStore& params,
                 std::span<const EncodedUtterance* const> questions,
                 std::span<const EncodedUtterance* const> memories, const ForwardOptions& options);

// Model output for every memory of one group.
struct RelevanceOutput {
  bool probabilistic = false;
  // [n, 2] for probabilistic models.
  Tensor probs;
  // Raw cosine scores in [-1, 1] for the baselines.
  std::vector<double> scores;
};

RelevanceOutput Predict(const ModelConfig& config, const ParamStore& params, const EncodedGroup& group);

}  // namespace memqa
