#pragma once

// Encoded synthetic corpora built in memory, mirroring what the train command
// does with files.

#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "memqa/synth.hpp"
#include "memqa/training.hpp"

namespace memqa::fixture {

struct SynthData {
  std::unique_ptr<EmbeddingTable> table;
  std::vector<QAGroup> train_raw, dev_raw;
  std::vector<EncodedGroup> train, dev;
  Checkpoint start;
};

struct SynthOptions {
  std::size_t train_groups = 200;
  std::size_t dev_groups = 40;
  std::size_t max_memories = 41;
  std::size_t dim = 16;
  double noise = 0.0;
  double relevant_fraction = 0.15;
  std::uint64_t seed = 1;
};

inline SynthData MakeSynthData(const ModelConfig& model, const TrainConfig& train, const SynthOptions& o) {
  SynthData d;
  SynthSpec spec;
  spec.max_memories = o.max_memories;
  spec.relevant_fraction = o.relevant_fraction;
  spec.noise_rate = o.noise;
  spec.vocab_seed = 100 + o.seed;
  spec.group_count = o.train_groups;
  spec.seed = 2 * o.seed;
  d.train_raw = GenerateSynthetic(spec);
  spec.group_count = o.dev_groups;
  spec.seed = 2 * o.seed + 1;
  spec.id_prefix = "d";
  d.dev_raw = GenerateSynthetic(spec);

  d.table = std::make_unique<EmbeddingTable>(o.dim);
  RngStream rng(spec.vocab_seed);
  std::vector<double> v(o.dim);
  for (const auto& w : SyntheticVocabulary(spec)) {
    double norm = 0.0;
    for (double& x : v) {
      x = rng.Normal();
      norm += x * x;
    }
    for (double& x : v) x /= std::sqrt(norm);
    d.table->Set(w, v);
  }

  Checkpoint& ck = d.start;
  ck.model = model;
  ck.model.embed_dim = o.dim;
  ck.train = train;
  ck.rules = PreprocessRules::Defaults();
  ck.embeddings = "<memory>";
  if (UsesCharCnn(model.arch)) {
    std::vector<TokenSeq> utts;
    for (const auto& g : d.train_raw) {
      utts.push_back(Preprocess(g.question, ck.rules));
      for (const auto& m : g.memories) utts.push_back(Preprocess(m.text, ck.rules));
    }
    ck.chars = CharVocab::Build(utts);
    ck.model.charcnn.vocab_size = ck.chars.size();
  }
  const UtteranceEncoder enc(*d.table, ck.rules, ck.model.max_len, ck.model.max_word_len,
                             UsesCharCnn(model.arch) ? &ck.chars : nullptr);
  d.train = enc.Encode(d.train_raw);
  d.dev = enc.Encode(d.dev_raw);
  return d;
}

// A narrow TEFF suited to fast CPU runs.
inline ModelConfig SmallTeff(std::size_t hidden = 16) {
  ModelConfig m = ModelConfig::Defaults(Architecture::kTeff);
  m.hidden = hidden;
  return m;
}

}  // namespace memqa::fixture
