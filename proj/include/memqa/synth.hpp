#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "memqa/corpus.hpp"

namespace memqa {

// Parameters for the synthetic stand-in corpus. Each group has a latent topic
// keyword; relevant memories mention the question's topic, irrelevant ones
// mention other topics. Every other content word is drawn from a separate
// filler vocabulary, so keyword overlap is a perfect classifier at zero
// noise.
struct SynthSpec {
  std::size_t group_count = 100;
  std::size_t min_memories = 1;
  std::size_t max_memories = 41;
  double relevant_fraction = 0.15;
  std::size_t vocab_size = 400;
  std::size_t topic_count = 150;
  // Probability that a content token has one character substituted.
  double noise_rate = 0.0;
  // Probability that a question starts with a carrier phrase.
  double carrier_rate = 0.5;
  // Drives group sampling.
  std::uint64_t seed = 0;
  // Drives the pseudo-word lexicon only, so corpora generated with different
  // `seed` values but the same vocab_seed share one vocabulary.
  std::uint64_t vocab_seed = 0;
  std::string id_prefix = "g";
};

// Throws UsageError for out-of-range fractions/rates, an empty memory range,
// or a vocabulary too small for the requested topics.
void ValidateSynthSpec(const SynthSpec& spec);

std::vector<QAGroup> GenerateSynthetic(const SynthSpec& spec);

// Every word the generator can emit before noise: topics, fillers and the
// fixed function words. Deterministic in (vocab_size, topic_count,
// vocab_seed).
std::vector<std::string> SyntheticVocabulary(const SynthSpec& spec);

// Topic keywords only (a prefix of SyntheticVocabulary).
std::vector<std::string> SyntheticTopics(const SynthSpec& spec);

// Writes a .vec table with one unit-norm Gaussian vector per word.
void WriteRandomVectors(const std::vector<std::string>& words, std::size_t dim, std::uint64_t seed,
                        const std::filesystem::path& path);

}  // namespace memqa
