#include "memqa/synth.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "memqa/error.hpp"
#include "memqa/rng.hpp"

namespace memqa {
namespace {

constexpr std::size_t kMinFillers = 8;

const std::vector<std::string>& Carriers() {
  static const std::vector<std::string> v{"can you remember", "please tell me", "do you know", "tell me"};
  return v;
}
const std::vector<std::string>& WhWords() {
  static const std::vector<std::string> v{"what", "where", "when", "who", "how"};
  return v;
}
const std::vector<std::string>& Auxiliaries() {
  static const std::vector<std::string> v{"did i", "is my", "does my", "did"};
  return v;
}
const std::vector<std::string>& QuestionVerbs() {
  static const std::vector<std::string> v{"leave", "keep", "store", "find", "hide", "lend", "buy"};
  return v;
}
const std::vector<std::string>& MemoryVerbs() {
  static const std::vector<std::string> v{"left", "kept", "stored", "found", "hid", "lent", "bought", "moved"};
  return v;
}
const std::vector<std::string>& Prepositions() {
  static const std::vector<std::string> v{"on", "in", "at", "to"};
  return v;
}

std::vector<std::string> FunctionWords() {
  std::set<std::string> words;
  auto add_all = [&](const std::vector<std::string>& phrases) {
    for (const auto& p : phrases) {
      std::istringstream in(p);
      std::string w;
      while (in >> w) words.insert(w);
    }
  };
  add_all(Carriers());
  add_all(WhWords());
  add_all(Auxiliaries());
  add_all(QuestionVerbs());
  add_all(MemoryVerbs());
  add_all(Prepositions());
  words.insert({"i", "my", "the"});
  return {words.begin(), words.end()};
}

template <typename T>
const T& Pick(const std::vector<T>& v, RngStream& rng) {
  return v[rng.Below(v.size())];
}

// Pronounceable pseudo-words built from consonant-vowel syllables.
std::vector<std::string> MakeWords(std::size_t count, RngStream rng, const std::vector<std::string>& reserved) {
  static constexpr std::string_view kCons = "bcdfghjklmnprstvwz";
  static constexpr std::string_view kVow = "aeiou";
  std::set<std::string> seen(reserved.begin(), reserved.end());
  std::vector<std::string> out;
  out.reserve(count);
  while (out.size() < count) {
    const std::size_t syllables = 2 + rng.Below(2);
    std::string w;
    for (std::size_t s = 0; s < syllables; ++s) {
      w += kCons[rng.Below(kCons.size())];
      w += kVow[rng.Below(kVow.size())];
    }
    if (rng.Bernoulli(0.5)) w += kCons[rng.Below(kCons.size())];
    if (seen.insert(w).second) out.push_back(std::move(w));
  }
  return out;
}

struct Lexicon {
  std::vector<std::string> topics;
  std::vector<std::string> fillers;
  std::set<std::string> function_words;
};

Lexicon BuildLexicon(const SynthSpec& spec) {
  const auto fw = FunctionWords();
  auto words = MakeWords(spec.vocab_size, RngStream(spec.vocab_seed).Split(1), fw);
  Lexicon lex;
  lex.topics.assign(words.begin(), words.begin() + static_cast<std::ptrdiff_t>(spec.topic_count));
  lex.fillers.assign(words.begin() + static_cast<std::ptrdiff_t>(spec.topic_count), words.end());
  lex.function_words.insert(fw.begin(), fw.end());
  return lex;
}

std::string Corrupt(const std::string& word, double rate, RngStream& rng) {
  if (word.empty() || !rng.Bernoulli(rate)) return word;
  static constexpr std::string_view kLetters = "abcdefghijklmnopqrstuvwxyz";
  std::string out = word;
  const std::size_t pos = rng.Below(out.size());
  char c = out[pos];
  while (c == out[pos]) c = kLetters[rng.Below(kLetters.size())];
  out[pos] = c;
  return out;
}

}  // namespace

void ValidateSynthSpec(const SynthSpec& spec) {
  if (spec.group_count == 0) throw UsageError("synthetic corpus needs at least one group");
  if (spec.min_memories == 0 || spec.max_memories < spec.min_memories) {
    throw UsageError("memories per group must satisfy 1 <= min <= max");
  }
  if (!(spec.relevant_fraction > 0.0 && spec.relevant_fraction < 1.0)) {
    throw UsageError("relevant fraction must lie strictly between 0 and 1");
  }
  if (!(spec.noise_rate >= 0.0 && spec.noise_rate <= 1.0)) throw UsageError("noise rate must lie in [0, 1]");
  if (!(spec.carrier_rate >= 0.0 && spec.carrier_rate <= 1.0)) throw UsageError("carrier rate must lie in [0, 1]");
  if (spec.topic_count < 2) throw UsageError("at least two topics are needed");
  if (spec.vocab_size < spec.topic_count + kMinFillers) {
    throw UsageError("vocabulary size " + std::to_string(spec.vocab_size) + " is too small for " +
                     std::to_string(spec.topic_count) + " topics plus " + std::to_string(kMinFillers) +
                     " filler words");
  }
}

std::vector<std::string> SyntheticTopics(const SynthSpec& spec) {
  ValidateSynthSpec(spec);
  return BuildLexicon(spec).topics;
}

std::vector<std::string> SyntheticVocabulary(const SynthSpec& spec) {
  ValidateSynthSpec(spec);
  Lexicon lex = BuildLexicon(spec);
  std::vector<std::string> out = lex.topics;
  out.insert(out.end(), lex.fillers.begin(), lex.fillers.end());
  out.insert(out.end(), lex.function_words.begin(), lex.function_words.end());
  return out;
}

std::vector<QAGroup> GenerateSynthetic(const SynthSpec& spec) {
  ValidateSynthSpec(spec);
  const Lexicon lex = BuildLexicon(spec);
  RngStream rng = RngStream(spec.seed).Split(2);
  auto content = [&](const std::string& w) { return Corrupt(w, spec.noise_rate, rng); };

  std::vector<QAGroup> groups;
  groups.reserve(spec.group_count);
  for (std::size_t gi = 0; gi < spec.group_count; ++gi) {
    QAGroup g;
    g.id = spec.id_prefix + std::to_string(gi);
    const std::size_t topic = rng.Below(lex.topics.size());

    std::string q;
    if (rng.Bernoulli(spec.carrier_rate)) q += Pick(Carriers(), rng) + " ";
    q += Pick(WhWords(), rng) + " " + Pick(Auxiliaries(), rng) + " " + content(Pick(QuestionVerbs(), rng)) +
         " the " + content(lex.topics[topic]);
    g.question = q;

    const std::size_t n = spec.min_memories + rng.Below(spec.max_memories - spec.min_memories + 1);
    // Stochastic rounding keeps the expected per-group fraction exact.
    const double target = spec.relevant_fraction * static_cast<double>(n);
    std::size_t n_rel = static_cast<std::size_t>(std::floor(target));
    if (rng.Bernoulli(target - std::floor(target))) ++n_rel;
    std::vector<bool> labels(n, false);
    for (std::size_t i = 0; i < n_rel; ++i) labels[i] = true;
    for (std::size_t i = n; i > 1; --i) {
      const std::size_t j = rng.Below(i);
      const bool tmp = labels[i - 1];
      labels[i - 1] = labels[j];
      labels[j] = tmp;
    }

    for (std::size_t i = 0; i < n; ++i) {
      std::size_t mt = topic;
      if (!labels[i]) {
        mt = rng.Below(lex.topics.size() - 1);
        if (mt >= topic) ++mt;
      }
      std::string text = "i " + content(Pick(MemoryVerbs(), rng)) + " my " + content(lex.topics[mt]) + " " +
                         Pick(Prepositions(), rng) + " the " + content(Pick(lex.fillers, rng));
      if (rng.Bernoulli(0.5)) text += " " + content(Pick(lex.fillers, rng));
      g.memories.push_back(Memory{std::move(text), labels[i]});
    }
    groups.push_back(std::move(g));
  }
  return groups;
}

void WriteRandomVectors(const std::vector<std::string>& words, std::size_t dim, std::uint64_t seed,
                        const std::filesystem::path& path) {
  if (dim == 0) throw UsageError("vector dimension must be positive");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << words.size() << ' ' << dim << '\n';
  RngStream rng = RngStream(seed).Split(3);
  std::vector<double> v(dim);
  out << std::setprecision(17);
  for (const auto& w : words) {
    double norm = 0.0;
    for (double& x : v) {
      x = rng.Normal();
      norm += x * x;
    }
    norm = std::sqrt(norm);
    out << w;
    for (double x : v) out << ' ' << x / norm;
    out << '\n';
  }
  if (!out) throw DataError("write failed for '" + path.string() + "'");
}

}  // namespace memqa
