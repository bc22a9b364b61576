#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace memqa {

struct Memory {
  std::string text;
  bool relevant = false;
  friend bool operator==(const Memory&, const Memory&) = default;
};

// One question with its labeled memories; the unit of F1 scoring.
struct QAGroup {
  std::string id;
  std::string question;
  std::vector<Memory> memories;
  friend bool operator==(const QAGroup&, const QAGroup&) = default;
};

using TokenSeq = std::vector<std::string>;

// Loads the QA JSONL format: one {"id","question","memories":[{"text",
// "relevant"}]} object per line. Blank lines are skipped. Throws DataError
// with the 1-based line number on malformed JSON, missing fields, an empty
// memory list, blank memory text, or a duplicate id.
std::vector<QAGroup> LoadQaJsonl(const std::filesystem::path& path);
std::vector<QAGroup> ParseQaJsonl(std::string_view text);

// Writes one object per line with keys in id/question/memories order.
void SaveQaJsonl(const std::vector<QAGroup>& groups, const std::filesystem::path& path);
std::string FormatQaJsonl(const std::vector<QAGroup>& groups);

struct PreprocessRules {
  std::map<std::string, std::string> contractions;
  std::vector<TokenSeq> carrier_phrases;
  std::set<std::string> stopwords;

  // Built-in lists; identical to the files under resources/.
  static PreprocessRules Defaults();
  // Reads contractions.txt ("from<TAB>to"), carrier_phrases.txt and
  // stopwords.txt (one entry per line; '#' starts a comment line).
  static PreprocessRules LoadDir(const std::filesystem::path& dir);

  friend bool operator==(const PreprocessRules&, const PreprocessRules&) = default;
};

// Lowercase, drop punctuation other than apostrophes, expand contractions,
// strip leading carrier phrases (longest match first), delete stopwords.
// Carrier stripping and stopword deletion repeat until neither changes the
// sequence, so the result is a fixed point: Preprocess(Join(p)) == p.
TokenSeq Preprocess(std::string_view text, const PreprocessRules& rules);

// Whitespace tokenization after lowercasing; the "raw" token count.
TokenSeq RawTokens(std::string_view text);

std::string Join(const TokenSeq& tokens);

struct CorpusStats {
  std::size_t group_count = 0;
  std::size_t answer_count = 0;
  std::size_t min_memories = 0;
  std::size_t max_memories = 0;
  double mean_memories = 0.0;
  double stddev_memories = 0.0;
  // Per-group percentage of relevant memories, averaged over groups.
  double percent_relevant = 0.0;
  double mean_question_tokens_raw = 0.0;
  double mean_answer_tokens_raw = 0.0;
  double mean_question_tokens = 0.0;
  double mean_answer_tokens = 0.0;
};

// Throws DataError on an empty corpus.
CorpusStats ComputeCorpusStats(const std::vector<QAGroup>& groups, const PreprocessRules& rules);

// Applies Preprocess to every question and memory, re-joining with spaces.
std::vector<QAGroup> PreprocessCorpus(const std::vector<QAGroup>& groups, const PreprocessRules& rules);

}  // namespace memqa
