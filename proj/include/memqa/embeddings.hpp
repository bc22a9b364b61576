#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "memqa/corpus.hpp"
#include "memqa/tensor.hpp"

namespace memqa {

enum class OovKind { kZero, kHashBucket };

struct OovPolicy {
  OovKind kind = OovKind::kZero;
  std::size_t buckets = 0;
  std::uint64_t seed = 0;

  static OovPolicy Zero() { return {}; }
  static OovPolicy HashBucket(std::size_t buckets, std::uint64_t seed) {
    return {OovKind::kHashBucket, buckets, seed};
  }
};

// Pretrained word vectors. Lookup is total: unknown words resolve through
// the OOV policy.
class EmbeddingTable {
 public:
  EmbeddingTable(std::size_t dim, OovPolicy oov = {});

  // fastText text format: header "count dim", then "word f_1 ... f_dim".
  // Throws DataError naming the line on arity mismatch, unparsable or
  // non-finite numbers, or a vector count that disagrees with the header.
  static EmbeddingTable LoadVec(const std::filesystem::path& path, OovPolicy oov = {});
  static EmbeddingTable ParseVec(std::string_view text, OovPolicy oov = {});

  // Inserts or overwrites.
  void Set(const std::string& word, std::span<const double> vec);

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return index_.size(); }
  bool Contains(const std::string& word) const { return index_.contains(word); }
  const OovPolicy& oov() const { return oov_; }

  void LookupInto(const std::string& word, std::span<double> out) const;
  std::vector<double> Lookup(const std::string& word) const;

 private:
  std::size_t dim_;
  OovPolicy oov_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<double> data_;
  std::vector<double> buckets_;
};

// Word-level features of one utterance: L_max rows of d values. Rows at or
// beyond `length` are the zero padding vector.
struct FeatureMatrix {
  Tensor values;
  std::size_t length = 0;
  std::vector<std::uint8_t> mask;
};

FeatureMatrix EncodeTokens(const TokenSeq& tokens, const EmbeddingTable& table, std::size_t max_len);

// Byte-level character vocabulary with reserved PAD and UNK ids.
class CharVocab {
 public:
  static constexpr std::int32_t kPad = 0;
  static constexpr std::int32_t kUnk = 1;

  CharVocab() = default;
  // Every byte seen in the token sequences, ids assigned in byte order.
  static CharVocab Build(const std::vector<TokenSeq>& utterances);
  // Inverse of chars(): rebuilds a vocabulary from its serialized form.
  static CharVocab FromChars(std::string_view chars);

  std::int32_t Id(unsigned char c) const;
  // PAD and UNK included.
  std::size_t size() const { return chars_.size() + 2; }
  // Characters in id order starting at id 2.
  const std::string& chars() const { return chars_; }

  friend bool operator==(const CharVocab&, const CharVocab&) = default;

 private:
  std::string chars_;
  std::int32_t lookup_[256] = {};
};

// Character ids for each word, [max_len * max_word_len] row-major.
struct CharTensor {
  std::vector<std::int32_t> ids;
  std::size_t max_len = 0;
  std::size_t max_word_len = 0;
};

CharTensor EncodeChars(const TokenSeq& tokens, const CharVocab& vocab, std::size_t max_len,
                       std::size_t max_word_len);

struct EncodedUtterance {
  FeatureMatrix words;
  CharTensor chars;  // empty ids when character features are off
};

struct EncodedGroup {
  std::string id;
  EncodedUtterance question;
  std::vector<EncodedUtterance> memories;
  std::vector<std::uint8_t> labels;
};

// Preprocesses raw text and produces word features plus, optionally,
// character ids. Holds a reference to the embedding table.
class UtteranceEncoder {
 public:
  UtteranceEncoder(const EmbeddingTable& table, PreprocessRules rules, std::size_t max_len,
                   std::size_t max_word_len, const CharVocab* chars);

  EncodedUtterance Encode(std::string_view text) const;
  EncodedGroup Encode(const QAGroup& group) const;
  std::vector<EncodedGroup> Encode(const std::vector<QAGroup>& groups) const;

  const EmbeddingTable& table() const { return *table_; }
  const PreprocessRules& rules() const { return rules_; }

 private:
  const EmbeddingTable* table_;
  PreprocessRules rules_;
  std::size_t max_len_;
  std::size_t max_word_len_;
  const CharVocab* chars_;
};

}  // namespace memqa
