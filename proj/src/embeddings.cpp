#include "memqa/embeddings.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "memqa/error.hpp"
#include "memqa/rng.hpp"

namespace memqa {
namespace {

std::uint64_t Fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::vector<std::string_view> Fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t') ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

std::string AtLine(std::size_t line, const std::string& msg) {
  return ".vec line " + std::to_string(line) + ": " + msg;
}

}  // namespace

EmbeddingTable::EmbeddingTable(std::size_t dim, OovPolicy oov) : dim_(dim), oov_(oov) {
  if (dim == 0) throw DataError("embedding dimension must be positive");
  if (oov_.kind == OovKind::kHashBucket) {
    if (oov_.buckets == 0) throw UsageError("hash-bucket OOV policy needs at least one bucket");
    RngStream rng(oov_.seed);
    buckets_.resize(oov_.buckets * dim_);
    for (std::size_t b = 0; b < oov_.buckets; ++b) {
      double norm = 0.0;
      for (std::size_t j = 0; j < dim_; ++j) {
        const double v = rng.Normal();
        buckets_[b * dim_ + j] = v;
        norm += v * v;
      }
      norm = std::sqrt(norm);
      for (std::size_t j = 0; j < dim_; ++j) buckets_[b * dim_ + j] /= norm;
    }
  }
}

EmbeddingTable EmbeddingTable::ParseVec(std::string_view text, OovPolicy oov) {
  std::size_t pos = 0;
  std::size_t line_no = 0;
  auto next_line = [&](std::string_view& line) {
    if (pos >= text.size()) return false;
    const std::size_t end = std::min(text.find('\n', pos), text.size());
    line = text.substr(pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    pos = end + 1;
    ++line_no;
    return true;
  };
  std::string_view line;
  if (!next_line(line)) throw DataError(AtLine(1, "missing header 'count dim'"));
  const auto header = Fields(line);
  std::size_t count = 0;
  std::size_t dim = 0;
  if (header.size() != 2 ||
      std::from_chars(header[0].data(), header[0].data() + header[0].size(), count).ec != std::errc{} ||
      std::from_chars(header[1].data(), header[1].data() + header[1].size(), dim).ec != std::errc{} || dim == 0) {
    throw DataError(AtLine(1, "header must be 'count dim'"));
  }
  EmbeddingTable table(dim, oov);
  std::vector<double> vec(dim);
  std::size_t seen = 0;
  while (next_line(line)) {
    const auto fields = Fields(line);
    if (fields.empty()) continue;
    if (fields.size() != dim + 1) {
      throw DataError(AtLine(line_no, "expected word plus " + std::to_string(dim) + " values, got " +
                                          std::to_string(fields.size() - 1)));
    }
    for (std::size_t j = 0; j < dim; ++j) {
      const auto f = fields[j + 1];
      auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), vec[j]);
      if (ec != std::errc{} || ptr != f.data() + f.size()) {
        throw DataError(AtLine(line_no, "cannot parse value '" + std::string(f) + "'"));
      }
      if (!std::isfinite(vec[j])) throw DataError(AtLine(line_no, "non-finite value"));
    }
    table.Set(std::string(fields[0]), vec);
    ++seen;
  }
  if (seen != count) {
    throw DataError(AtLine(1, "header declares " + std::to_string(count) + " vectors but file has " +
                                  std::to_string(seen)));
  }
  return table;
}

EmbeddingTable EmbeddingTable::LoadVec(const std::filesystem::path& path, OovPolicy oov) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return ParseVec(ss.str(), oov);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void EmbeddingTable::Set(const std::string& word, std::span<const double> vec) {
  if (vec.size() != dim_) {
    throw ShapeError("embedding for '" + word + "' has " + std::to_string(vec.size()) + " values, table dim is " +
                     std::to_string(dim_));
  }
  auto [it, inserted] = index_.try_emplace(word, data_.size() / dim_);
  if (inserted) {
    data_.insert(data_.end(), vec.begin(), vec.end());
  } else {
    std::copy(vec.begin(), vec.end(), data_.begin() + static_cast<std::ptrdiff_t>(it->second * dim_));
  }
}

void EmbeddingTable::LookupInto(const std::string& word, std::span<double> out) const {
  if (auto it = index_.find(word); it != index_.end()) {
    std::copy_n(data_.begin() + static_cast<std::ptrdiff_t>(it->second * dim_), dim_, out.begin());
    return;
  }
  if (oov_.kind == OovKind::kHashBucket) {
    const std::size_t b = Fnv1a(word) % oov_.buckets;
    std::copy_n(buckets_.begin() + static_cast<std::ptrdiff_t>(b * dim_), dim_, out.begin());
    return;
  }
  std::fill_n(out.begin(), dim_, 0.0);
}

std::vector<double> EmbeddingTable::Lookup(const std::string& word) const {
  std::vector<double> out(dim_);
  LookupInto(word, out);
  return out;
}

FeatureMatrix EncodeTokens(const TokenSeq& tokens, const EmbeddingTable& table, std::size_t max_len) {
  if (max_len == 0) throw UsageError("max utterance length must be at least 1");
  FeatureMatrix fm;
  fm.values = Tensor({max_len, table.dim()});
  fm.length = std::min(tokens.size(), max_len);
  fm.mask.assign(max_len, 0);
  for (std::size_t i = 0; i < fm.length; ++i) {
    table.LookupInto(tokens[i], fm.values.row(i));
    fm.mask[i] = 1;
  }
  return fm;
}

CharVocab CharVocab::Build(const std::vector<TokenSeq>& utterances) {
  std::set<unsigned char> seen;
  for (const auto& u : utterances) {
    for (const auto& tok : u) {
      for (unsigned char c : tok) seen.insert(c);
    }
  }
  std::string chars(seen.begin(), seen.end());
  return FromChars(chars);
}

CharVocab CharVocab::FromChars(std::string_view chars) {
  CharVocab v;
  v.chars_ = std::string(chars);
  std::fill(std::begin(v.lookup_), std::end(v.lookup_), kUnk);
  for (std::size_t i = 0; i < v.chars_.size(); ++i) {
    v.lookup_[static_cast<unsigned char>(v.chars_[i])] = static_cast<std::int32_t>(i + 2);
  }
  return v;
}

std::int32_t CharVocab::Id(unsigned char c) const {
  return chars_.empty() ? kUnk : lookup_[c];
}

CharTensor EncodeChars(const TokenSeq& tokens, const CharVocab& vocab, std::size_t max_len,
                       std::size_t max_word_len) {
  if (max_len == 0 || max_word_len == 0) throw UsageError("character tensor dimensions must be positive");
  CharTensor ct;
  ct.max_len = max_len;
  ct.max_word_len = max_word_len;
  ct.ids.assign(max_len * max_word_len, CharVocab::kPad);
  const std::size_t words = std::min(tokens.size(), max_len);
  for (std::size_t w = 0; w < words; ++w) {
    const std::string& tok = tokens[w];
    const std::size_t n = std::min(tok.size(), max_word_len);
    for (std::size_t c = 0; c < n; ++c) {
      ct.ids[w * max_word_len + c] = vocab.Id(static_cast<unsigned char>(tok[c]));
    }
  }
  return ct;
}

UtteranceEncoder::UtteranceEncoder(const EmbeddingTable& table, PreprocessRules rules, std::size_t max_len,
                                   std::size_t max_word_len, const CharVocab* chars)
    : table_(&table), rules_(std::move(rules)), max_len_(max_len), max_word_len_(max_word_len), chars_(chars) {}

EncodedUtterance UtteranceEncoder::Encode(std::string_view text) const {
  const TokenSeq tokens = Preprocess(text, rules_);
  EncodedUtterance u;
  u.words = EncodeTokens(tokens, *table_, max_len_);
  if (chars_) u.chars = EncodeChars(tokens, *chars_, max_len_, max_word_len_);
  return u;
}

EncodedGroup UtteranceEncoder::Encode(const QAGroup& group) const {
  EncodedGroup g;
  g.id = group.id;
  g.question = Encode(group.question);
  g.memories.reserve(group.memories.size());
  for (const auto& m : group.memories) {
    g.memories.push_back(Encode(m.text));
    g.labels.push_back(m.relevant ? 1 : 0);
  }
  return g;
}

std::vector<EncodedGroup> UtteranceEncoder::Encode(const std::vector<QAGroup>& groups) const {
  std::vector<EncodedGroup> out;
  out.reserve(groups.size());
  for (const auto& g : groups) out.push_back(Encode(g));
  return out;
}

}  // namespace memqa
