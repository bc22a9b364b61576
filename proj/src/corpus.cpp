#include "memqa/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "memqa/error.hpp"

namespace memqa {
namespace {

using ordered_json = nlohmann::ordered_json;

std::string Trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

std::string LineError(std::size_t line, const std::string& msg) {
  return "line " + std::to_string(line) + ": " + msg;
}

QAGroup GroupFromJson(const nlohmann::json& j, std::size_t line) {
  if (!j.is_object()) throw DataError(LineError(line, "expected a JSON object"));
  auto require = [&](const char* key) -> const nlohmann::json& {
    auto it = j.find(key);
    if (it == j.end()) throw DataError(LineError(line, std::string("missing field '") + key + "'"));
    return *it;
  };
  QAGroup g;
  const auto& id = require("id");
  const auto& question = require("question");
  const auto& memories = require("memories");
  if (!id.is_string()) throw DataError(LineError(line, "field 'id' must be a string"));
  if (!question.is_string()) throw DataError(LineError(line, "field 'question' must be a string"));
  if (!memories.is_array()) throw DataError(LineError(line, "field 'memories' must be an array"));
  g.id = id.get<std::string>();
  g.question = question.get<std::string>();
  if (memories.empty()) throw DataError(LineError(line, "group must contain >=1 memory"));
  for (const auto& m : memories) {
    if (!m.is_object()) throw DataError(LineError(line, "memory entries must be objects"));
    auto text = m.find("text");
    auto rel = m.find("relevant");
    if (text == m.end() || !text->is_string()) {
      throw DataError(LineError(line, "memory missing string field 'text'"));
    }
    if (rel == m.end() || !rel->is_boolean()) {
      throw DataError(LineError(line, "memory missing boolean field 'relevant'"));
    }
    Memory mem{text->get<std::string>(), rel->get<bool>()};
    if (Trim(mem.text).empty()) throw DataError(LineError(line, "memory text is empty"));
    g.memories.push_back(std::move(mem));
  }
  return g;
}

std::string ReadFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> ReadLines(const std::filesystem::path& path) {
  std::vector<std::string> out;
  std::istringstream in(ReadFile(path));
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::string t = Trim(line);
    if (t.empty() || t.front() == '#') continue;
    out.push_back(line);
  }
  return out;
}

// Lowercase ASCII, keep letters/digits/apostrophes and any non-ASCII byte,
// turn everything else into a separator.
std::string Normalize(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (unsigned char c : text) {
    if (c >= 0x80 || std::isalnum(c) || c == '\'') {
      out.push_back(static_cast<char>(std::tolower(c)));
    } else {
      out.push_back(' ');
    }
  }
  return out;
}

TokenSeq SplitWs(std::string_view s) {
  TokenSeq out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == '\n' || s[i] == '\r')) ++i;
    const std::size_t start = i;
    while (i < s.size() && !(s[i] == ' ' || s[i] == '\t' || s[i] == '\n' || s[i] == '\r')) ++i;
    if (i > start) out.emplace_back(s.substr(start, i - start));
  }
  return out;
}

void ValidateRules(const PreprocessRules& rules) {
  for (const auto& [from, to] : rules.contractions) {
    for (const auto& tok : SplitWs(to)) {
      if (rules.contractions.contains(tok)) {
        throw DataError("contraction '" + from + "' expands to another contraction key '" + tok + "'");
      }
    }
  }
}

// Removes leading carrier phrases, longest first, until none matches.
bool StripCarriers(TokenSeq& tokens, const std::vector<TokenSeq>& carriers) {
  bool changed = false;
  for (;;) {
    std::size_t best = 0;
    for (const auto& c : carriers) {
      if (c.empty() || c.size() > tokens.size() || c.size() <= best) continue;
      if (std::equal(c.begin(), c.end(), tokens.begin())) best = c.size();
    }
    if (best == 0) return changed;
    tokens.erase(tokens.begin(), tokens.begin() + static_cast<std::ptrdiff_t>(best));
    changed = true;
  }
}

}  // namespace

std::vector<QAGroup> ParseQaJsonl(std::string_view text) {
  std::vector<QAGroup> groups;
  std::unordered_set<std::string> ids;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const std::size_t end = std::min(text.find('\n', pos), text.size());
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (Trim(line).empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw DataError(LineError(line_no, std::string("malformed JSON: ") + e.what()));
    }
    QAGroup g = GroupFromJson(j, line_no);
    if (!ids.insert(g.id).second) throw DataError(LineError(line_no, "duplicate group id '" + g.id + "'"));
    groups.push_back(std::move(g));
  }
  return groups;
}

std::vector<QAGroup> LoadQaJsonl(const std::filesystem::path& path) {
  try {
    return ParseQaJsonl(ReadFile(path));
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

std::string FormatQaJsonl(const std::vector<QAGroup>& groups) {
  std::string out;
  for (const auto& g : groups) {
    ordered_json j;
    j["id"] = g.id;
    j["question"] = g.question;
    ordered_json mems = ordered_json::array();
    for (const auto& m : g.memories) {
      ordered_json mj;
      mj["text"] = m.text;
      mj["relevant"] = m.relevant;
      mems.push_back(std::move(mj));
    }
    j["memories"] = std::move(mems);
    out += j.dump();
    out += '\n';
  }
  return out;
}

void SaveQaJsonl(const std::vector<QAGroup>& groups, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  const std::string text = FormatQaJsonl(groups);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw DataError("write failed for '" + path.string() + "'");
}

PreprocessRules PreprocessRules::Defaults() {
  PreprocessRules r;
  r.contractions = {
      {"doesn't", "does not"}, {"don't", "do not"},     {"didn't", "did not"},
      {"isn't", "is not"},     {"can't", "can not"},    {"won't", "will not"},
      {"wanna", "want to"},    {"gonna", "going to"},   {"gotta", "got to"},
      {"what's", "what is"},   {"where's", "where is"}, {"who's", "who is"},
      {"i'm", "i am"},         {"i've", "i have"},      {"it's", "it is"},
  };
  for (const char* c : {"can you remember what", "can you remember where", "can you remember",
                        "please tell me who", "please tell me", "do you know", "tell me"}) {
    r.carrier_phrases.push_back(SplitWs(c));
  }
  r.stopwords = {"did", "does", "is", "the", "a", "an", "i", "my", "do", "of",
                 "on", "in", "at", "to", "was", "am", "it"};
  return r;
}

PreprocessRules PreprocessRules::LoadDir(const std::filesystem::path& dir) {
  PreprocessRules r;
  std::size_t n = 0;
  for (const auto& line : ReadLines(dir / "contractions.txt")) {
    ++n;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw DataError((dir / "contractions.txt").string() + ": entry " + std::to_string(n) +
                      " is not 'from<TAB>to'");
    }
    r.contractions[Normalize(Trim(line.substr(0, tab)))] = Trim(Normalize(line.substr(tab + 1)));
  }
  for (const auto& line : ReadLines(dir / "carrier_phrases.txt")) {
    r.carrier_phrases.push_back(SplitWs(Normalize(line)));
  }
  for (const auto& line : ReadLines(dir / "stopwords.txt")) {
    for (auto& tok : SplitWs(Normalize(line))) r.stopwords.insert(std::move(tok));
  }
  ValidateRules(r);
  return r;
}

TokenSeq RawTokens(std::string_view text) { return SplitWs(Normalize(text)); }

TokenSeq Preprocess(std::string_view text, const PreprocessRules& rules) {
  TokenSeq tokens;
  for (auto& tok : SplitWs(Normalize(text))) {
    auto it = rules.contractions.find(tok);
    if (it == rules.contractions.end()) {
      tokens.push_back(std::move(tok));
    } else {
      for (auto& t : SplitWs(it->second)) tokens.push_back(std::move(t));
    }
  }
  for (;;) {
    StripCarriers(tokens, rules.carrier_phrases);
    const std::size_t before = tokens.size();
    std::erase_if(tokens, [&](const std::string& t) { return rules.stopwords.contains(t); });
    if (tokens.size() == before) break;
    // Deleting a leading stopword can expose a carrier phrase.
  }
  return tokens;
}

std::string Join(const TokenSeq& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i];
  }
  return out;
}

CorpusStats ComputeCorpusStats(const std::vector<QAGroup>& groups, const PreprocessRules& rules) {
  if (groups.empty()) throw DataError("corpus statistics need at least one group");
  CorpusStats s;
  s.group_count = groups.size();
  s.min_memories = groups.front().memories.size();
  double pct_sum = 0.0;
  double q_raw = 0.0, q_pre = 0.0, a_raw = 0.0, a_pre = 0.0;
  for (const auto& g : groups) {
    const std::size_t n = g.memories.size();
    s.answer_count += n;
    s.min_memories = std::min(s.min_memories, n);
    s.max_memories = std::max(s.max_memories, n);
    const auto rel = std::count_if(g.memories.begin(), g.memories.end(), [](const Memory& m) { return m.relevant; });
    pct_sum += n ? 100.0 * static_cast<double>(rel) / static_cast<double>(n) : 0.0;
    q_raw += static_cast<double>(RawTokens(g.question).size());
    q_pre += static_cast<double>(Preprocess(g.question, rules).size());
    for (const auto& m : g.memories) {
      a_raw += static_cast<double>(RawTokens(m.text).size());
      a_pre += static_cast<double>(Preprocess(m.text, rules).size());
    }
  }
  const double ng = static_cast<double>(s.group_count);
  const double na = static_cast<double>(s.answer_count);
  s.mean_memories = na / ng;
  double var = 0.0;
  for (const auto& g : groups) {
    const double d = static_cast<double>(g.memories.size()) - s.mean_memories;
    var += d * d;
  }
  s.stddev_memories = std::sqrt(var / ng);
  s.percent_relevant = pct_sum / ng;
  s.mean_question_tokens_raw = q_raw / ng;
  s.mean_question_tokens = q_pre / ng;
  s.mean_answer_tokens_raw = na > 0 ? a_raw / na : 0.0;
  s.mean_answer_tokens = na > 0 ? a_pre / na : 0.0;
  return s;
}

std::vector<QAGroup> PreprocessCorpus(const std::vector<QAGroup>& groups, const PreprocessRules& rules) {
  // An utterance that preprocesses to nothing keeps its raw text so the file
  // stays loadable; preprocessing it again still yields an empty sequence.
  auto apply = [&](const std::string& text) {
    std::string p = Join(Preprocess(text, rules));
    return p.empty() ? text : p;
  };
  std::vector<QAGroup> out = groups;
  for (auto& g : out) {
    g.question = apply(g.question);
    for (auto& m : g.memories) m.text = apply(m.text);
  }
  return out;
}

}  // namespace memqa
