#pragma once

// Golden-file conformance checks shared by the unit suite and the acceptance
// binary. Each returns an empty string on success, otherwise what differed.

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "memqa/corpus.hpp"
#include "memqa/embeddings.hpp"
#include "memqa/evaluation.hpp"
#include "oracles.hpp"

namespace memqa::golden {

inline std::filesystem::path Dir() { return MEMQA_GOLDEN_DIR; }

inline std::string CheckVec() {
  const EmbeddingTable t = EmbeddingTable::LoadVec(Dir() / "fixture.vec");
  if (t.dim() != 3) return "dim " + std::to_string(t.dim());
  if (t.size() != 3) return "size " + std::to_string(t.size());
  if (t.Lookup("keys") != std::vector<double>{0.75, 0.5, -2}) return "keys (last duplicate should win)";
  if (t.Lookup("phone") != std::vector<double>{1e-3, 250, 0}) return "phone (exponent forms)";
  if (t.Lookup("ben's") != std::vector<double>{-1.5, 0, 0.125}) return "ben's";
  if (t.Lookup("absent") != std::vector<double>{0, 0, 0}) return "oov row not zero";
  return "";
}

inline std::string CheckJsonl() {
  const std::string text = oracle::ReadFile(Dir() / "corpus.jsonl");
  const auto groups = ParseQaJsonl(text);
  if (groups.size() != 3) return "group count " + std::to_string(groups.size());
  if (groups[0].id != "g1" || groups[0].memories.size() != 2 || !groups[0].memories[0].relevant ||
      groups[0].memories[1].relevant) {
    return "g1 fields";
  }
  if (groups[0].memories[1].text != "the weather was \"sunny\"") return "escaped quotes";
  if (groups[2].question != "caf\xc3\xa9 na\xc3\xafve \xc3\xbcn\xc3\xaf" "code") return "utf-8 text";
  if (groups[2].memories[0].text != "tab\there\\slash") return "escaped tab and backslash";
  if (FormatQaJsonl(groups) != text) return "round trip is not byte-identical";
  return "";
}

inline std::string CheckReport() {
  // Group A: labels {1,1,0}, p(rel) {0.9, 0.1, 0.8} -> P = R = F1 = 1/2 at
  // both thresholds. Group B: labels {1,0}, p(rel) {0.6, 0.1} -> 1 at 0.5,
  // nothing predicted at 0.75.
  std::vector<RelevanceOutput> outputs{{true, oracle::ProbTable({0.9, 0.1, 0.8}), {}},
                                       {true, oracle::ProbTable({0.6, 0.1}), {}}};
  EvalReport r = EvaluateOutputs(outputs, {{1, 1, 0}, {1, 0}}, {"a", "b"}, {0.5, 0.75});
  r.corpus = "golden";
  r.model = "teff";
  const std::string expected = oracle::ReadFile(Dir() / "eval_report.json");
  if (ReportToJson(r) != expected) return "emitted report differs from golden";

  const auto j = nlohmann::ordered_json::parse(expected);
  std::vector<std::string> keys;
  for (const auto& [k, v] : j.items()) keys.push_back(k);
  if (keys != std::vector<std::string>{"corpus", "model", "rows"}) return "top-level keys";
  if (!j["corpus"].is_string() || !j["model"].is_string() || !j["rows"].is_array()) return "top-level types";
  for (const auto& row : j["rows"]) {
    std::vector<std::string> rk;
    for (const auto& [k, v] : row.items()) {
      rk.push_back(k);
      if (!v.is_number()) return "row value type";
    }
    if (rk != std::vector<std::string>{"threshold", "precision", "recall", "f1"}) return "row keys";
  }
  const EvalReport back = ReportFromJson(expected);
  if (ReportToJson(back) != expected) return "report parse round trip";
  return "";
}

}  // namespace memqa::golden
