#pragma once

#include <optional>
#include <string>
#include <vector>

#include "memqa/embeddings.hpp"
#include "memqa/models.hpp"
#include "memqa/objectives.hpp"

namespace memqa {

struct EvalRow {
  double threshold = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct GroupDetail {
  std::string id;
  double threshold = 0.0;
  GroupMetrics metrics;
};

struct EvalReport {
  std::string corpus;
  std::string model;
  std::vector<EvalRow> rows;
  // Only filled when requested.
  std::vector<GroupDetail> groups;
};

std::vector<double> DefaultThresholds();
// Throws UsageError unless non-empty, strictly increasing and within [0, 1].
void ValidateThresholds(const std::vector<double>& thresholds);

// Relevance decisions for one group at threshold t. Probabilistic outputs use
// the greedy thresholded rule; cosine scores map to (s + 1) / 2 >= t.
ActionSet ThresholdActions(const RelevanceOutput& out, double t);

// Macro-averaged P/R/F1 per threshold. Groups are scored on `workers`
// threads; the result does not depend on the worker count.
EvalReport Evaluate(const ModelConfig& config, const ParamStore& params, const std::vector<EncodedGroup>& groups,
                    const std::vector<double>& thresholds, std::size_t workers = 1, bool detail = false);

// Same reduction over precomputed model outputs, in group order.
EvalReport EvaluateOutputs(const std::vector<RelevanceOutput>& outputs,
                           const std::vector<std::vector<std::uint8_t>>& labels, const std::vector<std::string>& ids,
                           const std::vector<double>& thresholds, bool detail = false);

struct RelativeChange {
  double threshold = 0.0;
  // 100 * (f1_b - f1_a) / f1_a; empty when f1_a is 0.
  std::optional<double> percent;
};

// Throws UsageError if the corpus ids or thresholds differ.
std::vector<RelativeChange> CompareRuns(const EvalReport& a, const EvalReport& b);

std::string ReportToJson(const EvalReport& report, int indent = 2);
EvalReport ReportFromJson(const std::string& text);
std::string ReportToText(const EvalReport& report);
std::string CompareToText(const std::vector<RelativeChange>& changes);

}  // namespace memqa
