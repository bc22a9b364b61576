#include "memqa/evaluation.hpp"

#include <cstdio>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "memqa/error.hpp"

namespace memqa {

using ordered_json = nlohmann::ordered_json;

std::vector<double> DefaultThresholds() { return {0.97, 0.98, 0.99}; }

void ValidateThresholds(const std::vector<double>& thresholds) {
  if (thresholds.empty()) throw UsageError("at least one threshold is required");
  for (std::size_t i = 0; i < thresholds.size(); ++i) {
    if (!(thresholds[i] >= 0.0 && thresholds[i] <= 1.0)) {
      throw UsageError("threshold " + std::to_string(thresholds[i]) + " outside [0, 1]");
    }
    if (i > 0 && !(thresholds[i] > thresholds[i - 1])) throw UsageError("thresholds must be strictly increasing");
  }
}

ActionSet ThresholdActions(const RelevanceOutput& out, double t) {
  if (out.probabilistic) return GreedyThresholdActions(out.probs, t);
  ActionSet a(out.scores.size());
  for (std::size_t i = 0; i < a.size(); ++i) a[i] = (out.scores[i] + 1.0) / 2.0 >= t;
  return a;
}

EvalReport EvaluateOutputs(const std::vector<RelevanceOutput>& outputs,
                           const std::vector<std::vector<std::uint8_t>>& labels, const std::vector<std::string>& ids,
                           const std::vector<double>& thresholds, bool detail) {
  ValidateThresholds(thresholds);
  if (outputs.empty()) throw DataError("cannot evaluate an empty corpus");
  if (labels.size() != outputs.size() || ids.size() != outputs.size()) {
    throw ShapeError("evaluate: outputs, labels and ids disagree in length");
  }
  EvalReport report;
  const double n = static_cast<double>(outputs.size());
  for (double t : thresholds) {
    EvalRow row{t, 0.0, 0.0, 0.0};
    for (std::size_t g = 0; g < outputs.size(); ++g) {
      const GroupMetrics m = GroupF1(ThresholdActions(outputs[g], t), labels[g]);
      row.precision += m.precision;
      row.recall += m.recall;
      row.f1 += m.f1;
      if (detail) report.groups.push_back({ids[g], t, m});
    }
    row.precision /= n;
    row.recall /= n;
    row.f1 /= n;
    report.rows.push_back(row);
  }
  return report;
}

EvalReport Evaluate(const ModelConfig& config, const ParamStore& params, const std::vector<EncodedGroup>& groups,
                    const std::vector<double>& thresholds, std::size_t workers, bool detail) {
  ValidateThresholds(thresholds);
  if (groups.empty()) throw DataError("cannot evaluate an empty corpus");
  std::vector<RelevanceOutput> outputs(groups.size());
  workers = std::max<std::size_t>(1, std::min(workers, groups.size()));
  if (workers == 1) {
    for (std::size_t g = 0; g < groups.size(); ++g) outputs[g] = Predict(config, params, groups[g]);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t g = w; g < groups.size(); g += workers) outputs[g] = Predict(config, params, groups[g]);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }
  std::vector<std::vector<std::uint8_t>> labels;
  std::vector<std::string> ids;
  labels.reserve(groups.size());
  ids.reserve(groups.size());
  for (const auto& g : groups) {
    labels.push_back(g.labels);
    ids.push_back(g.id);
  }
  EvalReport report = EvaluateOutputs(outputs, labels, ids, thresholds, detail);
  report.model = ArchitectureName(config.arch);
  return report;
}

std::vector<RelativeChange> CompareRuns(const EvalReport& a, const EvalReport& b) {
  if (a.corpus != b.corpus) throw UsageError("reports cover different corpora: '" + a.corpus + "' vs '" + b.corpus + "'");
  if (a.rows.size() != b.rows.size()) throw UsageError("reports have different threshold lists");
  std::vector<RelativeChange> out;
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    if (a.rows[i].threshold != b.rows[i].threshold) throw UsageError("reports have different threshold lists");
    RelativeChange c{a.rows[i].threshold, std::nullopt};
    if (a.rows[i].f1 != 0.0) c.percent = 100.0 * (b.rows[i].f1 - a.rows[i].f1) / a.rows[i].f1;
    out.push_back(c);
  }
  return out;
}

std::string ReportToJson(const EvalReport& report, int indent) {
  ordered_json j;
  j["corpus"] = report.corpus;
  j["model"] = report.model;
  j["rows"] = ordered_json::array();
  for (const auto& r : report.rows) {
    j["rows"].push_back({{"threshold", r.threshold}, {"precision", r.precision}, {"recall", r.recall}, {"f1", r.f1}});
  }
  if (!report.groups.empty()) {
    j["groups"] = ordered_json::array();
    for (const auto& g : report.groups) {
      j["groups"].push_back({{"id", g.id},
                             {"threshold", g.threshold},
                             {"precision", g.metrics.precision},
                             {"recall", g.metrics.recall},
                             {"f1", g.metrics.f1},
                             {"tp", g.metrics.tp},
                             {"fp", g.metrics.fp},
                             {"fn", g.metrics.fn}});
    }
  }
  return j.dump(indent) + "\n";
}

EvalReport ReportFromJson(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(std::string("report: ") + e.what());
  }
  try {
    EvalReport r;
    r.corpus = j.at("corpus").get<std::string>();
    r.model = j.at("model").get<std::string>();
    for (const auto& row : j.at("rows")) {
      r.rows.push_back({row.at("threshold").get<double>(), row.at("precision").get<double>(),
                        row.at("recall").get<double>(), row.at("f1").get<double>()});
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("report: ") + e.what());
  }
}

std::string ReportToText(const EvalReport& report) {
  std::ostringstream out;
  out << "corpus: " << report.corpus << "  model: " << report.model << "\n";
  out << "threshold  precision     recall         f1\n";
  char buf[96];
  for (const auto& r : report.rows) {
    std::snprintf(buf, sizeof buf, "%9.4f  %9.4f  %9.4f  %9.4f\n", r.threshold, r.precision, r.recall, r.f1);
    out << buf;
  }
  return out.str();
}

std::string CompareToText(const std::vector<RelativeChange>& changes) {
  std::ostringstream out;
  out << "threshold   rel. F1 change\n";
  char buf[96];
  for (const auto& c : changes) {
    if (c.percent) {
      std::snprintf(buf, sizeof buf, "%9.4f  %+14.3f%%\n", c.threshold, *c.percent);
    } else {
      std::snprintf(buf, sizeof buf, "%9.4f  %15s\n", c.threshold, "n/a");
    }
    out << buf;
  }
  return out.str();
}

}  // namespace memqa
