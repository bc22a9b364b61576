#include "memqa/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "memqa/checkpoint.hpp"
#include "memqa/error.hpp"
#include "memqa/evaluation.hpp"

namespace memqa {
namespace {

std::size_t PairCount(const std::vector<EncodedGroup>& groups) {
  std::size_t n = 0;
  for (const auto& g : groups) n += g.memories.size();
  return n;
}

Var PairProbs(Graph& g, const ModelConfig& config, const ParamStore& params, const std::vector<EncodedGroup>& groups,
              const PairBatch& batch, const ForwardOptions& options, std::vector<std::uint8_t>& labels) {
  std::vector<const EncodedUtterance*> qs, ms;
  qs.reserve(batch.size());
  ms.reserve(batch.size());
  labels.clear();
  for (const auto& p : batch) {
    const EncodedGroup& grp = groups.at(p.group);
    qs.push_back(&grp.question);
    ms.push_back(&grp.memories.at(p.memory));
    labels.push_back(grp.labels.at(p.memory));
  }
  return ForwardProbs(g, config, params, qs, ms, options);
}

Var GroupProbs(Graph& g, const ModelConfig& config, const ParamStore& params, const EncodedGroup& group,
               const ForwardOptions& options) {
  std::vector<const EncodedUtterance*> qs(group.memories.size(), &group.question);
  std::vector<const EncodedUtterance*> ms;
  ms.reserve(group.memories.size());
  for (const auto& m : group.memories) ms.push_back(&m);
  return ForwardProbs(g, config, params, qs, ms, options);
}

// Sorted union of the reported thresholds and the selection threshold.
std::vector<double> EvalThresholds(const TrainConfig& c) {
  std::set<double> s(c.dev_thresholds.begin(), c.dev_thresholds.end());
  s.insert(c.select_threshold);
  return {s.begin(), s.end()};
}

double RowF1(const EvalReport& r, double t) {
  for (const auto& row : r.rows) {
    if (row.threshold == t) return row.f1;
  }
  return 0.0;
}

void AppendLog(const std::string& path, const EpochRecord& rec, const TrainConfig& cfg, double best) {
  if (path.empty()) return;
  std::ofstream out(path, std::ios::app);
  if (!out) throw DataError("cannot append to training log '" + path + "'");
  nlohmann::ordered_json j;
  j["epoch"] = rec.epoch;
  j["phase"] = rec.phase;
  j["lr"] = rec.lr;
  j["train_loss"] = rec.train_loss;
  j["dev"] = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < rec.dev_f1.size(); ++i) {
    j["dev"].push_back({{"threshold", cfg.dev_thresholds[i]}, {"f1", rec.dev_f1[i]}});
  }
  j["select_f1"] = rec.select_f1;
  j["best_f1"] = best;
  j["improved"] = rec.improved;
  out << j.dump() << "\n";
}

}  // namespace

void TrainConfig::Validate() const {
  objective.Validate();
  if (!(lr > 0.0)) throw UsageError("learning rate must be positive");
  if (!(lr_decay > 0.0)) throw UsageError("learning-rate decay must be positive");
  if (batch_size == 0) throw UsageError("batch size must be at least 1");
  if (!(weight_decay >= 0.0)) throw UsageError("weight decay must be non-negative");
  if (max_epochs_phase1 == 0) throw UsageError("phase 1 needs at least one epoch");
  if (objective.GroupLevel() && max_epochs_phase2 == 0) throw UsageError("phase 2 needs at least one epoch");
  if (patience == 0) throw UsageError("patience must be at least 1");
  if (!(clip_norm >= 0.0)) throw UsageError("clip norm must be non-negative");
  if (workers == 0) throw UsageError("workers must be at least 1");
  ValidateThresholds(dev_thresholds);
  if (!(select_threshold >= 0.0 && select_threshold <= 1.0)) throw UsageError("selection threshold outside [0, 1]");
}

std::vector<PairBatch> MakePairBatches(const std::vector<EncodedGroup>& groups, std::size_t batch_size,
                                       std::size_t count, RngStream& rng) {
  std::vector<PairRef> pos, neg;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    for (std::size_t m = 0; m < groups[g].labels.size(); ++m) {
      (groups[g].labels[m] ? pos : neg).push_back({g, m});
    }
  }
  if (pos.empty()) throw DataError("training corpus has no relevant memories; positive oversampling is undefined");
  if (neg.empty()) throw DataError("training corpus has no irrelevant memories");
  std::vector<PairBatch> out(count);
  for (auto& b : out) {
    b.reserve(batch_size);
    for (std::size_t i = 0; i < batch_size; ++i) {
      const auto& pool = rng.Bernoulli(0.5) ? pos : neg;
      b.push_back(pool[rng.Below(pool.size())]);
    }
  }
  return out;
}

std::vector<std::size_t> MakeGroupBatches(std::size_t group_count, RngStream& rng) {
  std::vector<std::size_t> order(group_count);
  for (std::size_t i = 0; i < group_count; ++i) order[i] = i;
  rng.Shuffle(std::span<std::size_t>(order));
  return order;
}

double PairBatchLoss(const ModelConfig& config, const ParamStore& params, const std::vector<EncodedGroup>& groups,
                     const PairBatch& batch, ParamStore* grad) {
  Graph g;
  std::vector<std::uint8_t> labels;
  Var probs = PairProbs(g, config, params, groups, batch, {}, labels);
  Var loss = CeLoss(probs, labels);
  if (grad) {
    g.Backward(loss);
    *grad = g.ParamGrads(params);
  }
  return loss.value()[0];
}

double GroupBatchLoss(const ModelConfig& config, const ParamStore& params, const EncodedGroup& group,
                      const ObjectiveConfig& objective, RngStream rng, ParamStore* grad) {
  Graph g;
  Var loss = GroupLoss(GroupProbs(g, config, params, group, {}), group.labels, objective, rng);
  if (grad) {
    g.Backward(loss);
    *grad = g.ParamGrads(params);
  }
  return loss.value()[0];
}

Checkpoint Train(const TrainInputs& data, Checkpoint ck, bool resume, const TrainOptions& options) {
  if (!data.train || !data.dev) throw UsageError("training needs train and dev corpora");
  if (data.train->empty()) throw DataError("training corpus is empty");
  if (data.dev->empty()) throw DataError("dev corpus is empty");
  ck.model.Validate();
  ck.train.Validate();
  if (!IsProbabilistic(ck.model.arch)) {
    throw UsageError(ArchitectureName(ck.model.arch) + " has no trainable parameters");
  }
  const TrainConfig& cfg = ck.train;
  if (!resume) {
    const RngStream root(cfg.seed);
    RngStream init = root.Split(1);
    ck.params = InitParams(ck.model, init);
    ck.current = ck.params;
    ck.adam = AdamState::For(ck.current, AdamConfig{cfg.lr});
    ck.state = TrainState{};
    ck.state.rng = root.Split(2);
    ck.history.clear();
    if (!options.log_path.empty()) std::ofstream(options.log_path, std::ios::trunc);
  }
  const std::vector<double> thresholds = EvalThresholds(cfg);
  const std::size_t batches = cfg.batches_per_epoch
                                  ? cfg.batches_per_epoch
                                  : (PairCount(*data.train) + cfg.batch_size - 1) / cfg.batch_size;

  auto abort_numeric = [&](const std::string& what) {
    if (!options.diagnostic_path.empty()) SaveCheckpoint(ck, options.diagnostic_path);
    throw NumericError(what + " at epoch " + std::to_string(ck.state.epoch + 1) + ", phase " +
                       std::to_string(ck.state.phase));
  };
  auto step = [&](Graph& g, Var loss, double lr) {
    const double v = loss.value()[0];
    if (!std::isfinite(v)) abort_numeric("non-finite loss " + std::to_string(v));
    g.Backward(loss);
    ParamStore grads = g.ParamGrads(ck.current);
    if (cfg.clip_norm > 0.0) ClipGlobalNorm(grads, cfg.clip_norm);
    ck.adam.config.lr = lr;
    try {
      AdamStep(ck.current, grads, ck.adam, cfg.weight_decay);
    } catch (const NumericError& e) {
      abort_numeric(e.what());
    }
    return v;
  };

  std::size_t ran = 0;
  while (!ck.state.done) {
    if (options.stop_after_epochs && ran == options.stop_after_epochs) break;
    TrainState& st = ck.state;
    const double lr = st.phase == 1 ? cfg.lr : cfg.lr * cfg.lr_decay;
    ForwardOptions fwd{true, &st.rng};
    double loss_sum = 0.0;
    std::size_t steps = 0;
    if (st.phase == 1) {
      for (const auto& batch : MakePairBatches(*data.train, cfg.batch_size, batches, st.rng)) {
        Graph g;
        std::vector<std::uint8_t> labels;
        Var probs = PairProbs(g, ck.model, ck.current, *data.train, batch, fwd, labels);
        loss_sum += step(g, CeLoss(probs, labels), lr);
        ++steps;
      }
    } else {
      for (std::size_t gi : MakeGroupBatches(data.train->size(), st.rng)) {
        const EncodedGroup& grp = (*data.train)[gi];
        Graph g;
        Var probs = GroupProbs(g, ck.model, ck.current, grp, fwd);
        loss_sum += step(g, GroupLoss(probs, grp.labels, cfg.objective, st.rng), lr);
        ++steps;
      }
    }

    const EvalReport dev = Evaluate(ck.model, ck.current, *data.dev, thresholds, cfg.workers);
    EpochRecord rec;
    rec.epoch = st.epoch + 1;
    rec.phase = st.phase;
    rec.lr = lr;
    rec.train_loss = steps ? loss_sum / static_cast<double>(steps) : 0.0;
    for (double t : cfg.dev_thresholds) rec.dev_f1.push_back(RowF1(dev, t));
    rec.select_f1 = RowF1(dev, cfg.select_threshold);
    rec.improved = rec.select_f1 > st.best_f1;
    if (rec.improved) {
      st.best_f1 = rec.select_f1;
      ck.params = ck.current;
      st.bad_epochs = 0;
    } else {
      ++st.bad_epochs;
    }
    ck.history.push_back(rec);
    AppendLog(options.log_path, rec, cfg, st.best_f1);
    ++st.epoch;
    ++st.epoch_in_phase;
    ++ran;

    const std::size_t max_epochs = st.phase == 1 ? cfg.max_epochs_phase1 : cfg.max_epochs_phase2;
    if (st.bad_epochs >= cfg.patience || st.epoch_in_phase >= max_epochs) {
      if (st.phase == 1 && cfg.objective.GroupLevel()) {
        // Phase 2 starts from the dev-best phase-1 model with fresh moments.
        st.phase = 2;
        st.epoch_in_phase = 0;
        st.bad_epochs = 0;
        ck.current = ck.params;
        ck.adam = AdamState::For(ck.current, AdamConfig{cfg.lr * cfg.lr_decay});
      } else {
        st.done = true;
      }
    }
  }
  return ck;
}

}  // namespace memqa
