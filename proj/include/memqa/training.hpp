#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "memqa/adam.hpp"
#include "memqa/corpus.hpp"
#include "memqa/embeddings.hpp"
#include "memqa/models.hpp"
#include "memqa/objectives.hpp"
#include "memqa/rng.hpp"

namespace memqa {

struct TrainConfig {
  ObjectiveConfig objective;
  double lr = 0.001;
  // Applied once when training switches to whole-group batches.
  double lr_decay = 0.1;
  std::size_t batch_size = 128;
  double weight_decay = 1e-5;
  std::size_t max_epochs_phase1 = 30;
  std::size_t max_epochs_phase2 = 10;
  // Epochs without a dev improvement before a phase ends.
  std::size_t patience = 5;
  // Pair batches per phase-1 epoch; 0 means ceil(pairs / batch_size).
  std::size_t batches_per_epoch = 0;
  std::uint64_t seed = 0;
  // Dev thresholds reported each epoch; model selection uses select_threshold.
  std::vector<double> dev_thresholds{0.97};
  double select_threshold = 0.97;
  // Global gradient-norm clip; 0 disables.
  double clip_norm = 0.0;
  std::size_t workers = 1;

  // Throws UsageError.
  void Validate() const;
  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

struct PairRef {
  std::size_t group = 0;
  std::size_t memory = 0;
  friend bool operator==(const PairRef&, const PairRef&) = default;
};

using PairBatch = std::vector<PairRef>;

// `count` batches of `batch_size` pairs; each slot is a uniformly drawn
// positive pair with probability 1/2, otherwise a uniformly drawn negative.
// Throws DataError if the corpus lacks positives or negatives.
std::vector<PairBatch> MakePairBatches(const std::vector<EncodedGroup>& groups, std::size_t batch_size,
                                       std::size_t count, RngStream& rng);

// A fresh permutation of group indices; one batch per group.
std::vector<std::size_t> MakeGroupBatches(std::size_t group_count, RngStream& rng);

struct EpochRecord {
  std::size_t epoch = 0;
  int phase = 1;
  double lr = 0.0;
  double train_loss = 0.0;
  // One entry per TrainConfig::dev_thresholds.
  std::vector<double> dev_f1;
  double select_f1 = 0.0;
  bool improved = false;

  friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

struct TrainState {
  int phase = 1;
  std::size_t epoch = 0;
  std::size_t epoch_in_phase = 0;
  std::size_t bad_epochs = 0;
  double best_f1 = -1.0;
  bool done = false;
  RngStream rng{0};

  friend bool operator==(const TrainState&, const TrainState&) = default;
};

// Everything needed to evaluate a model or resume training exactly.
struct Checkpoint {
  ModelConfig model;
  TrainConfig train;
  PreprocessRules rules;
  CharVocab chars;
  std::string embeddings;
  OovPolicy oov;
  // Dev-best parameters, used for inference.
  ParamStore params;
  // Parameters at the end of the last completed epoch.
  ParamStore current;
  AdamState adam;
  TrainState state;
  std::vector<EpochRecord> history;
};

struct TrainInputs {
  const std::vector<EncodedGroup>* train = nullptr;
  const std::vector<EncodedGroup>* dev = nullptr;
};

struct TrainOptions {
  // Stop (resumably) after this many epochs in this call; 0 = run to the end.
  std::size_t stop_after_epochs = 0;
  // JSON-lines metrics log, appended per epoch. Empty = no log.
  std::string log_path;
  // Written when a non-finite loss aborts training. Empty = not written.
  std::string diagnostic_path;
};

// With resume set, continues from `start` exactly where it stopped.
// Otherwise only the model/train/rules/chars/embeddings/oov fields of
// `start` are used and parameters are initialised from the seed.
Checkpoint Train(const TrainInputs& data, Checkpoint start, bool resume, const TrainOptions& options = {});

// Loss and gradient on a fixed pair micro-batch with dropout off; used to
// cross-check the trainer's update against finite differences.
double PairBatchLoss(const ModelConfig& config, const ParamStore& params, const std::vector<EncodedGroup>& groups,
                     const PairBatch& batch, ParamStore* grad);
double GroupBatchLoss(const ModelConfig& config, const ParamStore& params, const EncodedGroup& group,
                      const ObjectiveConfig& objective, RngStream rng, ParamStore* grad);

}  // namespace memqa
