#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "memqa/graph.hpp"
#include "memqa/rng.hpp"
#include "memqa/tensor.hpp"

namespace memqa {

// One flag per memory; 1 = predicted (or labelled) relevant.
using ActionSet = std::vector<std::uint8_t>;

struct RewardTable {
  double no_positives_all_correct = 1.0;
  double no_positives_all_wrong = -0.1;
  double no_true_positive = -0.5;
  double low_f1 = -0.01;
  // Inclusive upper bound of the low-F1 case.
  double low_f1_cutoff = 0.2;

  friend bool operator==(const RewardTable&, const RewardTable&) = default;
};

enum class ObjectiveKind { kCe, kRv1, kRv2, kSmooth, kMtl };
enum class SmoothMode { kSoftProb, kLiteral };

std::string ObjectiveName(ObjectiveKind kind);
ObjectiveKind ParseObjective(std::string_view name);
std::string SmoothModeName(SmoothMode mode);
SmoothMode ParseSmoothMode(std::string_view name);

struct ObjectiveConfig {
  ObjectiveKind kind = ObjectiveKind::kCe;
  // Reinforcement term mixed in by kMtl; kRv1 or kRv2.
  ObjectiveKind rl_kind = ObjectiveKind::kRv2;
  double lambda = 0.5;
  double zeta = 0.97;
  SmoothMode smooth_mode = SmoothMode::kSoftProb;
  RewardTable reward;
  // Sampled action sets per group and update.
  std::size_t samples = 1;

  // Throws UsageError.
  void Validate() const;
  // True for objectives that need whole-group batches.
  bool GroupLevel() const { return kind != ObjectiveKind::kCe; }

  friend bool operator==(const ObjectiveConfig&, const ObjectiveConfig&) = default;
};

struct GroupMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
};

// probs: [n, 2] (column 1 = relevant); labels: n flags. Mean over pairs of
// -log max(p(true class), 1e-12).
Var CeLoss(Var probs, std::span<const std::uint8_t> labels);

// 1 iff the argmax class is relevant and p(relevant) >= zeta.
ActionSet GreedyThresholdActions(const Tensor& probs, double zeta);

struct SampledActions {
  ActionSet actions;
  double log_prob = 0.0;
};

// Independent Bernoulli draw per memory.
SampledActions SampleActions(const Tensor& probs, RngStream& rng);

// tp = fp = fn = 0 scores P = R = F1 = 1.
GroupMetrics GroupF1(std::span<const std::uint8_t> actions, std::span<const std::uint8_t> labels);

// Shaped group reward; cases are tested in order: no positives and every
// prediction irrelevant, no positives and every prediction relevant, no
// positives otherwise (accuracy), no true positive, F1 <= cutoff, F1.
double Reward(std::span<const std::uint8_t> actions, std::span<const std::uint8_t> labels,
              const RewardTable& table);

// Score-function surrogate -c * sum_i log p(a_i) for one sampled action set,
// averaged over `samples` draws. c = R(a) for RV1 and R(a) - F1(greedy) for
// RV2; c carries no gradient.
Var Rv1Loss(Var probs, std::span<const std::uint8_t> labels, RngStream& rng, const RewardTable& table,
            std::size_t samples = 1);
Var Rv2Loss(Var probs, std::span<const std::uint8_t> labels, RngStream& rng, const RewardTable& table,
            double zeta, std::size_t samples = 1);

// Soft-prob mode counts probability mass; literal mode weights the argmax
// tp/fp/fn indicators by log p(predicted class). Returns -F.
Var SmoothF1Loss(Var probs, std::span<const std::uint8_t> labels, SmoothMode mode);

Var MtlLoss(Var ce, Var re, double lambda);
double MtlLoss(double ce, double re, double lambda);

// Loss for one whole group under `config`.
Var GroupLoss(Var probs, std::span<const std::uint8_t> labels, const ObjectiveConfig& config, RngStream& rng);

using ProbsFn = std::function<Var(Graph&, const ParamStore&)>;

// Exact gradient of -E_a[R(a)] over all 2^n action sets; n <= 12.
ParamStore EnumerateExpectedGrad(const ProbsFn& probs, const ParamStore& params,
                                 std::span<const std::uint8_t> labels, const RewardTable& table);

}  // namespace memqa
