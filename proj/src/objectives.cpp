#include "memqa/objectives.hpp"

#include <cmath>

#include "memqa/error.hpp"

namespace memqa {
namespace {

constexpr double kProbFloor = 1e-12;
constexpr double kEps = 1e-8;
constexpr std::size_t kMaxEnumerate = 12;

void CheckGroup(const Tensor& probs, std::span<const std::uint8_t> labels, const char* what) {
  if (probs.rank() != 2 || probs.dim(1) != 2 || probs.dim(0) != labels.size()) {
    throw ShapeError(std::string(what) + ": probabilities " + ShapeString(probs.shape()) + " for " +
                     std::to_string(labels.size()) + " labels");
  }
}

bool ArgmaxRelevant(const Tensor& probs, std::size_t i) { return probs.at(i, 1) > probs.at(i, 0); }

// sum_i log p(a_i) as a graph scalar.
Var ActionLogProb(Var log_probs, std::span<const std::uint8_t> actions) {
  std::vector<double> w(actions.size() * 2, 0.0);
  for (std::size_t i = 0; i < actions.size(); ++i) w[i * 2 + (actions[i] ? 1 : 0)] = 1.0;
  return ops::WeightedSum(log_probs, w);
}

Var ScoreFunctionLoss(Var probs, std::span<const std::uint8_t> labels, RngStream& rng, const RewardTable& table,
                      const double* baseline, std::size_t samples) {
  if (samples == 0) throw UsageError("at least one sampled action set is needed");
  const Tensor& p = probs.value();
  Var log_probs = ops::Log(probs, kProbFloor);
  std::vector<double> coeff;
  std::vector<Var> terms;
  for (std::size_t s = 0; s < samples; ++s) {
    const SampledActions a = SampleActions(p, rng);
    double c = Reward(a.actions, labels, table);
    if (baseline) c -= *baseline;
    terms.push_back(ActionLogProb(log_probs, a.actions));
    coeff.push_back(-c / static_cast<double>(samples));
  }
  Var stacked = terms.size() == 1 ? terms[0] : ops::Concat(terms);
  return ops::WeightedSum(stacked, coeff);
}

}  // namespace

std::string ObjectiveName(ObjectiveKind kind) {
  switch (kind) {
    case ObjectiveKind::kCe: return "ce";
    case ObjectiveKind::kRv1: return "rv1";
    case ObjectiveKind::kRv2: return "rv2";
    case ObjectiveKind::kSmooth: return "smooth";
    case ObjectiveKind::kMtl: return "mtl";
  }
  return "unknown";
}

ObjectiveKind ParseObjective(std::string_view name) {
  for (auto k : {ObjectiveKind::kCe, ObjectiveKind::kRv1, ObjectiveKind::kRv2, ObjectiveKind::kSmooth,
                 ObjectiveKind::kMtl}) {
    if (name == ObjectiveName(k)) return k;
  }
  throw UsageError("unknown objective '" + std::string(name) + "' (expected ce, rv1, rv2, smooth or mtl)");
}

std::string SmoothModeName(SmoothMode mode) { return mode == SmoothMode::kSoftProb ? "soft-prob" : "literal"; }

SmoothMode ParseSmoothMode(std::string_view name) {
  if (name == "soft-prob") return SmoothMode::kSoftProb;
  if (name == "literal" || name == "literal-logprob") return SmoothMode::kLiteral;
  throw UsageError("unknown smooth mode '" + std::string(name) + "' (expected soft-prob or literal)");
}

void ObjectiveConfig::Validate() const {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw UsageError("lambda must lie in [0, 1]");
  if (!(zeta >= 0.0 && zeta <= 1.0)) throw UsageError("zeta must lie in [0, 1]");
  if (kind == ObjectiveKind::kMtl && rl_kind != ObjectiveKind::kRv1 && rl_kind != ObjectiveKind::kRv2) {
    throw UsageError("mtl needs a reinforcement term (rv1 or rv2)");
  }
  if (samples == 0) throw UsageError("samples must be at least 1");
}

Var CeLoss(Var probs, std::span<const std::uint8_t> labels) {
  CheckGroup(probs.value(), labels, "ce_loss");
  std::vector<std::size_t> idx(labels.begin(), labels.end());
  return ops::Scale(ops::Mean(ops::Log(ops::Pick(probs, idx), kProbFloor)), -1.0);
}

ActionSet GreedyThresholdActions(const Tensor& probs, double zeta) {
  ActionSet a(probs.rows(), 0);
  for (std::size_t i = 0; i < a.size(); ++i) a[i] = ArgmaxRelevant(probs, i) && probs.at(i, 1) >= zeta;
  return a;
}

SampledActions SampleActions(const Tensor& probs, RngStream& rng) {
  SampledActions s;
  s.actions.resize(probs.rows());
  for (std::size_t i = 0; i < s.actions.size(); ++i) {
    // Always consume one draw so the stream position is independent of p.
    const double u = rng.Uniform();
    s.actions[i] = u < probs.at(i, 1);
    s.log_prob += std::log(std::max(probs.at(i, s.actions[i] ? 1 : 0), kProbFloor));
  }
  return s;
}

GroupMetrics GroupF1(std::span<const std::uint8_t> actions, std::span<const std::uint8_t> labels) {
  if (actions.size() != labels.size()) {
    throw ShapeError("group_f1: " + std::to_string(actions.size()) + " actions for " +
                     std::to_string(labels.size()) + " labels");
  }
  GroupMetrics m;
  for (std::size_t i = 0; i < actions.size(); ++i) {
    if (actions[i] && labels[i]) ++m.tp;
    if (actions[i] && !labels[i]) ++m.fp;
    if (!actions[i] && labels[i]) ++m.fn;
  }
  if (m.tp + m.fp + m.fn == 0) {
    m.precision = m.recall = m.f1 = 1.0;
    return m;
  }
  const double tp = static_cast<double>(m.tp);
  m.precision = m.tp + m.fp > 0 ? tp / static_cast<double>(m.tp + m.fp) : 0.0;
  m.recall = m.tp + m.fn > 0 ? tp / static_cast<double>(m.tp + m.fn) : 0.0;
  // Equal to 2PR / (P + R) but exact for integer counts, so the reward
  // cutoff comparison is not disturbed by rounding.
  m.f1 = tp > 0 ? 2.0 * tp / static_cast<double>(2 * m.tp + m.fp + m.fn) : 0.0;
  return m;
}

double Reward(std::span<const std::uint8_t> actions, std::span<const std::uint8_t> labels,
              const RewardTable& table) {
  const GroupMetrics m = GroupF1(actions, labels);
  const std::size_t n = labels.size();
  const std::size_t positives = m.tp + m.fn;
  if (positives == 0) {
    if (m.fp == 0) return table.no_positives_all_correct;
    if (m.fp == n) return table.no_positives_all_wrong;
    return static_cast<double>(n - m.fp) / static_cast<double>(n);
  }
  if (m.tp == 0) return table.no_true_positive;
  if (m.f1 <= table.low_f1_cutoff) return table.low_f1;
  return m.f1;
}

Var Rv1Loss(Var probs, std::span<const std::uint8_t> labels, RngStream& rng, const RewardTable& table,
            std::size_t samples) {
  CheckGroup(probs.value(), labels, "rv1_loss");
  return ScoreFunctionLoss(probs, labels, rng, table, nullptr, samples);
}

Var Rv2Loss(Var probs, std::span<const std::uint8_t> labels, RngStream& rng, const RewardTable& table,
            double zeta, std::size_t samples) {
  CheckGroup(probs.value(), labels, "rv2_loss");
  const double baseline = GroupF1(GreedyThresholdActions(probs.value(), zeta), labels).f1;
  return ScoreFunctionLoss(probs, labels, rng, table, &baseline, samples);
}

Var SmoothF1Loss(Var probs, std::span<const std::uint8_t> labels, SmoothMode mode) {
  const Tensor& p = probs.value();
  CheckGroup(p, labels, "smooth_f1_loss");
  const std::size_t n = labels.size();
  std::vector<double> w_tp(n * 2, 0.0), w_fp(n * 2, 0.0), w_fn(n * 2, 0.0);
  Var source = probs;
  double guard = kEps;
  if (mode == SmoothMode::kSoftProb) {
    for (std::size_t i = 0; i < n; ++i) {
      if (labels[i]) {
        w_tp[i * 2 + 1] = 1.0;
        w_fn[i * 2] = 1.0;
      } else {
        w_fp[i * 2 + 1] = 1.0;
      }
    }
  } else {
    // Indicators come from the argmax prediction; each selected pair
    // contributes log p of its predicted class. Those sums are <= 0, so the
    // ratio denominators are pushed away from zero with -eps.
    source = ops::Log(probs, kProbFloor);
    guard = -kEps;
    for (std::size_t i = 0; i < n; ++i) {
      const bool pred = ArgmaxRelevant(p, i);
      if (pred && labels[i]) w_tp[i * 2 + 1] = 1.0;
      if (pred && !labels[i]) w_fp[i * 2 + 1] = 1.0;
      if (!pred && labels[i]) w_fn[i * 2] = 1.0;
    }
  }
  Var tp = ops::WeightedSum(source, w_tp);
  Var fp = ops::WeightedSum(source, w_fp);
  Var fn = ops::WeightedSum(source, w_fn);
  Var pr = ops::Div(tp, ops::AddScalar(ops::Add(tp, fp), guard));
  Var re = ops::Div(tp, ops::AddScalar(ops::Add(tp, fn), guard));
  Var f = ops::Div(ops::Scale(ops::Hadamard(pr, re), 2.0), ops::AddScalar(ops::Add(pr, re), kEps));
  return ops::Scale(f, -1.0);
}

Var MtlLoss(Var ce, Var re, double lambda) {
  return ops::Add(ops::Scale(ce, 1.0 - lambda), ops::Scale(re, lambda));
}

double MtlLoss(double ce, double re, double lambda) { return (1.0 - lambda) * ce + lambda * re; }

Var GroupLoss(Var probs, std::span<const std::uint8_t> labels, const ObjectiveConfig& config, RngStream& rng) {
  auto rl = [&](ObjectiveKind k) {
    return k == ObjectiveKind::kRv1 ? Rv1Loss(probs, labels, rng, config.reward, config.samples)
                                    : Rv2Loss(probs, labels, rng, config.reward, config.zeta, config.samples);
  };
  switch (config.kind) {
    case ObjectiveKind::kCe: return CeLoss(probs, labels);
    case ObjectiveKind::kRv1:
    case ObjectiveKind::kRv2: return rl(config.kind);
    case ObjectiveKind::kSmooth: return SmoothF1Loss(probs, labels, config.smooth_mode);
    case ObjectiveKind::kMtl: return MtlLoss(CeLoss(probs, labels), rl(config.rl_kind), config.lambda);
  }
  throw UsageError("unhandled objective");
}

ParamStore EnumerateExpectedGrad(const ProbsFn& probs_fn, const ParamStore& params,
                                 std::span<const std::uint8_t> labels, const RewardTable& table) {
  const std::size_t n = labels.size();
  if (n > kMaxEnumerate) {
    throw UsageError("enumeration needs at most " + std::to_string(kMaxEnumerate) + " memories, group has " +
                     std::to_string(n));
  }
  Graph g;
  Var probs = probs_fn(g, params);
  CheckGroup(probs.value(), labels, "enumerate_expected_grad");
  Var log_probs = ops::Log(probs, kProbFloor);
  const std::size_t count = std::size_t{1} << n;
  std::vector<Var> likelihoods;
  std::vector<double> rewards;
  likelihoods.reserve(count);
  ActionSet a(n);
  for (std::size_t mask = 0; mask < count; ++mask) {
    for (std::size_t i = 0; i < n; ++i) a[i] = (mask >> i) & 1U;
    likelihoods.push_back(ops::Exp(ActionLogProb(log_probs, a)));
    rewards.push_back(-Reward(a, labels, table));
  }
  Var loss = ops::WeightedSum(likelihoods.size() == 1 ? likelihoods[0] : ops::Concat(likelihoods), rewards);
  g.Backward(loss);
  return g.ParamGrads(params);
}

}  // namespace memqa
