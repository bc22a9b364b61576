#include <cmath>

#include "doctest.h"
#include "memqa/error.hpp"
#include "memqa/gradcheck.hpp"
#include "memqa/objectives.hpp"
#include "memqa/selfcheck.hpp"
#include "oracles.hpp"

using namespace memqa;

namespace {

using Bits = std::vector<std::uint8_t>;

double CeValue(const std::vector<double>& p_rel, const Bits& labels) {
  Graph g;
  return CeLoss(g.Constant(oracle::ProbTable(p_rel)), labels).value()[0];
}

double SmoothValue(const std::vector<double>& p_rel, const Bits& labels, SmoothMode mode) {
  Graph g;
  return SmoothF1Loss(g.Constant(oracle::ProbTable(p_rel)), labels, mode).value()[0];
}

ParamStore LogitParams(const std::vector<double>& p_rel) {
  ParamStore p;
  p.Add("logits", oracle::LogitsFor(p_rel));
  return p;
}

Var SoftmaxOfLogits(Graph& g, const ParamStore& p) { return ops::Softmax(g.Parameter("logits", p.Get("logits"))); }

}  // namespace

TEST_SUITE("objectives") {
  TEST_CASE("cross entropy examples") {
    CHECK(CeValue({1.0, 0.0}, {1, 0}) == 0.0);
    CHECK(std::abs(CeValue({0.5}, {1}) - 0.69314718) <= 1e-8);
    CHECK(std::abs(CeValue({1.0, 0.5}, {1, 0}) - 0.34657359) <= 1e-8);
    // Clamped below at 1e-12.
    CHECK(CeValue({0.0}, {1}) == doctest::Approx(-std::log(1e-12)));
    Graph g;
    CHECK_THROWS_AS(CeLoss(g.Constant(oracle::ProbTable({0.5})), Bits{1, 0}), ShapeError);
  }

  TEST_CASE("greedy threshold examples") {
    CHECK(GreedyThresholdActions(oracle::ProbTable({0.98}), 0.97) == Bits{1});
    CHECK(GreedyThresholdActions(oracle::ProbTable({0.96}), 0.97) == Bits{0});
    CHECK(GreedyThresholdActions(oracle::ProbTable({0.40}), 0.0) == Bits{0});
    CHECK(GreedyThresholdActions(oracle::ProbTable({0.5}), 0.0) == Bits{0});
  }

  TEST_CASE("raising the threshold never raises recall") {
    RngStream rng(13);
    for (int trial = 0; trial < 200; ++trial) {
      std::vector<double> p(10);
      Bits labels(10);
      for (std::size_t i = 0; i < 10; ++i) {
        p[i] = rng.Uniform();
        labels[i] = rng.Bernoulli(0.3);
      }
      // A group without positives scores recall 1 on the empty prediction,
      // so monotonicity is stated for groups with at least one.
      labels[rng.Below(10)] = 1;
      const Tensor probs = oracle::ProbTable(p);
      double prev = 2.0;
      for (double z = 0.0; z <= 1.0; z += 0.05) {
        const double r = GroupF1(GreedyThresholdActions(probs, z), labels).recall;
        CHECK(r <= prev);
        prev = r;
      }
    }
  }

  TEST_CASE("sample actions examples") {
    RngStream rng(1);
    const SampledActions ones = SampleActions(oracle::ProbTable({1, 1, 1}), rng);
    CHECK(ones.actions == Bits{1, 1, 1});
    CHECK(ones.log_prob == 0.0);
    CHECK(SampleActions(oracle::ProbTable({0, 0}), rng).actions == Bits{0, 0});
    const Tensor half = oracle::ProbTable({0.5});
    std::size_t hits = 0;
    for (int i = 0; i < 100000; ++i) hits += SampleActions(half, rng).actions[0];
    CHECK(hits >= 49500);
    CHECK(hits <= 50500);
    const SampledActions s = SampleActions(oracle::ProbTable({0.25, 0.8}), rng);
    const double expect = std::log(s.actions[0] ? 0.25 : 0.75) + std::log(s.actions[1] ? 0.8 : 0.2);
    CHECK(s.log_prob == doctest::Approx(expect));
  }

  TEST_CASE("group f1 examples") {
    const Bits table1{1, 1, 1, 0, 0, 0};
    const GroupMetrics m = GroupF1(Bits{1, 1, 0, 1, 0, 0}, table1);
    CHECK(m.precision == doctest::Approx(2.0 / 3.0));
    CHECK(m.recall == doctest::Approx(2.0 / 3.0));
    CHECK(m.f1 == doctest::Approx(2.0 / 3.0));
    CHECK(m.tp == 2);
    CHECK(m.fp == 1);
    CHECK(m.fn == 1);
    const GroupMetrics perfect = GroupF1(table1, table1);
    CHECK(perfect.f1 == 1.0);
    const GroupMetrics empty = GroupF1(Bits{0, 0}, Bits{0, 0});
    CHECK(empty.precision == 1.0);
    CHECK(empty.recall == 1.0);
    CHECK(empty.f1 == 1.0);
    const GroupMetrics miss = GroupF1(Bits{0, 0}, Bits{1, 0});
    CHECK(miss.recall == 0.0);
    CHECK(miss.f1 == 0.0);
    CHECK_THROWS_AS(GroupF1(Bits{1}, Bits{1, 0}), ShapeError);
  }

  TEST_CASE("group f1 is invariant to duplicating every memory") {
    RngStream rng(4);
    for (int trial = 0; trial < 100; ++trial) {
      Bits a(7), l(7);
      for (std::size_t i = 0; i < 7; ++i) {
        a[i] = rng.Bernoulli(0.4);
        l[i] = rng.Bernoulli(0.4);
      }
      Bits a2 = a, l2 = l;
      a2.insert(a2.end(), a.begin(), a.end());
      l2.insert(l2.end(), l.begin(), l.end());
      const GroupMetrics x = GroupF1(a, l), y = GroupF1(a2, l2);
      CHECK(x.precision == doctest::Approx(y.precision));
      CHECK(x.recall == doctest::Approx(y.recall));
      CHECK(x.f1 == doctest::Approx(y.f1));
      CHECK(x.f1 == doctest::Approx(oracle::F1(a, l)));
    }
  }

  TEST_CASE("reward cases in order") {
    const RewardTable t;
    CHECK(Reward(Bits{0, 0, 0}, Bits{0, 0, 0}, t) == 1.0);
    CHECK(Reward(Bits{1, 1, 1}, Bits{0, 0, 0}, t) == -0.1);
    CHECK(Reward(Bits{0, 1, 0, 0}, Bits{0, 0, 0, 0}, t) == 0.75);
    CHECK(Reward(Bits{0, 0, 0, 0}, Bits{1, 1, 0, 0}, t) == -0.5);
    // tp = 1, fp = 17: F1 = 2 / (2 + 17) ~ 0.105
    Bits low_a(20, 1), low_l(20, 0);
    low_l[0] = 1;
    low_a[19] = 0;
    low_a[18] = 0;
    CHECK(oracle::F1(low_a, low_l) == doctest::Approx(0.1).epsilon(0.06));
    CHECK(Reward(low_a, low_l, t) == -0.01);
    // P = 1/3, R = 1: F1 = 0.5
    CHECK(Reward(Bits{1, 1, 1, 0}, Bits{1, 0, 0, 0}, t) == 0.5);
    // Exactly at the cutoff: tp = 1, fp = 7, fn = 0 gives F1 = 2/9 > 0.2;
    // tp = 1, fp = 8 gives 0.2 exactly.
    Bits edge_a(9, 1), edge_l(9, 0);
    edge_l[0] = 1;
    CHECK(oracle::F1(edge_a, edge_l) == doctest::Approx(0.2));
    CHECK(Reward(edge_a, edge_l, t) == -0.01);
  }

  TEST_CASE("reward matches the case-table oracle and stays in range") {
    const RewardTable t;
    for (std::size_t n = 1; n <= 6; ++n) {
      for (std::size_t am = 0; am < (1U << n); ++am) {
        for (std::size_t lm = 0; lm < (1U << n); ++lm) {
          Bits a(n), l(n);
          for (std::size_t i = 0; i < n; ++i) {
            a[i] = (am >> i) & 1U;
            l[i] = (lm >> i) & 1U;
          }
          const double r = Reward(a, l, t);
          CHECK(r == doctest::Approx(oracle::Reward(a, l)).epsilon(1e-15));
          CHECK(r >= -0.5);
          CHECK(r <= 1.0);
        }
      }
    }
  }

  TEST_CASE("rv1 examples") {
    Graph g;
    RngStream rng(2);
    // p = 1 on every memory: all-ones action set, log p = 0, loss 0.
    Var certain = g.Parameter("c", oracle::ProbTable({1.0, 1.0}));
    Var loss = Rv1Loss(certain, Bits{1, 1}, rng, RewardTable{});
    CHECK(loss.value()[0] == 0.0);

    // Zero reward: p(relevant) ~ 0 keeps every sample at tp = 0, which this
    // table scores 0.
    RewardTable zero{0, 0, 0, 0, 0.2};
    Graph g2;
    ParamStore p = LogitParams({1e-9, 1e-9});
    Var probs = SoftmaxOfLogits(g2, p);
    Var l2 = Rv1Loss(probs, Bits{1, 0}, rng, zero);
    CHECK(l2.value()[0] == 0.0);
    g2.Backward(l2);
    const ParamStore grads = g2.ParamGrads(p);
    for (double x : grads.Get("logits").data()) CHECK(x == 0.0);
  }

  TEST_CASE("rv2 cancels when the sample equals the greedy action and reward is pure f1") {
    // p(rel) = 1 and 0 make the sample deterministic and equal to greedy.
    Graph g;
    RngStream rng(5);
    Var probs = g.Constant(oracle::ProbTable({1.0, 1.0, 0.0, 0.0}));
    const Bits labels{1, 0, 1, 0};
    // F1 = 0.5 so the reward is the f1 branch.
    CHECK(Reward(Bits{1, 1, 0, 0}, labels, RewardTable{}) == 0.5);
    CHECK(Rv2Loss(probs, labels, rng, RewardTable{}, 0.9).value()[0] == 0.0);
  }

  TEST_CASE("enumeration oracle examples") {
    // Constant reward: every action set in a 1-memory all-negative group
    // scores 1 under this table.
    RewardTable constant{1.0, 1.0, 1.0, 1.0, 0.2};
    const ParamStore p1 = LogitParams({0.3});
    const ParamStore g1 = EnumerateExpectedGrad(SoftmaxOfLogits, p1, Bits{0}, constant);
    for (double x : g1.Get("logits").data()) CHECK(std::abs(x) <= 1e-15);

    // 2-memory hand expansion against the sigmoid-policy oracle.
    const std::vector<double> p{0.3, 0.8};
    const Bits labels{1, 0};
    const ParamStore g2 = EnumerateExpectedGrad(SoftmaxOfLogits, LogitParams(p), labels, RewardTable{});
    // Action sets (a0, a1): R(0,0) = -0.5, R(1,0) = 1, R(0,1) = -0.5, R(1,1) = 2/3.
    const double pa[4] = {0.7 * 0.2, 0.3 * 0.2, 0.7 * 0.8, 0.3 * 0.8};
    const double r[4] = {-0.5, 1.0, -0.5, 2.0 / 3.0};
    const int a0[4] = {0, 1, 0, 1}, a1[4] = {0, 0, 1, 1};
    double d0 = 0.0, d1 = 0.0;
    for (int k = 0; k < 4; ++k) {
      d0 += pa[k] * r[k] * (a0[k] - 0.3);
      d1 += pa[k] * r[k] * (a1[k] - 0.8);
    }
    // The gradient is of -E[R] with respect to the relevant-class logit.
    CHECK(g2.Get("logits").at(0, 1) == doctest::Approx(-d0).epsilon(1e-12));
    CHECK(g2.Get("logits").at(1, 1) == doctest::Approx(-d1).epsilon(1e-12));
    const auto o = oracle::SigmoidPolicyGrad(p, labels);
    CHECK(o[0] == doctest::Approx(d0).epsilon(1e-12));

    CHECK_THROWS(EnumerateExpectedGrad(SoftmaxOfLogits, LogitParams(std::vector<double>(13, 0.5)), Bits(13, 0),
                                       RewardTable{}));
  }

  TEST_CASE("rv1 and rv2 Monte Carlo means approach the exact gradient") {
    const std::vector<double> p{0.3, 0.6, 0.45};
    const Bits labels{1, 1, 0};
    const auto exact = oracle::SigmoidPolicyGrad(p, labels);
    const ParamStore params = LogitParams(p);
    for (bool baseline : {false, true}) {
      CAPTURE(baseline);
      RngStream rng(baseline ? 71 : 70);
      std::vector<double> sum(p.size(), 0.0), sq(p.size(), 0.0);
      const int n = 50000;
      for (int s = 0; s < n; ++s) {
        Graph g;
        Var probs = SoftmaxOfLogits(g, params);
        Var loss = baseline ? Rv2Loss(probs, labels, rng, RewardTable{}, 0.5) : Rv1Loss(probs, labels, rng, RewardTable{});
        g.Backward(loss);
        const Tensor grad = g.ParamGrads(params).Get("logits");
        for (std::size_t i = 0; i < p.size(); ++i) {
          const double x = -grad.at(i, 1);
          sum[i] += x;
          sq[i] += x * x;
        }
      }
      for (std::size_t i = 0; i < p.size(); ++i) {
        const double mean = sum[i] / n;
        const double se = std::sqrt((sq[i] / n - mean * mean) / n);
        CHECK(std::abs(mean - exact[i]) <= 4.0 * se);
      }
    }
  }

  TEST_CASE("smooth f1 examples") {
    CHECK(SmoothValue({1, 1, 0, 0}, {1, 1, 0, 0}, SmoothMode::kSoftProb) == doctest::Approx(-1.0).epsilon(1e-7));
    CHECK(SmoothValue({0.8, 0.2}, {1, 0}, SmoothMode::kSoftProb) == doctest::Approx(-0.8).epsilon(1e-7));
    CHECK(SmoothValue({0.3, 0.6}, {0, 0}, SmoothMode::kSoftProb) == 0.0);
    Graph g;
    ParamStore p = LogitParams({0.3, 0.6});
    Var loss = SmoothF1Loss(SoftmaxOfLogits(g, p), Bits{0, 0}, SmoothMode::kSoftProb);
    g.Backward(loss);
    CHECK(g.ParamGrads(p).Get("logits").AllFinite());
  }

  TEST_CASE("soft-prob smooth f1 equals minus f1 at vertices") {
    for (std::size_t am = 0; am < 32; ++am) {
      for (std::size_t lm = 0; lm < 32; ++lm) {
        std::vector<double> p(5);
        Bits a(5), l(5);
        for (std::size_t i = 0; i < 5; ++i) {
          a[i] = (am >> i) & 1U;
          l[i] = (lm >> i) & 1U;
          p[i] = a[i];
        }
        const double f = oracle::F1(a, l);
        const bool empty = lm == 0 && am == 0;
        // The all-empty group has F1 = 1 by convention but soft counts are 0.
        if (!empty) CHECK(SmoothValue(p, l, SmoothMode::kSoftProb) == doctest::Approx(-f).epsilon(1e-7));
      }
    }
  }

  TEST_CASE("literal smooth f1 is finite with log-probability weights") {
    const std::vector<double> p{0.9, 0.2, 0.7, 0.4};
    const Bits labels{1, 1, 0, 0};
    const double v = SmoothValue(p, labels, SmoothMode::kLiteral);
    // Argmax indicators: tp = {0}, fp = {2}, fn = {1}, each weighted by log p(predicted).
    const double tp = std::log(0.9), fp = std::log(0.7), fn = std::log(0.8);
    const double pr = tp / (tp + fp - 1e-8), re = tp / (tp + fn - 1e-8);
    CHECK(v == doctest::Approx(-2.0 * pr * re / (pr + re + 1e-8)).epsilon(1e-10));
    CHECK(std::isfinite(SmoothValue({0.1, 0.2}, {0, 0}, SmoothMode::kLiteral)));
  }

  TEST_CASE("mtl examples and linearity") {
    CHECK(MtlLoss(0.6, -0.2, 0.0) == 0.6);
    CHECK(MtlLoss(0.6, -0.2, 1.0) == -0.2);
    CHECK(MtlLoss(0.6, -0.2, 0.5) == doctest::Approx(0.2));
    for (double l : {0.1, 0.3, 0.7}) {
      CHECK(MtlLoss(1.5, -0.5, l) == doctest::Approx((1 - l) * MtlLoss(1.5, -0.5, 0.0) + l * MtlLoss(1.5, -0.5, 1.0)));
    }
    Graph g;
    Var ce = g.Constant(Tensor::Scalar(0.6)), re = g.Constant(Tensor::Scalar(-0.2));
    CHECK(MtlLoss(ce, re, 0.5).value()[0] == doctest::Approx(0.2));
  }

  TEST_CASE("objective names and validation") {
    for (auto k : {ObjectiveKind::kCe, ObjectiveKind::kRv1, ObjectiveKind::kRv2, ObjectiveKind::kSmooth,
                   ObjectiveKind::kMtl}) {
      CHECK(ParseObjective(ObjectiveName(k)) == k);
    }
    CHECK(ParseSmoothMode("literal-logprob") == SmoothMode::kLiteral);
    CHECK_THROWS_AS(ParseObjective("hinge"), UsageError);
    ObjectiveConfig c;
    c.kind = ObjectiveKind::kMtl;
    c.rl_kind = ObjectiveKind::kSmooth;
    CHECK_THROWS_AS(c.Validate(), UsageError);
    c.rl_kind = ObjectiveKind::kRv1;
    c.lambda = 1.5;
    CHECK_THROWS_AS(c.Validate(), UsageError);
    CHECK_FALSE(ObjectiveConfig{}.GroupLevel());
  }

  TEST_CASE("full-model gradients for every objective") {
    for (auto arch : {Architecture::kChrWrdFF, Architecture::kTeff, Architecture::kTeffCh}) {
      const GradCheckFixture fx = MakeGradCheckFixture(SmallModelConfig(arch), 1);
      CHECK(fx.tp > 0);
      CHECK(fx.fp > 0);
      CHECK(fx.fn > 0);
      for (auto kind : {ObjectiveKind::kCe, ObjectiveKind::kSmooth, ObjectiveKind::kRv1, ObjectiveKind::kRv2,
                        ObjectiveKind::kMtl}) {
        for (auto mode : {SmoothMode::kSoftProb, SmoothMode::kLiteral}) {
          if (kind != ObjectiveKind::kSmooth && mode == SmoothMode::kLiteral) continue;
          ObjectiveConfig obj;
          obj.kind = kind;
          obj.smooth_mode = mode;
          obj.zeta = 0.5;
          CAPTURE(ArchitectureName(arch));
          CAPTURE(ObjectiveName(kind));
          CAPTURE(SmoothModeName(mode));
          CHECK(ModelGradCheck(fx, obj, {1e-5, 6, 2}).max_rel_error <= 1e-4);
        }
      }
    }
  }
}
