// Acceptance run: one PASS/FAIL line per criterion, non-zero exit if any
// criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "golden_checks.hpp"
#include "memqa/checkpoint.hpp"
#include "memqa/cli.hpp"
#include "memqa/evaluation.hpp"
#include "memqa/selfcheck.hpp"
#include "memqa/synth.hpp"
#include "memqa/training.hpp"
#include "oracles.hpp"

using namespace memqa;

namespace {

using Bits = std::vector<std::uint8_t>;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double Seconds(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - since).count();
}

std::string Fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// ---- 1 ----

Outcome GradientIntegrity() {
  const auto t0 = std::chrono::steady_clock::now();
  double worst = 0.0;
  std::string where;
  std::size_t coords = 0;
  for (Architecture arch : {Architecture::kChrWrdFF, Architecture::kTeff, Architecture::kTeffCh}) {
    for (std::optional<SmoothMode> mode :
         {std::optional<SmoothMode>{}, std::optional{SmoothMode::kSoftProb}, std::optional{SmoothMode::kLiteral}}) {
      ObjectiveConfig obj;
      obj.kind = mode ? ObjectiveKind::kSmooth : ObjectiveKind::kCe;
      if (mode) obj.smooth_mode = *mode;
      const GradCheckFixture fx = MakeGradCheckFixture(SmallModelConfig(arch), 5);
      // Small tensors are checked exhaustively.
      const GradCheckReport r = ModelGradCheck(fx, obj, {1e-5, 64, 5});
      coords += r.coords_checked;
      const std::string name = ArchitectureName(arch) + "/" + (mode ? "smooth-" + SmoothModeName(*mode) : "ce");
      if (r.max_rel_error >= worst) {
        worst = r.max_rel_error;
        where = name;
      }
    }
  }
  const double secs = Seconds(t0);
  return {worst <= 1e-4 && secs < 120.0,
          "max rel error " + Fmt("%.2e", worst) + " (" + where + "), " + std::to_string(coords) + " coords, " +
              Fmt("%.1f", secs) + " s"};
}

// ---- 2, 3 ----

// All four memories relevant; p(relevant) chosen so every coordinate of the
// expected gradient is well away from zero relative to its per-sample noise,
// and the greedy baseline (zeta = 0.5 selects memory 4) is informative.
const std::vector<double> kFixtureP{0.25, 0.25, 0.25, 0.55};
const Bits kFixtureLabels{1, 1, 1, 1};
constexpr double kFixtureZeta = 0.5;

Var FixtureProbs(Graph& g, const ParamStore& p) { return ops::Softmax(g.Parameter("logits", p.Get("logits"))); }

ParamStore FixtureParams() {
  ParamStore p;
  p.Add("logits", oracle::LogitsFor(kFixtureP));
  return p;
}

struct EstimatorStats {
  std::vector<double> mean;
  double variance = 0.0;  // summed over coordinates
};

EstimatorStats SampleEstimator(bool baseline, std::uint64_t seed, std::size_t samples) {
  const ParamStore params = FixtureParams();
  const std::size_t n = params.Get("logits").size();
  std::vector<double> s(n, 0.0), s2(n, 0.0);
  RngStream rng(seed);
  for (std::size_t k = 0; k < samples; ++k) {
    Graph g;
    Var probs = FixtureProbs(g, params);
    Var loss = baseline ? Rv2Loss(probs, kFixtureLabels, rng, RewardTable{}, kFixtureZeta, 1)
                        : Rv1Loss(probs, kFixtureLabels, rng, RewardTable{}, 1);
    g.Backward(loss);
    const ParamStore grads = g.ParamGrads(params);
    const Tensor& gr = grads.Get("logits");
    for (std::size_t i = 0; i < n; ++i) {
      s[i] += gr[i];
      s2[i] += gr[i] * gr[i];
    }
  }
  EstimatorStats st;
  for (std::size_t i = 0; i < n; ++i) {
    const double m = s[i] / static_cast<double>(samples);
    st.mean.push_back(m);
    st.variance += s2[i] / static_cast<double>(samples) - m * m;
  }
  return st;
}

Outcome Unbiasedness() {
  const auto t0 = std::chrono::steady_clock::now();
  const ParamStore exact = EnumerateExpectedGrad(FixtureProbs, FixtureParams(), kFixtureLabels, RewardTable{});
  const Tensor& e = exact.Get("logits");
  bool pass = true;
  std::string detail;
  for (bool baseline : {false, true}) {
    const EstimatorStats st = SampleEstimator(baseline, 1, 200000);
    double worst = 0.0;
    for (std::size_t i = 0; i < e.size(); ++i) {
      const double dev = std::abs(st.mean[i] - e[i]);
      if (std::abs(e[i]) < 1e-6) {
        pass = pass && dev <= 1e-6;
      } else {
        worst = std::max(worst, dev / std::abs(e[i]));
      }
    }
    pass = pass && worst <= 0.02;
    detail += std::string(baseline ? "rv2" : "rv1") + " worst rel dev " + Fmt("%.4f", worst) + "; ";
  }
  const double secs = Seconds(t0);
  pass = pass && secs < 60.0;
  return {pass, detail + "200000 samples each, " + Fmt("%.1f", secs) + " s"};
}

Outcome VarianceReduction() {
  bool pass = true;
  std::string detail;
  for (std::uint64_t seed : {11, 12, 13}) {
    const double v1 = SampleEstimator(false, seed, 200000).variance;
    const double v2 = SampleEstimator(true, seed, 200000).variance;
    pass = pass && v2 <= v1;
    detail += "seed " + std::to_string(seed) + ": rv1 " + Fmt("%.4f", v1) + " rv2 " + Fmt("%.4f", v2) + "; ";
  }
  return {pass, detail};
}

// ---- 4 ----

Outcome RewardCases() {
  const RewardTable t;
  struct Case {
    Bits pred, gold;
    double expected;
    const char* name;
  };
  const std::vector<Case> cases{
      {{0, 0, 0}, {0, 0, 0}, 1.0, "no positives, all rejected"},
      {{1, 1, 1}, {0, 0, 0}, -0.1, "no positives, all accepted"},
      {{1, 0, 0, 0}, {0, 0, 0, 0}, 0.75, "no positives, accuracy"},
      {{0, 1, 0}, {1, 0, 0}, -0.5, "no true positive"},
      {{1, 1, 1, 1, 1, 1, 1, 1, 1}, {1, 0, 0, 0, 0, 0, 0, 0, 0}, -0.01, "f1 = 0.2"},
      {{1, 1, 0, 1}, {1, 1, 1, 0}, 2.0 / 3.0, "f1"},
  };
  bool pass = true;
  std::string failed;
  for (const auto& c : cases) {
    const double got = Reward(c.pred, c.gold, t);
    const bool ok = c.expected == 2.0 / 3.0 ? std::abs(got - c.expected) <= 1e-15 : got == c.expected;
    if (!ok) {
      pass = false;
      failed += std::string(c.name) + " gave " + Fmt("%g", got) + "; ";
    }
  }
  return {pass, pass ? "six cases exact in table order" : failed};
}

// ---- 5 ----

Outcome MetricFixtures() {
  bool pass = true;
  std::string detail;
  const GroupMetrics m = GroupF1(Bits{1, 1, 0, 1, 0, 0}, Bits{1, 1, 1, 0, 0, 0});
  const bool table = std::abs(m.precision - 2.0 / 3.0) <= 1e-12 && std::abs(m.recall - 2.0 / 3.0) <= 1e-12 &&
                     std::abs(m.f1 - 2.0 / 3.0) <= 1e-12;
  pass = pass && table;
  detail += std::string("example group f1 2/3 ") + (table ? "ok" : "wrong") + "; ";

  const EvalReport macro = EvaluateOutputs({{true, oracle::ProbTable({0.9, 0.1}), {}}, {true, oracle::ProbTable({0.9, 0.1}), {}}},
                                           {{1, 0}, {0, 1}}, {"a", "b"}, {0.5});
  pass = pass && macro.rows[0].f1 == 0.5;
  detail += "macro " + Fmt("%.3f", macro.rows[0].f1) + "; ";

  // Every group has at least one relevant memory: with none, the empty
  // prediction scores recall 1 by convention.
  RngStream rng(21);
  std::vector<RelevanceOutput> outs;
  std::vector<Bits> labels;
  std::vector<std::string> ids;
  for (std::size_t g = 0; g < 200; ++g) {
    const std::size_t n = 1 + rng.Below(41);
    std::vector<double> p(n);
    Bits l(n);
    for (std::size_t i = 0; i < n; ++i) {
      p[i] = rng.Uniform();
      l[i] = rng.Bernoulli(0.15);
    }
    l[rng.Below(n)] = 1;
    outs.push_back({true, oracle::ProbTable(p), {}});
    labels.push_back(l);
    ids.push_back("g" + std::to_string(g));
  }
  std::vector<double> ts;
  for (int i = 0; i <= 200; ++i) ts.push_back(i / 200.0);
  const EvalReport sweep = EvaluateOutputs(outs, labels, ids, ts);
  bool mono = true;
  for (std::size_t i = 1; i < sweep.rows.size(); ++i) mono = mono && sweep.rows[i].recall <= sweep.rows[i - 1].recall;
  pass = pass && mono;
  detail += std::string("recall monotone over 201 thresholds x 200 groups ") + (mono ? "ok" : "violated");
  return {pass, detail};
}

// ---- shared data preparation ----

struct Corpus {
  std::unique_ptr<EmbeddingTable> table;
  std::vector<QAGroup> train_raw, dev_raw, test_raw;
  std::vector<EncodedGroup> train, dev, test;
  Checkpoint start;
};

struct CorpusSpec {
  std::size_t train = 0, dev = 0, test = 0;
  double noise = 0.0;
  std::size_t dim = 50;
  std::string tag;
};

// Generates the corpora through the gen-data command so the acceptance data
// is exactly what a user would produce.
Corpus MakeCorpus(const CorpusSpec& s, const ModelConfig& model, const TrainConfig& train) {
  const auto dir = oracle::TempDir("accept_" + s.tag);
  const std::string d = dir.string();
  std::ostringstream sink;
  auto gen = [&](std::size_t groups, const std::string& seed, const std::string& prefix, const std::string& out,
                 bool vectors) {
    std::vector<std::string> args{"gen-data", "--groups", std::to_string(groups), "--relevant-frac", "0.15",
                                  "--noise", Fmt("%.17g", s.noise), "--seed", seed, "--vocab-seed", "77",
                                  "--id-prefix", prefix, "--out", d + "/" + out};
    if (vectors) args.insert(args.end(), {"--vectors-out", d + "/vec.vec", "--dim", std::to_string(s.dim)});
    if (Run(args, sink, sink) != 0) throw std::runtime_error("gen-data failed: " + sink.str());
  };
  gen(s.train, "1", "t", "train.jsonl", true);
  gen(s.dev, "2", "d", "dev.jsonl", false);
  if (s.test) gen(s.test, "3", "x", "test.jsonl", false);

  Corpus c;
  c.table = std::make_unique<EmbeddingTable>(EmbeddingTable::LoadVec(dir / "vec.vec"));
  c.train_raw = LoadQaJsonl(dir / "train.jsonl");
  c.dev_raw = LoadQaJsonl(dir / "dev.jsonl");
  if (s.test) c.test_raw = LoadQaJsonl(dir / "test.jsonl");
  c.start.model = model;
  c.start.model.embed_dim = c.table->dim();
  c.start.train = train;
  c.start.rules = PreprocessRules::Defaults();
  c.start.embeddings = (dir / "vec.vec").string();
  const UtteranceEncoder enc(*c.table, c.start.rules, model.max_len, model.max_word_len, nullptr);
  c.train = enc.Encode(c.train_raw);
  c.dev = enc.Encode(c.dev_raw);
  if (s.test) c.test = enc.Encode(c.test_raw);
  return c;
}

// ---- 6 ----

Outcome Learnability() {
  const auto t0 = std::chrono::steady_clock::now();
  ModelConfig model = ModelConfig::Defaults(Architecture::kTeff);
  model.hidden = 64;
  TrainConfig train;
  train.objective.kind = ObjectiveKind::kCe;
  train.max_epochs_phase1 = 12;
  train.patience = 3;
  train.dev_thresholds = {0.5};
  train.select_threshold = 0.5;
  train.seed = 1;
  const Corpus c = MakeCorpus({2000, 200, 0, 0.0, 50, "learn"}, model, train);
  const double oracle_f1 = oracle::KeywordOverlapMacroF1(c.dev_raw, c.start.rules);
  const Checkpoint ck = Train({&c.train, &c.dev}, c.start, false);
  const double f1 = Evaluate(ck.model, ck.params, c.dev, {0.5}).rows[0].f1;
  const double secs = Seconds(t0);
  return {f1 >= 0.90 && oracle_f1 >= 0.999 && secs < 600.0,
          "dev macro-F1@0.5 " + Fmt("%.4f", f1) + " after " + std::to_string(ck.history.size()) +
              " epochs, keyword oracle " + Fmt("%.4f", oracle_f1) + ", " + Fmt("%.0f", secs) + " s"};
}

// ---- 7 ----

Outcome MtlGain() {
  ModelConfig model = ModelConfig::Defaults(Architecture::kTeff);
  model.hidden = 64;
  TrainConfig base;
  base.max_epochs_phase1 = 10;
  base.max_epochs_phase2 = 4;
  base.patience = 3;
  base.dev_thresholds = {0.97};
  base.select_threshold = 0.97;
  const Corpus c = MakeCorpus({1000, 200, 200, 0.15, 50, "mtl"}, model, base);
  double ce_sum = 0.0, mtl_sum = 0.0, ce_test = 0.0, mtl_test = 0.0;
  std::string per_seed;
  int phase2_selected = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Checkpoint start = c.start;
    start.train.seed = seed;
    start.train.objective = ObjectiveConfig{};
    const Checkpoint ce = Train({&c.train, &c.dev}, start, false);
    start.train.objective.kind = ObjectiveKind::kMtl;
    start.train.objective.rl_kind = ObjectiveKind::kRv2;
    start.train.objective.lambda = 0.5;
    start.train.objective.zeta = 0.97;
    const Checkpoint mtl = Train({&c.train, &c.dev}, start, false);
    if (std::getenv("MEMQA_ACCEPT_VERBOSE")) {
      for (const auto& r : mtl.history) {
        std::fprintf(stderr, "  seed %llu epoch %zu phase %d loss %.4f dev %.4f%s\n",
                     static_cast<unsigned long long>(seed), r.epoch, r.phase, r.train_loss, r.select_f1,
                     r.improved ? " *" : "");
      }
    }
    for (const auto& r : mtl.history) {
      if (r.phase == 2 && r.improved) {
        ++phase2_selected;
        break;
      }
    }
    const double a = Evaluate(ce.model, ce.params, c.dev, {0.97}).rows[0].f1;
    const double b = Evaluate(mtl.model, mtl.params, c.dev, {0.97}).rows[0].f1;
    ce_sum += a;
    mtl_sum += b;
    ce_test += Evaluate(ce.model, ce.params, c.test, {0.97}).rows[0].f1;
    mtl_test += Evaluate(mtl.model, mtl.params, c.test, {0.97}).rows[0].f1;
    per_seed += Fmt("%+.4f", b - a) + (seed < 5 ? "," : "");
  }
  const double ce_mean = ce_sum / 5.0, mtl_mean = mtl_sum / 5.0;
  return {mtl_mean >= ce_mean - 0.005 && mtl_mean - ce_mean >= 0.0,
          "dev F1@0.97 ce " + Fmt("%.4f", ce_mean) + " mtl(rv2) " + Fmt("%.4f", mtl_mean) + " per-seed gain [" +
              per_seed + "], phase-2 epoch selected in " + std::to_string(phase2_selected) + "/5 seeds; held-out test ce " + Fmt("%.4f", ce_test / 5.0) + " mtl " + Fmt("%.4f", mtl_test / 5.0)};
}

// ---- 8 ----

Outcome ParameterCounts() {
  RngStream rng(1);
  ModelConfig teff = ModelConfig::Defaults(Architecture::kTeff);
  teff.embed_dim = 300;
  ModelConfig teffch = ModelConfig::Defaults(Architecture::kTeffCh);
  teffch.embed_dim = 300;
  teffch.charcnn.vocab_size = 70;
  const double a = static_cast<double>(InitParams(teff, rng).NumScalars());
  const double b = static_cast<double>(InitParams(teffch, rng).NumScalars());
  const bool pass = std::abs(a / 0.70e6 - 1.0) <= 0.05 && std::abs(b / 0.89e6 - 1.0) <= 0.05;
  return {pass, "teff " + Fmt("%.0f", a) + " (h=" + std::to_string(teff.hidden) + "), teffch " + Fmt("%.0f", b) +
                    " (h=" + std::to_string(teffch.hidden) + ", 70 chars)"};
}

// ---- 9 ----

Outcome Determinism() {
  ModelConfig model = ModelConfig::Defaults(Architecture::kTeff);
  model.hidden = 16;
  model.dropout = 0.2;
  TrainConfig train;
  train.objective.kind = ObjectiveKind::kMtl;
  train.max_epochs_phase1 = 3;
  train.max_epochs_phase2 = 2;
  train.batches_per_epoch = 10;
  train.batch_size = 32;
  train.dev_thresholds = {0.5, 0.97};
  train.seed = 9;
  const Corpus c = MakeCorpus({150, 40, 0, 0.1, 16, "det"}, model, train);
  const auto dir = oracle::TempDir("accept_det_runs");
  TrainOptions a, b;
  a.log_path = (dir / "a.jsonl").string();
  b.log_path = (dir / "b.jsonl").string();
  const Checkpoint ra = Train({&c.train, &c.dev}, c.start, false, a);
  const Checkpoint rb = Train({&c.train, &c.dev}, c.start, false, b);
  const bool logs = oracle::ReadFile(a.log_path) == oracle::ReadFile(b.log_path) &&
                    !oracle::ReadFile(a.log_path).empty();

  bool resume = true;
  for (std::size_t stop : {1, 3, 4}) {
    TrainOptions part;
    part.stop_after_epochs = stop;
    const Checkpoint p = Train({&c.train, &c.dev}, c.start, false, part);
    SaveCheckpoint(p, dir / "p.ckpt");
    const Checkpoint r = Train({&c.train, &c.dev}, LoadCheckpoint(dir / "p.ckpt"), true);
    resume = resume && r.history == ra.history && r.params == ra.params &&
             SerializeCheckpoint(r) == SerializeCheckpoint(ra);
  }
  const std::string bytes = SerializeCheckpoint(ra);
  const bool round = SerializeCheckpoint(DeserializeCheckpoint(bytes)) == bytes &&
                     SerializeCheckpoint(rb) == bytes;
  return {logs && resume && round, std::string("logs ") + (logs ? "identical" : "differ") + ", resume " +
                                       (resume ? "matches" : "diverges") + ", round trip " +
                                       (round ? "bit-identical" : "differs") + ", " +
                                       std::to_string(ra.history.size()) + " epochs"};
}

// ---- 10 ----

Outcome Formats() {
  std::string fails;
  for (const auto& [name, check] : std::vector<std::pair<std::string, std::function<std::string()>>>{
           {"vec", golden::CheckVec}, {"jsonl", golden::CheckJsonl}, {"report", golden::CheckReport}}) {
    std::string r;
    try {
      r = check();
    } catch (const std::exception& e) {
      r = e.what();
    }
    if (!r.empty()) fails += name + ": " + r + "; ";
  }
  return {fails.empty(), fails.empty() ? ".vec fixture, QA JSONL round trip and report schema match golden files"
                                       : fails};
}

}  // namespace

// Optional arguments select criteria by number; default runs all.
int main(int argc, char** argv) {
  std::set<std::size_t> only;
  for (int i = 1; i < argc; ++i) only.insert(std::stoul(argv[i]));
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"gradient integrity", GradientIntegrity},
      {"reinforce unbiasedness", Unbiasedness},
      {"variance reduction", VarianceReduction},
      {"reward table", RewardCases},
      {"metric fixtures", MetricFixtures},
      {"end-to-end learnability", Learnability},
      {"directional mtl gain", MtlGain},
      {"parameter counts", ParameterCounts},
      {"determinism and persistence", Determinism},
      {"format conformance", Formats},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (!only.empty() && !only.count(i + 1)) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::printf("%s %zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
