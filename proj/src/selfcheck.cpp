#include "memqa/selfcheck.hpp"

#include <set>

#include "memqa/training.hpp"

namespace memqa {
namespace {

const char* kQuestion = "where did i leave the red keys";
const char* kMemories[] = {
    "i left the red keys on the kitchen table",  "my keys are in the blue bag",
    "i parked the car near the station",          "the red umbrella is by the door",
    "i gave ben's keys to anna yesterday",        "dinner with tom is on friday",
};

}  // namespace

ModelConfig SmallModelConfig(Architecture arch) {
  ModelConfig c = ModelConfig::Defaults(arch);
  c.embed_dim = 6;
  c.hidden = 5;
  c.layers = 2;
  c.ff_hidden = 5;
  c.charcnn.widths = {1, 2};
  c.charcnn.filters = 4;
  c.charcnn.out_dim = 3;
  c.charcnn.char_dim = 3;
  c.dropout = 0.0;
  c.max_len = 6;
  c.max_word_len = 6;
  return c;
}

GradCheckFixture MakeGradCheckFixture(const ModelConfig& base, std::uint64_t seed) {
  const PreprocessRules rules = PreprocessRules::Defaults();
  std::vector<TokenSeq> utterances{Preprocess(kQuestion, rules)};
  for (const char* m : kMemories) utterances.push_back(Preprocess(m, rules));

  RngStream rng = RngStream(seed).Split(7);
  EmbeddingTable table(base.embed_dim);
  std::set<std::string> words;
  for (const auto& u : utterances) words.insert(u.begin(), u.end());
  std::vector<double> v(base.embed_dim);
  for (const auto& w : words) {
    for (double& x : v) x = rng.Normal();
    table.Set(w, v);
  }
  const CharVocab chars = CharVocab::Build(utterances);

  GradCheckFixture fx;
  fx.model = base;
  fx.model.dropout = 0.0;
  if (UsesCharCnn(base.arch)) fx.model.charcnn.vocab_size = chars.size();
  const UtteranceEncoder enc(table, rules, fx.model.max_len, fx.model.max_word_len,
                             UsesCharCnn(base.arch) ? &chars : nullptr);
  fx.group.id = "fixture";
  fx.group.question = enc.Encode(kQuestion);
  for (const char* m : kMemories) fx.group.memories.push_back(enc.Encode(m));
  fx.group.labels.assign(fx.group.memories.size(), 0);

  // Re-draw until the argmax predictions are mixed, then label so that the
  // confusion matrix has every off-diagonal kind.
  for (int attempt = 0; attempt < 64; ++attempt) {
    fx.params = InitParams(fx.model, rng);
    for (const auto& name : fx.params) {
      if (name.ends_with(".bias")) {
        for (double& x : fx.params.Get(name).data()) x = rng.Uniform(-0.5, 0.5);
      }
    }
    if (!IsProbabilistic(fx.model.arch)) return fx;
    const RelevanceOutput out = Predict(fx.model, fx.params, fx.group);
    const ActionSet pred = GreedyThresholdActions(out.probs, 0.0);
    std::size_t pos = 0;
    for (auto p : pred) pos += p;
    if (pos < 2 || pos + 1 >= pred.size()) continue;
    std::size_t seen_pos = 0, seen_neg = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
      // First predicted positive and first predicted negative get flipped
      // labels; the rest agree with the prediction.
      const bool flip = pred[i] ? seen_pos++ == 0 : seen_neg++ == 0;
      fx.group.labels[i] = flip ? !pred[i] : pred[i];
    }
    const GroupMetrics m = GroupF1(pred, fx.group.labels);
    fx.tp = m.tp;
    fx.fp = m.fp;
    fx.fn = m.fn;
    return fx;
  }
  return fx;
}

GradCheckReport ModelGradCheck(const GradCheckFixture& fx, const ObjectiveConfig& objective,
                               const GradCheckOptions& options) {
  const RngStream stream(options.seed ^ 0x5eedULL);
  ObjectiveFn f = [&](const ParamStore& p, ParamStore* grad) {
    return GroupBatchLoss(fx.model, p, fx.group, objective, stream, grad);
  };
  return FiniteDiffCheck(f, fx.params, options);
}

}  // namespace memqa
