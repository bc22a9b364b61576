#include "memqa/models.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "memqa/error.hpp"
#include "memqa/simd/kernels.hpp"

namespace memqa {
namespace {

struct ArchName {
  Architecture arch;
  const char* name;
};

constexpr ArchName kArchNames[] = {
    {Architecture::kCosineMax, "cosine-max"},   {Architecture::kCosineSum, "cosine-sum"},
    {Architecture::kCosineAvg, "cosine-avg"},   {Architecture::kCosineCoatt, "cosine-coatt"},
    {Architecture::kChrWrdFF, "chrwrdff"},      {Architecture::kTeff, "teff"},
    {Architecture::kTeffCh, "teffch"},
};

AggKind CosineKind(Architecture arch) {
  switch (arch) {
    case Architecture::kCosineMax: return AggKind::kMax;
    case Architecture::kCosineSum: return AggKind::kSum;
    case Architecture::kCosineAvg: return AggKind::kAvg;
    default: return AggKind::kCoatt;
  }
}

void AddDense(std::vector<ParamSpec>& out, const std::string& prefix, std::size_t in, std::size_t outd) {
  out.push_back({prefix + ".weight", {in, outd}, false, in, outd});
  out.push_back({prefix + ".bias", {outd}, true, in, outd});
}

Var P(Graph& g, const ParamStore& params, const std::string& name) { return g.Parameter(name, params.Get(name)); }

Var Dense(Graph& g, const ParamStore& params, const std::string& prefix, Var x) {
  return ops::Affine(x, P(g, params, prefix + ".weight"), P(g, params, prefix + ".bias"));
}

Var MaybeDropout(Var x, const ModelConfig& config, const ForwardOptions& options) {
  if (!options.train || config.dropout == 0.0) return x;
  if (!options.rng) throw UsageError("training forward pass with dropout needs an RNG stream");
  return ops::Dropout(x, config.dropout, true, *options.rng);
}

std::vector<std::uint8_t> StackMasks(std::span<const EncodedUtterance* const> batch) {
  std::vector<std::uint8_t> mask;
  for (const auto* u : batch) mask.insert(mask.end(), u->words.mask.begin(), u->words.mask.end());
  return mask;
}

}  // namespace

std::string ArchitectureName(Architecture arch) {
  for (const auto& a : kArchNames) {
    if (a.arch == arch) return a.name;
  }
  return "unknown";
}

Architecture ParseArchitecture(std::string_view name) {
  for (const auto& a : kArchNames) {
    if (name == a.name) return a.arch;
  }
  throw UsageError("unknown model '" + std::string(name) +
                   "' (expected cosine-max, cosine-sum, cosine-avg, cosine-coatt, chrwrdff, teff or teffch)");
}

bool IsProbabilistic(Architecture arch) {
  return arch == Architecture::kChrWrdFF || arch == Architecture::kTeff || arch == Architecture::kTeffCh;
}

bool UsesCharCnn(Architecture arch) { return arch == Architecture::kChrWrdFF || arch == Architecture::kTeffCh; }

ModelConfig ModelConfig::Defaults(Architecture arch) {
  ModelConfig c;
  c.arch = arch;
  if (arch == Architecture::kTeffCh) c.hidden = 736;
  return c;
}

void ModelConfig::Validate() const {
  if (embed_dim == 0) throw UsageError("embedding dimension must be positive");
  if (max_len == 0 || max_word_len == 0) throw UsageError("maximum lengths must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw UsageError("dropout must lie in [0, 1)");
  if (arch == Architecture::kTeff || arch == Architecture::kTeffCh) {
    if (hidden == 0) throw UsageError("hidden units must be at least 1");
    if (layers == 0) throw UsageError("encoder needs at least one layer");
  }
  if (arch == Architecture::kChrWrdFF && ff_hidden == 0) throw UsageError("ff hidden width must be at least 1");
  if (UsesCharCnn(arch)) {
    if (charcnn.widths.empty()) throw UsageError(ArchitectureName(arch) + " requires CharCNN kernel widths");
    for (std::size_t k : charcnn.widths) {
      if (k == 0 || k > max_word_len) {
        throw UsageError("CharCNN width " + std::to_string(k) + " must lie in [1, max word length " +
                         std::to_string(max_word_len) + "]");
      }
    }
    if (charcnn.filters == 0 || charcnn.out_dim == 0 || charcnn.char_dim == 0) {
      throw UsageError("CharCNN filters, output and character dimensions must be positive");
    }
    if (charcnn.vocab_size < 2) throw UsageError("CharCNN vocabulary must include PAD and UNK");
  }
}

std::size_t ModelConfig::WordDim() const { return embed_dim + (UsesCharCnn(arch) ? charcnn.out_dim : 0); }

std::vector<ParamSpec> ParamSchema(const ModelConfig& config) {
  std::vector<ParamSpec> out;
  if (!IsProbabilistic(config.arch)) return out;
  if (UsesCharCnn(config.arch)) {
    const auto& cc = config.charcnn;
    out.push_back({"char.embed", {cc.vocab_size, cc.char_dim}, false, cc.vocab_size, cc.char_dim});
    for (std::size_t k : cc.widths) {
      const std::string p = "char.conv" + std::to_string(k);
      out.push_back({p + ".kernel", {k, cc.char_dim, cc.filters}, false, k * cc.char_dim, cc.filters});
      out.push_back({p + ".bias", {cc.filters}, true, k * cc.char_dim, cc.filters});
    }
    AddDense(out, "char.proj", cc.widths.size() * cc.filters, cc.out_dim);
  }
  const std::size_t d = config.WordDim();
  if (config.arch == Architecture::kChrWrdFF) {
    AddDense(out, "ff", d, config.ff_hidden);
    AddDense(out, "output", config.ff_hidden, 2);
  } else {
    std::size_t in = d;
    for (std::size_t l = 0; l < config.layers; ++l) {
      AddDense(out, "encoder." + std::to_string(l), in, config.hidden);
      in = config.hidden;
    }
    AddDense(out, "output", 4 * config.hidden, 2);
  }
  return out;
}

std::size_t CountParams(const ModelConfig& config) {
  std::size_t n = 0;
  for (const auto& p : ParamSchema(config)) n += NumElements(p.shape);
  return n;
}

ParamStore InitParams(const ModelConfig& config, RngStream& rng) {
  config.Validate();
  ParamStore params;
  for (const auto& spec : ParamSchema(config)) {
    Tensor t(spec.shape);
    if (!spec.is_bias) {
      const double a = std::sqrt(6.0 / static_cast<double>(spec.fan_in + spec.fan_out));
      for (double& x : t.data()) x = rng.Uniform(-a, a);
    }
    params.Add(spec.name, std::move(t));
  }
  return params;
}

// ---- cosine baselines ----

std::vector<double> Aggregate(const FeatureMatrix& e, AggKind kind) {
  if (kind == AggKind::kCoatt) throw UsageError("coattention is not a row aggregate; use Coattention");
  const std::size_t d = e.values.cols();
  std::vector<double> out(d, 0.0);
  std::size_t n = 0;
  const auto& k = simd::Active();
  for (std::size_t r = 0; r < e.mask.size(); ++r) {
    if (!e.mask[r]) continue;
    const double* row = e.values.row(r).data();
    if (kind == AggKind::kMax) {
      if (n == 0) {
        std::copy_n(row, d, out.begin());
      } else {
        k.vmax(row, out.data(), d);
      }
    } else {
      k.axpy(1.0, row, out.data(), d);
    }
    ++n;
  }
  if (kind == AggKind::kAvg && n > 0) {
    for (double& x : out) x /= static_cast<double>(n);
  }
  return out;
}

namespace {

// Row softmax of `scores` restricted to columns with col_mask set; rows with
// row_mask unset are left zero.
Tensor MaskedRowSoftmax(const Tensor& scores, std::span<const std::uint8_t> row_mask,
                        std::span<const std::uint8_t> col_mask) {
  Tensor out(scores.shape());
  const std::size_t cols = scores.cols();
  for (std::size_t r = 0; r < scores.rows(); ++r) {
    if (!row_mask[r]) continue;
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < cols; ++c) {
      if (col_mask[c]) mx = std::max(mx, scores.at(r, c));
    }
    if (!std::isfinite(mx)) continue;
    double z = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      if (!col_mask[c]) continue;
      out.at(r, c) = std::exp(scores.at(r, c) - mx);
      z += out.at(r, c);
    }
    for (std::size_t c = 0; c < cols; ++c) out.at(r, c) /= z;
  }
  return out;
}

// out[i] = sum_j a[i, j] * e[j]  (a e)
Tensor Times(const Tensor& a, const Tensor& e) {
  const auto& k = simd::Active();
  Tensor out({a.rows(), e.cols()});
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < a.cols(); ++j) {
      const double w = a.at(i, j);
      if (w != 0.0) k.axpy(w, e.row(j).data(), out.row(i).data(), e.cols());
    }
  }
  return out;
}

double CosineOf(std::span<const double> a, std::span<const double> b) {
  const auto& k = simd::Active();
  const double na = std::sqrt(k.dot(a.data(), a.data(), a.size()));
  const double nb = std::sqrt(k.dot(b.data(), b.data(), b.size()));
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::clamp(k.dot(a.data(), b.data(), a.size()) / (na * nb), -1.0, 1.0);
}

}  // namespace

CoattentionResult Coattention(const FeatureMatrix& e_q, const FeatureMatrix& e_m) {
  const std::size_t d = e_q.values.cols();
  if (e_m.values.cols() != d) {
    throw ShapeError("coattention dimension mismatch: " + ShapeString(e_q.values.shape()) + " vs " +
                     ShapeString(e_m.values.shape()));
  }
  const std::size_t lq = e_q.values.rows();
  const std::size_t lm = e_m.values.rows();
  const auto& k = simd::Active();
  Tensor affinity({lm, lq});
  for (std::size_t i = 0; i < lm; ++i) {
    if (!e_m.mask[i]) continue;
    for (std::size_t j = 0; j < lq; ++j) {
      if (e_q.mask[j]) affinity.at(i, j) = k.dot(e_m.values.row(i).data(), e_q.values.row(j).data(), d);
    }
  }
  Tensor affinity_t({lq, lm});
  for (std::size_t i = 0; i < lm; ++i) {
    for (std::size_t j = 0; j < lq; ++j) affinity_t.at(j, i) = affinity.at(i, j);
  }
  CoattentionResult r;
  // Each question word attends over the memory words and vice versa, so a
  // context row is a convex combination of the other side's rows.
  r.a_q = MaskedRowSoftmax(affinity_t, e_q.mask, e_m.mask);
  r.a_m = MaskedRowSoftmax(affinity, e_m.mask, e_q.mask);
  r.c_q = Times(r.a_q, e_m.values);
  r.c_m = Times(r.a_m, e_q.values);
  return r;
}

double CosineScore(const FeatureMatrix& e_q, const FeatureMatrix& e_m, AggKind kind) {
  if (kind != AggKind::kCoatt) return CosineOf(Aggregate(e_q, kind), Aggregate(e_m, kind));
  const CoattentionResult r = Coattention(e_q, e_m);
  FeatureMatrix cq{r.c_q, e_q.length, e_q.mask};
  FeatureMatrix cm{r.c_m, e_m.length, e_m.mask};
  return CosineOf(Aggregate(cq, AggKind::kAvg), Aggregate(cm, AggKind::kAvg));
}

// ---- probabilistic models ----

Var CharCnnEmbed(Graph& g, const ModelConfig& config, const ParamStore& params,
                 std::span<const std::int32_t> chars, std::size_t n_words) {
  const auto& cc = config.charcnn;
  const std::size_t w = config.max_word_len;
  if (chars.size() != n_words * w) {
    throw ShapeError("character ids: expected " + std::to_string(n_words * w) + ", got " +
                     std::to_string(chars.size()));
  }
  Var emb = ops::GatherRows(P(g, params, "char.embed"), chars);
  emb = ops::Reshape(emb, {n_words, w, cc.char_dim});
  std::vector<Var> pooled;
  for (std::size_t k : cc.widths) {
    const std::string p = "char.conv" + std::to_string(k);
    Var conv = ops::Conv1d(emb, P(g, params, p + ".kernel"), P(g, params, p + ".bias"));
    const std::vector<std::uint8_t> all(n_words * (w - k + 1), 1);
    pooled.push_back(ops::MaxOverTime(ops::Relu(conv), all));
  }
  Var y = pooled.size() == 1 ? pooled[0] : ops::Concat(pooled);
  return Dense(g, params, "char.proj", y);
}

Var EmbedUtterances(Graph& g, const ModelConfig& config, const ParamStore& params,
                    std::span<const EncodedUtterance* const> batch) {
  const std::size_t b = batch.size();
  const std::size_t l = config.max_len;
  const std::size_t d = config.embed_dim;
  Tensor words({b, l, d});
  for (std::size_t i = 0; i < b; ++i) {
    const Tensor& v = batch[i]->words.values;
    if (v.shape() != Shape{l, d}) {
      throw ShapeError("utterance features " + ShapeString(v.shape()) + " do not match model [" +
                       std::to_string(l) + ", " + std::to_string(d) + "]");
    }
    std::copy(v.data().begin(), v.data().end(), words.ptr() + i * l * d);
  }
  Var x = g.Constant(std::move(words));
  if (!UsesCharCnn(config.arch)) return x;
  std::vector<std::int32_t> ids;
  ids.reserve(b * l * config.max_word_len);
  for (const auto* u : batch) {
    if (u->chars.ids.size() != l * config.max_word_len) {
      throw ShapeError("utterance is missing character ids for " + ArchitectureName(config.arch));
    }
    ids.insert(ids.end(), u->chars.ids.begin(), u->chars.ids.end());
  }
  Var y = CharCnnEmbed(g, config, params, ids, b * l);
  y = ops::Reshape(y, {b, l, config.charcnn.out_dim});
  return ops::Concat({x, y});
}

Var ChrWrdFFForward(Graph& g, const ModelConfig& config, const ParamStore& params, Var e_q,
                    std::span<const std::uint8_t> mask_q, Var e_m, std::span<const std::uint8_t> mask_m,
                    const ForwardOptions& options) {
  Var u = ops::MaxOverTime(e_q, mask_q);
  Var v = ops::MaxOverTime(e_m, mask_m);
  Var y = ops::Hadamard(u, v);
  y = MaybeDropout(ops::Relu(Dense(g, params, "ff", y)), config, options);
  return ops::Softmax(Dense(g, params, "output", y));
}

Var TeffForward(Graph& g, const ModelConfig& config, const ParamStore& params, Var e_q,
                std::span<const std::uint8_t> mask_q, Var e_m, std::span<const std::uint8_t> mask_m,
                const ForwardOptions& options) {
  // Same parameter names on both sides: the encoder is shared.
  auto encode = [&](Var x) {
    for (std::size_t l = 0; l < config.layers; ++l) {
      x = MaybeDropout(ops::Relu(Dense(g, params, "encoder." + std::to_string(l), x)), config, options);
    }
    return x;
  };
  Var u = ops::MaxOverTime(encode(e_q), mask_q);
  Var v = ops::MaxOverTime(encode(e_m), mask_m);
  Var z = ops::Concat({u, v, ops::AbsDiff(u, v), ops::Hadamard(u, v)});
  z = MaybeDropout(z, config, options);
  return ops::Softmax(Dense(g, params, "output", z));
}

Var ForwardProbs(Graph& g, const ModelConfig& config, const ParamStore& params,
                 std::span<const EncodedUtterance* const> questions,
                 std::span<const EncodedUtterance* const> memories, const ForwardOptions& options) {
  if (!IsProbabilistic(config.arch)) {
    throw UsageError(ArchitectureName(config.arch) + " has no probabilistic output");
  }
  if (questions.size() != memories.size() || questions.empty()) {
    throw ShapeError("forward pass needs equally many questions and memories (got " +
                     std::to_string(questions.size()) + " and " + std::to_string(memories.size()) + ")");
  }
  Var e_q = EmbedUtterances(g, config, params, questions);
  Var e_m = EmbedUtterances(g, config, params, memories);
  const auto mask_q = StackMasks(questions);
  const auto mask_m = StackMasks(memories);
  if (config.arch == Architecture::kChrWrdFF) {
    return ChrWrdFFForward(g, config, params, e_q, mask_q, e_m, mask_m, options);
  }
  return TeffForward(g, config, params, e_q, mask_q, e_m, mask_m, options);
}

RelevanceOutput Predict(const ModelConfig& config, const ParamStore& params, const EncodedGroup& group) {
  RelevanceOutput out;
  const std::size_t n = group.memories.size();
  if (!IsProbabilistic(config.arch)) {
    const AggKind kind = CosineKind(config.arch);
    out.scores.reserve(n);
    for (const auto& m : group.memories) out.scores.push_back(CosineScore(group.question.words, m.words, kind));
    return out;
  }
  out.probabilistic = true;
  if (n == 0) {
    out.probs = Tensor({0, 2});
    return out;
  }
  std::vector<const EncodedUtterance*> qs(n, &group.question);
  std::vector<const EncodedUtterance*> ms;
  ms.reserve(n);
  for (const auto& m : group.memories) ms.push_back(&m);
  Graph g;
  out.probs = ForwardProbs(g, config, params, qs, ms, {}).value();
  return out;
}

}  // namespace memqa
