#include "memqa/cli.hpp"

#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "memqa/checkpoint.hpp"
#include "memqa/config_io.hpp"
#include "memqa/corpus.hpp"
#include "memqa/embeddings.hpp"
#include "memqa/error.hpp"
#include "memqa/evaluation.hpp"
#include "memqa/selfcheck.hpp"
#include "memqa/synth.hpp"
#include "memqa/training.hpp"

namespace memqa {
namespace {

using ojson = nlohmann::ordered_json;

// Flags are bound to private holders and applied after the config file, so
// an explicit flag always wins.
class Overrides {
 public:
  template <typename T, typename Apply>
  void Add(CLI::App* app, const std::string& name, const std::string& help, Apply apply) {
    auto holder = std::make_shared<T>();
    CLI::Option* o = app->add_option(name, *holder, help);
    appliers_.push_back([o, holder, apply] {
      if (o->count() > 0) apply(*holder);
    });
  }
  void Apply() const {
    for (const auto& f : appliers_) f();
  }

 private:
  std::vector<std::function<void()>> appliers_;
};

std::vector<double> ParseDoubles(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw UsageError("cannot parse number '" + item + "' in list '" + s + "'");
    }
  }
  return out;
}

OovPolicy ParseOov(const std::string& s) {
  if (s == "zero") return OovPolicy::Zero();
  if (s.starts_with("hash:")) {
    const auto parts = s.substr(5);
    const auto colon = parts.find(':');
    try {
      const std::size_t buckets = std::stoull(parts.substr(0, colon));
      const std::uint64_t seed = colon == std::string::npos ? 0 : std::stoull(parts.substr(colon + 1));
      return OovPolicy::HashBucket(buckets, seed);
    } catch (const std::exception&) {
    }
  }
  throw UsageError("--oov must be 'zero' or 'hash:BUCKETS[:SEED]', got '" + s + "'");
}

PreprocessRules LoadRules(const std::string& dir) {
  return dir.empty() ? PreprocessRules::Defaults() : PreprocessRules::LoadDir(dir);
}

nlohmann::json ReadJsonFile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config file '" + path + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError("config file '" + path + "': " + e.what());
  }
}

void Echo(std::ostream& err, const std::string& command, const ojson& config) {
  err << "config " << command << " " << config.dump() << "\n";
}

std::string Fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

std::string StatsTable(const CorpusStats& s) {
  std::ostringstream out;
  out << "groups                     " << s.group_count << "\n"
      << "answers                    " << s.answer_count << "\n"
      << "memories/group min         " << s.min_memories << "\n"
      << "memories/group max         " << s.max_memories << "\n"
      << "memories/group mean        " << Fmt(s.mean_memories) << "\n"
      << "memories/group stddev      " << Fmt(s.stddev_memories) << "\n"
      << "% relevant (group mean)    " << Fmt(s.percent_relevant) << "\n"
      << "question tokens raw        " << Fmt(s.mean_question_tokens_raw) << "\n"
      << "question tokens processed  " << Fmt(s.mean_question_tokens) << "\n"
      << "answer tokens raw          " << Fmt(s.mean_answer_tokens_raw) << "\n"
      << "answer tokens processed    " << Fmt(s.mean_answer_tokens) << "\n";
  return out.str();
}

// Everything needed to turn raw text into model inputs.
struct Pipeline {
  ModelConfig model;
  ParamStore params;
  PreprocessRules rules;
  CharVocab chars;
  std::unique_ptr<EmbeddingTable> table;

  UtteranceEncoder Encoder() const {
    return UtteranceEncoder(*table, rules, model.max_len, model.max_word_len,
                            UsesCharCnn(model.arch) ? &chars : nullptr);
  }
};

struct InferenceFlags {
  std::string checkpoint;
  std::string model = "cosine-avg";
  std::string embeddings;
  std::string oov = "zero";
  std::string rules;
  std::size_t max_len = 10;

  void Register(CLI::App* app) {
    app->add_option("--checkpoint", checkpoint, "Trained checkpoint");
    app->add_option("--model", model, "Cosine baseline to use when no checkpoint is given");
    app->add_option("--embeddings", embeddings, ".vec file (defaults to the checkpoint's)");
    app->add_option("--oov", oov, "OOV policy for baselines: zero | hash:BUCKETS[:SEED]");
    app->add_option("--rules", rules, "Preprocessing resource directory for baselines");
    app->add_option("--max-len", max_len, "Maximum utterance length for baselines");
  }

  Pipeline Load(ojson& echo) const {
    Pipeline p;
    if (!checkpoint.empty()) {
      Checkpoint ck = LoadCheckpoint(checkpoint);
      p.model = ck.model;
      p.params = std::move(ck.params);
      p.rules = ck.rules;
      p.chars = ck.chars;
      const std::string vec = embeddings.empty() ? ck.embeddings : embeddings;
      p.table = std::make_unique<EmbeddingTable>(EmbeddingTable::LoadVec(vec, ck.oov));
      if (p.table->dim() != p.model.embed_dim) {
        throw DataError("embedding dimension " + std::to_string(p.table->dim()) + " does not match checkpoint (" +
                        std::to_string(p.model.embed_dim) + ")");
      }
      echo["checkpoint"] = checkpoint;
      echo["embeddings"] = vec;
    } else {
      p.model.arch = ParseArchitecture(model);
      if (IsProbabilistic(p.model.arch)) throw UsageError(model + " needs --checkpoint");
      if (embeddings.empty()) throw UsageError("--embeddings is required without --checkpoint");
      p.rules = LoadRules(rules);
      p.table = std::make_unique<EmbeddingTable>(EmbeddingTable::LoadVec(embeddings, ParseOov(oov)));
      p.model.embed_dim = p.table->dim();
      p.model.max_len = max_len;
      p.model.Validate();
      echo["embeddings"] = embeddings;
      echo["oov"] = oov;
    }
    echo["model"] = ToJson(p.model);
    return p;
  }
};

int CmdGenData(const SynthSpec& spec, const std::string& out_path, const std::string& vectors_out,
               std::size_t dim, std::ostream& out, std::ostream& err) {
  ojson echo = ToJson(spec);
  echo["out"] = out_path;
  if (!vectors_out.empty()) {
    echo["vectors_out"] = vectors_out;
    echo["dim"] = dim;
  }
  Echo(err, "gen-data", echo);
  const auto groups = GenerateSynthetic(spec);
  SaveQaJsonl(groups, out_path);
  if (!vectors_out.empty()) WriteRandomVectors(SyntheticVocabulary(spec), dim, spec.vocab_seed, vectors_out);
  out << "wrote " << groups.size() << " groups to " << out_path << "\n";
  return kExitOk;
}

}  // namespace

int Run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Question-to-memory relevance models with direct F1 optimisation"};
  app.name("memqa");
  app.require_subcommand(1);

  // gen-data
  SynthSpec spec;
  std::string gen_out, gen_vectors;
  std::size_t gen_dim = 300;
  auto* gen = app.add_subcommand("gen-data", "Write a synthetic QA JSONL corpus");
  gen->add_option("--groups", spec.group_count, "Number of QA groups");
  gen->add_option("--min-memories", spec.min_memories, "Fewest memories per group");
  gen->add_option("--max-memories", spec.max_memories, "Most memories per group");
  gen->add_option("--relevant-frac", spec.relevant_fraction, "Target fraction of relevant memories");
  gen->add_option("--vocab", spec.vocab_size, "Content vocabulary size (topics + fillers)");
  gen->add_option("--topics", spec.topic_count, "Number of topic keywords");
  gen->add_option("--noise", spec.noise_rate, "Per-token character corruption probability");
  gen->add_option("--carrier-rate", spec.carrier_rate, "Probability of a carrier-phrase preamble");
  gen->add_option("--seed", spec.seed, "Random seed for group sampling");
  gen->add_option("--vocab-seed", spec.vocab_seed, "Seed for the shared pseudo-word vocabulary and vectors");
  gen->add_option("--id-prefix", spec.id_prefix, "Prefix for group ids");
  gen->add_option("--out", gen_out, "Output JSONL path")->required();
  gen->add_option("--vectors-out", gen_vectors, "Also write random .vec vectors for the vocabulary");
  gen->add_option("--dim", gen_dim, "Dimension for --vectors-out");

  // preprocess
  std::string pre_in, pre_out, pre_rules;
  auto* pre = app.add_subcommand("preprocess", "Normalise a corpus and print its statistics");
  pre->add_option("--in", pre_in, "Input JSONL")->required();
  pre->add_option("--out", pre_out, "Output JSONL (optional)");
  pre->add_option("--rules", pre_rules, "Directory with contractions/carrier_phrases/stopwords files");

  // train
  std::string tr_config, tr_train, tr_dev, tr_vec, tr_oov = "zero", tr_rules, tr_out, tr_log, tr_resume;
  std::size_t tr_stop = 0;
  auto* tr = app.add_subcommand("train", "Train a relevance model");
  tr->add_option("--config", tr_config, "JSON run configuration {model, train}");
  tr->add_option("--train", tr_train, "Training corpus JSONL")->required();
  tr->add_option("--dev", tr_dev, "Dev corpus JSONL")->required();
  tr->add_option("--embeddings", tr_vec, ".vec word vectors");
  tr->add_option("--oov", tr_oov, "OOV policy: zero | hash:BUCKETS[:SEED]");
  tr->add_option("--rules", tr_rules, "Preprocessing resource directory");
  tr->add_option("--out", tr_out, "Checkpoint output path")->required();
  tr->add_option("--log", tr_log, "JSON-lines training log");
  tr->add_option("--resume", tr_resume, "Continue from this checkpoint");
  tr->add_option("--stop-after", tr_stop, "Stop after this many epochs (resumable)");
  ModelConfig model_cfg;
  TrainConfig train_cfg;
  Overrides tr_flags;
  tr_flags.Add<std::string>(tr, "--model", "Architecture",
                            [&](const std::string& v) { model_cfg.arch = ParseArchitecture(v); });
  tr_flags.Add<std::size_t>(tr, "--hidden", "Encoder units", [&](std::size_t v) { model_cfg.hidden = v; });
  tr_flags.Add<std::size_t>(tr, "--layers", "Encoder layers", [&](std::size_t v) { model_cfg.layers = v; });
  tr_flags.Add<std::size_t>(tr, "--ff-hidden", "ChrWrdFF hidden width", [&](std::size_t v) { model_cfg.ff_hidden = v; });
  tr_flags.Add<double>(tr, "--dropout", "Dropout rate", [&](double v) { model_cfg.dropout = v; });
  tr_flags.Add<std::size_t>(tr, "--max-len", "Maximum utterance length", [&](std::size_t v) { model_cfg.max_len = v; });
  tr_flags.Add<std::size_t>(tr, "--max-word-len", "Maximum word length", [&](std::size_t v) { model_cfg.max_word_len = v; });
  tr_flags.Add<std::string>(tr, "--char-widths", "CharCNN kernel widths, comma separated", [&](const std::string& v) {
    model_cfg.charcnn.widths.clear();
    for (double w : ParseDoubles(v)) model_cfg.charcnn.widths.push_back(static_cast<std::size_t>(w));
  });
  tr_flags.Add<std::size_t>(tr, "--char-filters", "CharCNN filters per width", [&](std::size_t v) { model_cfg.charcnn.filters = v; });
  tr_flags.Add<std::size_t>(tr, "--char-out", "CharCNN output dimension", [&](std::size_t v) { model_cfg.charcnn.out_dim = v; });
  tr_flags.Add<std::size_t>(tr, "--char-dim", "Character embedding dimension", [&](std::size_t v) { model_cfg.charcnn.char_dim = v; });
  tr_flags.Add<std::string>(tr, "--objective", "ce | rv1 | rv2 | smooth | mtl",
                            [&](const std::string& v) { train_cfg.objective.kind = ParseObjective(v); });
  tr_flags.Add<std::string>(tr, "--rl-kind", "Reinforcement term inside mtl: rv1 | rv2",
                            [&](const std::string& v) { train_cfg.objective.rl_kind = ParseObjective(v); });
  tr_flags.Add<double>(tr, "--lambda", "MTL mixing weight", [&](double v) { train_cfg.objective.lambda = v; });
  tr_flags.Add<double>(tr, "--zeta", "Confidence threshold for the RV2 baseline", [&](double v) { train_cfg.objective.zeta = v; });
  tr_flags.Add<std::string>(tr, "--smooth-mode", "soft-prob | literal",
                            [&](const std::string& v) { train_cfg.objective.smooth_mode = ParseSmoothMode(v); });
  tr_flags.Add<std::size_t>(tr, "--samples", "Sampled action sets per group", [&](std::size_t v) { train_cfg.objective.samples = v; });
  tr_flags.Add<double>(tr, "--lr", "Learning rate", [&](double v) { train_cfg.lr = v; });
  tr_flags.Add<double>(tr, "--lr-decay", "Learning-rate factor for phase 2", [&](double v) { train_cfg.lr_decay = v; });
  tr_flags.Add<std::size_t>(tr, "--batch", "Pair batch size", [&](std::size_t v) { train_cfg.batch_size = v; });
  tr_flags.Add<double>(tr, "--weight-decay", "L2 weight decay", [&](double v) { train_cfg.weight_decay = v; });
  tr_flags.Add<std::size_t>(tr, "--epochs1", "Max phase-1 epochs", [&](std::size_t v) { train_cfg.max_epochs_phase1 = v; });
  tr_flags.Add<std::size_t>(tr, "--epochs2", "Max phase-2 epochs", [&](std::size_t v) { train_cfg.max_epochs_phase2 = v; });
  tr_flags.Add<std::size_t>(tr, "--patience", "Epochs without dev improvement", [&](std::size_t v) { train_cfg.patience = v; });
  tr_flags.Add<std::size_t>(tr, "--batches-per-epoch", "Pair batches per epoch (0 = cover the corpus)",
                            [&](std::size_t v) { train_cfg.batches_per_epoch = v; });
  tr_flags.Add<std::uint64_t>(tr, "--seed", "Random seed", [&](std::uint64_t v) { train_cfg.seed = v; });
  tr_flags.Add<std::string>(tr, "--dev-thresholds", "Dev thresholds, comma separated",
                            [&](const std::string& v) { train_cfg.dev_thresholds = ParseDoubles(v); });
  tr_flags.Add<double>(tr, "--select-threshold", "Threshold for dev model selection",
                       [&](double v) { train_cfg.select_threshold = v; });
  tr_flags.Add<double>(tr, "--clip-norm", "Global gradient-norm clip (0 = off)", [&](double v) { train_cfg.clip_norm = v; });
  tr_flags.Add<std::size_t>(tr, "--workers", "Dev evaluation threads", [&](std::size_t v) { train_cfg.workers = v; });

  // eval
  InferenceFlags ev_flags;
  std::string ev_corpus, ev_id, ev_json, ev_thresholds = "0.97,0.98,0.99", ev_compare;
  std::size_t ev_workers = 1;
  bool ev_detail = false;
  auto* ev = app.add_subcommand("eval", "Macro P/R/F1 over a corpus at several thresholds");
  ev_flags.Register(ev);
  ev->add_option("--corpus", ev_corpus, "Corpus JSONL")->required();
  ev->add_option("--corpus-id", ev_id, "Corpus id for the report (default: file stem)");
  ev->add_option("--thresholds", ev_thresholds, "Comma-separated thresholds");
  ev->add_option("--json-out", ev_json, "Write the JSON report here");
  ev->add_option("--compare-to", ev_compare, "Baseline JSON report; prints relative F1 change");
  ev->add_option("--workers", ev_workers, "Evaluation threads");
  ev->add_flag("--detail", ev_detail, "Include per-group rows in the JSON report");

  // predict
  InferenceFlags pr_flags;
  std::string pr_question, pr_memories;
  double pr_threshold = 0.97;
  auto* pr = app.add_subcommand("predict", "Score memories for one question");
  pr_flags.Register(pr);
  pr->add_option("--question", pr_question, "Question text")->required();
  pr->add_option("--memories", pr_memories, "File with one memory per line")->required();
  pr->add_option("--threshold", pr_threshold, "Decision threshold");

  // gradcheck
  std::string gc_model = "teff", gc_objective = "ce", gc_smooth = "soft-prob", gc_rl = "rv2";
  double gc_lambda = 0.5, gc_zeta = 0.97, gc_tol = 1e-4, gc_h = 1e-5;
  std::uint64_t gc_seed = 0;
  std::size_t gc_coords = 12;
  bool gc_full = false;
  auto* gc = app.add_subcommand("gradcheck", "Finite-difference check of model + objective gradients");
  gc->add_option("--model", gc_model, "chrwrdff | teff | teffch");
  gc->add_option("--objective", gc_objective, "ce | rv1 | rv2 | smooth | mtl");
  gc->add_option("--smooth-mode", gc_smooth, "soft-prob | literal");
  gc->add_option("--rl-kind", gc_rl, "rv1 | rv2 (for mtl)");
  gc->add_option("--lambda", gc_lambda, "MTL weight");
  gc->add_option("--zeta", gc_zeta, "RV2 baseline threshold");
  gc->add_option("--seed", gc_seed, "Fixture seed");
  gc->add_option("--tolerance", gc_tol, "Maximum allowed relative error");
  gc->add_option("--step", gc_h, "Finite-difference step");
  gc->add_option("--coords", gc_coords, "Coordinates sampled per tensor");
  gc->add_flag("--full-size", gc_full, "Use the reference layer sizes instead of the small fixture");

  try {
    try {
      std::vector<std::string> reversed(args.rbegin(), args.rend());
      app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
      out << app.help();
      return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
      out << app.help("", CLI::AppFormatMode::All);
      return kExitOk;
    } catch (const CLI::ParseError& e) {
      throw UsageError(e.what());
    }

    if (gen->parsed()) return CmdGenData(spec, gen_out, gen_vectors, gen_dim, out, err);

    if (pre->parsed()) {
      const PreprocessRules rules = LoadRules(pre_rules);
      ojson echo{{"in", pre_in}, {"out", pre_out}, {"rules", pre_rules.empty() ? "built-in" : pre_rules}};
      Echo(err, "preprocess", echo);
      const auto groups = LoadQaJsonl(pre_in);
      if (!pre_out.empty()) SaveQaJsonl(PreprocessCorpus(groups, rules), pre_out);
      out << StatsTable(ComputeCorpusStats(groups, rules));
      return kExitOk;
    }

    if (tr->parsed()) {
      Checkpoint ck;
      bool resume = !tr_resume.empty();
      if (resume) {
        ck = LoadCheckpoint(tr_resume);
        if (!tr_vec.empty()) ck.embeddings = tr_vec;
      } else {
        bool hidden_set = tr->count("--hidden") > 0;
        if (!tr_config.empty()) {
          const auto j = ReadJsonFile(tr_config);
          hidden_set = hidden_set || (j.contains("model") && j["model"].contains("hidden"));
          for (const auto& [k, v] : j.items()) {
            if (k != "model" && k != "train") throw UsageError("unknown config section '" + k + "'");
          }
          if (j.contains("model")) model_cfg = ModelConfigFromJson(j["model"], model_cfg);
          if (j.contains("train")) train_cfg = TrainConfigFromJson(j["train"], train_cfg);
        }
        tr_flags.Apply();
        // Unless given explicitly, the hidden width follows the architecture.
        if (!hidden_set) model_cfg.hidden = ModelConfig::Defaults(model_cfg.arch).hidden;
        if (tr_vec.empty()) throw UsageError("--embeddings is required");
        ck.rules = LoadRules(tr_rules);
        ck.embeddings = tr_vec;
        ck.oov = ParseOov(tr_oov);
      }
      const EmbeddingTable table = EmbeddingTable::LoadVec(ck.embeddings, ck.oov);
      const auto train_groups = LoadQaJsonl(tr_train);
      const auto dev_groups = LoadQaJsonl(tr_dev);
      if (!resume) {
        model_cfg.embed_dim = table.dim();
        if (UsesCharCnn(model_cfg.arch)) {
          std::vector<TokenSeq> utts;
          for (const auto& g : train_groups) {
            utts.push_back(Preprocess(g.question, ck.rules));
            for (const auto& m : g.memories) utts.push_back(Preprocess(m.text, ck.rules));
          }
          ck.chars = CharVocab::Build(utts);
          model_cfg.charcnn.vocab_size = ck.chars.size();
        }
        ck.model = model_cfg;
        ck.train = train_cfg;
      } else if (table.dim() != ck.model.embed_dim) {
        throw DataError("embedding dimension does not match the checkpoint");
      }
      ojson echo{{"model", ToJson(ck.model)},
                 {"train", ToJson(ck.train)},
                 {"data", {{"train", tr_train}, {"dev", tr_dev}, {"embeddings", ck.embeddings}}},
                 {"oov", ToJson(ck.oov)},
                 {"out", tr_out},
                 {"resume", tr_resume}};
      Echo(err, "train", echo);
      const UtteranceEncoder enc(table, ck.rules, ck.model.max_len, ck.model.max_word_len,
                                 UsesCharCnn(ck.model.arch) ? &ck.chars : nullptr);
      const auto enc_train = enc.Encode(train_groups);
      const auto enc_dev = enc.Encode(dev_groups);
      TrainOptions opts;
      opts.stop_after_epochs = tr_stop;
      opts.log_path = tr_log;
      opts.diagnostic_path = tr_out + ".diag";
      const std::size_t before = ck.history.size();
      ck = Train({&enc_train, &enc_dev}, std::move(ck), resume, opts);
      SaveCheckpoint(ck, tr_out);
      for (std::size_t i = before; i < ck.history.size(); ++i) {
        const auto& r = ck.history[i];
        out << "epoch " << r.epoch << " phase " << r.phase << " lr " << r.lr << " loss " << Fmt(r.train_loss)
            << " dev_f1@" << ck.train.select_threshold << " " << Fmt(r.select_f1) << (r.improved ? " *" : "")
            << "\n";
      }
      out << "params " << ck.params.NumScalars() << "  best dev F1 " << Fmt(ck.state.best_f1)
          << (ck.state.done ? "" : "  (stopped early, resumable)") << "\n";
      return kExitOk;
    }

    if (ev->parsed()) {
      ojson echo;
      const Pipeline p = ev_flags.Load(echo);
      const auto thresholds = ParseDoubles(ev_thresholds);
      ValidateThresholds(thresholds);
      echo["corpus"] = ev_corpus;
      echo["thresholds"] = thresholds;
      echo["workers"] = ev_workers;
      Echo(err, "eval", echo);
      const auto groups = p.Encoder().Encode(LoadQaJsonl(ev_corpus));
      EvalReport report = Evaluate(p.model, p.params, groups, thresholds, ev_workers, ev_detail);
      report.corpus = ev_id.empty() ? std::filesystem::path(ev_corpus).stem().string() : ev_id;
      out << ReportToText(report);
      if (!ev_json.empty()) {
        std::ofstream f(ev_json);
        if (!f) throw DataError("cannot write '" + ev_json + "'");
        f << ReportToJson(report);
      }
      if (!ev_compare.empty()) {
        std::ifstream f(ev_compare);
        if (!f) throw DataError("cannot open '" + ev_compare + "'");
        std::stringstream ss;
        ss << f.rdbuf();
        out << CompareToText(CompareRuns(ReportFromJson(ss.str()), report));
      }
      return kExitOk;
    }

    if (pr->parsed()) {
      ojson echo;
      const Pipeline p = pr_flags.Load(echo);
      echo["threshold"] = pr_threshold;
      Echo(err, "predict", echo);
      std::ifstream f(pr_memories);
      if (!f) throw DataError("cannot open '" + pr_memories + "'");
      QAGroup group;
      group.id = "predict";
      group.question = pr_question;
      std::string line;
      while (std::getline(f, line)) {
        if (line.find_first_not_of(" \t\r") != std::string::npos) group.memories.push_back({line, false});
      }
      if (group.memories.empty()) throw DataError("no memories in '" + pr_memories + "'");
      const RelevanceOutput r = Predict(p.model, p.params, p.Encoder().Encode(group));
      const ActionSet act = ThresholdActions(r, pr_threshold);
      for (std::size_t i = 0; i < group.memories.size(); ++i) {
        ojson row{{"memory", group.memories[i].text}};
        if (r.probabilistic) {
          row["p_relevant"] = r.probs.at(i, 1);
        } else {
          row["score"] = r.scores[i];
        }
        row["relevant"] = static_cast<bool>(act[i]);
        out << row.dump() << "\n";
      }
      return kExitOk;
    }

    if (gc->parsed()) {
      const Architecture arch = ParseArchitecture(gc_model);
      if (!IsProbabilistic(arch)) throw UsageError(gc_model + " has no parameters to check");
      ObjectiveConfig obj;
      obj.kind = ParseObjective(gc_objective);
      obj.rl_kind = ParseObjective(gc_rl);
      obj.smooth_mode = ParseSmoothMode(gc_smooth);
      obj.lambda = gc_lambda;
      obj.zeta = gc_zeta;
      obj.Validate();
      ModelConfig cfg = gc_full ? ModelConfig::Defaults(arch) : SmallModelConfig(arch);
      if (gc_full) {
        cfg.embed_dim = 300;
        cfg.dropout = 0.0;
      }
      ojson echo{{"model", ToJson(cfg)}, {"objective", ToJson(obj)}, {"seed", gc_seed}, {"tolerance", gc_tol},
                 {"step", gc_h},       {"coords", gc_coords}};
      Echo(err, "gradcheck", echo);
      const GradCheckFixture fx = MakeGradCheckFixture(cfg, gc_seed);
      const GradCheckReport rep = ModelGradCheck(fx, obj, {gc_h, gc_coords, gc_seed});
      ojson res{{"max_rel_error", rep.max_rel_error},
                {"worst_param", rep.worst_param},
                {"worst_index", rep.worst_index},
                {"analytic", rep.worst_analytic},
                {"numeric", rep.worst_numeric},
                {"coords_checked", rep.coords_checked},
                {"tolerance", gc_tol},
                {"pass", rep.max_rel_error <= gc_tol}};
      out << res.dump() << "\n";
      return rep.max_rel_error <= gc_tol ? kExitOk : kExitNumeric;
    }
    throw UsageError("no command given");
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const NumericError& e) {
    err << "numerical failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const ShapeError& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  }
}

}  // namespace memqa
