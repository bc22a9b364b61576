#include "memqa/config_io.hpp"

#include <set>

#include "memqa/error.hpp"

namespace memqa {
namespace {

using ojson = nlohmann::ordered_json;
using json = nlohmann::json;

void CheckKeys(const json& j, const char* what, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw UsageError(std::string(what) + " config must be a JSON object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [k, v] : j.items()) {
    if (!ok.contains(k)) throw UsageError("unknown " + std::string(what) + " config key '" + k + "'");
  }
}

template <typename T>
void Get(const json& j, const char* key, T& out) {
  auto it = j.find(key);
  if (it == j.end()) return;
  try {
    out = it->get<T>();
  } catch (const json::exception&) {
    throw UsageError(std::string("config key '") + key + "' has the wrong type");
  }
}

}  // namespace

ojson ToJson(const ModelConfig& c) {
  ojson j;
  j["arch"] = ArchitectureName(c.arch);
  j["embed_dim"] = c.embed_dim;
  j["hidden"] = c.hidden;
  j["layers"] = c.layers;
  j["ff_hidden"] = c.ff_hidden;
  j["charcnn"] = {{"widths", c.charcnn.widths},
                  {"filters", c.charcnn.filters},
                  {"out_dim", c.charcnn.out_dim},
                  {"char_dim", c.charcnn.char_dim},
                  {"vocab_size", c.charcnn.vocab_size}};
  j["dropout"] = c.dropout;
  j["max_len"] = c.max_len;
  j["max_word_len"] = c.max_word_len;
  return j;
}

ModelConfig ModelConfigFromJson(const json& j, ModelConfig c) {
  CheckKeys(j, "model",
            {"arch", "embed_dim", "hidden", "layers", "ff_hidden", "charcnn", "dropout", "max_len", "max_word_len"});
  if (auto it = j.find("arch"); it != j.end()) {
    if (!it->is_string()) throw UsageError("config key 'arch' must be a string");
    c.arch = ParseArchitecture(it->get<std::string>());
  }
  Get(j, "embed_dim", c.embed_dim);
  Get(j, "hidden", c.hidden);
  Get(j, "layers", c.layers);
  Get(j, "ff_hidden", c.ff_hidden);
  Get(j, "dropout", c.dropout);
  Get(j, "max_len", c.max_len);
  Get(j, "max_word_len", c.max_word_len);
  if (auto it = j.find("charcnn"); it != j.end()) {
    CheckKeys(*it, "charcnn", {"widths", "filters", "out_dim", "char_dim", "vocab_size"});
    Get(*it, "widths", c.charcnn.widths);
    Get(*it, "filters", c.charcnn.filters);
    Get(*it, "out_dim", c.charcnn.out_dim);
    Get(*it, "char_dim", c.charcnn.char_dim);
    Get(*it, "vocab_size", c.charcnn.vocab_size);
  }
  return c;
}

ojson ToJson(const RewardTable& r) {
  ojson j;
  j["no_positives_all_correct"] = r.no_positives_all_correct;
  j["no_positives_all_wrong"] = r.no_positives_all_wrong;
  j["no_true_positive"] = r.no_true_positive;
  j["low_f1"] = r.low_f1;
  j["low_f1_cutoff"] = r.low_f1_cutoff;
  return j;
}

RewardTable RewardTableFromJson(const json& j, RewardTable r) {
  CheckKeys(j, "reward",
            {"no_positives_all_correct", "no_positives_all_wrong", "no_true_positive", "low_f1", "low_f1_cutoff"});
  Get(j, "no_positives_all_correct", r.no_positives_all_correct);
  Get(j, "no_positives_all_wrong", r.no_positives_all_wrong);
  Get(j, "no_true_positive", r.no_true_positive);
  Get(j, "low_f1", r.low_f1);
  Get(j, "low_f1_cutoff", r.low_f1_cutoff);
  return r;
}

ojson ToJson(const ObjectiveConfig& c) {
  ojson j;
  j["kind"] = ObjectiveName(c.kind);
  j["rl_kind"] = ObjectiveName(c.rl_kind);
  j["lambda"] = c.lambda;
  j["zeta"] = c.zeta;
  j["smooth_mode"] = SmoothModeName(c.smooth_mode);
  j["samples"] = c.samples;
  j["reward"] = ToJson(c.reward);
  return j;
}

ObjectiveConfig ObjectiveConfigFromJson(const json& j, ObjectiveConfig c) {
  CheckKeys(j, "objective", {"kind", "rl_kind", "lambda", "zeta", "smooth_mode", "samples", "reward"});
  std::string s;
  if (j.contains("kind")) {
    Get(j, "kind", s);
    c.kind = ParseObjective(s);
  }
  if (j.contains("rl_kind")) {
    Get(j, "rl_kind", s);
    c.rl_kind = ParseObjective(s);
  }
  if (j.contains("smooth_mode")) {
    Get(j, "smooth_mode", s);
    c.smooth_mode = ParseSmoothMode(s);
  }
  Get(j, "lambda", c.lambda);
  Get(j, "zeta", c.zeta);
  Get(j, "samples", c.samples);
  if (auto it = j.find("reward"); it != j.end()) c.reward = RewardTableFromJson(*it, c.reward);
  return c;
}

ojson ToJson(const TrainConfig& c) {
  ojson j;
  j["objective"] = ToJson(c.objective);
  j["lr"] = c.lr;
  j["lr_decay"] = c.lr_decay;
  j["batch_size"] = c.batch_size;
  j["weight_decay"] = c.weight_decay;
  j["max_epochs_phase1"] = c.max_epochs_phase1;
  j["max_epochs_phase2"] = c.max_epochs_phase2;
  j["patience"] = c.patience;
  j["batches_per_epoch"] = c.batches_per_epoch;
  j["seed"] = c.seed;
  j["dev_thresholds"] = c.dev_thresholds;
  j["select_threshold"] = c.select_threshold;
  j["clip_norm"] = c.clip_norm;
  j["workers"] = c.workers;
  return j;
}

TrainConfig TrainConfigFromJson(const json& j, TrainConfig c) {
  CheckKeys(j, "train",
            {"objective", "lr", "lr_decay", "batch_size", "weight_decay", "max_epochs_phase1", "max_epochs_phase2",
             "patience", "batches_per_epoch", "seed", "dev_thresholds", "select_threshold", "clip_norm", "workers"});
  if (auto it = j.find("objective"); it != j.end()) c.objective = ObjectiveConfigFromJson(*it, c.objective);
  Get(j, "lr", c.lr);
  Get(j, "lr_decay", c.lr_decay);
  Get(j, "batch_size", c.batch_size);
  Get(j, "weight_decay", c.weight_decay);
  Get(j, "max_epochs_phase1", c.max_epochs_phase1);
  Get(j, "max_epochs_phase2", c.max_epochs_phase2);
  Get(j, "patience", c.patience);
  Get(j, "batches_per_epoch", c.batches_per_epoch);
  Get(j, "seed", c.seed);
  Get(j, "dev_thresholds", c.dev_thresholds);
  Get(j, "select_threshold", c.select_threshold);
  Get(j, "clip_norm", c.clip_norm);
  Get(j, "workers", c.workers);
  return c;
}

ojson ToJson(const PreprocessRules& r) {
  ojson j;
  j["contractions"] = ojson::array();
  for (const auto& [from, to] : r.contractions) j["contractions"].push_back({from, to});
  j["carrier_phrases"] = ojson::array();
  for (const auto& p : r.carrier_phrases) j["carrier_phrases"].push_back(p);
  j["stopwords"] = r.stopwords;
  return j;
}

PreprocessRules PreprocessRulesFromJson(const json& j) {
  try {
    PreprocessRules r;
    for (const auto& pair : j.at("contractions")) {
      r.contractions[pair.at(0).get<std::string>()] = pair.at(1).get<std::string>();
    }
    for (const auto& p : j.at("carrier_phrases")) r.carrier_phrases.push_back(p.get<TokenSeq>());
    for (const auto& s : j.at("stopwords")) r.stopwords.insert(s.get<std::string>());
    return r;
  } catch (const json::exception& e) {
    throw DataError(std::string("preprocess rules: ") + e.what());
  }
}

ojson ToJson(const OovPolicy& p) {
  ojson j;
  j["kind"] = p.kind == OovKind::kZero ? "zero" : "hash-bucket";
  j["buckets"] = p.buckets;
  j["seed"] = p.seed;
  return j;
}

OovPolicy OovPolicyFromJson(const json& j) {
  try {
    OovPolicy p;
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "zero") {
      p.kind = OovKind::kZero;
    } else if (kind == "hash-bucket") {
      p.kind = OovKind::kHashBucket;
    } else {
      throw DataError("unknown OOV policy '" + kind + "'");
    }
    p.buckets = j.at("buckets").get<std::size_t>();
    p.seed = j.at("seed").get<std::uint64_t>();
    return p;
  } catch (const json::exception& e) {
    throw DataError(std::string("oov policy: ") + e.what());
  }
}

ojson ToJson(const SynthSpec& s) {
  ojson j;
  j["group_count"] = s.group_count;
  j["min_memories"] = s.min_memories;
  j["max_memories"] = s.max_memories;
  j["relevant_fraction"] = s.relevant_fraction;
  j["vocab_size"] = s.vocab_size;
  j["topic_count"] = s.topic_count;
  j["noise_rate"] = s.noise_rate;
  j["carrier_rate"] = s.carrier_rate;
  j["seed"] = s.seed;
  j["vocab_seed"] = s.vocab_seed;
  j["id_prefix"] = s.id_prefix;
  return j;
}

}  // namespace memqa
