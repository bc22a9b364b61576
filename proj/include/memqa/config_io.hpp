#pragma once

// JSON forms of the run configuration. The *FromJson functions overlay the
// keys present in `j` onto `base`, so partial config files work; unknown
// keys throw UsageError.

#include <nlohmann/json.hpp>

#include "memqa/corpus.hpp"
#include "memqa/embeddings.hpp"
#include "memqa/models.hpp"
#include "memqa/objectives.hpp"
#include "memqa/synth.hpp"
#include "memqa/training.hpp"

namespace memqa {

nlohmann::ordered_json ToJson(const ModelConfig& c);
nlohmann::ordered_json ToJson(const ObjectiveConfig& c);
nlohmann::ordered_json ToJson(const RewardTable& r);
nlohmann::ordered_json ToJson(const TrainConfig& c);
nlohmann::ordered_json ToJson(const PreprocessRules& r);
nlohmann::ordered_json ToJson(const OovPolicy& p);
nlohmann::ordered_json ToJson(const SynthSpec& s);

ModelConfig ModelConfigFromJson(const nlohmann::json& j, ModelConfig base);
ObjectiveConfig ObjectiveConfigFromJson(const nlohmann::json& j, ObjectiveConfig base);
RewardTable RewardTableFromJson(const nlohmann::json& j, RewardTable base);
TrainConfig TrainConfigFromJson(const nlohmann::json& j, TrainConfig base);
PreprocessRules PreprocessRulesFromJson(const nlohmann::json& j);
OovPolicy OovPolicyFromJson(const nlohmann::json& j);

}  // namespace memqa
