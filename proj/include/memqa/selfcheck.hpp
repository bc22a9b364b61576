#pragma once

// Finite-difference check of a full model forward pass plus objective on a
// small built-in fixture. Used by the gradcheck command and the tests.

#include <cstdint>

#include "memqa/embeddings.hpp"
#include "memqa/gradcheck.hpp"
#include "memqa/models.hpp"
#include "memqa/objectives.hpp"

namespace memqa {

// Narrow layers so every coordinate can be probed quickly.
ModelConfig SmallModelConfig(Architecture arch);

struct GradCheckFixture {
  ModelConfig model;
  ParamStore params;
  EncodedGroup group;
  // Greedy (argmax) confusion counts of the fixture at its parameters.
  std::size_t tp = 0, fp = 0, fn = 0;
};

// Builds a 6-memory group with random word vectors and random parameters
// (biases included). Labels are set after a forward pass so that the argmax
// predictions contain true positives, false positives and false negatives.
GradCheckFixture MakeGradCheckFixture(const ModelConfig& config, std::uint64_t seed);

// Max relative error of the group loss gradient, dropout off. Sampling
// objectives use a fixed stream, so their sampled actions are held constant.
GradCheckReport ModelGradCheck(const GradCheckFixture& fixture, const ObjectiveConfig& objective,
                               const GradCheckOptions& options = {});

}  // namespace memqa
