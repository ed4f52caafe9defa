#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "tsf/data.hpp"
#include "tsf/eval.hpp"
#include "tsf/model.hpp"
#include "tsf/train.hpp"

namespace tsf {

// A self-contained experiment: dataset, model and training settings bundled
// under one name so a single command reproduces it. The dataset seed is part
// of the recipe (runs with different training seeds share the data); the run
// seed drives initialization, batching and dropout.
struct ExperimentRecipe {
    std::string name;
    DatasetSpec data;
    ModelConfig model;
    TrainConfig train;
};

const std::vector<ExperimentRecipe>& recipes();
const ExperimentRecipe* find_recipe(const std::string& name);
std::vector<std::string> recipe_names();

// Writes dataset, checkpoint, loss curve, per-sequence traces, summary and
// an SVG chart under out_dir. Returns the merged report.
RunReport run_recipe(const ExperimentRecipe& recipe, std::uint64_t seed,
                     const std::string& out_dir,
                     const std::function<void(int, double)>& on_epoch = {});

}  // namespace tsf
