#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "tsf/model.hpp"

namespace tsf {

struct GradCheckGroup {
    std::string name;
    double max_rel_err = 0.0;
};

struct GradCheckReport {
    double tolerance = 1e-4;
    std::vector<GradCheckGroup> groups;

    bool passed() const;
    double worst() const;
};

// Compares tape gradients of the teacher-forced loss on one sinusoid item
// against central finite differences, per parameter group, on the given
// (small) configuration. Runs in eval mode so the loss is deterministic.
// The optional corruptor perturbs the analytic gradient of a named group
// before comparison; it exists as a negative-control hook.
GradCheckReport model_gradcheck(
    const ModelConfig& cfg, std::uint64_t seed, double tolerance,
    const std::function<void(const std::string&, std::vector<double>&)>& corrupt = {});

// d_model=2, nhead=1 toy used by the command-line check.
ModelConfig gradcheck_toy_config(ModelKind kind);

}  // namespace tsf
