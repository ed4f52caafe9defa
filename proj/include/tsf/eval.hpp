#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "tsf/data.hpp"
#include "tsf/model.hpp"

namespace tsf {

struct SequenceEval {
    double freq = 0.0;
    std::vector<double> forecast;  // one prediction per horizon step
    double sse = 0.0;              // squared error summed over the horizon
};

struct RunReport {
    std::vector<std::pair<int, double>> loss_curve;  // (epoch, mean train MSE)
    double test_err = 0.0;                           // mean per-sequence SSE
    std::vector<SequenceEval> per_sequence;
};

// Autoregressive forecast: the decoder input starts as [src.back()]; each of
// the `horizon` forward passes appends its last-position output. Runs in
// eval mode, so the result is a pure function of (params, src, horizon).
std::vector<double> forecast(const Transformer& model, const ModelParams& params,
                             const std::vector<double>& src, int horizon = kTgtLen);

using ForecastFn = std::function<std::vector<double>(const SequencePair&)>;

// Scores any forecaster against the test targets; exists so oracle
// predictors can be scored by the exact same reduction.
RunReport evaluate_with(const ForecastFn& fn, const std::vector<SequencePair>& test);

RunReport evaluate(const Transformer& model, const ModelParams& params,
                   const std::vector<SequencePair>& test);

}  // namespace tsf
