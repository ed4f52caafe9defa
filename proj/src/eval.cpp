#include "tsf/eval.hpp"

namespace tsf {

std::vector<double> forecast(const Transformer& model, const ModelParams& params,
                             const std::vector<double>& src, int horizon) {
    if (horizon < 1) {
        throw ContractError("forecast: horizon must be >= 1, got " + std::to_string(horizon));
    }
    if (static_cast<int>(src.size()) != kSrcLen) {
        throw ContractError("forecast: source holds " + std::to_string(src.size()) +
                            " samples, the training split uses " + std::to_string(kSrcLen));
    }
    const Tensor src_t({kSrcLen, 1, 1}, src);
    std::vector<double> dec = {src.back()};
    std::vector<double> preds;
    preds.reserve(static_cast<std::size_t>(horizon));
    for (int step = 0; step < horizon; ++step) {
        Tape tape;
        const int len = static_cast<int>(dec.size());
        Tensor dec_t({len, 1, 1}, dec);
        Tensor out =
            model.forward(tape, params, src_t, dec_t, causal_mask(len), Mode::kEval, nullptr);
        const double y_hat = out(len - 1, 0, 0);
        preds.push_back(y_hat);
        dec.push_back(y_hat);
    }
    return preds;
}

RunReport evaluate_with(const ForecastFn& fn, const std::vector<SequencePair>& test) {
    if (test.empty()) {
        throw ContractError("evaluate: test set is empty");
    }
    RunReport report;
    double total = 0.0;
    for (const SequencePair& item : test) {
        SequenceEval e;
        e.freq = item.freq;
        e.forecast = fn(item);
        if (e.forecast.size() != item.tgt.size()) {
            throw DimensionError("evaluate: forecast of " + std::to_string(e.forecast.size()) +
                                 " steps against " + std::to_string(item.tgt.size()) +
                                 " targets");
        }
        for (std::size_t t = 0; t < item.tgt.size(); ++t) {
            const double diff = e.forecast[t] - item.tgt[t];
            e.sse += diff * diff;
        }
        total += e.sse;
        report.per_sequence.push_back(std::move(e));
    }
    report.test_err = total / static_cast<double>(test.size());
    return report;
}

RunReport evaluate(const Transformer& model, const ModelParams& params,
                   const std::vector<SequencePair>& test) {
    return evaluate_with(
        [&](const SequencePair& item) { return forecast(model, params, item.src); }, test);
}

}  // namespace tsf
