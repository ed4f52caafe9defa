#include "tsf/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "tsf/train.hpp"

namespace tsf {

bool GradCheckReport::passed() const { return worst() < tolerance; }

double GradCheckReport::worst() const {
    double w = 0.0;
    for (const GradCheckGroup& g : groups) {
        w = std::max(w, g.max_rel_err);
    }
    return w;
}

ModelConfig gradcheck_toy_config(ModelKind kind) {
    ModelConfig cfg;
    cfg.kind = kind;
    cfg.d_model = 2;
    cfg.nhead = 1;
    cfg.dim_feedforward = 2;
    cfg.dropout_p = 0.0;
    cfg.pos_expansion_dim = kind == ModelKind::kPots ? 4 : 0;
    return cfg;
}

GradCheckReport model_gradcheck(
    const ModelConfig& cfg, std::uint64_t seed, double tolerance,
    const std::function<void(const std::string&, std::vector<double>&)>& corrupt) {
    if (!(tolerance > 0.0)) {
        throw ContractError("gradcheck: tolerance must be > 0");
    }
    cfg.validate();

    ModelParams params = init_params(cfg, seed);
    Transformer model(cfg);

    const std::vector<SequencePair> data = {make_sequence_pair(1.0)};
    Tensor src, dec_in, labels;
    make_batch(data, {0}, src, dec_in, labels);
    const Tensor mask = causal_mask(kTgtLen);

    auto loss_value = [&](const ModelParams& p) {
        Tape tape;
        Tensor out = model.forward(tape, p, src, dec_in, mask, Mode::kEval, nullptr);
        return tape.mse_loss(out, labels).data[0];
    };

    // analytic gradients from one taped pass
    Tape tape;
    BoundModel bound = model.bind(tape, params, true);
    Tensor out = model.forward(tape, bound, src, dec_in, mask, Mode::kEval, nullptr);
    tape.backward(tape.mse_loss(out, labels));

    GradCheckReport report;
    report.tolerance = tolerance;
    const double h = 1e-5;
    for (const auto& [name, leaf] : bound.leaves) {
        std::vector<double> analytic = tape.grad(leaf);
        if (corrupt) {
            corrupt(name, analytic);
        }
        Tensor& value = params.at(name);
        double worst = 0.0;
        for (std::size_t j = 0; j < value.numel(); ++j) {
            const double x0 = value.data[j];
            value.data[j] = x0 + h;
            const double fp = loss_value(params);
            value.data[j] = x0 - h;
            const double fm = loss_value(params);
            value.data[j] = x0;
            const double numeric = (fp - fm) / (2.0 * h);
            const double denom = std::max({1.0, std::fabs(numeric), std::fabs(analytic[j])});
            worst = std::max(worst, std::fabs(numeric - analytic[j]) / denom);
        }
        report.groups.push_back({name, worst});
    }
    return report;
}

}  // namespace tsf
