#include "tsf/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace tsf {

AdamState AdamState::init(const ModelParams& params) {
    AdamState state;
    for (const auto& [name, t] : params.items()) {
        state.slots.push_back({name, std::vector<double>(t.numel(), 0.0),
                               std::vector<double>(t.numel(), 0.0)});
    }
    return state;
}

void adam_step(ModelParams& params, const GradMap& grads, AdamState& state, double lr) {
    if (state.slots.size() != params.items().size()) {
        throw ContractError("adam_step: state tracks " + std::to_string(state.slots.size()) +
                            " parameters, model has " + std::to_string(params.items().size()));
    }
    state.step += 1;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < state.slots.size(); ++i) {
        AdamState::Slot& slot = state.slots[i];
        auto& [name, value] = params.items()[i];
        if (slot.name != name) {
            throw ContractError("adam_step: state slot '" + slot.name +
                                "' does not match parameter '" + name + "'");
        }
        auto it = grads.find(name);
        if (it == grads.end()) {
            throw ContractError("adam_step: no gradient for parameter '" + name + "'");
        }
        const std::vector<double>& g = it->second;
        if (g.size() != value.numel() || slot.m.size() != value.numel()) {
            throw ContractError("adam_step: gradient/state size mismatch for '" + name + "'");
        }
        for (std::size_t j = 0; j < g.size(); ++j) {
            slot.m[j] = state.beta1 * slot.m[j] + (1.0 - state.beta1) * g[j];
            slot.v[j] = state.beta2 * slot.v[j] + (1.0 - state.beta2) * g[j] * g[j];
            const double m_hat = slot.m[j] / bc1;
            const double v_hat = slot.v[j] / bc2;
            value.data[j] -= lr * m_hat / (std::sqrt(v_hat) + state.eps);
        }
    }
}

void TrainConfig::validate() const {
    if (epochs < 0 || batch_size < 1) {
        throw ContractError("train config: epochs must be >= 0 and batch_size >= 1");
    }
    if (!(schedule.gamma > 0.0 && schedule.gamma < 1.0)) {
        throw ContractError("train config: gamma must lie in (0,1)");
    }
    for (std::size_t i = 1; i < schedule.milestones.size(); ++i) {
        if (schedule.milestones[i] <= schedule.milestones[i - 1]) {
            throw ContractError("train config: milestones must be strictly increasing");
        }
    }
}

double lr_at(const TrainConfig& cfg, int epoch) {
    if (epoch < 0) {
        throw ContractError("lr_at: epoch must be >= 0");
    }
    int decays = 0;
    for (int m : cfg.schedule.milestones) {
        if (m <= epoch) {
            ++decays;
        }
    }
    return cfg.lr0 * std::pow(cfg.schedule.gamma, static_cast<double>(decays));
}

void make_batch(const std::vector<SequencePair>& data, const std::vector<int>& idx, Tensor& src,
                Tensor& dec_in, Tensor& labels) {
    const int batch = static_cast<int>(idx.size());
    src = Tensor::zeros({kSrcLen, batch, 1});
    dec_in = Tensor::zeros({kTgtLen, batch, 1});
    labels = Tensor::zeros({kTgtLen, batch, 1});
    for (int b = 0; b < batch; ++b) {
        const SequencePair& item = data[static_cast<std::size_t>(idx[static_cast<std::size_t>(b)])];
        if (item.src.size() != kSrcLen || item.tgt.size() != kTgtLen) {
            throw DimensionError("make_batch: item holds " + std::to_string(item.src.size()) +
                                 "/" + std::to_string(item.tgt.size()) + " samples, expected " +
                                 std::to_string(kSrcLen) + "/" + std::to_string(kTgtLen));
        }
        for (int t = 0; t < kSrcLen; ++t) {
            src(t, b, 0) = item.src[static_cast<std::size_t>(t)];
        }
        dec_in(0, b, 0) = item.src.back();
        for (int t = 1; t < kTgtLen; ++t) {
            dec_in(t, b, 0) = item.tgt[static_cast<std::size_t>(t - 1)];
        }
        for (int t = 0; t < kTgtLen; ++t) {
            labels(t, b, 0) = item.tgt[static_cast<std::size_t>(t)];
        }
    }
}

TrainResult train(const ModelConfig& cfg, ModelParams initial,
                  const std::vector<SequencePair>& data, const TrainConfig& tc,
                  const std::function<void(int, double)>& on_epoch) {
    cfg.validate();
    tc.validate();
    if (data.empty()) {
        throw ContractError("train: dataset is empty");
    }

    Transformer model(cfg);
    Rng rng(tc.seed);
    AdamState state = AdamState::init(initial);
    const Tensor tgt_mask = causal_mask(kTgtLen);

    TrainResult result;
    result.params = std::move(initial);
    result.loss_curve.reserve(static_cast<std::size_t>(tc.epochs));

    std::vector<int> order(data.size());
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 0; epoch < tc.epochs; ++epoch) {
        const double lr = lr_at(tc, epoch);
        // Fisher-Yates over the item order
        for (std::size_t i = order.size(); i > 1; --i) {
            std::swap(order[i - 1], order[rng.below(i)]);
        }
        double epoch_loss = 0.0;
        std::size_t seen = 0;
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(tc.batch_size)) {
            const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(tc.batch_size));
            const std::vector<int> idx(order.begin() + static_cast<long>(start),
                                       order.begin() + static_cast<long>(stop));
            Tensor src, dec_in, labels;
            make_batch(data, idx, src, dec_in, labels);

            Tape tape;
            BoundModel bound = model.bind(tape, result.params, true);
            double loss_value = 0.0;
            Tensor loss;
            try {
                Tensor out =
                    model.forward(tape, bound, src, dec_in, tgt_mask, tc.dropout_mode, &rng);
                loss = tape.mse_loss(out, labels);
                loss_value = loss.data[0];
            } catch (const NumericError& e) {
                throw NumericError("train: numeric failure at epoch " + std::to_string(epoch) +
                                   ", lr " + std::to_string(lr) + ": " + e.what());
            }
            if (!std::isfinite(loss_value)) {
                throw NumericError("train: non-finite loss " + std::to_string(loss_value) +
                                   " at epoch " + std::to_string(epoch) + ", lr " +
                                   std::to_string(lr));
            }
            tape.backward(loss);
            GradMap grads;
            grads.reserve(bound.leaves.size());
            for (const auto& [name, leaf] : bound.leaves) {
                grads.emplace(name, tape.grad(leaf));
            }
            adam_step(result.params, grads, state, lr);

            epoch_loss += loss_value * static_cast<double>(idx.size());
            seen += idx.size();
        }
        const double mean_loss = epoch_loss / static_cast<double>(seen);
        result.loss_curve.emplace_back(epoch, mean_loss);
        if (on_epoch) {
            on_epoch(epoch, mean_loss);
        }
    }
    return result;
}

}  // namespace tsf
