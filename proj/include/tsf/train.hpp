#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "tsf/data.hpp"
#include "tsf/model.hpp"

namespace tsf {

struct AdamState {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    long long step = 0;

    struct Slot {
        std::string name;
        std::vector<double> m;
        std::vector<double> v;
    };
    std::vector<Slot> slots;  // mirrors the parameter order

    static AdamState init(const ModelParams& params);
};

using GradMap = std::unordered_map<std::string, std::vector<double>>;

// One bias-corrected update:
//   m <- b1 m + (1-b1) g;  v <- b2 v + (1-b2) g^2
//   theta <- theta - lr * m_hat / (sqrt(v_hat) + eps)
void adam_step(ModelParams& params, const GradMap& grads, AdamState& state, double lr);

// Empty milestones means a fixed rate; otherwise the rate decays by gamma
// once the epoch reaches each milestone.
struct LrSchedule {
    std::vector<int> milestones;
    double gamma = 0.1;
};

struct TrainConfig {
    double lr0 = 0.023;
    LrSchedule schedule;
    int epochs = 2000;
    int batch_size = 32;
    std::uint64_t seed = 0;
    Mode dropout_mode = Mode::kTrain;

    void validate() const;
};

double lr_at(const TrainConfig& cfg, int epoch);

struct TrainResult {
    ModelParams params;
    std::vector<std::pair<int, double>> loss_curve;  // (epoch, mean train MSE)
};

// Teacher forcing: per item the decoder reads [src[18], tgt[0..10]] and is
// scored against tgt[0..11] with the causal mask. idx selects the items that
// form the batch columns.
void make_batch(const std::vector<SequencePair>& data, const std::vector<int>& idx, Tensor& src,
                Tensor& dec_in, Tensor& labels);

// on_epoch, when given, observes each (epoch, mean loss) pair as it lands.
TrainResult train(const ModelConfig& cfg, ModelParams initial,
                  const std::vector<SequencePair>& data, const TrainConfig& tc,
                  const std::function<void(int, double)>& on_epoch = {});

}  // namespace tsf
