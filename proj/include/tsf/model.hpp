#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "tsf/layers.hpp"
#include "tsf/tensor.hpp"

namespace tsf {

enum class ModelKind { kMits, kPots };

std::string to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& s);

struct ModelConfig {
    ModelKind kind = ModelKind::kMits;
    int d_input = 1;
    int d_model = 8;
    int nhead = 2;
    int dim_feedforward = 8;
    double dropout_p = 0.1;
    int pos_expansion_dim = 0;  // used by the PoTS variant only
    int max_len = 5000;

    void validate() const;
    // Dimension the positional encoding operates in.
    int pos_dim() const { return kind == ModelKind::kPots ? pos_expansion_dim : d_model; }
};

struct ParamSpec {
    std::string name;
    std::vector<int> shape;
};

// Canonical parameter names, shapes and order; a pure function of the config.
std::vector<ParamSpec> param_specs(const ModelConfig& cfg);

// Total learnable elements over param_specs.
long long count_params(const ModelConfig& cfg);

// Ordered map from canonical parameter path to tensor.
class ModelParams {
  public:
    void add(std::string name, Tensor value);
    const Tensor& at(const std::string& name) const;
    Tensor& at(const std::string& name);
    bool contains(const std::string& name) const { return index_.count(name) != 0; }
    const std::vector<std::pair<std::string, Tensor>>& items() const { return items_; }
    std::vector<std::pair<std::string, Tensor>>& items() { return items_; }
    long long total_elements() const;

  private:
    std::vector<std::pair<std::string, Tensor>> items_;
    std::unordered_map<std::string, std::size_t> index_;
};

// Weights of rank >= 2 are Xavier-uniform (bound sqrt(6/(fan_in+fan_out))),
// layer-norm gains 1, every bias 0. Deterministic per seed.
ModelParams init_params(const ModelConfig& cfg, std::uint64_t seed);

// Layer structs wired to one tape's leaves, or to detached copies when not
// trainable. Valid for the lifetime of the tape it was bound on.
struct BoundModel {
    LinearLayer embedding;
    LinearLayer unembedding;
    LinearLayer pos_expansion;     // PoTS only
    LinearLayer pos_invexpansion;  // PoTS only
    TransformerCore core;
    std::vector<std::pair<std::string, Tensor>> leaves;
};

// Architecture constants plus the precomputed positional table; the
// learnable state stays outside in ModelParams so training can swap it
// between passes.
class Transformer {
  public:
    explicit Transformer(ModelConfig cfg);
    const ModelConfig& config() const { return cfg_; }
    const PositionalEncoder& positional_encoder() const { return posenc_; }

    BoundModel bind(Tape& tape, const ModelParams& params, bool trainable) const;

    // src [S,B,d_input], tgt [T,B,d_input], tgt_mask causal [T,T];
    // returns [T,B,d_input], the next-sample prediction per target position.
    Tensor forward(Tape& tape, const BoundModel& bound, const Tensor& src, const Tensor& tgt,
                   const Tensor& tgt_mask, Mode mode, Rng* rng,
                   const Tensor* src_key_padding = nullptr,
                   const Tensor* tgt_key_padding = nullptr) const;

    // Convenience: bind detached and run (the evaluation path).
    Tensor forward(Tape& tape, const ModelParams& params, const Tensor& src, const Tensor& tgt,
                   const Tensor& tgt_mask, Mode mode, Rng* rng) const;

  private:
    ModelConfig cfg_;
    PositionalEncoder posenc_;
};

// Self-describing text document: a config section followed by one
// name/shape/values record per parameter. Values are written with
// shortest-round-trip formatting, so a load restores them bit-exactly.
void save_checkpoint(const ModelParams& params, const ModelConfig& cfg, const std::string& path);
std::pair<ModelParams, ModelConfig> load_checkpoint(const std::string& path);

}  // namespace tsf
