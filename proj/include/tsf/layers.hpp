#pragma once

#include <vector>

#include "tsf/tensor.hpp"

namespace tsf {

// Additive causal mask: entry (i, j) is 0 when j <= i and -inf otherwise.
Tensor causal_mask(int n);

struct LinearLayer {
    Tensor weight;  // [out x in]
    Tensor bias;    // [out]

    Tensor forward(Tape& tape, const Tensor& x) const {
        return tape.linear(x, weight, bias);
    }
    int in_features() const { return weight.shape[1]; }
    int out_features() const { return weight.shape[0]; }
};

struct LayerNorm {
    Tensor gain;  // [d]
    Tensor bias;  // [d]
    double eps = 1e-5;

    Tensor forward(Tape& tape, const Tensor& x) const {
        return tape.layer_norm(x, gain, bias, eps);
    }
};

// Fixed sin/cos table added to the input, then dropout. No learnable state.
class PositionalEncoder {
  public:
    PositionalEncoder() = default;
    PositionalEncoder(int d_enc, int max_len, double dropout_p);

    // x is [S,B,d_enc]; the first S table rows are broadcast over the batch.
    Tensor forward(Tape& tape, const Tensor& x, Mode mode, Rng* rng) const;

    const Tensor& table() const { return table_; }
    int d_enc() const { return d_enc_; }
    int max_len() const { return max_len_; }

  private:
    int d_enc_ = 0;
    int max_len_ = 0;
    double dropout_p_ = 0.0;
    Tensor table_;  // [max_len x d_enc], detached
};

struct MultiHeadAttention {
    int d_model = 0;
    int nhead = 1;
    Tensor in_proj_weight;  // [3*d_model x d_model], rows q|k|v
    Tensor in_proj_bias;    // [3*d_model]
    LinearLayer out_proj;   // d_model -> d_model
    double dropout_p = 0.0;

    // query [Sq,B,d], key/value [Sk,B,d]. attn_mask is an additive [Sq,Sk]
    // mask; key_padding is [B,Sk] of 0/1 flags excluding keys. Both optional.
    Tensor forward(Tape& tape, const Tensor& query, const Tensor& key, const Tensor& value,
                   const Tensor* attn_mask, const Tensor* key_padding, Mode mode,
                   Rng* rng) const;

    int head_dim() const { return d_model / nhead; }
};

// Post-norm residual blocks mirroring the stock encoder/decoder layers:
// x = LN(x + Dropout(Sublayer(x))), feed-forward uses ReLU with an inner
// dropout between activation and the second linear map.
struct EncoderLayer {
    MultiHeadAttention self_attn;
    LinearLayer linear1;  // d_model -> dim_feedforward
    LinearLayer linear2;  // dim_feedforward -> d_model
    LayerNorm norm1;
    LayerNorm norm2;
    double dropout_p = 0.1;

    Tensor forward(Tape& tape, const Tensor& src, const Tensor* src_key_padding, Mode mode,
                   Rng* rng) const;
};

struct DecoderLayer {
    MultiHeadAttention self_attn;
    MultiHeadAttention cross_attn;
    LinearLayer linear1;
    LinearLayer linear2;
    LayerNorm norm1;
    LayerNorm norm2;
    LayerNorm norm3;
    double dropout_p = 0.1;

    Tensor forward(Tape& tape, const Tensor& tgt, const Tensor& memory, const Tensor& tgt_mask,
                   const Tensor* tgt_key_padding, const Tensor* memory_key_padding, Mode mode,
                   Rng* rng) const;
};

// One encoder layer and one decoder layer, each stack closed by a final
// layer norm.
struct TransformerCore {
    EncoderLayer encoder;
    LayerNorm encoder_norm;
    DecoderLayer decoder;
    LayerNorm decoder_norm;

    Tensor forward(Tape& tape, const Tensor& src_emb, const Tensor& tgt_emb,
                   const Tensor& tgt_mask, const Tensor* src_key_padding,
                   const Tensor* tgt_key_padding, Mode mode, Rng* rng) const;
};

}  // namespace tsf
