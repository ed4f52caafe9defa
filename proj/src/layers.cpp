#include "tsf/layers.hpp"

#include <cmath>
#include <limits>

namespace tsf {

Tensor causal_mask(int n) {
    if (n < 1) {
        throw ContractError("causal_mask: size must be >= 1, got " + std::to_string(n));
    }
    Tensor m = Tensor::zeros({n, n});
    const double neg_inf = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            m(i, j) = neg_inf;
        }
    }
    return m;
}

PositionalEncoder::PositionalEncoder(int d_enc, int max_len, double dropout_p)
    : d_enc_(d_enc), max_len_(max_len), dropout_p_(dropout_p) {
    if (d_enc < 1 || max_len < 1) {
        throw ContractError("PositionalEncoder: d_enc and max_len must be >= 1");
    }
    table_ = Tensor::zeros({max_len, d_enc});
    for (int pos = 0; pos < max_len; ++pos) {
        for (int i = 0; i < d_enc; i += 2) {
            const double div = std::pow(10000.0, static_cast<double>(i) / d_enc);
            table_(pos, i) = std::sin(pos / div);
            if (i + 1 < d_enc) {
                table_(pos, i + 1) = std::cos(pos / div);
            }
        }
    }
}

Tensor PositionalEncoder::forward(Tape& tape, const Tensor& x, Mode mode, Rng* rng) const {
    if (x.rank() != 3 || x.shape[2] != d_enc_) {
        throw DimensionError("positional_encode: expected [S,B," + std::to_string(d_enc_) +
                             "], got " + shape_str(x.shape));
    }
    const int S = x.shape[0], B = x.shape[1];
    if (S > max_len_) {
        throw CapacityError("positional_encode: sequence length " + std::to_string(S) +
                            " exceeds table capacity " + std::to_string(max_len_));
    }
    Tensor pe = Tensor::zeros({S, B, d_enc_});
    for (int s = 0; s < S; ++s) {
        const double* row = &table_.data[static_cast<std::size_t>(s) * d_enc_];
        for (int b = 0; b < B; ++b) {
            double* dst = &pe.data[(static_cast<std::size_t>(s) * B + b) * d_enc_];
            for (int i = 0; i < d_enc_; ++i) {
                dst[i] = row[i];
            }
        }
    }
    return tape.dropout(tape.add(x, pe), dropout_p_, mode, rng);
}

Tensor MultiHeadAttention::forward(Tape& tape, const Tensor& query, const Tensor& key,
                                   const Tensor& value, const Tensor* attn_mask,
                                   const Tensor* key_padding, Mode mode, Rng* rng) const {
    if (query.rank() != 3 || key.rank() != 3 || value.rank() != 3 ||
        query.shape[2] != d_model || key.shape[2] != d_model || value.shape[2] != d_model) {
        throw DimensionError("attention: q/k/v must be [S,B," + std::to_string(d_model) +
                             "], got " + shape_str(query.shape) + ", " + shape_str(key.shape) +
                             ", " + shape_str(value.shape));
    }
    if (key.shape[0] != value.shape[0] || key.shape[1] != value.shape[1] ||
        query.shape[1] != key.shape[1]) {
        throw DimensionError("attention: batch/sequence extents disagree: q " +
                             shape_str(query.shape) + ", k " + shape_str(key.shape) + ", v " +
                             shape_str(value.shape));
    }

    const int d = d_model;
    Tensor wq = tape.slice_seq(in_proj_weight, 0, d);
    Tensor wk = tape.slice_seq(in_proj_weight, d, 2 * d);
    Tensor wv = tape.slice_seq(in_proj_weight, 2 * d, 3 * d);
    Tensor bq = tape.slice_seq(in_proj_bias, 0, d);
    Tensor bk = tape.slice_seq(in_proj_bias, d, 2 * d);
    Tensor bv = tape.slice_seq(in_proj_bias, 2 * d, 3 * d);

    Tensor q = tape.linear(query, wq, bq);
    Tensor k = tape.linear(key, wk, bk);
    Tensor v = tape.linear(value, wv, bv);

    q = tape.mul_scalar(q, 1.0 / std::sqrt(static_cast<double>(head_dim())));

    Tensor qh = tape.split_heads(q, nhead);
    Tensor kh = tape.split_heads(k, nhead);
    Tensor vh = tape.split_heads(v, nhead);

    Tensor scores = tape.bmm_nt(qh, kh);
    if (attn_mask || key_padding) {
        scores = tape.apply_attn_mask(scores, attn_mask, key_padding, nhead);
    }
    Tensor weights = tape.softmax_lastdim(scores);
    weights = tape.dropout(weights, dropout_p, mode, rng);

    Tensor ctx = tape.merge_heads(tape.bmm(weights, vh), nhead);
    return out_proj.forward(tape, ctx);
}

Tensor EncoderLayer::forward(Tape& tape, const Tensor& src, const Tensor* src_key_padding,
                             Mode mode, Rng* rng) const {
    Tensor a = self_attn.forward(tape, src, src, src, nullptr, src_key_padding, mode, rng);
    Tensor x = norm1.forward(tape, tape.add(src, tape.dropout(a, dropout_p, mode, rng)));

    Tensor ff = linear1.forward(tape, x);
    ff = tape.dropout(tape.relu(ff), dropout_p, mode, rng);
    ff = linear2.forward(tape, ff);
    return norm2.forward(tape, tape.add(x, tape.dropout(ff, dropout_p, mode, rng)));
}

Tensor DecoderLayer::forward(Tape& tape, const Tensor& tgt, const Tensor& memory,
                             const Tensor& tgt_mask, const Tensor* tgt_key_padding,
                             const Tensor* memory_key_padding, Mode mode, Rng* rng) const {
    Tensor a = self_attn.forward(tape, tgt, tgt, tgt, &tgt_mask, tgt_key_padding, mode, rng);
    Tensor x = norm1.forward(tape, tape.add(tgt, tape.dropout(a, dropout_p, mode, rng)));

    Tensor c = cross_attn.forward(tape, x, memory, memory, nullptr, memory_key_padding, mode, rng);
    x = norm2.forward(tape, tape.add(x, tape.dropout(c, dropout_p, mode, rng)));

    Tensor ff = linear1.forward(tape, x);
    ff = tape.dropout(tape.relu(ff), dropout_p, mode, rng);
    ff = linear2.forward(tape, ff);
    return norm3.forward(tape, tape.add(x, tape.dropout(ff, dropout_p, mode, rng)));
}

Tensor TransformerCore::forward(Tape& tape, const Tensor& src_emb, const Tensor& tgt_emb,
                                const Tensor& tgt_mask, const Tensor* src_key_padding,
                                const Tensor* tgt_key_padding, Mode mode, Rng* rng) const {
    if (src_emb.rank() != 3 || tgt_emb.rank() != 3 || src_emb.shape[2] != tgt_emb.shape[2]) {
        throw DimensionError("core_forward: embeddings must share d_model, got " +
                             shape_str(src_emb.shape) + " and " + shape_str(tgt_emb.shape));
    }
    Tensor memory = encoder.forward(tape, src_emb, src_key_padding, mode, rng);
    memory = encoder_norm.forward(tape, memory);
    // keys excluded while encoding are also excluded from cross-attention
    Tensor out = decoder.forward(tape, tgt_emb, memory, tgt_mask, tgt_key_padding,
                                 src_key_padding, mode, rng);
    return decoder_norm.forward(tape, out);
}

}  // namespace tsf
