#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "tsf/errors.hpp"
#include "tsf/rng.hpp"

namespace tsf {

enum class Mode { kTrain, kEval };

// Dense row-major tensor of 64-bit reals. A tensor is a plain value; when it
// was produced by (or registered on) a Tape, `node` links it to that tape so
// backward() can reach it. A detached tensor (node < 0) never participates in
// gradient propagation.
struct Tensor {
    std::vector<int> shape;
    std::vector<double> data;
    int node = -1;

    Tensor() = default;
    Tensor(std::vector<int> shape_in, std::vector<double> values);

    static Tensor zeros(std::vector<int> shape_in);
    static Tensor full(std::vector<int> shape_in, double value);
    static Tensor scalar(double value);  // shape [1]

    std::size_t numel() const { return data.size(); }
    int rank() const { return static_cast<int>(shape.size()); }
    bool detached() const { return node < 0; }

    double& operator()(int i);
    double& operator()(int i, int j);
    double& operator()(int i, int j, int k);
    double operator()(int i) const;
    double operator()(int i, int j) const;
    double operator()(int i, int j, int k) const;
};

std::string shape_str(const std::vector<int>& shape);
std::size_t shape_numel(const std::vector<int>& shape);

// Reverse-mode autodiff tape. Every recorded operation appends one node
// holding the saved forward state its backward rule needs; nodes only ever
// reference earlier nodes, so a single reverse sweep visits them in valid
// topological order. One tape serves one forward/backward pass and is then
// discarded.
//
// Operations accept detached inputs: a result is recorded only when at least
// one input lives on the tape, so a forward pass over detached values (the
// evaluation path) records nothing.
class Tape {
  public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    // Registers a copy of `value` as a gradient-accumulating leaf.
    Tensor leaf(const Tensor& value);

    Tensor add(const Tensor& a, const Tensor& b);
    Tensor sub(const Tensor& a, const Tensor& b);
    Tensor mul_scalar(const Tensor& a, double c);
    Tensor relu(const Tensor& a);
    Tensor sum(const Tensor& a);  // scalar [1]

    // c[m,n] = sum_k a[m,k] * b[k,n]
    Tensor matmul(const Tensor& a, const Tensor& b);
    // y[..., o] = sum_i x[..., i] * weight[o, i] + bias[o]
    Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);
    // c[n,i,j] = sum_k a[n,i,k] * b[n,k,j]
    Tensor bmm(const Tensor& a, const Tensor& b);
    // c[n,i,j] = sum_k a[n,i,k] * b[n,j,k]
    Tensor bmm_nt(const Tensor& a, const Tensor& b);

    // [S,B,D] -> [B*H,S,D/H]; head h of column b lands in slice b*H+h.
    Tensor split_heads(const Tensor& x, int nhead);
    // Inverse of split_heads: [B*H,S,dk] -> [S,B,H*dk].
    Tensor merge_heads(const Tensor& x, int nhead);

    // scores [N,Sq,Sk] plus an additive mask [Sq,Sk] (broadcast over N) and/or
    // a key padding mask [B,Sk] of 0/1 flags (flagged keys are excluded by
    // adding -inf; N must equal B*nhead). Either mask may be null.
    Tensor apply_attn_mask(const Tensor& scores, const Tensor* attn_mask,
                           const Tensor* key_padding, int nhead);

    // Stabilized softmax over the last extent. -inf entries get weight 0;
    // NaN or +inf input is rejected.
    Tensor softmax_lastdim(const Tensor& x);

    // Per-slice standardization over the last extent, then gain * x + bias.
    Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias,
                      double eps);

    // Train mode zeroes each element with probability p and scales survivors
    // by 1/(1-p), drawing from `rng`. Eval mode and p == 0 are exact
    // identities (the input is returned unchanged).
    Tensor dropout(const Tensor& x, double p, Mode mode, Rng* rng);

    // Concatenate along the sequence (first) extent.
    Tensor concat_seq(const Tensor& a, const Tensor& b);
    // Rows [first, last) of the sequence extent.
    Tensor slice_seq(const Tensor& x, int first, int last);

    // Mean of squared differences over all elements; scalar [1].
    Tensor mse_loss(const Tensor& pred, const Tensor& target);

    // Seeds d(loss)/d(loss) = 1 and sweeps the tape in reverse. `loss` must
    // be a single-element tensor on this tape.
    void backward(const Tensor& loss);

    // Gradient accumulated at `t`'s node; zeros if the node was unreachable
    // from the loss. Requires a prior backward().
    std::vector<double> grad(const Tensor& t) const;

    std::size_t size() const { return nodes_.size(); }

  private:
    using BackFn = std::function<void(Tape&, const std::vector<double>&)>;

    struct Node {
        const char* op;
        std::vector<int> shape;
        std::vector<double> grad;  // empty until touched by backward
        BackFn backfn;             // empty for leaves
    };

    int record(const char* op, const std::vector<int>& shape, BackFn fn);
    std::vector<double>& grad_buffer(int node);

    std::vector<Node> nodes_;
    bool swept_ = false;
};

}  // namespace tsf
