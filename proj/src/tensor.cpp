#include "tsf/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

namespace tsf {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void check_same_shape(const char* op, const Tensor& a, const Tensor& b) {
    if (a.shape != b.shape) {
        throw DimensionError(std::string(op) + ": shape mismatch " +
                             shape_str(a.shape) + " vs " + shape_str(b.shape));
    }
}

int last_extent(const Tensor& t) {
    if (t.shape.empty()) {
        throw DimensionError("expected a tensor of rank >= 1");
    }
    return t.shape.back();
}

}  // namespace

std::size_t shape_numel(const std::vector<int>& shape) {
    std::size_t n = 1;
    for (int e : shape) {
        n *= static_cast<std::size_t>(e);
    }
    return n;
}

std::string shape_str(const std::vector<int>& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += "x";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

Tensor::Tensor(std::vector<int> shape_in, std::vector<double> values)
    : shape(std::move(shape_in)), data(std::move(values)) {
    for (int e : shape) {
        if (e <= 0) {
            throw DimensionError("tensor extents must be positive, got " + shape_str(shape));
        }
    }
    if (shape_numel(shape) != data.size()) {
        throw DimensionError("tensor data of " + std::to_string(data.size()) +
                             " elements does not fill shape " + shape_str(shape));
    }
}

Tensor Tensor::zeros(std::vector<int> shape_in) { return full(std::move(shape_in), 0.0); }

Tensor Tensor::full(std::vector<int> shape_in, double value) {
    std::size_t n = shape_numel(shape_in);
    return Tensor(std::move(shape_in), std::vector<double>(n, value));
}

Tensor Tensor::scalar(double value) { return Tensor({1}, {value}); }

double& Tensor::operator()(int i) { return data[static_cast<std::size_t>(i)]; }
double& Tensor::operator()(int i, int j) {
    return data[static_cast<std::size_t>(i) * shape[1] + j];
}
double& Tensor::operator()(int i, int j, int k) {
    return data[(static_cast<std::size_t>(i) * shape[1] + j) * shape[2] + k];
}
double Tensor::operator()(int i) const { return data[static_cast<std::size_t>(i)]; }
double Tensor::operator()(int i, int j) const {
    return data[static_cast<std::size_t>(i) * shape[1] + j];
}
double Tensor::operator()(int i, int j, int k) const {
    return data[(static_cast<std::size_t>(i) * shape[1] + j) * shape[2] + k];
}

// ==================== Tape mechanics ====================

int Tape::record(const char* op, const std::vector<int>& shape, BackFn fn) {
    if (swept_) {
        throw ContractError("tape already swept by backward(); use a fresh tape");
    }
    nodes_.push_back(Node{op, shape, {}, std::move(fn)});
    return static_cast<int>(nodes_.size()) - 1;
}

std::vector<double>& Tape::grad_buffer(int node) {
    Node& n = nodes_[static_cast<std::size_t>(node)];
    if (n.grad.empty()) {
        n.grad.assign(shape_numel(n.shape), 0.0);
    }
    return n.grad;
}

Tensor Tape::leaf(const Tensor& value) {
    Tensor out = value;
    out.node = record("leaf", out.shape, {});
    return out;
}

void Tape::backward(const Tensor& loss) {
    if (loss.node < 0 || loss.node >= static_cast<int>(nodes_.size())) {
        throw ContractError("backward: loss is not on this tape");
    }
    if (loss.numel() != 1) {
        throw ContractError("backward: loss must be a scalar, got shape " +
                            shape_str(loss.shape));
    }
    if (swept_) {
        throw ContractError("backward: tape already swept");
    }
    swept_ = true;
    grad_buffer(loss.node)[0] = 1.0;
    for (int i = static_cast<int>(nodes_.size()) - 1; i >= 0; --i) {
        Node& n = nodes_[static_cast<std::size_t>(i)];
        if (!n.grad.empty() && n.backfn) {
            n.backfn(*this, n.grad);
        }
    }
}

std::vector<double> Tape::grad(const Tensor& t) const {
    if (t.node < 0 || t.node >= static_cast<int>(nodes_.size())) {
        throw ContractError("grad: tensor is not on this tape");
    }
    if (!swept_) {
        throw ContractError("grad: backward() has not run on this tape");
    }
    const Node& n = nodes_[static_cast<std::size_t>(t.node)];
    if (n.grad.empty()) {
        return std::vector<double>(shape_numel(n.shape), 0.0);
    }
    return n.grad;
}

// ==================== Elementwise ====================

Tensor Tape::add(const Tensor& a, const Tensor& b) {
    check_same_shape("add", a, b);
    Tensor out(a.shape, a.data);
    for (std::size_t i = 0; i < out.data.size(); ++i) {
        out.data[i] += b.data[i];
    }
    if (a.node >= 0 || b.node >= 0) {
        const int an = a.node, bn = b.node;
        out.node = record("add", out.shape, [an, bn](Tape& t, const std::vector<double>& g) {
            if (an >= 0) {
                auto& ga = t.grad_buffer(an);
                for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
            }
            if (bn >= 0) {
                auto& gb = t.grad_buffer(bn);
                for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
            }
        });
    }
    return out;
}

Tensor Tape::sub(const Tensor& a, const Tensor& b) {
    check_same_shape("sub", a, b);
    Tensor out(a.shape, a.data);
    for (std::size_t i = 0; i < out.data.size(); ++i) {
        out.data[i] -= b.data[i];
    }
    if (a.node >= 0 || b.node >= 0) {
        const int an = a.node, bn = b.node;
        out.node = record("sub", out.shape, [an, bn](Tape& t, const std::vector<double>& g) {
            if (an >= 0) {
                auto& ga = t.grad_buffer(an);
                for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
            }
            if (bn >= 0) {
                auto& gb = t.grad_buffer(bn);
                for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
            }
        });
    }
    return out;
}

Tensor Tape::mul_scalar(const Tensor& a, double c) {
    Tensor out(a.shape, a.data);
    for (double& v : out.data) {
        v *= c;
    }
    if (a.node >= 0) {
        const int an = a.node;
        out.node = record("mul_scalar", out.shape, [an, c](Tape& t, const std::vector<double>& g) {
            auto& ga = t.grad_buffer(an);
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += c * g[i];
        });
    }
    return out;
}

Tensor Tape::relu(const Tensor& a) {
    Tensor out(a.shape, a.data);
    for (double& v : out.data) {
        v = v > 0.0 ? v : 0.0;
    }
    if (a.node >= 0) {
        const int an = a.node;
        out.node = record("relu", out.shape,
                          [an, x = a.data](Tape& t, const std::vector<double>& g) {
                              auto& ga = t.grad_buffer(an);
                              for (std::size_t i = 0; i < g.size(); ++i) {
                                  if (x[i] > 0.0) ga[i] += g[i];
                              }
                          });
    }
    return out;
}

Tensor Tape::sum(const Tensor& a) {
    double s = 0.0;
    for (double v : a.data) {
        s += v;
    }
    Tensor out = Tensor::scalar(s);
    if (a.node >= 0) {
        const int an = a.node;
        const std::size_t n = a.numel();
        out.node = record("sum", out.shape, [an, n](Tape& t, const std::vector<double>& g) {
            auto& ga = t.grad_buffer(an);
            for (std::size_t i = 0; i < n; ++i) ga[i] += g[0];
        });
    }
    return out;
}

// ==================== Linear algebra ====================

Tensor Tape::matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2) {
        throw DimensionError("matmul: expected rank-2 operands, got " +
                             shape_str(a.shape) + " and " + shape_str(b.shape));
    }
    if (a.shape[1] != b.shape[0]) {
        throw DimensionError("matmul: inner extents differ, " + shape_str(a.shape) +
                             " vs " + shape_str(b.shape));
    }
    const int m = a.shape[0], k = a.shape[1], n = b.shape[1];
    Tensor out = Tensor::zeros({m, n});
    for (int i = 0; i < m; ++i) {
        const double* ar = &a.data[static_cast<std::size_t>(i) * k];
        double* or_ = &out.data[static_cast<std::size_t>(i) * n];
        for (int l = 0; l < k; ++l) {
            const double av = ar[l];
            const double* br = &b.data[static_cast<std::size_t>(l) * n];
            for (int j = 0; j < n; ++j) {
                or_[j] += av * br[j];
            }
        }
    }
    if (a.node >= 0 || b.node >= 0) {
        const int an = a.node, bn = b.node;
        out.node = record(
            "matmul", out.shape,
            [an, bn, av = a.data, bv = b.data, m, k, n](Tape& t, const std::vector<double>& g) {
                if (an >= 0) {
                    auto& ga = t.grad_buffer(an);
                    for (int i = 0; i < m; ++i) {
                        const double* gr = &g[static_cast<std::size_t>(i) * n];
                        double* gar = &ga[static_cast<std::size_t>(i) * k];
                        for (int j = 0; j < n; ++j) {
                            const double gv = gr[j];
                            const double* bc = &bv[j];
                            for (int l = 0; l < k; ++l) {
                                gar[l] += gv * bc[static_cast<std::size_t>(l) * n];
                            }
                        }
                    }
                }
                if (bn >= 0) {
                    auto& gb = t.grad_buffer(bn);
                    for (int i = 0; i < m; ++i) {
                        const double* gr = &g[static_cast<std::size_t>(i) * n];
                        const double* ar = &av[static_cast<std::size_t>(i) * k];
                        for (int l = 0; l < k; ++l) {
                            const double a_il = ar[l];
                            double* gbr = &gb[static_cast<std::size_t>(l) * n];
                            for (int j = 0; j < n; ++j) {
                                gbr[j] += a_il * gr[j];
                            }
                        }
                    }
                }
            });
    }
    return out;
}

Tensor Tape::linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
    if (weight.rank() != 2 || bias.rank() != 1) {
        throw DimensionError("linear: weight must be [out x in] and bias [out], got " +
                             shape_str(weight.shape) + " and " + shape_str(bias.shape));
    }
    const int out_f = weight.shape[0], in_f = weight.shape[1];
    if (last_extent(x) != in_f || bias.shape[0] != out_f) {
        throw DimensionError("linear: x " + shape_str(x.shape) + " incompatible with weight " +
                             shape_str(weight.shape) + ", bias " + shape_str(bias.shape));
    }
    const int rows = static_cast<int>(x.numel()) / in_f;
    std::vector<int> out_shape = x.shape;
    out_shape.back() = out_f;
    Tensor out = Tensor::zeros(out_shape);
    for (int r = 0; r < rows; ++r) {
        const double* xr = &x.data[static_cast<std::size_t>(r) * in_f];
        double* yr = &out.data[static_cast<std::size_t>(r) * out_f];
        for (int o = 0; o < out_f; ++o) {
            const double* wr = &weight.data[static_cast<std::size_t>(o) * in_f];
            double acc = bias.data[static_cast<std::size_t>(o)];
            for (int i = 0; i < in_f; ++i) {
                acc += xr[i] * wr[i];
            }
            yr[o] = acc;
        }
    }
    if (x.node >= 0 || weight.node >= 0 || bias.node >= 0) {
        const int xn = x.node, wn = weight.node, bn = bias.node;
        out.node = record(
            "linear", out.shape,
            [xn, wn, bn, xv = x.data, wv = weight.data, rows, in_f,
             out_f](Tape& t, const std::vector<double>& g) {
                if (xn >= 0) {
                    auto& gx = t.grad_buffer(xn);
                    for (int r = 0; r < rows; ++r) {
                        const double* gr = &g[static_cast<std::size_t>(r) * out_f];
                        double* gxr = &gx[static_cast<std::size_t>(r) * in_f];
                        for (int o = 0; o < out_f; ++o) {
                            const double gv = gr[o];
                            const double* wr = &wv[static_cast<std::size_t>(o) * in_f];
                            for (int i = 0; i < in_f; ++i) {
                                gxr[i] += gv * wr[i];
                            }
                        }
                    }
                }
                if (wn >= 0) {
                    auto& gw = t.grad_buffer(wn);
                    for (int r = 0; r < rows; ++r) {
                        const double* gr = &g[static_cast<std::size_t>(r) * out_f];
                        const double* xr = &xv[static_cast<std::size_t>(r) * in_f];
                        for (int o = 0; o < out_f; ++o) {
                            const double gv = gr[o];
                            double* gwr = &gw[static_cast<std::size_t>(o) * in_f];
                            for (int i = 0; i < in_f; ++i) {
                                gwr[i] += gv * xr[i];
                            }
                        }
                    }
                }
                if (bn >= 0) {
                    auto& gb = t.grad_buffer(bn);
                    for (int r = 0; r < rows; ++r) {
                        const double* gr = &g[static_cast<std::size_t>(r) * out_f];
                        for (int o = 0; o < out_f; ++o) {
                            gb[static_cast<std::size_t>(o)] += gr[o];
                        }
                    }
                }
            });
    }
    return out;
}

namespace {

void check_bmm(const char* op, const Tensor& a, const Tensor& b, int b_inner_dim) {
    if (a.rank() != 3 || b.rank() != 3 || a.shape[0] != b.shape[0] ||
        a.shape[2] != b.shape[b_inner_dim]) {
        throw DimensionError(std::string(op) + ": incompatible shapes " +
                             shape_str(a.shape) + " and " + shape_str(b.shape));
    }
}

}  // namespace

Tensor Tape::bmm(const Tensor& a, const Tensor& b) {
    check_bmm("bmm", a, b, 1);
    const int nb = a.shape[0], m = a.shape[1], k = a.shape[2], n = b.shape[2];
    Tensor out = Tensor::zeros({nb, m, n});
    for (int s = 0; s < nb; ++s) {
        const double* as = &a.data[static_cast<std::size_t>(s) * m * k];
        const double* bs = &b.data[static_cast<std::size_t>(s) * k * n];
        double* os = &out.data[static_cast<std::size_t>(s) * m * n];
        for (int i = 0; i < m; ++i) {
            for (int l = 0; l < k; ++l) {
                const double av = as[static_cast<std::size_t>(i) * k + l];
                const double* br = &bs[static_cast<std::size_t>(l) * n];
                double* or_ = &os[static_cast<std::size_t>(i) * n];
                for (int j = 0; j < n; ++j) {
                    or_[j] += av * br[j];
                }
            }
        }
    }
    if (a.node >= 0 || b.node >= 0) {
        const int an = a.node, bn = b.node;
        out.node = record(
            "bmm", out.shape,
            [an, bn, av = a.data, bv = b.data, nb, m, k, n](Tape& t, const std::vector<double>& g) {
                for (int s = 0; s < nb; ++s) {
                    const double* gs = &g[static_cast<std::size_t>(s) * m * n];
                    const double* as = &av[static_cast<std::size_t>(s) * m * k];
                    const double* bs = &bv[static_cast<std::size_t>(s) * k * n];
                    if (an >= 0) {
                        double* gas = &t.grad_buffer(an)[static_cast<std::size_t>(s) * m * k];
                        for (int i = 0; i < m; ++i) {
                            for (int j = 0; j < n; ++j) {
                                const double gv = gs[static_cast<std::size_t>(i) * n + j];
                                for (int l = 0; l < k; ++l) {
                                    gas[static_cast<std::size_t>(i) * k + l] +=
                                        gv * bs[static_cast<std::size_t>(l) * n + j];
                                }
                            }
                        }
                    }
                    if (bn >= 0) {
                        double* gbs = &t.grad_buffer(bn)[static_cast<std::size_t>(s) * k * n];
                        for (int i = 0; i < m; ++i) {
                            for (int l = 0; l < k; ++l) {
                                const double a_il = as[static_cast<std::size_t>(i) * k + l];
                                const double* gr = &gs[static_cast<std::size_t>(i) * n];
                                double* gbr = &gbs[static_cast<std::size_t>(l) * n];
                                for (int j = 0; j < n; ++j) {
                                    gbr[j] += a_il * gr[j];
                                }
                            }
                        }
                    }
                }
            });
    }
    return out;
}

Tensor Tape::bmm_nt(const Tensor& a, const Tensor& b) {
    check_bmm("bmm_nt", a, b, 2);
    const int nb = a.shape[0], m = a.shape[1], k = a.shape[2], n = b.shape[1];
    Tensor out = Tensor::zeros({nb, m, n});
    for (int s = 0; s < nb; ++s) {
        const double* as = &a.data[static_cast<std::size_t>(s) * m * k];
        const double* bs = &b.data[static_cast<std::size_t>(s) * n * k];
        double* os = &out.data[static_cast<std::size_t>(s) * m * n];
        for (int i = 0; i < m; ++i) {
            const double* ar = &as[static_cast<std::size_t>(i) * k];
            double* or_ = &os[static_cast<std::size_t>(i) * n];
            for (int j = 0; j < n; ++j) {
                const double* br = &bs[static_cast<std::size_t>(j) * k];
                double acc = 0.0;
                for (int l = 0; l < k; ++l) {
                    acc += ar[l] * br[l];
                }
                or_[j] = acc;
            }
        }
    }
    if (a.node >= 0 || b.node >= 0) {
        const int an = a.node, bn = b.node;
        out.node = record(
            "bmm_nt", out.shape,
            [an, bn, av = a.data, bv = b.data, nb, m, k, n](Tape& t, const std::vector<double>& g) {
                for (int s = 0; s < nb; ++s) {
                    const double* gs = &g[static_cast<std::size_t>(s) * m * n];
                    const double* as = &av[static_cast<std::size_t>(s) * m * k];
                    const double* bs = &bv[static_cast<std::size_t>(s) * n * k];
                    if (an >= 0) {
                        double* gas = &t.grad_buffer(an)[static_cast<std::size_t>(s) * m * k];
                        for (int i = 0; i < m; ++i) {
                            const double* gr = &gs[static_cast<std::size_t>(i) * n];
                            double* gar = &gas[static_cast<std::size_t>(i) * k];
                            for (int j = 0; j < n; ++j) {
                                const double gv = gr[j];
                                const double* br = &bs[static_cast<std::size_t>(j) * k];
                                for (int l = 0; l < k; ++l) {
                                    gar[l] += gv * br[l];
                                }
                            }
                        }
                    }
                    if (bn >= 0) {
                        double* gbs = &t.grad_buffer(bn)[static_cast<std::size_t>(s) * n * k];
                        for (int i = 0; i < m; ++i) {
                            const double* gr = &gs[static_cast<std::size_t>(i) * n];
                            const double* ar = &as[static_cast<std::size_t>(i) * k];
                            for (int j = 0; j < n; ++j) {
                                const double gv = gr[j];
                                double* gbr = &gbs[static_cast<std::size_t>(j) * k];
                                for (int l = 0; l < k; ++l) {
                                    gbr[l] += gv * ar[l];
                                }
                            }
                        }
                    }
                }
            });
    }
    return out;
}

// ==================== Attention data movement ====================

Tensor Tape::split_heads(const Tensor& x, int nhead) {
    if (x.rank() != 3) {
        throw DimensionError("split_heads: expected [S,B,D], got " + shape_str(x.shape));
    }
    const int S = x.shape[0], B = x.shape[1], D = x.shape[2];
    if (nhead < 1 || D % nhead != 0) {
        throw DimensionError("split_heads: feature extent " + std::to_string(D) +
                             " not divisible by nhead " + std::to_string(nhead));
    }
    const int dk = D / nhead;
    Tensor out = Tensor::zeros({B * nhead, S, dk});
    for (int s = 0; s < S; ++s) {
        for (int b = 0; b < B; ++b) {
            const double* xr = &x.data[(static_cast<std::size_t>(s) * B + b) * D];
            for (int h = 0; h < nhead; ++h) {
                double* orow = &out.data[((static_cast<std::size_t>(b) * nhead + h) * S + s) * dk];
                std::copy(xr + static_cast<std::size_t>(h) * dk,
                          xr + static_cast<std::size_t>(h + 1) * dk, orow);
            }
        }
    }
    if (x.node >= 0) {
        const int xn = x.node;
        out.node = record("split_heads", out.shape,
                          [xn, S, B, D, nhead, dk](Tape& t, const std::vector<double>& g) {
                              auto& gx = t.grad_buffer(xn);
                              for (int s = 0; s < S; ++s) {
                                  for (int b = 0; b < B; ++b) {
                                      double* gxr = &gx[(static_cast<std::size_t>(s) * B + b) * D];
                                      for (int h = 0; h < nhead; ++h) {
                                          const double* grow =
                                              &g[((static_cast<std::size_t>(b) * nhead + h) * S + s) * dk];
                                          for (int j = 0; j < dk; ++j) {
                                              gxr[static_cast<std::size_t>(h) * dk + j] += grow[j];
                                          }
                                      }
                                  }
                              }
                          });
    }
    return out;
}

Tensor Tape::merge_heads(const Tensor& x, int nhead) {
    if (x.rank() != 3) {
        throw DimensionError("merge_heads: expected [B*H,S,dk], got " + shape_str(x.shape));
    }
    const int N = x.shape[0], S = x.shape[1], dk = x.shape[2];
    if (nhead < 1 || N % nhead != 0) {
        throw DimensionError("merge_heads: leading extent " + std::to_string(N) +
                             " not divisible by nhead " + std::to_string(nhead));
    }
    const int B = N / nhead, D = dk * nhead;
    Tensor out = Tensor::zeros({S, B, D});
    for (int b = 0; b < B; ++b) {
        for (int h = 0; h < nhead; ++h) {
            for (int s = 0; s < S; ++s) {
                const double* xr = &x.data[((static_cast<std::size_t>(b) * nhead + h) * S + s) * dk];
                double* orow = &out.data[(static_cast<std::size_t>(s) * B + b) * D +
                                         static_cast<std::size_t>(h) * dk];
                std::copy(xr, xr + dk, orow);
            }
        }
    }
    if (x.node >= 0) {
        const int xn = x.node;
        out.node = record("merge_heads", out.shape,
                          [xn, S, B, D, nhead, dk](Tape& t, const std::vector<double>& g) {
                              auto& gx = t.grad_buffer(xn);
                              for (int b = 0; b < B; ++b) {
                                  for (int h = 0; h < nhead; ++h) {
                                      for (int s = 0; s < S; ++s) {
                                          double* gxr =
                                              &gx[((static_cast<std::size_t>(b) * nhead + h) * S + s) * dk];
                                          const double* grow =
                                              &g[(static_cast<std::size_t>(s) * B + b) * D +
                                                 static_cast<std::size_t>(h) * dk];
                                          for (int j = 0; j < dk; ++j) {
                                              gxr[j] += grow[j];
                                          }
                                      }
                                  }
                              }
                          });
    }
    return out;
}

Tensor Tape::apply_attn_mask(const Tensor& scores, const Tensor* attn_mask,
                             const Tensor* key_padding, int nhead) {
    if (scores.rank() != 3) {
        throw DimensionError("apply_attn_mask: expected [N,Sq,Sk], got " +
                             shape_str(scores.shape));
    }
    const int N = scores.shape[0], Sq = scores.shape[1], Sk = scores.shape[2];
    if (attn_mask) {
        if (attn_mask->rank() != 2 || attn_mask->shape[0] != Sq || attn_mask->shape[1] != Sk) {
            throw DimensionError("apply_attn_mask: mask " + shape_str(attn_mask->shape) +
                                 " does not match scores " + shape_str(scores.shape));
        }
    }
    if (key_padding) {
        if (key_padding->rank() != 2 || key_padding->shape[1] != Sk ||
            nhead < 1 || key_padding->shape[0] * nhead != N) {
            throw DimensionError("apply_attn_mask: key padding " + shape_str(key_padding->shape) +
                                 " does not match scores " + shape_str(scores.shape) +
                                 " with nhead " + std::to_string(nhead));
        }
    }
    Tensor out(scores.shape, scores.data);
    for (int s = 0; s < N; ++s) {
        const int b = nhead >= 1 ? s / nhead : 0;
        for (int i = 0; i < Sq; ++i) {
            double* row = &out.data[(static_cast<std::size_t>(s) * Sq + i) * Sk];
            for (int j = 0; j < Sk; ++j) {
                if (attn_mask) {
                    row[j] += (*attn_mask)(i, j);
                }
                if (key_padding && (*key_padding)(b, j) != 0.0) {
                    row[j] = kNegInf;
                }
            }
        }
    }
    if (scores.node >= 0) {
        const int sn = scores.node;
        out.node = record("apply_attn_mask", out.shape,
                          [sn](Tape& t, const std::vector<double>& g) {
                              auto& gs = t.grad_buffer(sn);
                              for (std::size_t i = 0; i < g.size(); ++i) gs[i] += g[i];
                          });
    }
    return out;
}

// ==================== Normalization and loss ====================

Tensor Tape::softmax_lastdim(const Tensor& x) {
    const int d = last_extent(x);
    if (d < 1) {
        throw DimensionError("softmax_lastdim: empty last extent");
    }
    for (double v : x.data) {
        if (std::isnan(v) || v == std::numeric_limits<double>::infinity()) {
            throw NumericError("softmax_lastdim: input contains NaN or +inf");
        }
    }
    const std::size_t slices = x.numel() / static_cast<std::size_t>(d);
    Tensor out = Tensor::zeros(x.shape);
    for (std::size_t s = 0; s < slices; ++s) {
        const double* xr = &x.data[s * d];
        double* or_ = &out.data[s * d];
        double m = kNegInf;
        for (int i = 0; i < d; ++i) {
            m = std::max(m, xr[i]);
        }
        if (m == kNegInf) {
            // fully masked slice: all weights zero
            continue;
        }
        double total = 0.0;
        for (int i = 0; i < d; ++i) {
            or_[i] = std::exp(xr[i] - m);
            total += or_[i];
        }
        for (int i = 0; i < d; ++i) {
            or_[i] /= total;
        }
    }
    if (x.node >= 0) {
        const int xn = x.node;
        out.node = record("softmax_lastdim", out.shape,
                          [xn, w = out.data, slices, d](Tape& t, const std::vector<double>& g) {
                              auto& gx = t.grad_buffer(xn);
                              for (std::size_t s = 0; s < slices; ++s) {
                                  const double* ws = &w[s * d];
                                  const double* gs = &g[s * d];
                                  double dot = 0.0;
                                  for (int i = 0; i < d; ++i) {
                                      dot += ws[i] * gs[i];
                                  }
                                  for (int i = 0; i < d; ++i) {
                                      gx[s * d + i] += ws[i] * (gs[i] - dot);
                                  }
                              }
                          });
    }
    return out;
}

Tensor Tape::layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
    const int d = last_extent(x);
    if (gain.shape != std::vector<int>{d} || bias.shape != std::vector<int>{d}) {
        throw DimensionError("layer_norm: gain " + shape_str(gain.shape) + " / bias " +
                             shape_str(bias.shape) + " must both be [" + std::to_string(d) + "]");
    }
    const std::size_t slices = x.numel() / static_cast<std::size_t>(d);
    Tensor out = Tensor::zeros(x.shape);
    std::vector<double> xhat(x.numel());
    std::vector<double> inv_std(slices);
    for (std::size_t s = 0; s < slices; ++s) {
        const double* xr = &x.data[s * d];
        double mean = 0.0;
        for (int i = 0; i < d; ++i) {
            mean += xr[i];
        }
        mean /= d;
        double var = 0.0;
        for (int i = 0; i < d; ++i) {
            const double c = xr[i] - mean;
            var += c * c;
        }
        var /= d;
        const double istd = 1.0 / std::sqrt(var + eps);
        inv_std[s] = istd;
        for (int i = 0; i < d; ++i) {
            const double xh = (xr[i] - mean) * istd;
            xhat[s * d + i] = xh;
            out.data[s * d + i] = gain.data[static_cast<std::size_t>(i)] * xh +
                                  bias.data[static_cast<std::size_t>(i)];
        }
    }
    if (x.node >= 0 || gain.node >= 0 || bias.node >= 0) {
        const int xn = x.node, gn = gain.node, bn = bias.node;
        out.node = record(
            "layer_norm", out.shape,
            [xn, gn, bn, xhat = std::move(xhat), inv_std = std::move(inv_std),
             gv = gain.data, slices, d](Tape& t, const std::vector<double>& g) {
                if (gn >= 0) {
                    auto& gg = t.grad_buffer(gn);
                    for (std::size_t s = 0; s < slices; ++s) {
                        for (int i = 0; i < d; ++i) {
                            gg[static_cast<std::size_t>(i)] += g[s * d + i] * xhat[s * d + i];
                        }
                    }
                }
                if (bn >= 0) {
                    auto& gb = t.grad_buffer(bn);
                    for (std::size_t s = 0; s < slices; ++s) {
                        for (int i = 0; i < d; ++i) {
                            gb[static_cast<std::size_t>(i)] += g[s * d + i];
                        }
                    }
                }
                if (xn >= 0) {
                    auto& gx = t.grad_buffer(xn);
                    for (std::size_t s = 0; s < slices; ++s) {
                        // dxhat_i = g_i * gain_i; dx = istd*(dxhat - mean(dxhat)
                        //           - xhat * mean(dxhat .* xhat))
                        double m1 = 0.0, m2 = 0.0;
                        for (int i = 0; i < d; ++i) {
                            const double dxh = g[s * d + i] * gv[static_cast<std::size_t>(i)];
                            m1 += dxh;
                            m2 += dxh * xhat[s * d + i];
                        }
                        m1 /= d;
                        m2 /= d;
                        for (int i = 0; i < d; ++i) {
                            const double dxh = g[s * d + i] * gv[static_cast<std::size_t>(i)];
                            gx[s * d + i] += inv_std[s] * (dxh - m1 - xhat[s * d + i] * m2);
                        }
                    }
                }
            });
    }
    return out;
}

Tensor Tape::dropout(const Tensor& x, double p, Mode mode, Rng* rng) {
    if (p < 0.0 || p >= 1.0) {
        throw ContractError("dropout: p must be in [0,1), got " + std::to_string(p));
    }
    if (mode == Mode::kEval || p == 0.0) {
        return x;
    }
    if (!rng) {
        throw ContractError("dropout: train mode with p > 0 requires an rng");
    }
    const double scale = 1.0 / (1.0 - p);
    std::vector<double> mask(x.numel());
    Tensor out(x.shape, x.data);
    for (std::size_t i = 0; i < mask.size(); ++i) {
        mask[i] = rng->uniform() < p ? 0.0 : scale;
        out.data[i] *= mask[i];
    }
    if (x.node >= 0) {
        const int xn = x.node;
        out.node = record("dropout", out.shape,
                          [xn, mask = std::move(mask)](Tape& t, const std::vector<double>& g) {
                              auto& gx = t.grad_buffer(xn);
                              for (std::size_t i = 0; i < g.size(); ++i) {
                                  gx[i] += g[i] * mask[i];
                              }
                          });
    }
    return out;
}

Tensor Tape::concat_seq(const Tensor& a, const Tensor& b) {
    if (a.rank() != b.rank() || a.rank() < 1 ||
        !std::equal(a.shape.begin() + 1, a.shape.end(), b.shape.begin() + 1)) {
        throw DimensionError("concat_seq: shapes " + shape_str(a.shape) + " and " +
                             shape_str(b.shape) + " differ beyond the sequence extent");
    }
    std::vector<int> out_shape = a.shape;
    out_shape[0] += b.shape[0];
    Tensor out = Tensor::zeros(out_shape);
    std::copy(a.data.begin(), a.data.end(), out.data.begin());
    std::copy(b.data.begin(), b.data.end(), out.data.begin() + static_cast<long>(a.numel()));
    if (a.node >= 0 || b.node >= 0) {
        const int an = a.node, bn = b.node;
        const std::size_t na = a.numel(), nb_ = b.numel();
        out.node = record("concat_seq", out.shape,
                          [an, bn, na, nb_](Tape& t, const std::vector<double>& g) {
                              if (an >= 0) {
                                  auto& ga = t.grad_buffer(an);
                                  for (std::size_t i = 0; i < na; ++i) ga[i] += g[i];
                              }
                              if (bn >= 0) {
                                  auto& gb = t.grad_buffer(bn);
                                  for (std::size_t i = 0; i < nb_; ++i) gb[i] += g[na + i];
                              }
                          });
    }
    return out;
}

Tensor Tape::slice_seq(const Tensor& x, int first, int last) {
    if (x.rank() < 1) {
        throw DimensionError("slice_seq: expected rank >= 1");
    }
    if (first < 0 || last <= first || last > x.shape[0]) {
        throw ContractError("slice_seq: invalid range [" + std::to_string(first) + ", " +
                            std::to_string(last) + ") for sequence extent " +
                            std::to_string(x.shape[0]));
    }
    const std::size_t row = x.numel() / static_cast<std::size_t>(x.shape[0]);
    std::vector<int> out_shape = x.shape;
    out_shape[0] = last - first;
    Tensor out = Tensor::zeros(out_shape);
    std::copy(x.data.begin() + static_cast<long>(first * row),
              x.data.begin() + static_cast<long>(last * row), out.data.begin());
    if (x.node >= 0) {
        const int xn = x.node;
        out.node = record("slice_seq", out.shape,
                          [xn, first, row](Tape& t, const std::vector<double>& g) {
                              auto& gx = t.grad_buffer(xn);
                              const std::size_t off = static_cast<std::size_t>(first) * row;
                              for (std::size_t i = 0; i < g.size(); ++i) {
                                  gx[off + i] += g[i];
                              }
                          });
    }
    return out;
}

Tensor Tape::mse_loss(const Tensor& pred, const Tensor& target) {
    check_same_shape("mse_loss", pred, target);
    const std::size_t n = pred.numel();
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double diff = pred.data[i] - target.data[i];
        acc += diff * diff;
    }
    Tensor out = Tensor::scalar(acc / static_cast<double>(n));
    if (pred.node >= 0 || target.node >= 0) {
        const int pn = pred.node, tn = target.node;
        out.node = record("mse_loss", out.shape,
                          [pn, tn, pv = pred.data, tv = target.data,
                           n](Tape& t, const std::vector<double>& g) {
                              const double s = 2.0 * g[0] / static_cast<double>(n);
                              if (pn >= 0) {
                                  auto& gp = t.grad_buffer(pn);
                                  for (std::size_t i = 0; i < n; ++i) {
                                      gp[i] += s * (pv[i] - tv[i]);
                                  }
                              }
                              if (tn >= 0) {
                                  auto& gt = t.grad_buffer(tn);
                                  for (std::size_t i = 0; i < n; ++i) {
                                      gt[i] -= s * (pv[i] - tv[i]);
                                  }
                              }
                          });
    }
    return out;
}

}  // namespace tsf
