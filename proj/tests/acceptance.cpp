// Acceptance suite: one pass/fail line per criterion, nonzero exit when any
// criterion fails. The training criteria run the full fixed-rate recipes, so
// a complete run takes several minutes.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "fd.hpp"
#include "tsf/eval.hpp"
#include "tsf/gradcheck.hpp"
#include "tsf/recipes.hpp"
#include "tsf/train.hpp"

using namespace tsf;

namespace {

std::vector<double> random_values(std::size_t n, Rng& rng, double lo = -1.0, double hi = 1.0) {
    std::vector<double> v(n);
    for (double& x : v) {
        x = rng.uniform(lo, hi);
    }
    return v;
}

// ---------- criterion 1 ----------

bool parameter_counts(std::string& detail) {
    auto mits = [](int d) {
        ModelConfig c;
        c.d_model = d;
        return c;
    };
    auto pots = [](int e) {
        ModelConfig c;
        c.kind = ModelKind::kPots;
        c.pos_expansion_dim = e;
        return c;
    };
    const std::vector<std::pair<ModelConfig, long long>> cases = {
        {mits(8), 1289},  {mits(16), 4097},  {mits(32), 14321}, {mits(128), 204689},
        {pots(8), 1433},  {pots(64), 2385},  {pots(128), 3473},
    };
    for (const auto& [cfg, want] : cases) {
        const long long got = count_params(cfg);
        if (got != want) {
            detail = "count " + std::to_string(got) + " != " + std::to_string(want);
            return false;
        }
    }
    detail = "all published totals exact";
    return true;
}

// ---------- criterion 2 ----------

double op_fd_worst() {
    Rng rng(2024);
    double worst = 0.0;
    auto check = [&](const std::function<double(const std::vector<double>&)>& f,
                     const std::vector<double>& x0, const std::vector<double>& analytic) {
        worst = std::max(worst, fd::max_rel_err(analytic, fd::numeric_grad(f, x0)));
    };

    {  // matmul, both operands
        const auto a0 = random_values(12, rng), b0 = random_values(20, rng);
        const auto t0 = random_values(15, rng);
        Tape t;
        Tensor a = t.leaf(Tensor({3, 4}, a0));
        Tensor b = t.leaf(Tensor({4, 5}, b0));
        t.backward(t.mse_loss(t.matmul(a, b), Tensor({3, 5}, t0)));
        check([&](const std::vector<double>& v) {
            Tape q;
            return q.mse_loss(q.matmul(Tensor({3, 4}, v), Tensor({4, 5}, b0)), Tensor({3, 5}, t0)).data[0];
        }, a0, t.grad(a));
        check([&](const std::vector<double>& v) {
            Tape q;
            return q.mse_loss(q.matmul(Tensor({3, 4}, a0), Tensor({4, 5}, v)), Tensor({3, 5}, t0)).data[0];
        }, b0, t.grad(b));
    }
    {  // linear: x, weight, bias
        const auto x0 = random_values(12, rng), w0 = random_values(12, rng),
                   b0 = random_values(3, rng), t0 = random_values(9, rng);
        Tape t;
        Tensor x = t.leaf(Tensor({3, 1, 4}, x0));
        Tensor w = t.leaf(Tensor({3, 4}, w0));
        Tensor b = t.leaf(Tensor({3}, b0));
        t.backward(t.mse_loss(t.linear(x, w, b), Tensor({3, 1, 3}, t0)));
        auto f = [&](const std::vector<double>& xv, const std::vector<double>& wv,
                     const std::vector<double>& bv) {
            Tape q;
            return q.mse_loss(q.linear(Tensor({3, 1, 4}, xv), Tensor({3, 4}, wv), Tensor({3}, bv)),
                              Tensor({3, 1, 3}, t0))
                .data[0];
        };
        check([&](const std::vector<double>& v) { return f(v, w0, b0); }, x0, t.grad(x));
        check([&](const std::vector<double>& v) { return f(x0, v, b0); }, w0, t.grad(w));
        check([&](const std::vector<double>& v) { return f(x0, w0, v); }, b0, t.grad(b));
    }
    {  // softmax + masking + mse
        const auto x0 = random_values(24, rng, -2.0, 2.0);
        const auto t0 = random_values(24, rng);
        Tensor mask = causal_mask(4);
        auto f = [&](const std::vector<double>& v) {
            Tape q;
            Tensor s = q.apply_attn_mask(Tensor({2, 4, 4}, v), &mask, nullptr, 1);
            return q.mse_loss(q.softmax_lastdim(s), Tensor({2, 4, 4}, t0)).data[0];
        };
        Tape t;
        Tensor x = t.leaf(Tensor({2, 4, 4}, x0));
        Tensor s = t.apply_attn_mask(x, &mask, nullptr, 1);
        t.backward(t.mse_loss(t.softmax_lastdim(s), Tensor({2, 4, 4}, t0)));
        check(f, x0, t.grad(x));
    }
    {  // layer_norm: x, gain, bias
        const auto x0 = random_values(12, rng), g0 = random_values(4, rng, 0.5, 1.5),
                   b0 = random_values(4, rng), t0 = random_values(12, rng);
        auto f = [&](const std::vector<double>& xv, const std::vector<double>& gv,
                     const std::vector<double>& bv) {
            Tape q;
            return q
                .mse_loss(q.layer_norm(Tensor({3, 4}, xv), Tensor({4}, gv), Tensor({4}, bv), 1e-5),
                          Tensor({3, 4}, t0))
                .data[0];
        };
        Tape t;
        Tensor x = t.leaf(Tensor({3, 4}, x0));
        Tensor g = t.leaf(Tensor({4}, g0));
        Tensor b = t.leaf(Tensor({4}, b0));
        t.backward(t.mse_loss(t.layer_norm(x, g, b, 1e-5), Tensor({3, 4}, t0)));
        check([&](const std::vector<double>& v) { return f(v, g0, b0); }, x0, t.grad(x));
        check([&](const std::vector<double>& v) { return f(x0, v, b0); }, g0, t.grad(g));
        check([&](const std::vector<double>& v) { return f(x0, g0, v); }, b0, t.grad(b));
    }
    {  // relu + add + sub + mul_scalar chain
        const auto x0 = random_values(10, rng, -2.0, 2.0);
        const auto y0 = random_values(10, rng);
        const auto t0 = random_values(10, rng);
        auto f = [&](const std::vector<double>& v) {
            Tape q;
            Tensor x({10}, v);
            Tensor z = q.sub(q.add(q.relu(x), Tensor({10}, y0)), q.mul_scalar(x, 0.3));
            return q.mse_loss(z, Tensor({10}, t0)).data[0];
        };
        Tape t;
        Tensor x = t.leaf(Tensor({10}, x0));
        Tensor z = t.sub(t.add(t.relu(x), Tensor({10}, y0)), t.mul_scalar(x, 0.3));
        t.backward(t.mse_loss(z, Tensor({10}, t0)));
        check(f, x0, t.grad(x));
    }
    {  // dropout in train mode under a fixed stream
        const auto x0 = random_values(40, rng);
        const auto t0 = random_values(40, rng);
        auto f = [&](const std::vector<double>& v) {
            Rng r(7);
            Tape q;
            return q.mse_loss(q.dropout(Tensor({40}, v), 0.25, Mode::kTrain, &r), Tensor({40}, t0))
                .data[0];
        };
        Tape t;
        Rng r(7);
        Tensor x = t.leaf(Tensor({40}, x0));
        t.backward(t.mse_loss(t.dropout(x, 0.25, Mode::kTrain, &r), Tensor({40}, t0)));
        check(f, x0, t.grad(x));
    }
    {  // concat_seq + slice_seq
        const auto a0 = random_values(8, rng), b0 = random_values(12, rng);
        const auto t0 = random_values(12, rng);
        auto f = [&](const std::vector<double>& v) {
            Tape q;
            Tensor c = q.concat_seq(Tensor({2, 2, 2}, v), Tensor({3, 2, 2}, b0));
            return q.mse_loss(q.slice_seq(c, 1, 4), Tensor({3, 2, 2}, t0)).data[0];
        };
        Tape t;
        Tensor a = t.leaf(Tensor({2, 2, 2}, a0));
        Tensor c = t.concat_seq(a, Tensor({3, 2, 2}, b0));
        t.backward(t.mse_loss(t.slice_seq(c, 1, 4), Tensor({3, 2, 2}, t0)));
        check(f, a0, t.grad(a));
    }
    {  // batched products and head movement
        const auto q0 = random_values(12, rng), k0 = random_values(12, rng),
                   v0 = random_values(12, rng);
        const auto t0 = random_values(12, rng);
        auto f = [&](const std::vector<double>& qv) {
            Tape q;
            Tensor qh = q.split_heads(Tensor({3, 2, 2}, qv), 2);
            Tensor kh = q.split_heads(Tensor({3, 2, 2}, k0), 2);
            Tensor vh = q.split_heads(Tensor({3, 2, 2}, v0), 2);
            Tensor w = q.softmax_lastdim(q.bmm_nt(qh, kh));
            return q.mse_loss(q.merge_heads(q.bmm(w, vh), 2), Tensor({3, 2, 2}, t0)).data[0];
        };
        Tape t;
        Tensor q = t.leaf(Tensor({3, 2, 2}, q0));
        Tensor qh = t.split_heads(q, 2);
        Tensor kh = t.split_heads(Tensor({3, 2, 2}, k0), 2);
        Tensor vh = t.split_heads(Tensor({3, 2, 2}, v0), 2);
        Tensor w = t.softmax_lastdim(t.bmm_nt(qh, kh));
        t.backward(t.mse_loss(t.merge_heads(t.bmm(w, vh), 2), Tensor({3, 2, 2}, t0)));
        check(f, q0, t.grad(q));
    }
    return worst;
}

bool gradient_correctness(std::string& detail) {
    const double op_worst = op_fd_worst();
    double model_worst = 0.0;
    for (ModelKind kind : {ModelKind::kMits, ModelKind::kPots}) {
        GradCheckReport report = model_gradcheck(gradcheck_toy_config(kind), 12345, 1e-4);
        model_worst = std::max(model_worst, report.worst());
    }
    char buf[128];
    std::snprintf(buf, sizeof(buf), "worst rel err: ops %.2e, full models %.2e (< 1e-4)",
                  op_worst, model_worst);
    detail = buf;
    return op_worst < 1e-4 && model_worst < 1e-4;
}

// ---------- criterion 3 ----------

bool causality(std::string& detail) {
    ModelConfig cfg;  // d_model 8, nhead 2, ff 8
    Transformer model(cfg);
    ModelParams params = init_params(cfg, 5);
    Rng rng(6);

    const int B = 2;
    Tensor src({kSrcLen, B, 1}, random_values(kSrcLen * B, rng));
    Tensor tgt({kTgtLen, B, 1}, random_values(kTgtLen * B, rng));
    Tensor mask = causal_mask(kTgtLen);

    Tape base_tape;
    Tensor base = model.forward(base_tape, params, src, tgt, mask, Mode::kEval, nullptr);

    for (int trial = 0; trial < 100; ++trial) {
        const int cut = static_cast<int>(rng.below(kTgtLen - 1));
        Tensor perturbed = tgt;
        for (int s = cut + 1; s < kTgtLen; ++s) {
            for (int b = 0; b < B; ++b) {
                perturbed(s, b, 0) += rng.uniform(-3.0, 3.0);
            }
        }
        Tape tape;
        Tensor out = model.forward(tape, params, src, perturbed, mask, Mode::kEval, nullptr);
        for (int s = 0; s <= cut; ++s) {
            for (int b = 0; b < B; ++b) {
                if (out(s, b, 0) != base(s, b, 0)) {
                    detail = "output changed at position " + std::to_string(s) +
                             " after perturbing > " + std::to_string(cut);
                    return false;
                }
            }
        }
    }
    detail = "100 perturbations, prefixes bit-identical";
    return true;
}

// ---------- criteria 4 and 5 ----------

struct ConvergenceOutcome {
    int good_seeds = 0;
    double best_loss = 1e300;
    double best_sse = 1e300;
};

ConvergenceOutcome run_convergence(const ExperimentRecipe& recipe, double loss_limit,
                                   bool check_sse, double sse_limit) {
    Dataset dataset = build_dataset(recipe.data);
    Transformer model(recipe.model);
    ConvergenceOutcome outcome;
    for (std::uint64_t seed : {1, 2, 3}) {
        TrainConfig tc = recipe.train;
        tc.seed = seed;
        TrainResult result =
            train(recipe.model, init_params(recipe.model, seed), dataset.train, tc);
        double min_loss = 1e300;
        for (const auto& [epoch, loss] : result.loss_curve) {
            min_loss = std::min(min_loss, loss);
        }
        outcome.best_loss = std::min(outcome.best_loss, min_loss);
        bool ok = min_loss < loss_limit;
        if (check_sse) {
            std::vector<double> preds = forecast(model, result.params, dataset.test[0].src);
            double sse = 0.0;
            for (int t = 0; t < kTgtLen; ++t) {
                const double diff = preds[static_cast<std::size_t>(t)] -
                                    dataset.test[0].tgt[static_cast<std::size_t>(t)];
                sse += diff * diff;
            }
            outcome.best_sse = std::min(outcome.best_sse, sse);
            ok = ok && sse < sse_limit;
        }
        outcome.good_seeds += ok ? 1 : 0;
    }
    return outcome;
}

bool type1_convergence(std::string& detail) {
    const ExperimentRecipe* recipe = find_recipe("type1-mits8");
    ConvergenceOutcome o = run_convergence(*recipe, 0.01, true, 1.0);
    char buf[128];
    std::snprintf(buf, sizeof(buf), "%d/3 seeds reached MSE<0.01 and SSE<1.0 (best %.4f / %.4f)",
                  o.good_seeds, o.best_loss, o.best_sse);
    detail = buf;
    return o.good_seeds >= 2;
}

bool type2_convergence(std::string& detail) {
    const ExperimentRecipe* recipe = find_recipe("type2-mits8");
    ConvergenceOutcome o = run_convergence(*recipe, 0.03, false, 0.0);
    char buf[128];
    std::snprintf(buf, sizeof(buf), "%d/3 seeds reached MSE<0.03 (best %.4f)", o.good_seeds,
                  o.best_loss);
    detail = buf;
    return o.good_seeds >= 2;
}

// ---------- criterion 6 ----------

double median3(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return v[1];
}

bool type3_ordering(std::string& detail) {
    std::vector<std::string> names = {"type3-mits8", "type3-mits16", "type3-pots64"};
    std::vector<double> medians;
    for (const std::string& name : names) {
        const ExperimentRecipe* recipe = find_recipe(name);
        Dataset dataset = build_dataset(recipe->data);
        Transformer model(recipe->model);
        std::vector<double> errs;
        for (std::uint64_t seed : {1, 2, 3}) {
            TrainConfig tc = recipe->train;
            tc.seed = seed;
            TrainResult result =
                train(recipe->model, init_params(recipe->model, seed), dataset.train, tc);
            errs.push_back(evaluate(model, result.params, dataset.test).test_err);
        }
        medians.push_back(median3(errs));
    }
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "median err mits8 %.3f, mits16 %.3f, pots64 %.3f (need mits16 < mits8 and "
                  "pots64 < mits8)",
                  medians[0], medians[1], medians[2]);
    detail = buf;
    return medians[1] < medians[0] && medians[2] < medians[0];
}

// ---------- criterion 7 ----------

bool positional_table(std::string& detail) {
    for (int d_enc : {8, 64, 128}) {
        PositionalEncoder pe(d_enc, 64, 0.0);
        for (int pos = 0; pos < 31; ++pos) {
            for (int i = 0; i < d_enc; ++i) {
                const double div = std::pow(10000.0, static_cast<double>(i - i % 2) / d_enc);
                const double want = i % 2 == 0 ? std::sin(pos / div) : std::cos(pos / div);
                if (std::fabs(pe.table()(pos, i) - want) > 1e-12) {
                    detail = "mismatch at d_enc " + std::to_string(d_enc) + ", pos " +
                             std::to_string(pos) + ", i " + std::to_string(i);
                    return false;
                }
            }
        }
    }
    detail = "d_enc in {8,64,128}, pos in [0,31), within 1e-12";
    return true;
}

// ---------- criterion 8 ----------

bool pots_identity_reduction(std::string& detail) {
    ModelConfig mc;  // mits d8
    ModelConfig pc;
    pc.kind = ModelKind::kPots;
    pc.pos_expansion_dim = pc.d_model;

    ModelParams mp = init_params(mc, 23);
    ModelParams pp;
    for (const ParamSpec& spec : param_specs(pc)) {
        if (spec.name.rfind("pos_", 0) == 0) {
            Tensor t = Tensor::zeros(spec.shape);
            if (spec.shape.size() == 2) {
                for (int i = 0; i < spec.shape[0]; ++i) {
                    t(i, i) = 1.0;
                }
            }
            pp.add(spec.name, std::move(t));
        } else {
            pp.add(spec.name, mp.at(spec.name));
        }
    }

    Transformer mits(mc), pots(pc);
    Rng rng(29);
    Tensor mask = causal_mask(kTgtLen);
    for (int trial = 0; trial < 10; ++trial) {
        Tensor src({kSrcLen, 2, 1}, random_values(kSrcLen * 2, rng));
        Tensor tgt({kTgtLen, 2, 1}, random_values(kTgtLen * 2, rng));
        Tape t1, t2;
        Tensor a = mits.forward(t1, mp, src, tgt, mask, Mode::kEval, nullptr);
        Tensor b = pots.forward(t2, pp, src, tgt, mask, Mode::kEval, nullptr);
        if (a.data != b.data) {
            detail = "outputs differ on trial " + std::to_string(trial);
            return false;
        }
    }
    detail = "10 random inputs, outputs bit-identical";
    return true;
}

// ---------- criterion 9 ----------

bool checkpoint_roundtrip(std::string& detail) {
    ModelConfig cfg;
    cfg.kind = ModelKind::kPots;
    cfg.pos_expansion_dim = 16;
    Transformer model(cfg);
    ModelParams params = init_params(cfg, 99);

    const std::string path = "acceptance_ckpt.tmp";
    save_checkpoint(params, cfg, path);
    auto [loaded, loaded_cfg] = load_checkpoint(path);
    std::remove(path.c_str());
    Transformer reloaded(loaded_cfg);

    Rng rng(101);
    for (int trial = 0; trial < 10; ++trial) {
        std::vector<double> src = random_values(kSrcLen, rng);
        std::vector<double> a = forecast(model, params, src);
        std::vector<double> b = forecast(reloaded, loaded, src);
        if (a != b) {
            detail = "forecast differs on input " + std::to_string(trial);
            return false;
        }
    }
    detail = "10 random inputs, forecasts bit-identical";
    return true;
}

}  // namespace

int main() {
    struct Criterion {
        int id;
        const char* label;
        std::function<bool(std::string&)> run;
    };
    const std::vector<Criterion> criteria = {
        {1, "parameter-count exactness", parameter_counts},
        {2, "gradient correctness", gradient_correctness},
        {3, "decoder causality", causality},
        {4, "type 1 convergence", type1_convergence},
        {5, "type 2 convergence", type2_convergence},
        {6, "type 3 model ordering", type3_ordering},
        {7, "positional encoding closed form", positional_table},
        {8, "pots identity reduction", pots_identity_reduction},
        {9, "checkpoint round-trip", checkpoint_roundtrip},
    };

    int failures = 0;
    for (const Criterion& c : criteria) {
        std::string detail;
        bool ok = false;
        try {
            ok = c.run(detail);
        } catch (const std::exception& e) {
            detail = std::string("exception: ") + e.what();
        }
        std::printf("[%s] criterion %d: %s — %s\n", ok ? "PASS" : "FAIL", c.id, c.label,
                    detail.c_str());
        std::fflush(stdout);
        failures += ok ? 0 : 1;
    }
    if (failures) {
        std::printf("%d of %zu criteria failed\n", failures, criteria.size());
    } else {
        std::printf("all %zu criteria passed\n", criteria.size());
    }
    return failures == 0 ? 0 : 1;
}
