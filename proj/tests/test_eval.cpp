#include <cmath>
#include <numbers>

#include "doctest.h"
#include "tsf/eval.hpp"
#include "tsf/train.hpp"

using namespace tsf;

namespace {

ModelConfig tiny_cfg() {
    ModelConfig cfg;
    cfg.d_model = 4;
    cfg.nhead = 2;
    cfg.dim_feedforward = 4;
    return cfg;
}

}  // namespace

TEST_CASE("forecast is deterministic and contract-checked") {
    ModelConfig cfg = tiny_cfg();
    Transformer model(cfg);
    ModelParams p = init_params(cfg, 9);
    SequencePair item = make_sequence_pair(1.0);

    std::vector<double> a = forecast(model, p, item.src);
    std::vector<double> b = forecast(model, p, item.src);
    CHECK(a.size() == 12);
    CHECK(a == b);

    CHECK_THROWS_AS(forecast(model, p, item.src, 0), ContractError);
    CHECK_THROWS_AS(forecast(model, p, std::vector<double>(7, 0.0)), ContractError);
}

TEST_CASE("each forecast step extends the previous ones unchanged") {
    ModelConfig cfg = tiny_cfg();
    Transformer model(cfg);
    ModelParams p = init_params(cfg, 13);
    SequencePair item = make_sequence_pair(2.0);

    std::vector<double> full = forecast(model, p, item.src, 12);
    for (int h = 1; h < 12; ++h) {
        std::vector<double> partial = forecast(model, p, item.src, h);
        REQUIRE(partial.size() == static_cast<std::size_t>(h));
        for (int t = 0; t < h; ++t) {
            CHECK(partial[static_cast<std::size_t>(t)] == full[static_cast<std::size_t>(t)]);
        }
    }
}

TEST_CASE("teacher-forced one-step output equals the first forecast step") {
    ModelConfig cfg = tiny_cfg();
    Transformer model(cfg);
    ModelParams p = init_params(cfg, 21);
    SequencePair item = make_sequence_pair(1.5);

    Tensor src({kSrcLen, 1, 1}, item.src);
    Tensor dec({1, 1, 1}, {item.src.back()});
    Tape tape;
    Tensor out = model.forward(tape, p, src, dec, causal_mask(1), Mode::kEval, nullptr);

    std::vector<double> preds = forecast(model, p, item.src, 1);
    CHECK(preds[0] == out(0, 0, 0));
}

TEST_CASE("a perfect predictor scores zero error") {
    DatasetSpec spec;
    spec.kind = DataKind::kType2;
    spec.w_list = {0, 1, 2};
    spec.n_train = 3;
    spec.n_test = 6;
    Dataset d = build_dataset(spec);
    RunReport r = evaluate_with([](const SequencePair& item) { return item.tgt; }, d.test);
    CHECK(r.test_err == 0.0);
    for (const SequenceEval& e : r.per_sequence) {
        CHECK(e.sse == 0.0);
    }
}

TEST_CASE("a constant-zero predictor scores the signal energy") {
    std::vector<SequencePair> test = {make_sequence_pair(1.0)};
    RunReport r = evaluate_with(
        [](const SequencePair&) { return std::vector<double>(kTgtLen, 0.0); }, test);

    // direct summation over the horizon
    double want = 0.0;
    for (int t = kSrcLen; t < kSeqLen; ++t) {
        const double y = std::sin(2.0 * std::numbers::pi * t / kSeqLen);
        want += y * y;
    }
    CHECK(r.test_err == doctest::Approx(want).epsilon(1e-12));
    CHECK(want == doctest::Approx(7.414628696393367).epsilon(1e-12));
}

TEST_CASE("test error is the sequence-count-weighted mean of subset errors") {
    DatasetSpec spec;
    spec.kind = DataKind::kType3;
    spec.n_train = 1;
    spec.n_test = 10;
    spec.seed = 31;
    Dataset d = build_dataset(spec);

    ModelConfig cfg = tiny_cfg();
    Transformer model(cfg);
    ModelParams p = init_params(cfg, 5);

    std::vector<SequencePair> first(d.test.begin(), d.test.begin() + 4);
    std::vector<SequencePair> second(d.test.begin() + 4, d.test.end());

    RunReport all = evaluate(model, p, d.test);
    RunReport ra = evaluate(model, p, first);
    RunReport rb = evaluate(model, p, second);
    const double want = (ra.test_err * 4 + rb.test_err * 6) / 10.0;
    CHECK(all.test_err == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("test error is permutation-invariant") {
    DatasetSpec spec;
    spec.kind = DataKind::kType3;
    spec.n_train = 1;
    spec.n_test = 8;
    spec.seed = 37;
    Dataset d = build_dataset(spec);

    ModelConfig cfg = tiny_cfg();
    Transformer model(cfg);
    ModelParams p = init_params(cfg, 5);

    RunReport fwd = evaluate(model, p, d.test);
    std::vector<SequencePair> reversed(d.test.rbegin(), d.test.rend());
    RunReport rev = evaluate(model, p, reversed);
    CHECK(fwd.test_err == doctest::Approx(rev.test_err).epsilon(1e-12));
}

TEST_CASE("evaluate rejects an empty test set") {
    ModelConfig cfg = tiny_cfg();
    Transformer model(cfg);
    ModelParams p = init_params(cfg, 5);
    CHECK_THROWS_AS(evaluate(model, p, {}), ContractError);
}
