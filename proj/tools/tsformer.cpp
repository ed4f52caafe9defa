// tsformer: train and evaluate small continuous-value sequence-to-sequence
// transformers (MiTS and PoTS variants) on sinusoid forecasting tasks.

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "tsf/data.hpp"
#include "tsf/eval.hpp"
#include "tsf/gradcheck.hpp"
#include "tsf/model.hpp"
#include "tsf/recipes.hpp"
#include "tsf/report.hpp"
#include "tsf/train.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitNumeric = 2;
constexpr int kExitIo = 3;

struct ModelFlags {
    std::string kind = "mits";
    int d_input = 1;
    int d_model = 8;
    int nhead = 2;
    int ff = 8;
    int pos_expansion = 64;
    double dropout = 0.1;

    tsf::ModelConfig to_config() const {
        tsf::ModelConfig cfg;
        cfg.kind = tsf::model_kind_from_string(kind);
        cfg.d_input = d_input;
        cfg.d_model = d_model;
        cfg.nhead = nhead;
        cfg.dim_feedforward = ff;
        cfg.dropout_p = dropout;
        cfg.pos_expansion_dim = cfg.kind == tsf::ModelKind::kPots ? pos_expansion : 0;
        cfg.validate();
        return cfg;
    }
};

void add_model_flags(CLI::App* cmd, ModelFlags& flags) {
    cmd->add_option("--kind", flags.kind, "model kind: mits or pots")
        ->check(CLI::IsMember({"mits", "pots"}));
    cmd->add_option("--d-input", flags.d_input, "input feature dimension");
    cmd->add_option("--d-model", flags.d_model, "model dimension");
    cmd->add_option("--nhead", flags.nhead, "attention heads");
    cmd->add_option("--ff", flags.ff, "feed-forward dimension");
    cmd->add_option("--pos-expansion", flags.pos_expansion,
                    "positional expansion dimension (pots only)");
    cmd->add_option("--dropout", flags.dropout, "dropout probability");
}

void print_progress(const std::string& label, int epochs) {
    std::cerr << label << ": training for " << epochs << " epochs\n";
}

std::function<void(int, double)> progress_printer(int epochs) {
    return [epochs](int epoch, double loss) {
        if ((epoch + 1) % 100 == 0 || epoch + 1 == epochs) {
            std::fprintf(stderr, "  epoch %d/%d  loss %.6f\n", epoch + 1, epochs, loss);
        }
    };
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"small continuous-value seq2seq transformers for sinusoid forecasting"};
    app.require_subcommand(1);

    // ---- gen-data ----
    auto* gen = app.add_subcommand("gen-data", "generate a sinusoid dataset");
    std::string gen_type = "type1";
    tsf::DatasetSpec gen_spec;
    std::string gen_out_train, gen_out_test;
    std::uint64_t gen_seed = 0;
    gen->add_option("--type", gen_type, "type1, type2 or type3")
        ->check(CLI::IsMember({"type1", "type2", "type3", "1", "2", "3"}));
    gen->add_option("--repeat", gen_spec.repeat, "type1: copies per split");
    gen->add_option("--w-list", gen_spec.w_list, "type2: waves-per-L values")
        ->delimiter(',');
    gen->add_option("--w-max", gen_spec.w_max, "type3: upper frequency bound");
    gen->add_option("--n-train", gen_spec.n_train, "training sequences");
    gen->add_option("--n-test", gen_spec.n_test, "test sequences");
    gen->add_option("--seed", gen_seed, "draw seed (type3)");
    gen->add_option("--out-train", gen_out_train, "training csv path")->required();
    gen->add_option("--out-test", gen_out_test, "test csv path")->required();

    // ---- count-params ----
    auto* count = app.add_subcommand("count-params", "print the learnable parameter total");
    ModelFlags count_flags;
    add_model_flags(count, count_flags);

    // ---- gradcheck ----
    auto* gcheck = app.add_subcommand(
        "gradcheck", "compare tape gradients against finite differences on a tiny model");
    std::uint64_t gc_seed = 12345;
    double gc_tol = 1e-4;
    gcheck->add_option("--seed", gc_seed, "initialization seed");
    gcheck->add_option("--tolerance", gc_tol, "maximum relative error")
        ->check(CLI::PositiveNumber);

    // ---- train ----
    auto* tr = app.add_subcommand("train", "train a model on a dataset csv");
    ModelFlags tr_flags;
    add_model_flags(tr, tr_flags);
    std::string tr_data, tr_out_ckpt, tr_out_curve;
    tsf::TrainConfig tr_cfg;
    tr->add_option("--data", tr_data, "training csv path")->required();
    tr->add_option("--lr", tr_cfg.lr0, "initial learning rate");
    tr->add_option("--milestones", tr_cfg.schedule.milestones,
                   "epochs at which the rate decays by gamma")
        ->delimiter(',');
    tr->add_option("--gamma", tr_cfg.schedule.gamma, "decay factor");
    tr->add_option("--epochs", tr_cfg.epochs, "training epochs");
    tr->add_option("--batch-size", tr_cfg.batch_size, "mini-batch size");
    tr->add_option("--seed", tr_cfg.seed, "run seed");
    tr->add_option("--out-checkpoint", tr_out_ckpt, "checkpoint output path")->required();
    tr->add_option("--out-loss-curve", tr_out_curve, "loss curve csv output path");

    // ---- eval / forecast ----
    auto* ev = app.add_subcommand("eval", "forecast a test csv from a checkpoint");
    ev->alias("forecast");
    std::string ev_ckpt, ev_data, ev_traces, ev_summary;
    ev->add_option("--checkpoint", ev_ckpt, "checkpoint path")->required();
    ev->add_option("--data", ev_data, "test csv path")->required();
    ev->add_option("--out-traces", ev_traces, "directory for per-sequence trace files");
    ev->add_option("--out-summary", ev_summary, "summary output path");

    // ---- run ----
    auto* run = app.add_subcommand("run", "run a named experiment recipe end to end");
    std::string run_name;
    std::uint64_t run_seed = 1;
    std::string run_out = "runs";
    run->add_option("recipe", run_name, "recipe name")->required();
    run->add_option("--seed", run_seed, "run seed");
    run->add_option("--out-dir", run_out, "base output directory")
        ->envname("TSFORMER_OUT_DIR");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (*gen) {
            gen_spec.kind = tsf::data_kind_from_string(gen_type);
            gen_spec.seed = gen_seed;
            tsf::Dataset dataset = tsf::build_dataset(gen_spec);
            tsf::write_sequences_csv(gen_out_train, dataset.train);
            tsf::write_sequences_csv(gen_out_test, dataset.test);
            std::cout << "wrote " << dataset.train.size() << " training and "
                      << dataset.test.size() << " test sequences\n";
            return kExitOk;
        }

        if (*count) {
            std::cout << tsf::count_params(count_flags.to_config()) << "\n";
            return kExitOk;
        }

        if (*gcheck) {
            bool ok = true;
            for (tsf::ModelKind kind : {tsf::ModelKind::kMits, tsf::ModelKind::kPots}) {
                tsf::GradCheckReport report =
                    tsf::model_gradcheck(tsf::gradcheck_toy_config(kind), gc_seed, gc_tol);
                std::cout << to_string(kind) << " toy, tolerance " << gc_tol << "\n";
                for (const tsf::GradCheckGroup& g : report.groups) {
                    std::printf("  %-45s %.3e%s\n", g.name.c_str(), g.max_rel_err,
                                g.max_rel_err < gc_tol ? "" : "  FAIL");
                }
                std::printf("  worst %.3e -> %s\n", report.worst(),
                            report.passed() ? "pass" : "FAIL");
                ok = ok && report.passed();
            }
            return ok ? kExitOk : kExitNumeric;
        }

        if (*tr) {
            tsf::ModelConfig cfg = tr_flags.to_config();
            tr_cfg.validate();
            std::vector<tsf::SequencePair> data = tsf::read_sequences_csv(tr_data);
            print_progress("train", tr_cfg.epochs);
            tsf::TrainResult result = tsf::train(cfg, tsf::init_params(cfg, tr_cfg.seed), data,
                                                 tr_cfg, progress_printer(tr_cfg.epochs));
            tsf::save_checkpoint(result.params, cfg, tr_out_ckpt);
            if (!tr_out_curve.empty()) {
                tsf::write_loss_curve_csv(tr_out_curve, result.loss_curve);
            }
            if (!result.loss_curve.empty()) {
                std::cout << "final loss " << result.loss_curve.back().second << " after "
                          << result.loss_curve.size() << " epochs\n";
            }
            return kExitOk;
        }

        if (*ev) {
            auto [params, cfg] = tsf::load_checkpoint(ev_ckpt);
            std::vector<tsf::SequencePair> test = tsf::read_sequences_csv(ev_data);
            tsf::Transformer model(cfg);
            tsf::RunReport report = tsf::evaluate(model, params, test);
            if (!ev_traces.empty()) {
                std::error_code ec;
                std::filesystem::create_directories(ev_traces, ec);
                if (ec) {
                    throw tsf::IoError("cannot create '" + ev_traces + "': " + ec.message());
                }
                for (std::size_t i = 0; i < report.per_sequence.size(); ++i) {
                    char name[64];
                    std::snprintf(name, sizeof(name), "/seq_%03zu.csv", i);
                    tsf::write_trace_csv(ev_traces + name, test[i],
                                         report.per_sequence[i].forecast);
                }
            }
            if (!ev_summary.empty()) {
                tsf::write_summary(ev_summary, report);
            }
            std::cout << tsf::summary_line(report) << "\n";
            return kExitOk;
        }

        if (*run) {
            const tsf::ExperimentRecipe* recipe = tsf::find_recipe(run_name);
            if (!recipe) {
                std::cerr << "unknown recipe '" << run_name << "'; valid names:";
                for (const std::string& name : tsf::recipe_names()) {
                    std::cerr << " " << name;
                }
                std::cerr << "\n";
                return kExitUsage;
            }
            const std::string dir = run_out + "/" + run_name + "-seed" + std::to_string(run_seed);
            print_progress(run_name, recipe->train.epochs);
            tsf::RunReport report =
                tsf::run_recipe(*recipe, run_seed, dir, progress_printer(recipe->train.epochs));
            std::cout << tsf::summary_line(report) << "\n";
            std::cout << "artifacts in " << dir << "\n";
            return kExitOk;
        }
    } catch (const tsf::NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const tsf::IoError& e) {
        std::cerr << "i/o error: " << e.what() << "\n";
        return kExitIo;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }
    return kExitUsage;
}
