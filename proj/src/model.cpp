#include "tsf/model.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace tsf {

std::string to_string(ModelKind kind) {
    return kind == ModelKind::kMits ? "mits" : "pots";
}

ModelKind model_kind_from_string(const std::string& s) {
    if (s == "mits") return ModelKind::kMits;
    if (s == "pots") return ModelKind::kPots;
    throw ContractError("unknown model kind '" + s + "' (expected mits or pots)");
}

void ModelConfig::validate() const {
    if (d_input < 1 || d_model < 1 || nhead < 1 || dim_feedforward < 1 || max_len < 1) {
        throw ContractError("model config: all extents must be >= 1");
    }
    if (d_model % nhead != 0) {
        throw ContractError("model config: d_model " + std::to_string(d_model) +
                            " not divisible by nhead " + std::to_string(nhead));
    }
    if (kind == ModelKind::kPots && pos_expansion_dim < 1) {
        throw ContractError("model config: pots requires pos_expansion_dim >= 1");
    }
    if (dropout_p < 0.0 || dropout_p >= 1.0) {
        throw ContractError("model config: dropout_p must be in [0,1)");
    }
}

std::vector<ParamSpec> param_specs(const ModelConfig& cfg) {
    cfg.validate();
    const int d = cfg.d_model, f = cfg.dim_feedforward, in = cfg.d_input;
    std::vector<ParamSpec> specs;
    specs.push_back({"embedding.weight", {d, in}});
    specs.push_back({"embedding.bias", {d}});
    specs.push_back({"unembedding.weight", {in, d}});
    specs.push_back({"unembedding.bias", {in}});
    if (cfg.kind == ModelKind::kPots) {
        const int e = cfg.pos_expansion_dim;
        specs.push_back({"pos_expansion.weight", {e, d}});
        specs.push_back({"pos_expansion.bias", {e}});
        specs.push_back({"pos_invexpansion.weight", {d, e}});
        specs.push_back({"pos_invexpansion.bias", {d}});
    }
    auto attn = [&](const std::string& prefix) {
        specs.push_back({prefix + ".in_proj_weight", {3 * d, d}});
        specs.push_back({prefix + ".in_proj_bias", {3 * d}});
        specs.push_back({prefix + ".out_proj.weight", {d, d}});
        specs.push_back({prefix + ".out_proj.bias", {d}});
    };
    auto ffn = [&](const std::string& prefix) {
        specs.push_back({prefix + ".linear1.weight", {f, d}});
        specs.push_back({prefix + ".linear1.bias", {f}});
        specs.push_back({prefix + ".linear2.weight", {d, f}});
        specs.push_back({prefix + ".linear2.bias", {d}});
    };
    auto norm = [&](const std::string& prefix) {
        specs.push_back({prefix + ".gain", {d}});
        specs.push_back({prefix + ".bias", {d}});
    };
    attn("encoder.layer0.self_attn");
    ffn("encoder.layer0");
    norm("encoder.layer0.norm1");
    norm("encoder.layer0.norm2");
    norm("encoder.norm");
    attn("decoder.layer0.self_attn");
    attn("decoder.layer0.cross_attn");
    ffn("decoder.layer0");
    norm("decoder.layer0.norm1");
    norm("decoder.layer0.norm2");
    norm("decoder.layer0.norm3");
    norm("decoder.norm");
    return specs;
}

long long count_params(const ModelConfig& cfg) {
    long long total = 0;
    for (const ParamSpec& s : param_specs(cfg)) {
        total += static_cast<long long>(shape_numel(s.shape));
    }
    return total;
}

void ModelParams::add(std::string name, Tensor value) {
    if (index_.count(name)) {
        throw ContractError("parameter '" + name + "' registered twice");
    }
    index_[name] = items_.size();
    items_.emplace_back(std::move(name), std::move(value));
}

const Tensor& ModelParams::at(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) {
        throw ContractError("unknown parameter '" + name + "'");
    }
    return items_[it->second].second;
}

Tensor& ModelParams::at(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) {
        throw ContractError("unknown parameter '" + name + "'");
    }
    return items_[it->second].second;
}

long long ModelParams::total_elements() const {
    long long total = 0;
    for (const auto& [name, t] : items_) {
        total += static_cast<long long>(t.numel());
    }
    return total;
}

namespace {

bool ends_with(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

ModelParams init_params(const ModelConfig& cfg, std::uint64_t seed) {
    Rng rng(seed);
    ModelParams params;
    for (const ParamSpec& spec : param_specs(cfg)) {
        Tensor t = Tensor::zeros(spec.shape);
        if (spec.shape.size() >= 2) {
            const double fan_out = static_cast<double>(spec.shape[0]);
            const double fan_in = static_cast<double>(spec.shape[1]);
            const double bound = std::sqrt(6.0 / (fan_in + fan_out));
            for (double& v : t.data) {
                v = rng.uniform(-bound, bound);
            }
        } else if (ends_with(spec.name, ".gain")) {
            for (double& v : t.data) {
                v = 1.0;
            }
        }
        params.add(spec.name, std::move(t));
    }
    return params;
}

// ==================== Assembly and forward ====================

Transformer::Transformer(ModelConfig cfg) : cfg_(cfg) {
    cfg_.validate();
    posenc_ = PositionalEncoder(cfg_.pos_dim(), cfg_.max_len, cfg_.dropout_p);
}

BoundModel Transformer::bind(Tape& tape, const ModelParams& params, bool trainable) const {
    BoundModel bm;
    auto get = [&](const std::string& name, const std::vector<int>& shape) -> Tensor {
        const Tensor& value = params.at(name);
        if (value.shape != shape) {
            throw DimensionError("parameter '" + name + "' has shape " + shape_str(value.shape) +
                                 ", expected " + shape_str(shape));
        }
        if (!trainable) {
            return value;
        }
        Tensor leafed = tape.leaf(value);
        bm.leaves.emplace_back(name, leafed);
        return leafed;
    };
    const int d = cfg_.d_model, f = cfg_.dim_feedforward, in = cfg_.d_input;

    bm.embedding = {get("embedding.weight", {d, in}), get("embedding.bias", {d})};
    bm.unembedding = {get("unembedding.weight", {in, d}), get("unembedding.bias", {in})};
    if (cfg_.kind == ModelKind::kPots) {
        const int e = cfg_.pos_expansion_dim;
        bm.pos_expansion = {get("pos_expansion.weight", {e, d}), get("pos_expansion.bias", {e})};
        bm.pos_invexpansion = {get("pos_invexpansion.weight", {d, e}),
                               get("pos_invexpansion.bias", {d})};
    }
    auto attn = [&](const std::string& prefix) {
        MultiHeadAttention a;
        a.d_model = d;
        a.nhead = cfg_.nhead;
        a.dropout_p = cfg_.dropout_p;
        a.in_proj_weight = get(prefix + ".in_proj_weight", {3 * d, d});
        a.in_proj_bias = get(prefix + ".in_proj_bias", {3 * d});
        a.out_proj = {get(prefix + ".out_proj.weight", {d, d}), get(prefix + ".out_proj.bias", {d})};
        return a;
    };
    auto norm = [&](const std::string& prefix) {
        return LayerNorm{get(prefix + ".gain", {d}), get(prefix + ".bias", {d})};
    };

    bm.core.encoder.self_attn = attn("encoder.layer0.self_attn");
    bm.core.encoder.linear1 = {get("encoder.layer0.linear1.weight", {f, d}),
                               get("encoder.layer0.linear1.bias", {f})};
    bm.core.encoder.linear2 = {get("encoder.layer0.linear2.weight", {d, f}),
                               get("encoder.layer0.linear2.bias", {d})};
    bm.core.encoder.norm1 = norm("encoder.layer0.norm1");
    bm.core.encoder.norm2 = norm("encoder.layer0.norm2");
    bm.core.encoder.dropout_p = cfg_.dropout_p;
    bm.core.encoder_norm = norm("encoder.norm");

    bm.core.decoder.self_attn = attn("decoder.layer0.self_attn");
    bm.core.decoder.cross_attn = attn("decoder.layer0.cross_attn");
    bm.core.decoder.linear1 = {get("decoder.layer0.linear1.weight", {f, d}),
                               get("decoder.layer0.linear1.bias", {f})};
    bm.core.decoder.linear2 = {get("decoder.layer0.linear2.weight", {d, f}),
                               get("decoder.layer0.linear2.bias", {d})};
    bm.core.decoder.norm1 = norm("decoder.layer0.norm1");
    bm.core.decoder.norm2 = norm("decoder.layer0.norm2");
    bm.core.decoder.norm3 = norm("decoder.layer0.norm3");
    bm.core.decoder.dropout_p = cfg_.dropout_p;
    bm.core.decoder_norm = norm("decoder.norm");
    return bm;
}

Tensor Transformer::forward(Tape& tape, const BoundModel& bound, const Tensor& src,
                            const Tensor& tgt, const Tensor& tgt_mask, Mode mode, Rng* rng,
                            const Tensor* src_key_padding, const Tensor* tgt_key_padding) const {
    if (src.rank() != 3 || src.shape[2] != cfg_.d_input) {
        throw DimensionError("forward: src must be [S,B," + std::to_string(cfg_.d_input) +
                             "], got " + shape_str(src.shape));
    }
    if (tgt.rank() != 3 || tgt.shape[2] != cfg_.d_input) {
        throw DimensionError("forward: tgt must be [T,B," + std::to_string(cfg_.d_input) +
                             "], got " + shape_str(tgt.shape));
    }
    const double scale = std::sqrt(static_cast<double>(cfg_.d_model));
    Tensor src_e = tape.mul_scalar(bound.embedding.forward(tape, src), scale);
    Tensor tgt_e = tape.mul_scalar(bound.embedding.forward(tape, tgt), scale);

    if (cfg_.kind == ModelKind::kPots) {
        src_e = bound.pos_expansion.forward(tape, src_e);
        src_e = posenc_.forward(tape, src_e, mode, rng);
        src_e = bound.pos_invexpansion.forward(tape, src_e);
        tgt_e = bound.pos_expansion.forward(tape, tgt_e);
        tgt_e = posenc_.forward(tape, tgt_e, mode, rng);
        tgt_e = bound.pos_invexpansion.forward(tape, tgt_e);
    } else {
        src_e = posenc_.forward(tape, src_e, mode, rng);
        tgt_e = posenc_.forward(tape, tgt_e, mode, rng);
    }

    Tensor out = bound.core.forward(tape, src_e, tgt_e, tgt_mask, src_key_padding,
                                    tgt_key_padding, mode, rng);
    return bound.unembedding.forward(tape, out);
}

Tensor Transformer::forward(Tape& tape, const ModelParams& params, const Tensor& src,
                            const Tensor& tgt, const Tensor& tgt_mask, Mode mode, Rng* rng) const {
    return forward(tape, bind(tape, params, false), src, tgt, tgt_mask, mode, rng);
}

// ==================== Checkpoint I/O ====================

namespace {

constexpr const char* kMagic = "tsformer-checkpoint v1";

std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

double parse_double(const std::string& token, const std::string& where) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
    if (ec != std::errc{} || ptr != token.data() + token.size()) {
        throw IntegrityError("checkpoint: bad numeric value in " + where);
    }
    return v;
}

long long parse_int(const std::string& token, const std::string& where) {
    long long v = 0;
    auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
    if (ec != std::errc{} || ptr != token.data() + token.size()) {
        throw IntegrityError("checkpoint: bad integer value in " + where);
    }
    return v;
}

std::string next_line(std::istream& in, const std::string& where) {
    std::string line;
    if (!std::getline(in, line)) {
        throw IntegrityError("checkpoint: truncated before " + where);
    }
    return line;
}

std::string expect_field(std::istream& in, const std::string& key) {
    std::string line = next_line(in, key);
    if (line.rfind(key + " ", 0) != 0) {
        throw SchemaError("checkpoint: expected field '" + key + "', got '" + line + "'");
    }
    return line.substr(key.size() + 1);
}

}  // namespace

void save_checkpoint(const ModelParams& params, const ModelConfig& cfg, const std::string& path) {
    cfg.validate();
    std::ofstream out(path);
    if (!out) {
        throw IoError("cannot open '" + path + "' for writing");
    }
    out << kMagic << "\n";
    out << "kind " << to_string(cfg.kind) << "\n";
    out << "d_input " << cfg.d_input << "\n";
    out << "d_model " << cfg.d_model << "\n";
    out << "nhead " << cfg.nhead << "\n";
    out << "dim_feedforward " << cfg.dim_feedforward << "\n";
    out << "dropout_p " << format_double(cfg.dropout_p) << "\n";
    out << "pos_expansion_dim " << cfg.pos_expansion_dim << "\n";
    out << "max_len " << cfg.max_len << "\n";
    const auto specs = param_specs(cfg);
    out << "params " << specs.size() << "\n";
    for (const ParamSpec& spec : specs) {
        const Tensor& t = params.at(spec.name);
        if (t.shape != spec.shape) {
            throw DimensionError("save_checkpoint: parameter '" + spec.name + "' has shape " +
                                 shape_str(t.shape) + ", expected " + shape_str(spec.shape));
        }
        out << "param " << spec.name << " " << t.rank();
        for (int e : t.shape) {
            out << " " << e;
        }
        out << "\n";
        for (std::size_t i = 0; i < t.data.size(); ++i) {
            if (i) out << " ";
            out << format_double(t.data[i]);
        }
        out << "\n";
    }
    out << "end\n";
    if (!out) {
        throw IoError("write to '" + path + "' failed");
    }
}

std::pair<ModelParams, ModelConfig> load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open '" + path + "' for reading");
    }
    if (next_line(in, "header") != kMagic) {
        throw SchemaError("checkpoint: missing '" + std::string(kMagic) + "' header");
    }
    ModelConfig cfg;
    cfg.kind = model_kind_from_string(expect_field(in, "kind"));
    cfg.d_input = static_cast<int>(parse_int(expect_field(in, "d_input"), "d_input"));
    cfg.d_model = static_cast<int>(parse_int(expect_field(in, "d_model"), "d_model"));
    cfg.nhead = static_cast<int>(parse_int(expect_field(in, "nhead"), "nhead"));
    cfg.dim_feedforward =
        static_cast<int>(parse_int(expect_field(in, "dim_feedforward"), "dim_feedforward"));
    cfg.dropout_p = parse_double(expect_field(in, "dropout_p"), "dropout_p");
    cfg.pos_expansion_dim =
        static_cast<int>(parse_int(expect_field(in, "pos_expansion_dim"), "pos_expansion_dim"));
    cfg.max_len = static_cast<int>(parse_int(expect_field(in, "max_len"), "max_len"));
    try {
        cfg.validate();
    } catch (const ContractError& e) {
        throw SchemaError("checkpoint: invalid config: " + std::string(e.what()));
    }

    const auto specs = param_specs(cfg);
    const long long declared = parse_int(expect_field(in, "params"), "params");
    if (declared != static_cast<long long>(specs.size())) {
        throw SchemaError("checkpoint: declares " + std::to_string(declared) +
                          " parameters, config requires " + std::to_string(specs.size()));
    }

    ModelParams params;
    for (const ParamSpec& spec : specs) {
        std::istringstream head(next_line(in, "param " + spec.name));
        std::string tag, name;
        long long rank = 0;
        head >> tag >> name >> rank;
        if (tag != "param" || head.fail()) {
            throw IntegrityError("checkpoint: malformed record where parameter '" + spec.name +
                                 "' was expected");
        }
        if (name != spec.name) {
            throw SchemaError("checkpoint: parameter '" + name + "' found where '" + spec.name +
                              "' was expected");
        }
        std::vector<int> shape;
        for (long long i = 0; i < rank; ++i) {
            long long e = 0;
            head >> e;
            if (head.fail()) {
                throw IntegrityError("checkpoint: truncated shape for '" + name + "'");
            }
            shape.push_back(static_cast<int>(e));
        }
        if (shape != spec.shape) {
            throw SchemaError("checkpoint: parameter '" + name + "' has shape " +
                              shape_str(shape) + ", expected " + shape_str(spec.shape));
        }
        std::istringstream values(next_line(in, "values of " + name));
        std::vector<double> data;
        data.reserve(shape_numel(shape));
        std::string token;
        while (values >> token) {
            data.push_back(parse_double(token, "values of " + name));
        }
        if (data.size() != shape_numel(shape)) {
            throw IntegrityError("checkpoint: parameter '" + name + "' holds " +
                                 std::to_string(data.size()) + " values, expected " +
                                 std::to_string(shape_numel(shape)));
        }
        params.add(spec.name, Tensor(shape, std::move(data)));
    }
    if (next_line(in, "end marker") != "end") {
        throw IntegrityError("checkpoint: missing end marker");
    }
    return {std::move(params), cfg};
}

}  // namespace tsf
