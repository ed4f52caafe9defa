#include "tsf/data.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "tsf/rng.hpp"

namespace tsf {

std::string to_string(DataKind kind) {
    switch (kind) {
        case DataKind::kType1: return "type1";
        case DataKind::kType2: return "type2";
        default: return "type3";
    }
}

DataKind data_kind_from_string(const std::string& s) {
    if (s == "type1" || s == "1") return DataKind::kType1;
    if (s == "type2" || s == "2") return DataKind::kType2;
    if (s == "type3" || s == "3") return DataKind::kType3;
    throw ContractError("unknown data kind '" + s + "' (expected type1, type2 or type3)");
}

void DatasetSpec::validate() const {
    switch (kind) {
        case DataKind::kType1:
            if (repeat < 1) {
                throw ContractError("dataset spec: type1 repeat must be >= 1");
            }
            break;
        case DataKind::kType2:
            if (w_list.empty()) {
                throw ContractError("dataset spec: type2 requires a nonempty w_list");
            }
            break;
        case DataKind::kType3:
            if (!(w_max > 0.0)) {
                throw ContractError("dataset spec: type3 requires w_max > 0");
            }
            break;
    }
    if (kind != DataKind::kType1 && (n_train < 1 || n_test < 1)) {
        throw ContractError("dataset spec: n_train and n_test must be >= 1");
    }
}

std::vector<double> generate_sinusoid(double w, int length) {
    if (length < 1) {
        throw ContractError("generate_sinusoid: length must be >= 1");
    }
    std::vector<double> y(static_cast<std::size_t>(length));
    for (int t = 0; t < length; ++t) {
        y[static_cast<std::size_t>(t)] = std::sin(2.0 * std::numbers::pi * w * t / length);
    }
    return y;
}

SequencePair make_sequence_pair(double w) {
    std::vector<double> y = generate_sinusoid(w, kSeqLen);
    SequencePair p;
    p.freq = w;
    p.src.assign(y.begin(), y.begin() + kSrcLen);
    p.tgt.assign(y.begin() + kSrcLen, y.end());
    return p;
}

Dataset build_dataset(const DatasetSpec& spec) {
    spec.validate();
    Dataset out;
    switch (spec.kind) {
        case DataKind::kType1: {
            const SequencePair p = make_sequence_pair(1.0);
            out.train.assign(static_cast<std::size_t>(spec.repeat), p);
            out.test.assign(static_cast<std::size_t>(spec.repeat), p);
            break;
        }
        case DataKind::kType2: {
            for (int i = 0; i < spec.n_train; ++i) {
                out.train.push_back(make_sequence_pair(spec.w_list[i % spec.w_list.size()]));
            }
            for (int i = 0; i < spec.n_test; ++i) {
                out.test.push_back(make_sequence_pair(spec.w_list[i % spec.w_list.size()]));
            }
            break;
        }
        case DataKind::kType3: {
            Rng rng(spec.seed);
            auto draw = [&]() {
                double u;
                do {
                    u = rng.uniform();
                } while (u == 0.0);  // open interval (0, w_max)
                return u * spec.w_max;
            };
            for (int i = 0; i < spec.n_train; ++i) {
                out.train.push_back(make_sequence_pair(draw()));
            }
            for (int i = 0; i < spec.n_test; ++i) {
                out.test.push_back(make_sequence_pair(draw()));
            }
            break;
        }
    }
    return out;
}

namespace {

std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

double parse_value(const std::string& token, const std::string& path, std::size_t line_no) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
    if (ec != std::errc{} || ptr != token.data() + token.size()) {
        throw IntegrityError(path + ":" + std::to_string(line_no) + ": bad numeric value '" +
                             token + "'");
    }
    return v;
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::istringstream in(line);
    while (std::getline(in, field, ',')) {
        fields.push_back(field);
    }
    if (!line.empty() && line.back() == ',') {
        fields.emplace_back();
    }
    return fields;
}

}  // namespace

void write_sequences_csv(const std::string& path, const std::vector<SequencePair>& items) {
    std::ofstream out(path);
    if (!out) {
        throw IoError("cannot open '" + path + "' for writing");
    }
    out << "freq";
    for (int t = 0; t < kSeqLen; ++t) {
        out << ",y" << t;
    }
    out << "\n";
    for (const SequencePair& p : items) {
        out << format_double(p.freq);
        for (double v : p.src) {
            out << "," << format_double(v);
        }
        for (double v : p.tgt) {
            out << "," << format_double(v);
        }
        out << "\n";
    }
    if (!out) {
        throw IoError("write to '" + path + "' failed");
    }
}

std::vector<SequencePair> read_sequences_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open '" + path + "' for reading");
    }
    std::string line;
    if (!std::getline(in, line)) {
        throw IntegrityError(path + ": empty file");
    }
    const std::size_t want_cols = 1 + kSeqLen;
    if (split_csv(line).size() != want_cols) {
        throw SchemaError(path + ": header has " + std::to_string(split_csv(line).size()) +
                          " columns, expected " + std::to_string(want_cols));
    }
    std::vector<SequencePair> items;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) {
            continue;
        }
        const std::vector<std::string> fields = split_csv(line);
        if (fields.size() != want_cols) {
            throw SchemaError(path + ":" + std::to_string(line_no) + ": has " +
                              std::to_string(fields.size()) + " columns, expected " +
                              std::to_string(want_cols));
        }
        SequencePair p;
        p.freq = parse_value(fields[0], path, line_no);
        for (int t = 0; t < kSrcLen; ++t) {
            p.src.push_back(parse_value(fields[static_cast<std::size_t>(1 + t)], path, line_no));
        }
        for (int t = 0; t < kTgtLen; ++t) {
            p.tgt.push_back(
                parse_value(fields[static_cast<std::size_t>(1 + kSrcLen + t)], path, line_no));
        }
        items.push_back(std::move(p));
    }
    return items;
}

}  // namespace tsf
