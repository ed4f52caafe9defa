#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tsf/errors.hpp"

namespace tsf {

// Paper-replication constants: 31-sample sinusoids split 19/12.
inline constexpr int kSeqLen = 31;
inline constexpr int kSrcLen = 19;
inline constexpr int kTgtLen = 12;

// One training or test item. freq is w, the number of waves per kSeqLen
// samples; sample t holds sin(2*pi*w*t/kSeqLen).
struct SequencePair {
    double freq = 0.0;
    std::vector<double> src;  // samples 0..18
    std::vector<double> tgt;  // samples 19..30
};

enum class DataKind { kType1, kType2, kType3 };

std::string to_string(DataKind kind);
DataKind data_kind_from_string(const std::string& s);

struct DatasetSpec {
    DataKind kind = DataKind::kType1;
    int repeat = 100;                            // Type1: copies per split
    std::vector<double> w_list = {0, 1, 2, 3};   // Type2
    double w_max = 3.0;                          // Type3: w ~ U(0, w_max)
    int n_train = 100;
    int n_test = 30;
    std::uint64_t seed = 0;

    void validate() const;
};

// value at index t is sin(2*pi*w*t/length)
std::vector<double> generate_sinusoid(double w, int length);

SequencePair make_sequence_pair(double w);

struct Dataset {
    std::vector<SequencePair> train;
    std::vector<SequencePair> test;
};

Dataset build_dataset(const DatasetSpec& spec);

// One sequence per line: freq plus 31 samples, comma separated, after a
// one-line header. Readers reject any other column count.
void write_sequences_csv(const std::string& path, const std::vector<SequencePair>& items);
std::vector<SequencePair> read_sequences_csv(const std::string& path);

}  // namespace tsf
