#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <set>

#include "doctest.h"
#include "tsf/data.hpp"
#include "tsf/rng.hpp"

using namespace tsf;

TEST_CASE("sinusoid samples") {
    SUBCASE("zero frequency is flat") {
        for (double v : generate_sinusoid(0.0, 31)) {
            CHECK(v == 0.0);
        }
    }
    SUBCASE("w=1, L=31 anchor values") {
        std::vector<double> y = generate_sinusoid(1.0, 31);
        CHECK(y[0] == 0.0);
        CHECK(y[1] == doctest::Approx(0.20129852008866006).epsilon(1e-14));
    }
    SUBCASE("all values lie in [-1, 1]") {
        Rng rng(5);
        for (int trial = 0; trial < 50; ++trial) {
            for (double v : generate_sinusoid(rng.uniform(0.0, 5.0), 31)) {
                CHECK(v >= -1.0);
                CHECK(v <= 1.0);
            }
        }
    }
    SUBCASE("invalid length") {
        CHECK_THROWS_AS(generate_sinusoid(1.0, 0), ContractError);
    }
}

TEST_CASE("sequence pair splits 19/12 and reconstructs the signal") {
    Rng rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        const double w = rng.uniform(0.0, 3.0);
        SequencePair p = make_sequence_pair(w);
        CHECK(p.src.size() == 19);
        CHECK(p.tgt.size() == 12);
        std::vector<double> y = generate_sinusoid(w, 31);
        for (int t = 0; t < 19; ++t) {
            CHECK(p.src[static_cast<std::size_t>(t)] == y[static_cast<std::size_t>(t)]);
        }
        for (int t = 0; t < 12; ++t) {
            CHECK(p.tgt[static_cast<std::size_t>(t)] == y[static_cast<std::size_t>(19 + t)]);
        }
    }
}

TEST_CASE("type 1 repeats one w=1 sequence in both splits") {
    DatasetSpec spec;
    spec.kind = DataKind::kType1;
    spec.repeat = 100;
    Dataset d = build_dataset(spec);
    CHECK(d.train.size() == 100);
    CHECK(d.test.size() == 100);
    for (const auto& split : {d.train, d.test}) {
        for (const SequencePair& p : split) {
            CHECK(p.freq == 1.0);
            CHECK(p.src == d.train[0].src);
            CHECK(p.tgt == d.train[0].tgt);
        }
    }
}

TEST_CASE("type 2 is a round-robin over the frequency list") {
    DatasetSpec spec;
    spec.kind = DataKind::kType2;
    spec.w_list = {0, 1, 2, 3};
    spec.n_train = 100;
    spec.n_test = 20;
    Dataset d = build_dataset(spec);
    CHECK(d.train.size() == 100);
    std::set<double> freqs;
    for (std::size_t i = 0; i < d.train.size(); ++i) {
        CHECK(d.train[i].freq == spec.w_list[i % 4]);
        freqs.insert(d.train[i].freq);
    }
    CHECK(freqs == std::set<double>{0, 1, 2, 3});

    DatasetSpec empty = spec;
    empty.w_list.clear();
    CHECK_THROWS_AS(build_dataset(empty), ContractError);
}

TEST_CASE("type 3 draws are seeded, in range, and split-disjoint") {
    DatasetSpec spec;
    spec.kind = DataKind::kType3;
    spec.w_max = 3.0;
    spec.n_train = 50;
    spec.n_test = 20;
    spec.seed = 11;
    Dataset a = build_dataset(spec);
    Dataset b = build_dataset(spec);
    for (std::size_t i = 0; i < a.train.size(); ++i) {
        CHECK(a.train[i].freq == b.train[i].freq);
        CHECK(a.train[i].src == b.train[i].src);
    }
    for (std::size_t i = 0; i < a.test.size(); ++i) {
        CHECK(a.test[i].freq == b.test[i].freq);
    }
    for (const SequencePair& p : a.train) {
        CHECK(p.freq > 0.0);
        CHECK(p.freq < 3.0);
    }
    // train and test come from disjoint draws of one stream
    CHECK(a.train[0].freq != a.test[0].freq);

    DatasetSpec other = spec;
    other.seed = 12;
    Dataset c = build_dataset(other);
    CHECK(a.train[0].freq != c.train[0].freq);
}

TEST_CASE("type 3 frequencies look uniform over (0, w_max)") {
    DatasetSpec spec;
    spec.kind = DataKind::kType3;
    spec.w_max = 3.0;
    spec.n_train = 10000;
    spec.n_test = 1;
    spec.seed = 99;
    Dataset d = build_dataset(spec);
    int bins[10] = {0};
    for (const SequencePair& p : d.train) {
        int b = static_cast<int>(p.freq / 3.0 * 10.0);
        b = std::min(b, 9);
        ++bins[b];
    }
    // 10 bins, expectation 1000, sigma = sqrt(n p (1-p)) = 30
    const double sigma = std::sqrt(10000.0 * 0.1 * 0.9);
    for (int b = 0; b < 10; ++b) {
        CHECK(std::fabs(bins[b] - 1000.0) < 4.0 * sigma);
    }
}

TEST_CASE("csv round-trip and rejection of malformed rows") {
    DatasetSpec spec;
    spec.kind = DataKind::kType3;
    spec.n_train = 7;
    spec.n_test = 3;
    spec.seed = 4;
    Dataset d = build_dataset(spec);

    const std::string path = "tsf_test_data.tmp";
    write_sequences_csv(path, d.train);
    std::vector<SequencePair> back = read_sequences_csv(path);
    REQUIRE(back.size() == d.train.size());
    for (std::size_t i = 0; i < back.size(); ++i) {
        CHECK(back[i].freq == d.train[i].freq);
        CHECK(back[i].src == d.train[i].src);
        CHECK(back[i].tgt == d.train[i].tgt);
    }

    SUBCASE("wrong column count") {
        std::ofstream out(path);
        out << "freq";
        for (int t = 0; t < 30; ++t) {
            out << ",y" << t;
        }
        out << "\n";
        out.close();
        CHECK_THROWS_AS(read_sequences_csv(path), SchemaError);
    }
    SUBCASE("short row") {
        std::ofstream out(path, std::ios::app);
        out << "1.0,0.5\n";
        out.close();
        CHECK_THROWS_AS(read_sequences_csv(path), SchemaError);
    }
    SUBCASE("garbage value") {
        std::ofstream out(path, std::ios::app);
        out << "1.0";
        for (int t = 0; t < 30; ++t) {
            out << ",0.0";
        }
        out << ",not_a_number\n";
        out.close();
        CHECK_THROWS_AS(read_sequences_csv(path), IntegrityError);
    }
    SUBCASE("missing file") {
        CHECK_THROWS_AS(read_sequences_csv("definitely_not_here.csv"), IoError);
    }
    std::remove(path.c_str());
}
