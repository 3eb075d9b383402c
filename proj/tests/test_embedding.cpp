#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <fstream>
#include <vector>

#include "simcore/embedding.hpp"
#include "simcore/rng.hpp"
#include "test_util.hpp"

using namespace simcore;
using test_util::TempDir;

namespace {

std::vector<char> slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("matrix construction enforces shape invariants") {
    CHECK_THROWS_AS(EmbeddingMatrix(0, 3, {}, false), std::invalid_argument);
    CHECK_THROWS_AS(EmbeddingMatrix(1, 0, {}, false), std::invalid_argument);
    CHECK_THROWS_AS(EmbeddingMatrix(2, 2, {1.0f, 2.0f, 3.0f}, false), std::invalid_argument);
}

TEST_CASE("binary round trip preserves bytes and values") {
    TempDir tmp("emb_rt");
    EmbeddingMatrix m(2, 2, {1.0f, 0.0f, 0.0f, 1.0f});
    const auto path = tmp.path("m.emb");
    save_embeddings(m, path);
    const auto loaded = load_embeddings(path, EmbFormat::binary);
    CHECK(loaded.count() == 2);
    CHECK(loaded.dim() == 2);
    CHECK(loaded.data() == m.data());
    CHECK_FALSE(loaded.normalized());

    const auto path2 = tmp.path("m2.emb");
    save_embeddings(loaded, path2);
    CHECK(slurp(path) == slurp(path2));
}

TEST_CASE("csv matches the binary representation") {
    TempDir tmp("emb_csv");
    const auto path = tmp.path("m.csv");
    {
        std::ofstream out(path);
        out << "1.0,0.0\n0.0,1.0\n";
    }
    const auto m = load_embeddings(path, EmbFormat::csv);
    CHECK(m.count() == 2);
    CHECK(m.dim() == 2);
    CHECK(m.data() == std::vector<float>{1.0f, 0.0f, 0.0f, 1.0f});
}

TEST_CASE("csv row width mismatch names the offending row") {
    TempDir tmp("emb_badrow");
    const auto path = tmp.path("bad.csv");
    {
        std::ofstream out(path);
        out << "1.0,0.0,0.0\n0.5,0.5\n";
    }
    CHECK_THROWS_WITH_AS(load_embeddings(path, EmbFormat::csv),
                         doctest::Contains("row 1"), std::runtime_error);
}

TEST_CASE("csv non-finite values name row and column") {
    TempDir tmp("emb_nan");
    const auto path = tmp.path("nan.csv");
    {
        std::ofstream out(path);
        out << "1.0,0.0\nnan,1.0\n";
    }
    try {
        load_embeddings(path, EmbFormat::csv);
        FAIL("expected load error");
    } catch (const std::runtime_error& e) {
        const std::string msg = e.what();
        CHECK(msg.find("row 1") != std::string::npos);
        CHECK(msg.find("col 0") != std::string::npos);
    }
}

TEST_CASE("csv round trip is exact for float payloads") {
    TempDir tmp("emb_csv_rt");
    const auto m = test_util::random_matrix(77, 13, 5);
    const auto path = tmp.path("m.csv");
    save_embeddings(m, path, EmbFormat::csv);
    const auto loaded = load_embeddings(path, EmbFormat::csv);
    CHECK(loaded.data() == m.data());
}

TEST_CASE("1x1 matrix serializes to header plus four payload bytes") {
    TempDir tmp("emb_small");
    EmbeddingMatrix m(1, 1, {0.5f});
    const auto path = tmp.path("tiny.emb");
    save_embeddings(m, path);
    CHECK(slurp(path).size() == 20 + 4);
}

TEST_CASE("binary loader rejects malformed files") {
    TempDir tmp("emb_malformed");

    SUBCASE("bad magic") {
        const auto path = tmp.path("bad.emb");
        std::ofstream(path, std::ios::binary) << "NOPExxxxxxxxxxxxxxxxxxxxxxx";
        CHECK_THROWS_WITH_AS(load_embeddings(path, EmbFormat::binary),
                             doctest::Contains("magic"), std::runtime_error);
    }
    SUBCASE("payload shorter than header declares") {
        const auto path = tmp.path("short.emb");
        EmbeddingMatrix m(2, 2, {1.0f, 0.0f, 0.0f, 1.0f});
        save_embeddings(m, path);
        auto bytes = slurp(path);
        bytes.resize(bytes.size() - 4);
        std::ofstream(path, std::ios::binary | std::ios::trunc)
            .write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        CHECK_THROWS_AS(load_embeddings(path, EmbFormat::binary), std::runtime_error);
    }
    SUBCASE("trailing junk after payload") {
        const auto path = tmp.path("junk.emb");
        EmbeddingMatrix m(1, 1, {0.5f});
        save_embeddings(m, path);
        std::ofstream(path, std::ios::binary | std::ios::app) << "junk";
        CHECK_THROWS_WITH_AS(load_embeddings(path, EmbFormat::binary),
                             doctest::Contains("trailing"), std::runtime_error);
    }
    SUBCASE("non-finite payload names row and column") {
        const auto path = tmp.path("nan.emb");
        const float nan = std::nanf("");
        EmbeddingMatrix m(2, 2, {1.0f, 0.0f, nan, 1.0f});
        save_embeddings(m, path);
        try {
            load_embeddings(path, EmbFormat::binary);
            FAIL("expected load error");
        } catch (const std::runtime_error& e) {
            const std::string msg = e.what();
            CHECK(msg.find("row 1") != std::string::npos);
            CHECK(msg.find("col 0") != std::string::npos);
        }
    }
    SUBCASE("missing file") {
        CHECK_THROWS_AS(load_embeddings(tmp.path("absent.emb"), EmbFormat::binary),
                        std::runtime_error);
    }
}

TEST_CASE("label blocks round trip and validate counts") {
    TempDir tmp("emb_labels");
    EmbeddingMatrix m(3, 2, {1, 0, 0, 1, 1, 1});
    LabelVector lv{{4, -1, 7}};
    const auto path = tmp.path("labeled.emb");
    save_embeddings(m, lv, path);

    const auto matrix = load_embeddings(path, EmbFormat::binary);
    CHECK(matrix.count() == 3);
    const auto labels = load_embedded_labels(path);
    REQUIRE(labels.has_value());
    CHECK(labels->labels == lv.labels);
    CHECK(load_labels(path).labels == lv.labels);

    const auto plain = tmp.path("plain.emb");
    save_embeddings(m, plain);
    CHECK_FALSE(load_embedded_labels(plain).has_value());
    CHECK_THROWS_AS(load_labels(plain), std::runtime_error);

    LabelVector wrong{{1, 2}};
    CHECK_THROWS_AS(save_embeddings(m, wrong, tmp.path("w.emb")), std::invalid_argument);
}

TEST_CASE("text label files parse one integer per line") {
    TempDir tmp("emb_textlabels");
    const auto path = tmp.path("labels.txt");
    {
        std::ofstream out(path);
        out << "3\n-1\n42\n";
    }
    CHECK(load_labels(path).labels == std::vector<std::int64_t>{3, -1, 42});

    LabelVector lv{{9, 8}};
    save_labels(lv, tmp.path("out.txt"));
    CHECK(load_labels(tmp.path("out.txt")).labels == lv.labels);
}

TEST_CASE("header peek and format sniffing") {
    TempDir tmp("emb_sniff");
    EmbeddingMatrix m(4, 3, std::vector<float>(12, 0.25f));
    const auto bin = tmp.path("m.emb");
    const auto csv = tmp.path("m.csv");
    save_embeddings(m, bin);
    save_embeddings(m, csv, EmbFormat::csv);
    CHECK(read_emb_header(bin) == std::pair<std::uint64_t, std::uint32_t>{4, 3});
    CHECK(detect_format(bin) == EmbFormat::binary);
    CHECK(detect_format(csv) == EmbFormat::csv);
}

TEST_CASE("l2_normalize fixtures") {
    EmbeddingMatrix m(1, 2, {3.0f, 4.0f});
    const auto n = l2_normalize(m);
    CHECK(n.normalized());
    CHECK(n.row(0)[0] == doctest::Approx(0.6).epsilon(1e-6));
    CHECK(n.row(0)[1] == doctest::Approx(0.8).epsilon(1e-6));

    EmbeddingMatrix unit(1, 2, {1.0f, 0.0f});
    const auto same = l2_normalize(unit);
    CHECK(same.row(0)[0] == 1.0f);
    CHECK(same.row(0)[1] == 0.0f);

    EmbeddingMatrix zero(2, 2, {1.0f, 0.0f, 0.0f, 0.0f});
    CHECK_THROWS_WITH_AS(l2_normalize(zero), doctest::Contains("row 1"), std::runtime_error);
}

TEST_CASE("l2_normalize is idempotent and preserves cosine similarity") {
    const auto m = test_util::random_matrix(123, 40, 7);
    const auto n1 = l2_normalize(m);
    const auto n2 = l2_normalize(n1);
    for (std::size_t i = 0; i < n1.data().size(); ++i) {
        CHECK(n2.data()[i] == doctest::Approx(n1.data()[i]).epsilon(1e-6));
    }

    // Unit norms within 1e-5 and direction preserved (positive multiple).
    for (std::size_t i = 0; i < n1.count(); ++i) {
        double sq = 0.0;
        for (const float v : n1.row(i)) sq += static_cast<double>(v) * v;
        CHECK(std::sqrt(sq) == doctest::Approx(1.0).epsilon(1e-5));

        double raw_norm = 0.0;
        for (const float v : m.row(i)) raw_norm += static_cast<double>(v) * v;
        raw_norm = std::sqrt(raw_norm);
        for (std::size_t j = 0; j < m.dim(); ++j) {
            CHECK(static_cast<double>(n1.row(i)[j]) * raw_norm ==
                  doctest::Approx(m.row(i)[j]).epsilon(1e-4));
        }
    }

    // cos(a, b) from raw vectors equals the dot of normalized rows.
    for (std::size_t a = 0; a < 5; ++a) {
        for (std::size_t b = 5; b < 10; ++b) {
            double dot = 0.0, na = 0.0, nb = 0.0;
            for (std::size_t j = 0; j < m.dim(); ++j) {
                dot += static_cast<double>(m.row(a)[j]) * m.row(b)[j];
                na += static_cast<double>(m.row(a)[j]) * m.row(a)[j];
                nb += static_cast<double>(m.row(b)[j]) * m.row(b)[j];
            }
            const double cos_raw = dot / std::sqrt(na * nb);
            double cos_norm = 0.0;
            for (std::size_t j = 0; j < m.dim(); ++j) {
                cos_norm += static_cast<double>(n1.row(a)[j]) * n1.row(b)[j];
            }
            CHECK(cos_norm == doctest::Approx(cos_raw).epsilon(1e-5));
        }
    }
}

TEST_CASE("validate reports norms and non-finite locations") {
    EmbeddingMatrix id(2, 2, {1.0f, 0.0f, 0.0f, 1.0f});
    const auto rep = validate(id);
    CHECK(rep.count == 2);
    CHECK(rep.dim == 2);
    CHECK(rep.min_norm == doctest::Approx(1.0));
    CHECK(rep.max_norm == doctest::Approx(1.0));
    CHECK(rep.all_finite);

    EmbeddingMatrix withnan(2, 2, {1.0f, 0.0f, 0.0f, std::nanf("")});
    const auto rep2 = validate(withnan);
    CHECK_FALSE(rep2.all_finite);
    CHECK(rep2.nonfinite_row == 1);
    CHECK(rep2.nonfinite_col == 1);

    EmbeddingMatrix r(1, 3, {1.0f, 2.0f, 2.0f});
    CHECK(validate(r).max_norm == doctest::Approx(3.0));
}

TEST_CASE("exact duplicate detection is bitwise") {
    EmbeddingMatrix left(3, 2, {1.0f, 2.0f, 3.0f, 4.0f, 1.0f, 2.0f});
    EmbeddingMatrix right(3, 2, {3.0f, 4.0f, 1.0f, 2.0f, 0.5f, 0.5f});
    const auto dups = find_exact_duplicates(left, right);
    REQUIRE(dups.size() == 3);
    CHECK(dups[0] == std::pair<std::size_t, std::size_t>{0, 1});
    CHECK(dups[1] == std::pair<std::size_t, std::size_t>{1, 0});
    CHECK(dups[2] == std::pair<std::size_t, std::size_t>{2, 1});

    // A value that differs only in the last mantissa bit is not a duplicate.
    auto bytes = right.data();
    bytes[2] = std::nextafterf(bytes[2], 10.0f);
    EmbeddingMatrix nudged(3, 2, std::move(bytes));
    CHECK(find_exact_duplicates(left, nudged).size() == 1);
}
