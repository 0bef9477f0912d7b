#include <gtest/gtest.h>

#include <atomic>
#include <set>
#include <sstream>

#include "sitewise/core/config.hpp"
#include "sitewise/core/csv.hpp"
#include "sitewise/core/digest.hpp"
#include "sitewise/core/format.hpp"
#include "sitewise/core/parallel.hpp"
#include "sitewise/core/random.hpp"

using namespace sitewise;

TEST(Config, SectionsPrefixKeys) {
    std::istringstream in("seed = 7\n# comment\n[synthetic]\nncols = 40 # trailing\nname = \"a b\"\n\n[learn.rf]\nn_trees=3\n");
    auto cfg = KeyValueConfig::parse(in);
    EXPECT_EQ(cfg.get_int("seed", 0), 7);
    EXPECT_EQ(cfg.get_int("synthetic.ncols", 0), 40);
    EXPECT_EQ(cfg.get_string("synthetic.name", ""), "a b");
    EXPECT_EQ(cfg.get_int("learn.rf.n_trees", 0), 3);
    EXPECT_FALSE(cfg.has("ncols"));
    EXPECT_EQ(cfg.get_double("missing", 2.5), 2.5);
}

TEST(Config, MalformedLineReportsLineNumber) {
    std::istringstream in("a = 1\nnot a pair\n");
    try {
        KeyValueConfig::parse(in);
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 2);
    }
    std::istringstream bad_section("[oops\n");
    EXPECT_THROW(KeyValueConfig::parse(bad_section), ParseError);
}

TEST(Config, TypedGettersRejectGarbage) {
    std::istringstream in("n = 3x\nb = maybe\nd = 1e-3\n");
    auto cfg = KeyValueConfig::parse(in);
    EXPECT_THROW(cfg.get_int("n", 0), Error);
    EXPECT_THROW(cfg.get_bool("b", false), Error);
    EXPECT_DOUBLE_EQ(cfg.get_double("d", 0), 1e-3);
}

TEST(Config, CanonicalTextIsSortedAndReparses) {
    KeyValueConfig cfg;
    cfg.set("z", "1");
    cfg.set("a.b", "two");
    EXPECT_EQ(cfg.to_string(), "a.b = two\nz = 1\n");
    std::istringstream in(cfg.to_string());
    EXPECT_EQ(KeyValueConfig::parse(in).values(), cfg.values());
}

TEST(Csv, QuotedFieldsAndEscapes) {
    std::istringstream in("name,value\n\"a, b\",1\n\"say \"\"hi\"\"\",2\n\n");
    auto t = parse_csv(in);
    ASSERT_EQ(t.rows.size(), 2u);
    EXPECT_EQ(t.rows[0][0], "a, b");
    EXPECT_EQ(t.rows[1][0], "say \"hi\"");
    EXPECT_EQ(t.row_lines[1], 3);
    EXPECT_EQ(csv_escape("a, b"), "\"a, b\"");
    EXPECT_EQ(csv_escape("plain"), "plain");
}

TEST(Csv, FieldCountMismatchNamesLine) {
    std::istringstream in("a,b\n1,2\n3\n");
    try {
        parse_csv(in);
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 3);
    }
}

TEST(Csv, NonNumericCellNamesLine) {
    std::istringstream in("x\n1\nfoo\n");
    auto t = parse_csv(in);
    EXPECT_DOUBLE_EQ(t.number(0, 0), 1.0);
    try {
        t.number(1, 0);
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 3);
    }
}

TEST(Csv, EscapedFieldsRoundTrip) {
    const std::vector<std::string> fields = {"plain", "with,comma", "with \"quote\"", "", "trail"};
    CsvLine line;
    for (const auto& f : fields) line << f;
    std::istringstream in("h1,h2,h3,h4,h5\n" + line.str() + "\n");
    EXPECT_EQ(parse_csv(in).rows.at(0), fields);
}

TEST(Format, DoublesRoundTripExactly) {
    Rng rng = make_rng(11);
    for (int i = 0; i < 2000; ++i) {
        double v = (uniform01(rng) - 0.5) * std::pow(10.0, static_cast<int>(uniform_index(rng, 40)) - 20);
        auto back = parse_double(format_double(v));
        ASSERT_TRUE(back);
        EXPECT_EQ(*back, v);
    }
    EXPECT_FALSE(parse_double("1.0abc"));
    EXPECT_FALSE(parse_double(""));
    EXPECT_EQ(parse_int("-12").value(), -12);
    EXPECT_FALSE(parse_int("1.5"));
}

TEST(Digest, KnownVectors) {
    EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Random, DerivedStreamsAreDistinctAndStable) {
    std::set<std::uint64_t> seen;
    for (std::uint64_t s = 0; s < 64; ++s) seen.insert(derive_seed(42, s));
    EXPECT_EQ(seen.size(), 64u);
    EXPECT_EQ(derive_seed(42, 3), derive_seed(42, 3));
    Rng a = make_rng(5, 1), b = make_rng(5, 1);
    for (int i = 0; i < 10; ++i) EXPECT_EQ(a(), b());
}

TEST(Random, UniformIndexStaysInRange) {
    Rng rng = make_rng(3);
    std::vector<int> hits(7, 0);
    for (int i = 0; i < 7000; ++i) {
        auto k = uniform_index(rng, 7);
        ASSERT_LT(k, 7u);
        ++hits[k];
    }
    for (int h : hits) EXPECT_GT(h, 800);
}

TEST(Parallel, ResultIndependentOfThreadCount) {
    auto work = [](unsigned threads) {
        std::vector<double> out(500);
        parallel_for(out.size(), threads, [&](std::size_t i) {
            Rng r = make_rng(9, i);
            out[i] = uniform01(r);
        });
        return out;
    };
    auto one = work(1);
    EXPECT_EQ(one, work(3));
    EXPECT_EQ(one, work(0));
}

TEST(Parallel, FirstExceptionPropagates) {
    std::atomic<int> ran{0};
    EXPECT_THROW(parallel_for(100, 4,
                              [&](std::size_t i) {
                                  ++ran;
                                  if (i == 10) throw Error("boom");
                              }),
                 Error);
    EXPECT_GT(ran.load(), 0);
}
