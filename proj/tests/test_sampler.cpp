#include <doctest.h>

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "magicforge/sampler.hpp"

using namespace magicforge;

namespace {

Vocabulary make_vocab(int n) {
    std::vector<std::string> names;
    names.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) names.push_back("category " + std::to_string(i));
    return Vocabulary(names);
}

}  // namespace

TEST_CASE("m equal to |known| forces the subset to be exactly the known set") {
    auto vocab = make_vocab(10);
    Rng rng(1);
    auto s = sample_categories({3}, vocab, 1, rng);
    CHECK(s.ids == std::vector<int>{3});
    CHECK(s.known == std::vector<bool>{true});
}

TEST_CASE("m equal to N yields a permutation of the whole vocabulary") {
    auto vocab = make_vocab(10);
    Rng rng(2);
    auto s = sample_categories({3, 7}, vocab, 10, rng);
    REQUIRE(s.ids.size() == 10);
    std::set<int> seen(s.ids.begin(), s.ids.end());
    CHECK(seen.size() == 10);
    // Known categories come first, flagged as known.
    CHECK(((s.ids[0] == 3 && s.ids[1] == 7) || (s.ids[0] == 7 && s.ids[1] == 3)));
    CHECK(s.known[0]);
    CHECK(s.known[1]);
    for (std::size_t i = 2; i < 10; ++i) CHECK(!s.known[i]);
}

TEST_CASE("invalid m is rejected") {
    auto vocab = make_vocab(10);
    Rng rng(3);
    CHECK_THROWS(sample_categories({3, 7}, vocab, 1, rng));   // m < |known|
    CHECK_THROWS(sample_categories({3}, vocab, 11, rng));     // m > N
    CHECK_THROWS(sample_categories({42}, vocab, 5, rng));     // id outside vocabulary
}

TEST_CASE("containment, uniqueness, and size over 10000 draws") {
    auto vocab = make_vocab(40);
    Rng rng(4);
    for (int trial = 0; trial < 10000; ++trial) {
        auto s = sample_categories({5, 17}, vocab, 8, rng);
        REQUIRE(s.ids.size() == 8);
        std::set<int> seen(s.ids.begin(), s.ids.end());
        REQUIRE(seen.size() == 8);
        REQUIRE(seen.count(5) == 1);
        REQUIRE(seen.count(17) == 1);
        for (int id : s.ids) {
            REQUIRE(id >= 0);
            REQUIRE(id < 40);
        }
    }
}

TEST_CASE("identical seed reproduces identical subsets") {
    auto vocab = make_vocab(40);
    Rng a(99), b(99);
    for (int trial = 0; trial < 100; ++trial) {
        auto sa = sample_categories({5}, vocab, 8, a);
        auto sb = sample_categories({5}, vocab, 8, b);
        CHECK(sa.ids == sb.ids);
    }
}

TEST_CASE("negative sampling is uniform (chi-square over 10000 draws)") {
    // 40 categories, one known, 7 negatives per draw from the remaining 39.
    auto vocab = make_vocab(40);
    Rng rng(7);
    const int draws = 10000;
    const int negatives_per_draw = 7;
    std::map<int, int> counts;
    for (int trial = 0; trial < draws; ++trial) {
        auto s = sample_categories({5}, vocab, 1 + negatives_per_draw, rng);
        for (std::size_t i = 1; i < s.ids.size(); ++i) ++counts[s.ids[i]];
    }
    CHECK(counts.count(5) == 0);

    const double expected = static_cast<double>(draws) * negatives_per_draw / 39.0;
    double chi2 = 0.0;
    for (int id = 0; id < 40; ++id) {
        if (id == 5) continue;
        const double diff = counts[id] - expected;
        chi2 += diff * diff / expected;
    }
    // 38 degrees of freedom; chi-square critical value at p = 0.001 is 70.70,
    // so chi2 below that bound means p > 0.001.
    CHECK(chi2 < 70.70);
}

TEST_CASE("per-image subsets in a batch are pairwise distinct with high probability") {
    auto vocab = make_vocab(60);
    Rng rng(11);
    std::vector<std::vector<int>> known_batch(8, std::vector<int>{2});
    auto subsets = batch_subsets(known_batch, vocab, 12, rng);
    REQUIRE(subsets.size() == 8);
    std::set<std::set<int>> distinct;
    for (const auto& s : subsets) distinct.insert(std::set<int>(s.ids.begin(), s.ids.end()));
    CHECK(distinct.size() == 8);
}

TEST_CASE("batch with m equal to N gives the same id set for every image") {
    auto vocab = make_vocab(12);
    Rng rng(13);
    std::vector<std::vector<int>> known_batch{{0}, {4}, {9}};
    auto subsets = batch_subsets(known_batch, vocab, 12, rng);
    for (const auto& s : subsets) {
        std::set<int> seen(s.ids.begin(), s.ids.end());
        CHECK(seen.size() == 12);
    }
}

TEST_CASE("empty batch gives an empty list") {
    auto vocab = make_vocab(12);
    Rng rng(17);
    CHECK(batch_subsets({}, vocab, 8, rng).empty());
}
