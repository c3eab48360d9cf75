#include <doctest.h>

#include <set>
#include <string>

#include "magicforge/prompt.hpp"

using namespace magicforge;

TEST_CASE("build_instruction embeds names, conditions, and count") {
    auto conds = ConditionSet::defaults();
    REQUIRE(!conds.conditions.empty());
    auto s = build_instruction({"bus"}, conds, 5);
    CHECK(s.find("bus") != std::string::npos);
    CHECK(s.find('5') != std::string::npos);
    for (const auto& c : conds.conditions) CHECK(s.find(c) != std::string::npos);
}

TEST_CASE("build_instruction embeds both names for two categories") {
    auto s = build_instruction({"cat", "dog"}, ConditionSet::defaults(), 1);
    CHECK(s.find("cat") != std::string::npos);
    CHECK(s.find("dog") != std::string::npos);
}

TEST_CASE("build_instruction is deterministic") {
    auto conds = ConditionSet::defaults();
    CHECK(build_instruction({"bus"}, conds, 5) == build_instruction({"bus"}, conds, 5));
}

TEST_CASE("build_instruction rejects empty categories and bad counts") {
    CHECK_THROWS(build_instruction({}, ConditionSet::defaults(), 5));
    CHECK_THROWS(build_instruction({"bus"}, ConditionSet::defaults(), 0));
}

TEST_CASE("counterfactualize fixed substitution cases") {
    SUBCASE("simple sentence") {
        auto r = counterfactualize("A photo of bus.", {"bus"});
        CHECK(r.text == "A photo of nothing.");
        CHECK(r.substituted);
    }
    SUBCASE("embedded clause keeps surrounding words") {
        auto r = counterfactualize(
            "...a yellow school bus stops by a quaint picket fence...", {"bus"});
        CHECK(r.text == "...a yellow school nothing stops by a quaint picket fence...");
        CHECK(r.substituted);
    }
    SUBCASE("absent name returns unchanged with flag") {
        auto r = counterfactualize("no match here", {"zebra"});
        CHECK(r.text == "no match here");
        CHECK(!r.substituted);
    }
}

TEST_CASE("counterfactualize matches whole words only") {
    auto r = counterfactualize("The busy street.", {"bus"});
    CHECK(r.text == "The busy street.");
    CHECK(!r.substituted);
}

TEST_CASE("counterfactualize handles plurals, case, and multi-word phrases") {
    CHECK(counterfactualize("Two buses passed.", {"bus"}).text == "Two nothing passed.");
    CHECK(counterfactualize("A BUS here.", {"bus"}).text == "A nothing here.");
    CHECK(counterfactualize("A crimson marker sits.", {"crimson marker"}).text ==
          "A nothing sits.");
    // Hyphen/underscore in the name normalized to spaces before matching.
    CHECK(counterfactualize("A circle stone rests.", {"circle-stone"}).text ==
          "A nothing rests.");
}

TEST_CASE("counterfactualize is idempotent") {
    const std::string text = "The bus met another bus near the buses.";
    auto once = counterfactualize(text, {"bus"});
    auto twice = counterfactualize(once.text, {"bus"});
    CHECK(twice.text == once.text);
}

TEST_CASE("counterfactualize only substitutes (bounded length change)") {
    const std::string text = "bus bus bus";
    auto r = counterfactualize(text, {"bus"});
    const long occurrences = 3;
    const long max_growth =
        occurrences * (static_cast<long>(std::string("nothing").size()) - 3);
    CHECK(static_cast<long>(r.text.size()) - static_cast<long>(text.size()) <= max_growth);
}

TEST_CASE("contains_category detects surface forms") {
    CHECK(contains_category("a bus stop", "bus"));
    CHECK(contains_category("two buses", "bus"));
    CHECK(!contains_category("a busy day", "bus"));
    CHECK(contains_category("the Crimson Marker", "crimson marker"));
}

TEST_CASE("template_fallback is deterministic per seed") {
    CHECK(template_fallback({"bus"}, 7) == template_fallback({"bus"}, 7));
}

TEST_CASE("template_fallback output always substitutes under counterfactualize") {
    for (std::uint64_t seed = 0; seed < 25; ++seed) {
        auto text = template_fallback({"bus", "cat"}, seed);
        auto r = counterfactualize(text, {"bus", "cat"});
        CHECK(r.substituted);
        // After substitution no surface form remains.
        CHECK(!contains_category(r.text, "bus"));
        CHECK(!contains_category(r.text, "cat"));
    }
}

TEST_CASE("template_fallback produces at least 20 distinct texts over 100 seeds") {
    std::set<std::string> outputs;
    for (std::uint64_t seed = 0; seed < 100; ++seed)
        outputs.insert(template_fallback({"bus"}, seed));
    CHECK(outputs.size() >= 20);
}
