#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace magicforge {

// Instruction conditions sent to the text-generation backend.
struct ConditionSet {
    std::vector<std::string> conditions;

    static ConditionSet defaults();
};

// Instruction embedding every category name verbatim, every condition, and the
// requested example count. Throws std::invalid_argument on an empty category
// list or count < 1.
std::string build_instruction(const std::vector<std::string>& categories,
                              const ConditionSet& conditions, int count);

struct CounterfactualResult {
    std::string text;
    bool substituted = false;  // false means "no substitution performed"
};

// Replaces every whole-word occurrence of each category name (case-insensitive,
// simple "s"/"es" plurals, multi-word names matched as a phrase, hyphens and
// underscores treated as spaces) with the literal token "nothing".
CounterfactualResult counterfactualize(const std::string& text,
                                       const std::vector<std::string>& categories);

// True when the text contains at least one surface form of the category name.
bool contains_category(const std::string& text, const std::string& category);

// Deterministic description generator used when no LLM backend is configured.
// Mentions each category exactly once, with a background and an attribute clause.
std::string template_fallback(const std::vector<std::string>& categories, std::uint64_t seed);

}  // namespace magicforge
