#include "magicforge/prompt.hpp"

#include <regex>
#include <sstream>
#include <stdexcept>

#include "magicforge/rng.hpp"
#include "magicforge/types.hpp"

namespace magicforge {

ConditionSet ConditionSet::defaults() {
    return ConditionSet{{
        "Describe the background in enough detail that it never becomes monotonous, while keeping the named categories as the main subjects.",
        "Make the scenarios and details of the examples as diverse as possible.",
        "Vary the visual attributes of the named categories from example to example.",
    }};
}

std::string build_instruction(const std::vector<std::string>& categories,
                              const ConditionSet& conditions, int count) {
    if (categories.empty()) throw std::invalid_argument("build_instruction: empty category list");
    if (categories.size() > 2)
        throw std::invalid_argument("build_instruction: at most two categories");
    if (count < 1) throw std::invalid_argument("build_instruction: count must be >= 1");

    std::ostringstream out;
    out << "Generate " << count << " image description";
    if (count > 1) out << 's';
    out << " featuring the following categories: ";
    for (std::size_t i = 0; i < categories.size(); ++i) {
        if (i) out << ", ";
        out << categories[i];
    }
    out << ".\nRequirements:\n";
    for (const auto& c : conditions.conditions) out << "- " << c << '\n';
    return out.str();
}

namespace {

std::string escape_regex(const std::string& s) {
    static const std::string special = R"(\.^$|()[]{}*+?)";
    std::string out;
    for (char c : s) {
        if (special.find(c) != std::string::npos) out += '\\';
        out += c;
    }
    return out;
}

// Whole-word, case-insensitive pattern for a category name. Hyphens and
// underscores in the name match any of space/hyphen/underscore; the last word
// accepts simple "s"/"es" plurals.
std::regex category_pattern(const std::string& category) {
    std::string normalized;
    for (char c : category) normalized += (c == '-' || c == '_') ? ' ' : c;
    normalized = normalize_category_name(normalized);
    if (normalized.empty()) throw std::invalid_argument("empty category name");

    std::vector<std::string> words;
    std::istringstream iss(normalized);
    std::string w;
    while (iss >> w) words.push_back(escape_regex(w));

    std::string pattern = "\\b";
    for (std::size_t i = 0; i < words.size(); ++i) {
        if (i) pattern += "[\\s_-]+";
        pattern += words[i];
    }
    pattern += "(?:es|s)?\\b";
    return std::regex(pattern, std::regex::icase);
}

}  // namespace

bool contains_category(const std::string& text, const std::string& category) {
    return std::regex_search(text, category_pattern(category));
}

CounterfactualResult counterfactualize(const std::string& text,
                                       const std::vector<std::string>& categories) {
    CounterfactualResult result;
    result.text = text;
    for (const auto& category : categories) {
        auto pattern = category_pattern(category);
        if (std::regex_search(result.text, pattern)) {
            result.text = std::regex_replace(result.text, pattern, "nothing");
            result.substituted = true;
        }
    }
    return result;
}

namespace {

const std::vector<std::string> kSettings = {
    "a quiet cobblestone courtyard",   "a misty riverside meadow",
    "a sunlit market square",          "a rain-soaked alley at dusk",
    "a snowy mountain pass",           "a cluttered workshop interior",
    "a windswept coastal cliff",       "a neon-lit downtown street",
    "a terraced hillside at dawn",     "an overgrown botanical greenhouse",
};

const std::vector<std::string> kBackdrops = {
    "weathered brick walls and ivy",      "distant rolling hills under low clouds",
    "stacked wooden crates and old signage", "a shimmering canal and iron railings",
    "tall grass swaying around rusted fences", "string lights and faded awnings",
    "scattered autumn leaves on wet stone",    "pale morning fog drifting between lamp posts",
};

const std::vector<std::string> kAttributes = {
    "brightly colored", "slightly weathered", "unusually large", "compact and tidy",
    "patterned",        "glossy",             "matte and dusty", "vividly striped",
};

}  // namespace

std::string template_fallback(const std::vector<std::string>& categories, std::uint64_t seed) {
    if (categories.empty() || categories.size() > 2)
        throw std::invalid_argument("template_fallback: need one or two categories");
    Rng rng(mix64(seed ^ 0x70726f6d7074ULL));
    const auto& setting = kSettings[rng.below(kSettings.size())];
    const auto& backdrop = kBackdrops[rng.below(kBackdrops.size())];

    std::ostringstream out;
    out << "In " << setting << ", ";
    for (std::size_t i = 0; i < categories.size(); ++i) {
        if (i) out << " and ";
        out << "a " << kAttributes[rng.below(kAttributes.size())] << ' ' << categories[i];
    }
    out << (categories.size() > 1 ? " stand" : " stands");
    out << " out against " << backdrop << '.';
    return out.str();
}

}  // namespace magicforge
