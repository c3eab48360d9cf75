#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace magicforge {

using json = nlohmann::ordered_json;

inline constexpr int kManifestFormatVersion = 1;

// Category name set with stable positional ids 0..N-1.
class Vocabulary {
public:
    Vocabulary() = default;
    // Throws std::invalid_argument on duplicates after lowercase+whitespace
    // normalization or on empty names.
    explicit Vocabulary(std::vector<std::string> names);

    std::size_t size() const { return names_.size(); }
    const std::vector<std::string>& names() const { return names_; }
    const std::string& name(int id) const { return names_.at(static_cast<std::size_t>(id)); }
    // -1 when absent; lookup uses the same normalization as the uniqueness check.
    int id_of(const std::string& name) const;

    json to_json() const;
    static Vocabulary from_json(const json& j);
    static Vocabulary load(const std::string& path);
    void save(const std::string& path) const;

private:
    std::vector<std::string> names_;
    std::map<std::string, int> index_;
};

std::string normalize_category_name(const std::string& name);

// Binary mask for one category, run-length encoded over the row-major scan.
// Runs alternate background/foreground starting with background; a leading 0
// lets a mask start with foreground.
struct ClassMask {
    int category_id = 0;
    int width = 0;
    int height = 0;
    std::vector<std::uint32_t> runs;

    bool operator==(const ClassMask&) const = default;
};

ClassMask rle_encode(std::span<const std::uint8_t> grid, int width, int height, int category_id = 0);
std::vector<std::uint8_t> rle_decode(const ClassMask& mask);

// One dataset quadruplet: text, counterfactual text, image pair, masks.
struct SampleRecord {
    std::string id;
    std::string text;
    std::string counterfactual_text;
    std::vector<int> categories;
    std::string image_ref;
    std::string counterfactual_image_ref;
    std::vector<ClassMask> masks;
    std::uint64_t seed = 0;
    std::map<std::string, std::string> provenance;

    json to_json() const;
    static SampleRecord from_json(const json& j);
};

// Returns every invariant violation found; empty means valid. Image dims of 0
// skip the mask-vs-image dimension check.
std::vector<std::string> validate_sample(const SampleRecord& record, const Vocabulary& vocab,
                                         int image_width = 0, int image_height = 0);

struct Manifest {
    std::string vocabulary_ref = "vocabulary.json";
    int format_version = kManifestFormatVersion;
    std::vector<SampleRecord> records;

    // JSON Lines, one record per line, UTF-8.
    void save(const std::string& path) const;
    static Manifest load(const std::string& path);
};

}  // namespace magicforge
