#include "magicforge/types.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace magicforge {

std::string normalize_category_name(const std::string& name) {
    std::string out;
    bool pending_space = false;
    for (char c : name) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            if (!out.empty()) pending_space = true;
        } else {
            if (pending_space) out += ' ';
            pending_space = false;
            out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        }
    }
    return out;
}

Vocabulary::Vocabulary(std::vector<std::string> names) : names_(std::move(names)) {
    for (std::size_t i = 0; i < names_.size(); ++i) {
        std::string key = normalize_category_name(names_[i]);
        if (key.empty()) throw std::invalid_argument("vocabulary: empty category name at id " + std::to_string(i));
        auto [it, inserted] = index_.emplace(key, static_cast<int>(i));
        if (!inserted)
            throw std::invalid_argument("vocabulary: duplicate category name '" + names_[i] + "'");
    }
}

int Vocabulary::id_of(const std::string& name) const {
    auto it = index_.find(normalize_category_name(name));
    return it == index_.end() ? -1 : it->second;
}

json Vocabulary::to_json() const {
    json j;
    j["format_version"] = kManifestFormatVersion;
    j["names"] = names_;
    return j;
}

Vocabulary Vocabulary::from_json(const json& j) {
    return Vocabulary(j.at("names").get<std::vector<std::string>>());
}

Vocabulary Vocabulary::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open vocabulary: " + path);
    json j;
    in >> j;
    return from_json(j);
}

void Vocabulary::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write vocabulary: " + path);
    out << to_json().dump(2) << '\n';
}

ClassMask rle_encode(std::span<const std::uint8_t> grid, int width, int height, int category_id) {
    if (width < 0 || height < 0 ||
        grid.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height))
        throw std::invalid_argument("rle_encode: grid size does not match dimensions");
    ClassMask mask;
    mask.category_id = category_id;
    mask.width = width;
    mask.height = height;
    std::uint8_t current = 0;  // runs start with a background count
    std::uint32_t run = 0;
    for (std::uint8_t v : grid) {
        if (v > 1) throw std::invalid_argument("rle_encode: grid values must be 0 or 1");
        if (v == current) {
            ++run;
        } else {
            mask.runs.push_back(run);
            current = v;
            run = 1;
        }
    }
    mask.runs.push_back(run);
    return mask;
}

std::vector<std::uint8_t> rle_decode(const ClassMask& mask) {
    const std::size_t total = static_cast<std::size_t>(mask.width) * static_cast<std::size_t>(mask.height);
    std::uint64_t sum = 0;
    for (std::size_t i = 0; i < mask.runs.size(); ++i) {
        if (mask.runs[i] == 0 && i != 0)
            throw std::invalid_argument("rle_decode: interior zero-length run");
        sum += mask.runs[i];
    }
    if (sum != total) throw std::invalid_argument("rle_decode: run sum does not match width*height");
    std::vector<std::uint8_t> grid(total);
    std::size_t pos = 0;
    std::uint8_t value = 0;
    for (std::uint32_t run : mask.runs) {
        std::fill_n(grid.begin() + static_cast<std::ptrdiff_t>(pos), run, value);
        pos += run;
        value = static_cast<std::uint8_t>(1 - value);
    }
    return grid;
}

json SampleRecord::to_json() const {
    json j;
    j["id"] = id;
    j["text"] = text;
    j["counterfactual_text"] = counterfactual_text;
    j["categories"] = categories;
    j["image_ref"] = image_ref;
    j["counterfactual_image_ref"] = counterfactual_image_ref;
    json masks_json = json::array();
    for (const auto& m : masks) {
        json mj;
        mj["category_id"] = m.category_id;
        mj["width"] = m.width;
        mj["height"] = m.height;
        mj["runs"] = m.runs;
        masks_json.push_back(std::move(mj));
    }
    j["masks"] = std::move(masks_json);
    j["seed"] = seed;
    j["provenance"] = provenance;
    return j;
}

SampleRecord SampleRecord::from_json(const json& j) {
    SampleRecord r;
    r.id = j.at("id").get<std::string>();
    r.text = j.at("text").get<std::string>();
    r.counterfactual_text = j.at("counterfactual_text").get<std::string>();
    r.categories = j.at("categories").get<std::vector<int>>();
    r.image_ref = j.at("image_ref").get<std::string>();
    r.counterfactual_image_ref = j.at("counterfactual_image_ref").get<std::string>();
    for (const auto& mj : j.at("masks")) {
        ClassMask m;
        m.category_id = mj.at("category_id").get<int>();
        m.width = mj.at("width").get<int>();
        m.height = mj.at("height").get<int>();
        m.runs = mj.at("runs").get<std::vector<std::uint32_t>>();
        r.masks.push_back(std::move(m));
    }
    r.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("provenance"))
        r.provenance = j.at("provenance").get<std::map<std::string, std::string>>();
    return r;
}

std::vector<std::string> validate_sample(const SampleRecord& record, const Vocabulary& vocab,
                                         int image_width, int image_height) {
    std::vector<std::string> violations;
    if (record.id.empty()) violations.push_back("empty record id");
    if (record.categories.empty() || record.categories.size() > 2)
        violations.push_back("category count out of range (must be 1 or 2)");
    std::set<int> cats(record.categories.begin(), record.categories.end());
    if (cats.size() != record.categories.size()) violations.push_back("duplicate categories");
    for (int c : record.categories)
        if (c < 0 || static_cast<std::size_t>(c) >= vocab.size())
            violations.push_back("category id out of vocabulary range: " + std::to_string(c));
    if (record.masks.size() != record.categories.size())
        violations.push_back("mask count does not match category count");
    for (const auto& m : record.masks) {
        if (!cats.count(m.category_id))
            violations.push_back("mask category " + std::to_string(m.category_id) +
                                 " not in record categories");
        std::uint64_t sum = 0;
        for (auto r : m.runs) sum += r;
        if (sum != static_cast<std::uint64_t>(m.width) * static_cast<std::uint64_t>(m.height))
            violations.push_back("mask run sum does not match dimensions for category " +
                                 std::to_string(m.category_id));
        if (image_width > 0 && image_height > 0 && (m.width != image_width || m.height != image_height))
            violations.push_back("mask dimensions " + std::to_string(m.width) + "x" +
                                 std::to_string(m.height) + " do not match image " +
                                 std::to_string(image_width) + "x" + std::to_string(image_height));
    }
    if (record.image_ref.empty()) violations.push_back("empty image_ref");
    if (record.counterfactual_image_ref.empty()) violations.push_back("empty counterfactual_image_ref");
    return violations;
}

void Manifest::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write manifest: " + path);
    for (const auto& r : records) out << r.to_json().dump() << '\n';
}

Manifest Manifest::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open manifest: " + path);
    Manifest m;
    std::string line;
    std::size_t lineno = 0;
    std::set<std::string> ids;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        json j = json::parse(line);
        auto rec = SampleRecord::from_json(j);
        if (!ids.insert(rec.id).second)
            throw std::runtime_error("manifest line " + std::to_string(lineno) + ": duplicate id " + rec.id);
        m.records.push_back(std::move(rec));
    }
    return m;
}

}  // namespace magicforge
