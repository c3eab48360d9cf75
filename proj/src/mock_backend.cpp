#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "magicforge/backends.hpp"
#include "magicforge/prompt.hpp"
#include "magicforge/rng.hpp"

namespace magicforge {

namespace {

// Background pixels are exactly gray; shape pixels are saturated.
constexpr int kSaturationThreshold = 30;

bool is_foreground(const std::uint8_t* px) {
    const int mx = std::max({px[0], px[1], px[2]});
    const int mn = std::min({px[0], px[1], px[2]});
    return mx - mn >= kSaturationThreshold;
}

double rgb_hue(const std::uint8_t* px) {
    const double r = px[0], g = px[1], b = px[2];
    const double mx = std::max({r, g, b});
    const double mn = std::min({r, g, b});
    const double d = mx - mn;
    if (d == 0.0) return 0.0;
    double h;
    if (mx == r) h = std::fmod((g - b) / d, 6.0);
    else if (mx == g) h = (b - r) / d + 2.0;
    else h = (r - g) / d + 4.0;
    h *= 60.0;
    return h < 0 ? h + 360.0 : h;
}

double hue_distance(double a, double b) {
    double d = std::fabs(a - b);
    return std::min(d, 360.0 - d);
}

std::uint64_t hash_image(const Image& img) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (std::uint8_t b : img.pixels) {
        h ^= b;
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace

MockBackend::MockBackend(Vocabulary vocab, MockNoise noise, int width, int height)
    : vocab_(std::move(vocab)), noise_(noise), width_(width), height_(height) {}

std::vector<int> MockBackend::categories_in_text(const std::string& text) const {
    std::vector<int> ids;
    for (std::size_t i = 0; i < vocab_.size(); ++i)
        if (contains_category(text, vocab_.name(static_cast<int>(i))))
            ids.push_back(static_cast<int>(i));
    return ids;
}

std::string MockBackend::generate_text(const std::string& instruction, std::uint64_t seed) {
    if (instruction.empty()) throw std::invalid_argument("generate_text: empty instruction");
    auto ids = categories_in_text(instruction);
    if (ids.empty() || ids.size() > 2)
        throw std::invalid_argument("mock generate_text: instruction must name 1-2 vocabulary categories");
    std::vector<std::string> names;
    for (int id : ids) names.push_back(vocab_.name(id));
    return template_fallback(names, seed);
}

Image MockBackend::generate_image(const std::string& text, std::uint64_t seed) {
    if (text.empty()) throw std::invalid_argument("generate_image: empty text");
    auto ids = categories_in_text(text);
    auto scene = MockScene::create(std::move(ids), seed, width_, height_, vocab_.size());
    return scene.render();
}

std::vector<DetectionBox> MockBackend::detect(const Image& image,
                                              const std::vector<std::string>& categories) {
    if (categories.empty()) throw std::invalid_argument("detect: empty category list");
    // Candidate hues for the requested categories.
    struct Candidate {
        std::string name;
        double hue;
        int min_x, min_y, max_x, max_y;
        bool seen;
    };
    std::vector<Candidate> cands;
    for (const auto& name : categories) {
        int id = vocab_.id_of(name);
        if (id < 0) continue;  // unknown category never detected
        cands.push_back({name, category_hue(id, vocab_.size()), image.width, image.height, -1, -1, false});
    }

    for (int y = 0; y < image.height; ++y) {
        for (int x = 0; x < image.width; ++x) {
            const auto* px = image.at(x, y);
            if (!is_foreground(px)) continue;
            const double hue = rgb_hue(px);
            Candidate* best = nullptr;
            double best_d = 30.0;  // hue tolerance
            for (auto& c : cands) {
                double d = hue_distance(hue, c.hue);
                if (d < best_d) {
                    best_d = d;
                    best = &c;
                }
            }
            if (!best) continue;
            best->seen = true;
            best->min_x = std::min(best->min_x, x);
            best->min_y = std::min(best->min_y, y);
            best->max_x = std::max(best->max_x, x);
            best->max_y = std::max(best->max_y, y);
        }
    }

    // Per-call noise RNG derived from inputs, so calls stay reproducible.
    std::uint64_t call_seed = mix64(noise_.noise_seed ^ hash_image(image));
    for (const auto& name : categories) for (char c : name) call_seed = mix64(call_seed ^ static_cast<std::uint64_t>(c));
    Rng rng(call_seed);

    std::vector<DetectionBox> boxes;
    for (const auto& c : cands) {
        if (!c.seen) continue;
        if (noise_.dropout_prob > 0.0 && rng.real() < noise_.dropout_prob) continue;
        DetectionBox box{c.name, static_cast<double>(c.min_x), static_cast<double>(c.min_y),
                         static_cast<double>(c.max_x + 1), static_cast<double>(c.max_y + 1), 1.0};
        if (noise_.box_jitter_sigma > 0.0) {
            box.x0 += rng.normal(0.0, noise_.box_jitter_sigma);
            box.y0 += rng.normal(0.0, noise_.box_jitter_sigma);
            box.x1 += rng.normal(0.0, noise_.box_jitter_sigma);
            box.y1 += rng.normal(0.0, noise_.box_jitter_sigma);
            box.x0 = std::clamp(box.x0, 0.0, static_cast<double>(image.width - 1));
            box.y0 = std::clamp(box.y0, 0.0, static_cast<double>(image.height - 1));
            box.x1 = std::clamp(box.x1, box.x0 + 1.0, static_cast<double>(image.width));
            box.y1 = std::clamp(box.y1, box.y0 + 1.0, static_cast<double>(image.height));
        }
        boxes.push_back(box);
    }
    std::stable_sort(boxes.begin(), boxes.end(),
                     [](const DetectionBox& a, const DetectionBox& b) { return a.confidence > b.confidence; });
    return boxes;
}

std::vector<std::uint8_t> MockBackend::segment(const Image& image, const DetectionBox& box) {
    if (!(box.x0 < box.x1 && box.y0 < box.y1))
        throw std::invalid_argument("segment: degenerate box");
    std::vector<std::uint8_t> mask(static_cast<std::size_t>(image.width) * image.height, 0);
    const int x0 = std::max(0, static_cast<int>(std::floor(box.x0)));
    const int y0 = std::max(0, static_cast<int>(std::floor(box.y0)));
    const int x1 = std::min(image.width, static_cast<int>(std::ceil(box.x1)));
    const int y1 = std::min(image.height, static_cast<int>(std::ceil(box.y1)));
    for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x)
            if (is_foreground(image.at(x, y)))
                mask[static_cast<std::size_t>(y) * image.width + x] = 1;
    return mask;
}

}  // namespace magicforge
