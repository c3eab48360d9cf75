#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "magicforge/backends.hpp"
#include "magicforge/rng.hpp"

namespace magicforge {

double category_hue(int category_id, std::size_t vocab_size) {
    // Evenly spaced hues maximize the pairwise separation the detector and
    // any color-keyed learner rely on.
    if (vocab_size == 0) vocab_size = 1;
    return std::fmod(category_id * (360.0 / static_cast<double>(vocab_size)), 360.0);
}

void hsv_to_rgb(double h, double s, double v, std::uint8_t& r, std::uint8_t& g, std::uint8_t& b) {
    h = std::fmod(h, 360.0);
    if (h < 0) h += 360.0;
    const double c = v * s;
    const double x = c * (1.0 - std::fabs(std::fmod(h / 60.0, 2.0) - 1.0));
    const double m = v - c;
    double rf = 0, gf = 0, bf = 0;
    if (h < 60) { rf = c; gf = x; }
    else if (h < 120) { rf = x; gf = c; }
    else if (h < 180) { gf = c; bf = x; }
    else if (h < 240) { gf = x; bf = c; }
    else if (h < 300) { rf = x; bf = c; }
    else { rf = c; bf = x; }
    r = static_cast<std::uint8_t>(std::lround((rf + m) * 255.0));
    g = static_cast<std::uint8_t>(std::lround((gf + m) * 255.0));
    b = static_cast<std::uint8_t>(std::lround((bf + m) * 255.0));
}

namespace {

bool inside_shape(const ShapeSpec& s, double x, double y) {
    const double dx = x - s.cx;
    const double dy = y - s.cy;
    switch (s.family) {
        case 0:  // disk
            return dx * dx + dy * dy <= s.radius * s.radius;
        case 1:  // axis-aligned square
            return std::fabs(dx) <= s.radius && std::fabs(dy) <= s.radius;
        case 2:  // upward triangle inscribed in the radius box
            return dy >= -s.radius && dy <= s.radius &&
                   std::fabs(dx) <= s.radius * (dy + s.radius) / (2.0 * s.radius);
        default:  // diamond
            return std::fabs(dx) + std::fabs(dy) <= s.radius;
    }
}

// Effective area fraction of each family relative to the enclosing radius box,
// used to size shapes toward a target area.
double family_fill(int family) {
    switch (family) {
        case 0: return 3.14159265358979 / 4.0;
        case 1: return 1.0;
        case 2: return 0.5;
        default: return 0.5;
    }
}

}  // namespace

MockScene MockScene::create(std::vector<int> category_ids, std::uint64_t seed, int width, int height,
                            std::size_t vocab_size) {
    if (width < 16 || height < 16)
        throw std::invalid_argument("MockScene: image must be at least 16x16");
    if (category_ids.size() > 2)
        throw std::invalid_argument("MockScene: at most two categories per scene");
    std::sort(category_ids.begin(), category_ids.end());

    MockScene scene;
    scene.width_ = width;
    scene.height_ = height;
    scene.seed_ = seed;

    const int n = static_cast<int>(category_ids.size());
    const double image_area = static_cast<double>(width) * height;
    for (int slot = 0; slot < n; ++slot) {
        const int cat = category_ids[static_cast<std::size_t>(slot)];
        Rng rng(mix64(seed ^ mix64(0x736861706573ULL + static_cast<std::uint64_t>(cat))));
        ShapeSpec s;
        s.category_id = cat;
        s.family = cat % 4;
        s.hue = category_hue(cat, vocab_size);
        // Saturation and value are fixed per category, not per scene: a
        // category keeps one exact fill color so masks stay recoverable from
        // pixels alone and the color-category correlation is stable.
        Rng color_rng(mix64(0x636f6c6f72ULL + static_cast<std::uint64_t>(cat)));
        s.sat = color_rng.uniform(0.70, 0.95);
        s.val = color_rng.uniform(0.75, 0.95);

        // Target visible-area fraction; bounds keep every shape within
        // [5%, 60%] of the image and let two shapes coexist without overlap.
        const double frac = (n == 1) ? rng.uniform(0.08, 0.28) : rng.uniform(0.06, 0.10);
        s.radius = std::sqrt(frac * image_area / (4.0 * family_fill(s.family)));

        const double margin = s.radius + 1.5;
        double x_lo = margin, x_hi = width - margin;
        if (n == 2) {
            // Shapes placed in opposite horizontal halves.
            if (slot == 0) x_hi = width / 2.0 - margin;
            else x_lo = width / 2.0 + margin;
        }
        if (x_hi < x_lo) x_hi = x_lo;  // tiny images: degenerate to a fixed center
        s.cx = rng.uniform(x_lo, x_hi);
        s.cy = rng.uniform(margin, std::max(margin, height - margin));
        scene.shapes_.push_back(s);
    }
    return scene;
}

Image MockScene::render_background() const {
    Image img(width_, height_);
    Rng rng(mix64(seed_ ^ 0x6267726f756e64ULL));
    // Smooth near-gray texture: a few seeded sinusoids plus a faint per-scene
    // tint. The tint keeps background saturation far below the foreground
    // threshold, so shape masks stay recoverable from pixels alone.
    const double fx1 = rng.uniform(0.5, 2.5), fy1 = rng.uniform(0.5, 2.5);
    const double fx2 = rng.uniform(2.0, 6.0), fy2 = rng.uniform(2.0, 6.0);
    const double p1 = rng.uniform(0.0, 6.28), p2 = rng.uniform(0.0, 6.28);
    const double base = rng.uniform(110.0, 150.0);
    const double tint_hue = rng.uniform(0.0, 360.0);
    const double tint_sat = rng.uniform(0.10, 0.14);
    for (int y = 0; y < height_; ++y) {
        for (int x = 0; x < width_; ++x) {
            const double u = static_cast<double>(x) / width_;
            const double v = static_cast<double>(y) / height_;
            double g = base + 25.0 * std::sin(6.28318 * (fx1 * u + fy1 * v) + p1) +
                       12.0 * std::sin(6.28318 * (fx2 * u - fy2 * v) + p2);
            g = std::clamp(g, 20.0, 190.0);
            auto* px = img.at(x, y);
            hsv_to_rgb(tint_hue, tint_sat, g / 255.0, px[0], px[1], px[2]);
        }
    }
    return img;
}

Image MockScene::render() const {
    Image img = render_background();
    for (const auto& s : shapes_) {
        std::uint8_t r, g, b;
        hsv_to_rgb(s.hue, s.sat, s.val, r, g, b);
        for (int y = 0; y < height_; ++y) {
            for (int x = 0; x < width_; ++x) {
                if (inside_shape(s, x + 0.5, y + 0.5)) {
                    auto* px = img.at(x, y);
                    px[0] = r;
                    px[1] = g;
                    px[2] = b;
                }
            }
        }
    }
    return img;
}

std::vector<std::uint8_t> MockScene::truth_mask(int category_id) const {
    std::vector<std::uint8_t> mask(static_cast<std::size_t>(width_) * height_, 0);
    // Later shapes are drawn on top; a pixel belongs to the topmost shape.
    for (int y = 0; y < height_; ++y) {
        for (int x = 0; x < width_; ++x) {
            int owner = -1;
            for (const auto& s : shapes_)
                if (inside_shape(s, x + 0.5, y + 0.5)) owner = s.category_id;
            if (owner == category_id)
                mask[static_cast<std::size_t>(y) * width_ + x] = 1;
        }
    }
    return mask;
}

DetectionBox MockScene::truth_box(int category_id, const std::string& category_name) const {
    auto mask = truth_mask(category_id);
    int min_x = width_, min_y = height_, max_x = -1, max_y = -1;
    for (int y = 0; y < height_; ++y)
        for (int x = 0; x < width_; ++x)
            if (mask[static_cast<std::size_t>(y) * width_ + x]) {
                min_x = std::min(min_x, x);
                min_y = std::min(min_y, y);
                max_x = std::max(max_x, x);
                max_y = std::max(max_y, y);
            }
    if (max_x < 0) throw std::runtime_error("truth_box: category has no pixels");
    return DetectionBox{category_name, static_cast<double>(min_x), static_cast<double>(min_y),
                        static_cast<double>(max_x + 1), static_cast<double>(max_y + 1), 1.0};
}

}  // namespace magicforge
