#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "magicforge/image.hpp"
#include "magicforge/types.hpp"

namespace magicforge {

struct DetectionBox {
    std::string category;
    double x0 = 0, y0 = 0, x1 = 0, y1 = 0;  // pixels, x0<x1, y0<y1
    double confidence = 1.0;
};

struct MockNoise {
    double box_jitter_sigma = 0.0;  // pixels
    double dropout_prob = 0.0;      // per-category detection dropout
    std::uint64_t noise_seed = 0;
};

struct BackendConfig {
    // Endpoint URL per role, or "mock".
    std::string text_endpoint = "mock";
    std::string image_endpoint = "mock";
    std::string detect_endpoint = "mock";
    std::string segment_endpoint = "mock";
    double timeout_s = 30.0;
    int retries = 2;
    MockNoise noise;
    int image_width = 512;
    int image_height = 512;
};

// The four external model roles behind one interface. Implementations are
// stateless after construction; concurrent calls are permitted.
class Backend {
public:
    virtual ~Backend() = default;

    virtual std::string generate_text(const std::string& instruction, std::uint64_t seed) = 0;
    virtual Image generate_image(const std::string& text, std::uint64_t seed) = 0;
    // Boxes sorted by confidence descending.
    virtual std::vector<DetectionBox> detect(const Image& image,
                                             const std::vector<std::string>& categories) = 0;
    // Row-major binary grid, image-sized, nonzero only inside the box.
    virtual std::vector<std::uint8_t> segment(const Image& image, const DetectionBox& box) = 0;
    virtual std::string name() const = 0;
};

// ---------------------------------------------------------------------------
// Deterministic procedural scene used by the mock backend. One opaque
// flat-colored convex shape per category on a gray textured background; the
// background has zero saturation and shapes have high saturation with a hue
// keyed to the category id, so ground-truth masks and boxes are recoverable
// from pixels alone.
struct ShapeSpec {
    int category_id = 0;
    int family = 0;  // 0 disk, 1 square, 2 triangle, 3 diamond
    double cx = 0, cy = 0, radius = 0;
    double hue = 0, sat = 0, val = 0;
};

class MockScene {
public:
    static MockScene create(std::vector<int> category_ids, std::uint64_t seed, int width, int height,
                            std::size_t vocab_size);

    Image render() const;             // background + all shapes
    Image render_background() const;  // counterfactual: same background, shapes omitted
    std::vector<std::uint8_t> truth_mask(int category_id) const;
    DetectionBox truth_box(int category_id, const std::string& category_name) const;

    const std::vector<ShapeSpec>& shapes() const { return shapes_; }

private:
    int width_ = 0, height_ = 0;
    std::uint64_t seed_ = 0;
    std::vector<ShapeSpec> shapes_;
};

double category_hue(int category_id, std::size_t vocab_size);
void hsv_to_rgb(double h, double s, double v, std::uint8_t& r, std::uint8_t& g, std::uint8_t& b);

class MockBackend : public Backend {
public:
    MockBackend(Vocabulary vocab, MockNoise noise, int width, int height);

    std::string generate_text(const std::string& instruction, std::uint64_t seed) override;
    Image generate_image(const std::string& text, std::uint64_t seed) override;
    std::vector<DetectionBox> detect(const Image& image,
                                     const std::vector<std::string>& categories) override;
    std::vector<std::uint8_t> segment(const Image& image, const DetectionBox& box) override;
    std::string name() const override { return "mock"; }

private:
    std::vector<int> categories_in_text(const std::string& text) const;

    Vocabulary vocab_;
    MockNoise noise_;
    int width_, height_;
};

// JSON-over-HTTP client for the wire contract in docs/backend-contract.md.
// Each role may point at a different endpoint; "mock" roles fall through to an
// internal MockBackend.
class HttpBackend : public Backend {
public:
    HttpBackend(BackendConfig config, Vocabulary vocab);
    ~HttpBackend() override;

    std::string generate_text(const std::string& instruction, std::uint64_t seed) override;
    Image generate_image(const std::string& text, std::uint64_t seed) override;
    std::vector<DetectionBox> detect(const Image& image,
                                     const std::vector<std::string>& categories) override;
    std::vector<std::uint8_t> segment(const Image& image, const DetectionBox& box) override;
    std::string name() const override { return "http"; }

private:
    std::string post_json(const std::string& endpoint, const std::string& route,
                          const std::string& body);

    BackendConfig config_;
    std::unique_ptr<MockBackend> mock_;
};

std::unique_ptr<Backend> make_backend(const BackendConfig& config, const Vocabulary& vocab);

// Serves a Backend over the wire contract (used to wrap real model adapters
// and by the client tests). Blocks until stop() is called on the server.
class BackendServer {
public:
    explicit BackendServer(Backend& backend);
    ~BackendServer();

    bool listen(const std::string& host, int port);
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace magicforge
