#include <algorithm>
#include <chrono>
#include <stdexcept>
#include <thread>

#include <httplib.h>

#include "magicforge/backends.hpp"

namespace magicforge {

namespace {

json box_to_json(const DetectionBox& b) {
    return json{{"category", b.category}, {"x0", b.x0}, {"y0", b.y0},
                {"x1", b.x1},             {"y1", b.y1}, {"confidence", b.confidence}};
}

DetectionBox box_from_json(const json& j) {
    DetectionBox b;
    b.category = j.at("category").get<std::string>();
    b.x0 = j.at("x0").get<double>();
    b.y0 = j.at("y0").get<double>();
    b.x1 = j.at("x1").get<double>();
    b.y1 = j.at("y1").get<double>();
    b.confidence = j.at("confidence").get<double>();
    return b;
}

}  // namespace

HttpBackend::HttpBackend(BackendConfig config, Vocabulary vocab) : config_(std::move(config)) {
    const bool any_mock = config_.text_endpoint == "mock" || config_.image_endpoint == "mock" ||
                          config_.detect_endpoint == "mock" || config_.segment_endpoint == "mock";
    if (any_mock)
        mock_ = std::make_unique<MockBackend>(std::move(vocab), config_.noise,
                                              config_.image_width, config_.image_height);
}

HttpBackend::~HttpBackend() = default;

std::string HttpBackend::post_json(const std::string& endpoint, const std::string& route,
                                   const std::string& body) {
    httplib::Client client(endpoint);
    const auto timeout = std::chrono::duration<double>(config_.timeout_s);
    client.set_connection_timeout(std::chrono::duration_cast<std::chrono::milliseconds>(timeout));
    client.set_read_timeout(std::chrono::duration_cast<std::chrono::milliseconds>(timeout));

    std::string last_error;
    for (int attempt = 0; attempt <= config_.retries; ++attempt) {
        auto res = client.Post(route, body, "application/json");
        if (res && res->status == 200) {
            if (res->body.empty()) throw std::runtime_error("backend returned empty response: " + route);
            return res->body;
        }
        last_error = res ? ("status " + std::to_string(res->status))
                         : ("transport error " + httplib::to_string(res.error()));
    }
    throw std::runtime_error("backend " + endpoint + route + " failed after " +
                             std::to_string(config_.retries + 1) + " attempts: " + last_error);
}

std::string HttpBackend::generate_text(const std::string& instruction, std::uint64_t seed) {
    if (config_.text_endpoint == "mock") return mock_->generate_text(instruction, seed);
    json req{{"instruction", instruction}, {"seed", seed}};
    json res = json::parse(post_json(config_.text_endpoint, "/generate-text", req.dump()));
    auto text = res.at("text").get<std::string>();
    if (text.empty()) throw std::runtime_error("backend returned empty text");
    return text;
}

Image HttpBackend::generate_image(const std::string& text, std::uint64_t seed) {
    if (config_.image_endpoint == "mock") return mock_->generate_image(text, seed);
    json req{{"text", text},
             {"seed", seed},
             {"width", config_.image_width},
             {"height", config_.image_height}};
    json res = json::parse(post_json(config_.image_endpoint, "/generate-image", req.dump()));
    Image img = decode_png_base64(res.at("image_b64").get<std::string>());
    if (img.width != config_.image_width || img.height != config_.image_height)
        throw std::runtime_error("backend returned image with unexpected dimensions");
    return img;
}

std::vector<DetectionBox> HttpBackend::detect(const Image& image,
                                              const std::vector<std::string>& categories) {
    if (config_.detect_endpoint == "mock") return mock_->detect(image, categories);
    json req{{"image_b64", encode_png_base64(image)}, {"categories", categories}};
    json res = json::parse(post_json(config_.detect_endpoint, "/detect", req.dump()));
    std::vector<DetectionBox> boxes;
    for (const auto& bj : res.at("boxes")) boxes.push_back(box_from_json(bj));
    std::stable_sort(boxes.begin(), boxes.end(),
                     [](const DetectionBox& a, const DetectionBox& b) { return a.confidence > b.confidence; });
    return boxes;
}

std::vector<std::uint8_t> HttpBackend::segment(const Image& image, const DetectionBox& box) {
    if (config_.segment_endpoint == "mock") return mock_->segment(image, box);
    json req{{"image_b64", encode_png_base64(image)}, {"box", box_to_json(box)}};
    json res = json::parse(post_json(config_.segment_endpoint, "/segment", req.dump()));
    ClassMask mask;
    mask.width = res.at("width").get<int>();
    mask.height = res.at("height").get<int>();
    mask.runs = res.at("runs").get<std::vector<std::uint32_t>>();
    if (mask.width != image.width || mask.height != image.height)
        throw std::runtime_error("backend returned mask with unexpected dimensions");
    return rle_decode(mask);
}

std::unique_ptr<Backend> make_backend(const BackendConfig& config, const Vocabulary& vocab) {
    const bool all_mock = config.text_endpoint == "mock" && config.image_endpoint == "mock" &&
                          config.detect_endpoint == "mock" && config.segment_endpoint == "mock";
    if (all_mock)
        return std::make_unique<MockBackend>(vocab, config.noise, config.image_width,
                                             config.image_height);
    return std::make_unique<HttpBackend>(config, vocab);
}

// ---------------------------------------------------------------------------

struct BackendServer::Impl {
    Backend& backend;
    httplib::Server server;
};

BackendServer::BackendServer(Backend& backend) : impl_(new Impl{backend, {}}) {
    auto& srv = impl_->server;
    auto& be = impl_->backend;

    auto handle = [](httplib::Response& res, auto&& fn) {
        try {
            res.set_content(fn().dump(), "application/json");
        } catch (const std::exception& e) {
            res.status = 400;
            res.set_content(json{{"error", e.what()}}.dump(), "application/json");
        }
    };

    srv.Post("/generate-text", [&be, handle](const httplib::Request& req, httplib::Response& res) {
        handle(res, [&] {
            json j = json::parse(req.body);
            return json{{"text", be.generate_text(j.at("instruction").get<std::string>(),
                                                  j.value("seed", std::uint64_t{0}))}};
        });
    });
    srv.Post("/generate-image", [&be, handle](const httplib::Request& req, httplib::Response& res) {
        handle(res, [&] {
            json j = json::parse(req.body);
            Image img = be.generate_image(j.at("text").get<std::string>(),
                                          j.value("seed", std::uint64_t{0}));
            return json{{"image_b64", encode_png_base64(img)}};
        });
    });
    srv.Post("/detect", [&be, handle](const httplib::Request& req, httplib::Response& res) {
        handle(res, [&] {
            json j = json::parse(req.body);
            Image img = decode_png_base64(j.at("image_b64").get<std::string>());
            json boxes = json::array();
            for (const auto& b : be.detect(img, j.at("categories").get<std::vector<std::string>>()))
                boxes.push_back(box_to_json(b));
            return json{{"boxes", std::move(boxes)}};
        });
    });
    srv.Post("/segment", [&be, handle](const httplib::Request& req, httplib::Response& res) {
        handle(res, [&] {
            json j = json::parse(req.body);
            Image img = decode_png_base64(j.at("image_b64").get<std::string>());
            auto grid = be.segment(img, box_from_json(j.at("box")));
            auto mask = rle_encode(grid, img.width, img.height);
            return json{{"width", mask.width}, {"height", mask.height}, {"runs", mask.runs}};
        });
    });
}

BackendServer::~BackendServer() { stop(); }

bool BackendServer::listen(const std::string& host, int port) {
    return impl_->server.listen(host, port);
}

void BackendServer::stop() {
    if (impl_) impl_->server.stop();
}

}  // namespace magicforge
