#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace magicforge {

// 8-bit RGB image, row-major, interleaved channels.
struct Image {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;  // size == width * height * 3

    Image() = default;
    Image(int w, int h) : width(w), height(h), pixels(static_cast<std::size_t>(w) * h * 3, 0) {}

    std::uint8_t* at(int x, int y) { return pixels.data() + (static_cast<std::size_t>(y) * width + x) * 3; }
    const std::uint8_t* at(int x, int y) const {
        return pixels.data() + (static_cast<std::size_t>(y) * width + x) * 3;
    }

    bool operator==(const Image&) const = default;
};

void write_png(const Image& img, const std::string& path);
Image read_png(const std::string& path);

std::string encode_png_base64(const Image& img);
Image decode_png_base64(const std::string& b64);

}  // namespace magicforge
