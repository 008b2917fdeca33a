#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

namespace oralnet {

/// 8-bit RGB, row-major, interleaved.
struct RgbImage {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<std::uint8_t> pixels;

    RgbImage() = default;
    RgbImage(std::size_t w, std::size_t h);  // zero-filled
    RgbImage(std::size_t w, std::size_t h, std::vector<std::uint8_t> data);

    std::uint8_t* pixel(std::size_t x, std::size_t y) { return pixels.data() + 3 * (y * width + x); }
    const std::uint8_t* pixel(std::size_t x, std::size_t y) const {
        return pixels.data() + 3 * (y * width + x);
    }
    bool empty() const noexcept { return width == 0 || height == 0; }

    friend bool operator==(const RgbImage&, const RgbImage&) = default;
};

/// PNG or JPEG (anything the codec backend understands). IoError on failure.
RgbImage load_image(const std::filesystem::path& path);
void save_png(const RgbImage& image, const std::filesystem::path& path);

}  // namespace oralnet
