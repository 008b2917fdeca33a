#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "oralnet/errors.hpp"
#include "oralnet/image.hpp"

namespace oralnet {

RgbImage::RgbImage(std::size_t w, std::size_t h) : width(w), height(h), pixels(3 * w * h, 0) {}

RgbImage::RgbImage(std::size_t w, std::size_t h, std::vector<std::uint8_t> data)
    : width(w), height(h), pixels(std::move(data)) {
    if (pixels.size() != 3 * w * h)
        throw ShapeError("rgb image " + std::to_string(w) + "x" + std::to_string(h) + " needs " +
                         std::to_string(3 * w * h) + " bytes, got " +
                         std::to_string(pixels.size()));
}

RgbImage load_image(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw IoError("image not found: " + path.string());
    cv::Mat bgr = cv::imread(path.string(), cv::IMREAD_COLOR);
    if (bgr.empty()) throw IoError("cannot decode image: " + path.string());
    RgbImage img(static_cast<std::size_t>(bgr.cols), static_cast<std::size_t>(bgr.rows));
    for (int y = 0; y < bgr.rows; ++y) {
        const auto* row = bgr.ptr<cv::Vec3b>(y);
        for (int x = 0; x < bgr.cols; ++x) {
            auto* p = img.pixel(static_cast<std::size_t>(x), static_cast<std::size_t>(y));
            p[0] = row[x][2];
            p[1] = row[x][1];
            p[2] = row[x][0];
        }
    }
    return img;
}

void save_png(const RgbImage& image, const std::filesystem::path& path) {
    if (image.empty()) throw UsageError("cannot save an empty image");
    cv::Mat bgr(static_cast<int>(image.height), static_cast<int>(image.width), CV_8UC3);
    for (std::size_t y = 0; y < image.height; ++y) {
        auto* row = bgr.ptr<cv::Vec3b>(static_cast<int>(y));
        for (std::size_t x = 0; x < image.width; ++x) {
            const auto* p = image.pixel(x, y);
            row[x] = cv::Vec3b(p[2], p[1], p[0]);
        }
    }
    bool ok = false;
    try {
        ok = cv::imwrite(path.string(), bgr);
    } catch (const cv::Exception& e) {
        throw IoError("cannot write " + path.string() + ": " + e.what());
    }
    if (!ok) throw IoError("cannot write " + path.string());
}

}  // namespace oralnet
