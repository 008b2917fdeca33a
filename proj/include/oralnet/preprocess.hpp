#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "oralnet/image.hpp"
#include "oralnet/tensor.hpp"

namespace oralnet {

inline constexpr std::size_t kLetterboxSize = 640;

// ImageNet training statistics expected by the pretrained backbones.
inline constexpr std::array<float, 3> kChannelMean{0.485f, 0.456f, 0.406f};
inline constexpr std::array<float, 3> kChannelStd{0.229f, 0.224f, 0.225f};

struct BoundingBox {
    std::size_t x = 0;
    std::size_t y = 0;
    std::size_t w = 0;
    std::size_t h = 0;
    friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

/// Exactly the boxed region; BoundsError if the box is empty or leaves the image.
RgbImage crop_bbox(const RgbImage& image, const BoundingBox& box);

/// Bilinear resampling with half-pixel centres (edge pixels clamped).
/// A same-size resize returns the input unchanged.
RgbImage resize_bilinear(const RgbImage& image, std::size_t width, std::size_t height);

/// Where the scaled content lands inside the square canvas.
struct LetterboxGeometry {
    double scale = 1.0;
    std::size_t content_w = 0;
    std::size_t content_h = 0;
    std::size_t offset_x = 0;
    std::size_t offset_y = 0;
};

LetterboxGeometry letterbox_geometry(std::size_t width, std::size_t height,
                                     std::size_t target = kLetterboxSize);

/// Aspect-preserving resize so the longer side equals `target`, centred on a
/// black target x target canvas.
RgbImage letterbox(const RgbImage& image, std::size_t target = kLetterboxSize);

/// 3 x 224 x 224 channels-first tensor, bilinear-sampled and normalised with
/// kChannelMean / kChannelStd after scaling to [0, 1].
Tensor to_model_input(const RgbImage& image);

/// crop -> letterbox -> to_model_input
Tensor preprocess_image(const RgbImage& image, const BoundingBox& box);

enum class Label : std::uint8_t { no_calculus = 0, calculus = 1 };

std::string label_name(Label label);  // "no_calculus" | "calculus"

enum class SplitTag { train, validation, test };
std::string split_tag_name(SplitTag tag);
SplitTag parse_split_tag(const std::string& name);

struct ManifestRecord {
    std::filesystem::path path;
    Label label = Label::no_calculus;
    BoundingBox box;
    std::optional<SplitTag> split;
};

struct DatasetManifest {
    std::vector<ManifestRecord> records;
};

/// CSV with header `path,label,x,y,w,h` and an optional trailing `split`
/// column. Relative paths resolve against the manifest's directory.
DatasetManifest read_manifest(const std::filesystem::path& csv);
void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& csv);

struct SplitAssignment {
    std::vector<std::size_t> train;
    std::vector<std::size_t> validation;
    std::vector<std::size_t> test;
};

/// Split sizes for n records: round(0.7n), round(0.2n), remainder.
std::array<std::size_t, 3> split_sizes(std::size_t n);

/// Seeded, label-stratified 70/20/10 partition of record indices. Each
/// label's share of every split is within one record of its ideal.
SplitAssignment split_dataset(const DatasetManifest& manifest, std::uint64_t seed);

}  // namespace oralnet
