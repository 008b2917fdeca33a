#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string_view>
#include <vector>

#include "oralnet/image.hpp"

namespace oralnet {

inline constexpr std::size_t kCieSamples = 81;
inline constexpr double kCieStartNm = 380.0;
inline constexpr double kCieStepNm = 5.0;

enum class Illuminant { d65, e };

Illuminant parse_illuminant(std::string_view name);  // "d65" | "e"; UsageError otherwise
std::string_view illuminant_name(Illuminant illuminant);

/// CIE 1931 2 degree observer and an illuminant SPD on the 380-780 nm, 5 nm grid.
struct ColorimetricTables {
    std::array<double, kCieSamples> wavelengths{};
    std::array<double, kCieSamples> xbar{};
    std::array<double, kCieSamples> ybar{};
    std::array<double, kCieSamples> zbar{};
    std::array<double, kCieSamples> illuminant{};
};

ColorimetricTables cie1931_tables(Illuminant illuminant = Illuminant::d65);

struct Xyz {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;
};

struct Rgb8 {
    std::uint8_t r = 0;
    std::uint8_t g = 0;
    std::uint8_t b = 0;
    friend bool operator==(const Rgb8&, const Rgb8&) = default;
};

/// Precomputed linear map from band reflectances to XYZ for a fixed band
/// layout: interpolation onto the 5 nm grid, trapezoid weights, illuminant and
/// the normalization k (perfect reflector has Y = 1) folded into 3 x B weights.
class SpectralProjector {
public:
    /// DomainError when fewer than 2 bands, wavelengths not strictly
    /// increasing, or the band range does not overlap 380-780 nm.
    SpectralProjector(std::span<const double> wavelengths, const ColorimetricTables& tables);

    std::size_t bands() const noexcept { return wx_.size(); }
    Xyz project(std::span<const float> reflectance) const;
    Xyz project(std::span<const double> reflectance) const;

    /// Y of a perfect reflector before normalization.
    double normalization() const noexcept { return k_; }

private:
    template <typename T>
    Xyz project_impl(std::span<const T> reflectance) const;

    std::vector<double> wx_, wy_, wz_;
    double k_ = 0.0;
};

Xyz spectrum_to_xyz(std::span<const double> reflectance, std::span<const double> wavelengths,
                    const ColorimetricTables& tables);

/// Piecewise sRGB transfer curve on a clipped linear value.
double srgb_encode(double linear);
/// sRGB (D65) matrix, per-channel clipping, transfer curve, round(v * 255).
Rgb8 xyz_to_srgb(const Xyz& xyz);

/// Plane-major reflectance: data[(band * height + y) * width + x].
struct SpectralCube {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<float> wavelengths;
    std::vector<float> data;

    std::size_t bands() const noexcept { return wavelengths.size(); }
    float at(std::size_t band, std::size_t y, std::size_t x) const {
        return data[(band * height + y) * width + x];
    }
    /// ShapeError on size mismatches, DomainError on non-increasing wavelengths.
    void validate() const;
};

RgbImage cube_to_rgb(const SpectralCube& cube, const ColorimetricTables& tables);

/// `TKSC` | u8 version | u32 width | u32 height | u32 bands | bands x f32
/// wavelengths | plane-major f32 reflectance, little-endian.
inline constexpr std::uint8_t kCubeVersion = 1;

void write_cube(const SpectralCube& cube, std::ostream& out);
void write_cube_file(const SpectralCube& cube, const std::filesystem::path& path);
SpectralCube read_cube_bytes(const std::vector<std::uint8_t>& bytes);
SpectralCube read_cube_file(const std::filesystem::path& path);

}  // namespace oralnet
