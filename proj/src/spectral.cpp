#include "oralnet/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <string>

#include "byte_io.hpp"
#include "oralnet/errors.hpp"
#include "oralnet/weight_io.hpp"

namespace oralnet {

Illuminant parse_illuminant(std::string_view name) {
    if (name == "d65" || name == "D65") return Illuminant::d65;
    if (name == "e" || name == "E") return Illuminant::e;
    throw UsageError("unknown illuminant '" + std::string(name) + "' (expected d65 or e)");
}

std::string_view illuminant_name(Illuminant illuminant) {
    return illuminant == Illuminant::d65 ? "d65" : "e";
}

SpectralProjector::SpectralProjector(std::span<const double> wl, const ColorimetricTables& t) {
    const std::size_t nb = wl.size();
    if (nb < 2) throw DomainError("spectrum needs at least 2 bands, got " + std::to_string(nb));
    for (std::size_t b = 0; b < nb; ++b) {
        if (!std::isfinite(wl[b])) throw DomainError("non-finite wavelength");
        if (b > 0 && !(wl[b] > wl[b - 1]))
            throw DomainError("wavelengths must be strictly increasing");
    }
    const double lo = t.wavelengths.front(), hi = t.wavelengths.back();
    if (wl.back() <= lo || wl.front() >= hi)
        throw DomainError("bands " + std::to_string(wl.front()) + "-" + std::to_string(wl.back()) +
                          " nm do not overlap the visible range");

    wx_.assign(nb, 0.0);
    wy_.assign(nb, 0.0);
    wz_.assign(nb, 0.0);
    double white_y = 0.0;
    for (std::size_t i = 0; i < kCieSamples; ++i) {
        const double trap = (i == 0 || i + 1 == kCieSamples) ? 0.5 : 1.0;
        const double s = trap * t.illuminant[i];
        white_y += s * t.ybar[i];

        // reflectance at this grid point as a blend of at most two bands
        const double lam = t.wavelengths[i];
        std::size_t b0 = 0, b1 = 0;
        double f = 0.0;
        if (lam <= wl.front()) {
            b0 = b1 = 0;
        } else if (lam >= wl.back()) {
            b0 = b1 = nb - 1;
        } else {
            b1 = static_cast<std::size_t>(std::upper_bound(wl.begin(), wl.end(), lam) - wl.begin());
            b0 = b1 - 1;
            f = (lam - wl[b0]) / (wl[b1] - wl[b0]);
        }
        const double c0 = 1.0 - f, c1 = f;
        wx_[b0] += s * t.xbar[i] * c0;
        wy_[b0] += s * t.ybar[i] * c0;
        wz_[b0] += s * t.zbar[i] * c0;
        wx_[b1] += s * t.xbar[i] * c1;
        wy_[b1] += s * t.ybar[i] * c1;
        wz_[b1] += s * t.zbar[i] * c1;
    }
    if (!(white_y > 0.0)) throw DomainError("illuminant has no power under the Y curve");
    k_ = white_y;
    for (std::size_t b = 0; b < nb; ++b) {
        wx_[b] /= white_y;
        wy_[b] /= white_y;
        wz_[b] /= white_y;
    }
}

template <typename T>
Xyz SpectralProjector::project_impl(std::span<const T> r) const {
    if (r.size() != bands())
        throw ShapeError("spectrum has " + std::to_string(r.size()) + " values for " +
                         std::to_string(bands()) + " bands");
    Xyz out;
    for (std::size_t b = 0; b < r.size(); ++b) {
        const double v = static_cast<double>(r[b]);
        out.x += wx_[b] * v;
        out.y += wy_[b] * v;
        out.z += wz_[b] * v;
    }
    return out;
}

Xyz SpectralProjector::project(std::span<const float> r) const { return project_impl(r); }
Xyz SpectralProjector::project(std::span<const double> r) const { return project_impl(r); }

Xyz spectrum_to_xyz(std::span<const double> reflectance, std::span<const double> wavelengths,
                    const ColorimetricTables& tables) {
    return SpectralProjector(wavelengths, tables).project(reflectance);
}

double srgb_encode(double v) {
    v = std::clamp(v, 0.0, 1.0);
    return v <= 0.0031308 ? 12.92 * v : 1.055 * std::pow(v, 1.0 / 2.4) - 0.055;
}

Rgb8 xyz_to_srgb(const Xyz& c) {
    // IEC 61966-2-1
    const double r = 3.2406 * c.x - 1.5372 * c.y - 0.4986 * c.z;
    const double g = -0.9689 * c.x + 1.8758 * c.y + 0.0415 * c.z;
    const double b = 0.0557 * c.x - 0.2040 * c.y + 1.0570 * c.z;
    auto q = [](double v) {
        if (std::isnan(v)) v = 0.0;
        return static_cast<std::uint8_t>(std::lround(srgb_encode(v) * 255.0));
    };
    return {q(r), q(g), q(b)};
}

void SpectralCube::validate() const {
    if (width == 0 || height == 0) throw ShapeError("cube has an empty plane");
    if (data.size() != width * height * bands())
        throw ShapeError("cube data holds " + std::to_string(data.size()) + " values, expected " +
                         std::to_string(width * height * bands()));
    for (std::size_t b = 1; b < wavelengths.size(); ++b)
        if (!(wavelengths[b] > wavelengths[b - 1]))
            throw DomainError("cube wavelengths must be strictly increasing");
}

RgbImage cube_to_rgb(const SpectralCube& cube, const ColorimetricTables& tables) {
    cube.validate();
    const std::vector<double> wl(cube.wavelengths.begin(), cube.wavelengths.end());
    const SpectralProjector proj(wl, tables);
    const std::size_t plane = cube.width * cube.height;
    RgbImage img(cube.width, cube.height);
    std::vector<float> spectrum(cube.bands());
    for (std::size_t p = 0; p < plane; ++p) {
        for (std::size_t b = 0; b < spectrum.size(); ++b) spectrum[b] = cube.data[b * plane + p];
        const Rgb8 c = xyz_to_srgb(proj.project(std::span<const float>(spectrum)));
        img.pixels[3 * p] = c.r;
        img.pixels[3 * p + 1] = c.g;
        img.pixels[3 * p + 2] = c.b;
    }
    return img;
}

namespace {
constexpr char kCubeMagic[4] = {'T', 'K', 'S', 'C'};
}

void write_cube(const SpectralCube& cube, std::ostream& out) {
    cube.validate();
    constexpr auto u32max = std::numeric_limits<std::uint32_t>::max();
    if (cube.width > u32max || cube.height > u32max || cube.bands() > u32max)
        throw ShapeError("cube extent does not fit in 32 bits");
    detail::ByteWriter w(out);
    w.bytes(kCubeMagic, 4);
    w.integer(kCubeVersion);
    w.integer(static_cast<std::uint32_t>(cube.width));
    w.integer(static_cast<std::uint32_t>(cube.height));
    w.integer(static_cast<std::uint32_t>(cube.bands()));
    w.floats(cube.wavelengths);
    w.floats(cube.data);
}

void write_cube_file(const SpectralCube& cube, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    write_cube(cube, out);
}

SpectralCube read_cube_bytes(const std::vector<std::uint8_t>& bytes) {
    detail::ByteReader r(bytes);
    if (r.remaining() < 4 || std::memcmp(r.take(4), kCubeMagic, 4) != 0) throw FormatError("bad magic");
    const auto version = r.integer<std::uint8_t>();
    if (version != kCubeVersion) throw FormatError("unsupported cube version " + std::to_string(version));
    SpectralCube cube;
    cube.width = r.integer<std::uint32_t>();
    cube.height = r.integer<std::uint32_t>();
    const std::uint64_t bands = r.integer<std::uint32_t>();
    if (bands > r.remaining() / 4) throw FormatError("truncated");
    cube.wavelengths = detail::decode_floats(r.take(bands * 4), bands);
    const std::uint64_t plane = static_cast<std::uint64_t>(cube.width) * cube.height;
    if (bands != 0 && plane > r.remaining() / 4 / bands) throw FormatError("truncated");
    const std::uint64_t count = plane * bands;
    cube.data = detail::decode_floats(r.take(count * 4), count);
    if (!r.at_end()) throw FormatError("trailing bytes after cube data");
    try {
        cube.validate();
    } catch (const Error& e) {
        throw FormatError(std::string("invalid cube: ") + e.what());
    }
    return cube;
}

SpectralCube read_cube_file(const std::filesystem::path& path) {
    return read_cube_bytes(read_file_bytes(path));
}

}  // namespace oralnet
