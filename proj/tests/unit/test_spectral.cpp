#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>
#include <sstream>

#include "oralnet/errors.hpp"
#include "oralnet/spectral.hpp"

using namespace oralnet;

namespace {

std::vector<double> grid(double start, double step, std::size_t n) {
    std::vector<double> w(n);
    for (std::size_t i = 0; i < n; ++i) w[i] = start + step * static_cast<double>(i);
    return w;
}

int channel_gap(const Rgb8& c, int v) {
    return std::max({std::abs(c.r - v), std::abs(c.g - v), std::abs(c.b - v)});
}

}  // namespace

TEST_CASE("tables are on the 5 nm grid and nonnegative") {
    const auto t = cie1931_tables();
    CHECK(t.wavelengths.front() == 380.0);
    CHECK(t.wavelengths.back() == 780.0);
    for (std::size_t i = 0; i < kCieSamples; ++i) {
        CHECK(t.wavelengths[i] == 380.0 + 5.0 * static_cast<double>(i));
        CHECK(t.xbar[i] >= 0.0);
        CHECK(t.ybar[i] >= 0.0);
        CHECK(t.zbar[i] >= 0.0);
        CHECK(t.illuminant[i] > 0.0);
    }
    // spot values from the published tables
    CHECK(t.ybar[(555 - 380) / 5] == doctest::Approx(1.0).epsilon(1e-3));
    CHECK(t.illuminant[(560 - 380) / 5] == doctest::Approx(100.0).epsilon(1e-3));
}

TEST_CASE("zero reflectance is black") {
    const auto t = cie1931_tables();
    const auto wl = grid(400, 10, 31);
    const std::vector<double> zero(wl.size(), 0.0);
    const Xyz z = spectrum_to_xyz(zero, wl, t);
    CHECK(z.x == 0.0);
    CHECK(z.y == 0.0);
    CHECK(z.z == 0.0);
    CHECK(xyz_to_srgb(z) == Rgb8{0, 0, 0});
}

TEST_CASE("perfect reflector under D65 gives the D65 white point") {
    const auto t = cie1931_tables();
    const auto wl = grid(380, 5, 81);
    const std::vector<double> one(wl.size(), 1.0);
    const Xyz w = spectrum_to_xyz(one, wl, t);
    CHECK(std::abs(w.x - 0.9505) <= 1e-2);
    CHECK(std::abs(w.y - 1.0) <= 1e-12);
    CHECK(std::abs(w.z - 1.0890) <= 1e-2);
    CHECK(channel_gap(xyz_to_srgb(w), 255) <= 1);
    CHECK(channel_gap(xyz_to_srgb({0.9505, 1.0, 1.0890}), 255) <= 1);

    // a coarse camera grid clamps outside its support and still lands on white
    const auto coarse = grid(450, 50, 5);
    const Xyz c = spectrum_to_xyz(std::vector<double>(5, 1.0), coarse, t);
    CHECK(c.y == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("illuminant E white is equal energy") {
    const auto t = cie1931_tables(Illuminant::e);
    const auto wl = grid(380, 5, 81);
    const Xyz w = spectrum_to_xyz(std::vector<double>(81, 1.0), wl, t);
    CHECK(w.y == doctest::Approx(1.0));
    CHECK(w.x == doctest::Approx(1.0).epsilon(5e-3));
    CHECK(w.z == doctest::Approx(1.0).epsilon(5e-3));
    CHECK(parse_illuminant("e") == Illuminant::e);
    CHECK(parse_illuminant("d65") == Illuminant::d65);
    CHECK_THROWS_AS(parse_illuminant("a"), UsageError);
}

TEST_CASE("18 percent gray") {
    const Xyz white{0.9505, 1.0, 1.0890};
    CHECK(channel_gap(xyz_to_srgb({0.18 * white.x, 0.18 * white.y, 0.18 * white.z}), 118) <= 1);
    CHECK(std::lround(srgb_encode(0.18) * 255.0) == 118);
}

TEST_CASE("xyz_to_srgb reference colors") {
    CHECK(xyz_to_srgb({0, 0, 0}) == Rgb8{0, 0, 0});
    // out of gamut values are clipped per channel
    CHECK(xyz_to_srgb({5, 5, 5}) == Rgb8{255, 255, 255});
    CHECK(xyz_to_srgb({-1, -1, -1}) == Rgb8{0, 0, 0});
    // sRGB primaries (XYZ columns of the inverse matrix)
    CHECK(xyz_to_srgb({0.4124, 0.2126, 0.0193}) == Rgb8{255, 0, 0});
    CHECK(xyz_to_srgb({0.3576, 0.7152, 0.1192}) == Rgb8{0, 255, 0});
    CHECK(xyz_to_srgb({0.1805, 0.0722, 0.9505}) == Rgb8{0, 0, 255});
}

TEST_CASE("transfer curve is monotone with bounded quantization error") {
    double last = -1.0;
    for (int i = 0; i <= 100000; ++i) {
        const double v = i / 100000.0;
        const double e = srgb_encode(v);
        REQUIRE(e > last);
        last = e;
        const double q = std::lround(e * 255.0);
        REQUIRE(std::abs(q - e * 255.0) <= 0.5);
    }
    CHECK(srgb_encode(0.0031308) == doctest::Approx(12.92 * 0.0031308));
    CHECK(srgb_encode(1.0) == doctest::Approx(1.0));
}

TEST_CASE("spectrum_to_xyz is linear") {
    const auto t = cie1931_tables();
    const auto wl = grid(397.5, 7.3, 50);
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> a(wl.size()), b(wl.size()), mix(wl.size());
        const double alpha = 3.0 * u(rng), beta = u(rng);
        for (std::size_t i = 0; i < wl.size(); ++i) {
            a[i] = u(rng);
            b[i] = u(rng);
            mix[i] = alpha * a[i] + beta * b[i];
        }
        const Xyz xa = spectrum_to_xyz(a, wl, t), xb = spectrum_to_xyz(b, wl, t), xm = spectrum_to_xyz(mix, wl, t);
        CHECK(xm.x == doctest::Approx(alpha * xa.x + beta * xb.x).epsilon(1e-12));
        CHECK(xm.y == doctest::Approx(alpha * xa.y + beta * xb.y).epsilon(1e-12));
        CHECK(xm.z == doctest::Approx(alpha * xa.z + beta * xb.z).epsilon(1e-12));
    }
}

TEST_CASE("illuminant power scales XYZ before normalization") {
    auto t = cie1931_tables();
    const auto wl = grid(380, 5, 81);
    std::vector<double> r(81);
    for (std::size_t i = 0; i < 81; ++i) r[i] = 0.2 + 0.6 * std::sin(static_cast<double>(i) / 9.0) * std::sin(static_cast<double>(i) / 9.0);
    const SpectralProjector base(wl, t);
    for (auto& s : t.illuminant) s *= 2.5;
    const SpectralProjector bright(wl, t);
    CHECK(bright.normalization() == doctest::Approx(2.5 * base.normalization()));
    // the fixed normalization cancels the scale
    CHECK(bright.project(std::span<const double>(r)).y == doctest::Approx(base.project(std::span<const double>(r)).y));
}

TEST_CASE("domain errors") {
    const auto t = cie1931_tables();
    CHECK_THROWS_AS(spectrum_to_xyz(std::vector<double>{1.0}, std::vector<double>{550.0}, t), DomainError);
    CHECK_THROWS_AS(spectrum_to_xyz(std::vector<double>{1, 1}, std::vector<double>{800.0, 900.0}, t), DomainError);
    CHECK_THROWS_AS(spectrum_to_xyz(std::vector<double>{1, 1}, std::vector<double>{300.0, 350.0}, t), DomainError);
    CHECK_THROWS_AS(spectrum_to_xyz(std::vector<double>{1, 1}, std::vector<double>{600.0, 500.0}, t), DomainError);
    CHECK_THROWS_AS(spectrum_to_xyz(std::vector<double>{1, 1, 1}, std::vector<double>{500.0, 600.0}, t), ShapeError);
    // partial overlap is fine
    CHECK_NOTHROW(spectrum_to_xyz(std::vector<double>{1, 1}, std::vector<double>{700.0, 1000.0}, t));
}

TEST_CASE("cube_to_rgb composes the per-pixel operations") {
    const auto t = cie1931_tables();
    SpectralCube cube;
    cube.width = 3;
    cube.height = 2;
    cube.wavelengths = {420.0f, 480.0f, 540.0f, 600.0f, 660.0f, 720.0f};
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<float> u(0.0f, 1.0f);
    cube.data.resize(6 * 6);
    for (auto& v : cube.data) v = u(rng);
    // pixels (0,0) and (2,1) share a spectrum
    for (std::size_t b = 0; b < 6; ++b) cube.data[b * 6 + 5] = cube.data[b * 6 + 0];
    const RgbImage img = cube_to_rgb(cube, t);
    REQUIRE(img.width == 3);
    REQUIRE(img.height == 2);
    REQUIRE(img.pixels.size() == 18);
    const std::vector<double> wl(cube.wavelengths.begin(), cube.wavelengths.end());
    for (std::size_t y = 0; y < 2; ++y)
        for (std::size_t x = 0; x < 3; ++x) {
            std::vector<double> s;
            for (std::size_t b = 0; b < 6; ++b) s.push_back(cube.at(b, y, x));
            const Rgb8 c = xyz_to_srgb(spectrum_to_xyz(s, wl, t));
            CHECK(img.pixel(x, y)[0] == c.r);
            CHECK(img.pixel(x, y)[1] == c.g);
            CHECK(img.pixel(x, y)[2] == c.b);
        }
    CHECK(std::equal(img.pixel(0, 0), img.pixel(0, 0) + 3, img.pixel(2, 1)));

    std::fill(cube.data.begin(), cube.data.end(), 0.0f);
    const RgbImage black = cube_to_rgb(cube, t);
    CHECK(std::all_of(black.pixels.begin(), black.pixels.end(), [](auto v) { return v == 0; }));
}

TEST_CASE("cube file round trip and validation") {
    SpectralCube cube;
    cube.width = 4;
    cube.height = 3;
    cube.wavelengths = {450.0f, 550.0f, 650.0f};
    cube.data.resize(36);
    for (std::size_t i = 0; i < 36; ++i) cube.data[i] = static_cast<float>(i) / 36.0f;
    std::ostringstream out;
    write_cube(cube, out);
    const std::string s = out.str();
    std::vector<std::uint8_t> bytes(s.begin(), s.end());
    CHECK(bytes.size() == 4 + 1 + 12 + 3 * 4 + 36 * 4);
    CHECK(bytes[4] == kCubeVersion);
    const SpectralCube back = read_cube_bytes(bytes);
    CHECK(back.width == 4);
    CHECK(back.height == 3);
    CHECK(back.wavelengths == cube.wavelengths);
    CHECK(back.data == cube.data);

    auto bad = bytes;
    bad[0] = 'X';
    CHECK_THROWS_AS(read_cube_bytes(bad), FormatError);
    CHECK_THROWS_AS(read_cube_bytes({bytes.begin(), bytes.end() - 1}), FormatError);
    bytes.push_back(0);
    CHECK_THROWS_AS(read_cube_bytes(bytes), FormatError);

    SpectralCube unsorted = cube;
    unsorted.wavelengths = {550.0f, 450.0f, 650.0f};
    CHECK_THROWS_AS(unsorted.validate(), DomainError);
    SpectralCube short_data = cube;
    short_data.data.pop_back();
    CHECK_THROWS_AS(short_data.validate(), ShapeError);

    const auto path = std::filesystem::temp_directory_path() / "oralnet_cube.tksc";
    write_cube_file(cube, path);
    CHECK(read_cube_file(path).data == cube.data);
    std::filesystem::remove(path);
}
