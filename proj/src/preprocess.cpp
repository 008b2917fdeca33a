#include "oralnet/preprocess.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include "oralnet/errors.hpp"
#include "shuffle.hpp"

namespace oralnet {

RgbImage crop_bbox(const RgbImage& image, const BoundingBox& box) {
    if (box.w == 0 || box.h == 0) throw BoundsError("bounding box must have positive size");
    if (box.x > image.width || box.w > image.width - box.x || box.y > image.height ||
        box.h > image.height - box.y)
        throw BoundsError("bounding box (" + std::to_string(box.x) + "," + std::to_string(box.y) +
                          "," + std::to_string(box.w) + "," + std::to_string(box.h) +
                          ") exceeds image " + std::to_string(image.width) + "x" +
                          std::to_string(image.height));
    RgbImage out(box.w, box.h);
    for (std::size_t y = 0; y < box.h; ++y) {
        const auto* src = image.pixel(box.x, box.y + y);
        std::copy(src, src + 3 * box.w, out.pixel(0, y));
    }
    return out;
}

namespace {

struct Tap {
    std::size_t lo;
    std::size_t hi;
    float frac;
};

// Half-pixel-centre sampling positions of `out` destination samples over `in` source samples.
std::vector<Tap> taps(std::size_t in, std::size_t out) {
    std::vector<Tap> t(out);
    const double ratio = static_cast<double>(in) / static_cast<double>(out);
    for (std::size_t i = 0; i < out; ++i) {
        double s = (static_cast<double>(i) + 0.5) * ratio - 0.5;
        s = std::clamp(s, 0.0, static_cast<double>(in - 1));
        const auto lo = static_cast<std::size_t>(s);
        t[i] = {lo, std::min(lo + 1, in - 1), static_cast<float>(s - static_cast<double>(lo))};
    }
    return t;
}

// Calls sink(x, y, channel, value) for every destination sample.
template <typename Sink>
void sample_bilinear(const RgbImage& image, std::size_t width, std::size_t height, Sink&& sink) {
    if (image.empty()) throw UsageError("cannot resample an empty image");
    const auto xs = taps(image.width, width);
    const auto ys = taps(image.height, height);
    for (std::size_t y = 0; y < height; ++y) {
        const Tap& ty = ys[y];
        for (std::size_t x = 0; x < width; ++x) {
            const Tap& tx = xs[x];
            const auto* p00 = image.pixel(tx.lo, ty.lo);
            const auto* p01 = image.pixel(tx.hi, ty.lo);
            const auto* p10 = image.pixel(tx.lo, ty.hi);
            const auto* p11 = image.pixel(tx.hi, ty.hi);
            for (std::size_t c = 0; c < 3; ++c) {
                const float top = (1.0f - tx.frac) * p00[c] + tx.frac * p01[c];
                const float bottom = (1.0f - tx.frac) * p10[c] + tx.frac * p11[c];
                sink(x, y, c, (1.0f - ty.frac) * top + ty.frac * bottom);
            }
        }
    }
}

}  // namespace

RgbImage resize_bilinear(const RgbImage& image, std::size_t width, std::size_t height) {
    if (width == 0 || height == 0) throw UsageError("resize target must be nonempty");
    if (width == image.width && height == image.height) return image;
    RgbImage out(width, height);
    sample_bilinear(image, width, height, [&](std::size_t x, std::size_t y, std::size_t c, float v) {
        out.pixel(x, y)[c] = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
    });
    return out;
}

LetterboxGeometry letterbox_geometry(std::size_t width, std::size_t height, std::size_t target) {
    if (width == 0 || height == 0) throw UsageError("letterbox: image must be nonempty");
    LetterboxGeometry g;
    const std::size_t longest = std::max(width, height);
    g.scale = static_cast<double>(target) / static_cast<double>(longest);
    auto scaled = [&](std::size_t extent) -> std::size_t {
        if (extent == longest) return target;
        const auto v = static_cast<std::size_t>(std::llround(static_cast<double>(extent) * g.scale));
        return std::clamp<std::size_t>(v, 1, target);
    };
    g.content_w = scaled(width);
    g.content_h = scaled(height);
    g.offset_x = (target - g.content_w) / 2;
    g.offset_y = (target - g.content_h) / 2;
    return g;
}

RgbImage letterbox(const RgbImage& image, std::size_t target) {
    const auto g = letterbox_geometry(image.width, image.height, target);
    const RgbImage content = resize_bilinear(image, g.content_w, g.content_h);
    RgbImage canvas(target, target);
    for (std::size_t y = 0; y < g.content_h; ++y) {
        const auto* src = content.pixel(0, y);
        std::copy(src, src + 3 * g.content_w, canvas.pixel(g.offset_x, g.offset_y + y));
    }
    return canvas;
}

Tensor to_model_input(const RgbImage& image) {
    constexpr std::size_t side = 224;
    Tensor out({3, side, side});
    sample_bilinear(image, side, side, [&](std::size_t x, std::size_t y, std::size_t c, float v) {
        out.at(c, y, x) = (v / 255.0f - kChannelMean[c]) / kChannelStd[c];
    });
    return out;
}

Tensor preprocess_image(const RgbImage& image, const BoundingBox& box) {
    return to_model_input(letterbox(crop_bbox(image, box)));
}

std::string label_name(Label label) {
    return label == Label::calculus ? "calculus" : "no_calculus";
}

std::string split_tag_name(SplitTag tag) {
    switch (tag) {
        case SplitTag::train: return "train";
        case SplitTag::validation: return "val";
        case SplitTag::test: return "test";
    }
    return "?";
}

SplitTag parse_split_tag(const std::string& name) {
    if (name == "train") return SplitTag::train;
    if (name == "val" || name == "validation") return SplitTag::validation;
    if (name == "test") return SplitTag::test;
    throw UsageError("unknown split: " + name + " (expected train, val or test)");
}

// ----------------------------------------------------------------- manifest

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char ch = line[i];
        if (quoted) {
            if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                field += '"';
                ++i;
            } else if (ch == '"') {
                quoted = false;
            } else {
                field += ch;
            }
        } else if (ch == '"') {
            quoted = true;
        } else if (ch == ',') {
            fields.push_back(std::move(field));
            field.clear();
        } else if (ch != '\r') {
            field += ch;
        }
    }
    fields.push_back(std::move(field));
    return fields;
}

std::size_t parse_count(const std::string& text, const std::string& what, std::size_t line) {
    std::size_t v = 0;
    const auto* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, v);
    if (ec != std::errc() || ptr != end)
        throw DataError("manifest line " + std::to_string(line) + ": bad " + what + " '" + text +
                        "'");
    return v;
}

std::string csv_quote(const std::string& s) {
    if (s.find_first_of(",\"") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
    return out + "\"";
}

}  // namespace

DatasetManifest read_manifest(const std::filesystem::path& csv) {
    std::ifstream in(csv);
    if (!in) throw IoError("cannot open manifest: " + csv.string());
    std::string line;
    if (!std::getline(in, line)) throw DataError("manifest is empty: " + csv.string());
    const auto header = split_csv_line(line);
    const std::vector<std::string> expected{"path", "label", "x", "y", "w", "h"};
    if (header.size() < expected.size() ||
        !std::equal(expected.begin(), expected.end(), header.begin()) ||
        (header.size() == 7 && header[6] != "split") || header.size() > 7)
        throw DataError("manifest header must be path,label,x,y,w,h[,split]");
    const bool has_split = header.size() == 7;
    const auto base = csv.parent_path();

    DatasetManifest manifest;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        const auto f = split_csv_line(line);
        if (f.size() != header.size())
            throw DataError("manifest line " + std::to_string(lineno) + ": expected " +
                            std::to_string(header.size()) + " fields, got " +
                            std::to_string(f.size()));
        ManifestRecord r;
        r.path = f[0];
        if (r.path.is_relative()) r.path = base / r.path;
        if (f[1] == "0")
            r.label = Label::no_calculus;
        else if (f[1] == "1")
            r.label = Label::calculus;
        else
            throw DataError("manifest line " + std::to_string(lineno) + ": label must be 0 or 1");
        r.box = {parse_count(f[2], "x", lineno), parse_count(f[3], "y", lineno),
                 parse_count(f[4], "w", lineno), parse_count(f[5], "h", lineno)};
        if (has_split && !f[6].empty()) {
            try {
                r.split = parse_split_tag(f[6]);
            } catch (const UsageError& e) {
                throw DataError("manifest line " + std::to_string(lineno) + ": " + e.what());
            }
        }
        manifest.records.push_back(std::move(r));
    }
    return manifest;
}

void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& csv) {
    std::ofstream out(csv);
    if (!out) throw IoError("cannot write manifest: " + csv.string());
    const bool has_split = std::any_of(manifest.records.begin(), manifest.records.end(),
                                       [](const auto& r) { return r.split.has_value(); });
    const auto dir = std::filesystem::absolute(csv).lexically_normal().parent_path();
    out << "path,label,x,y,w,h" << (has_split ? ",split" : "") << '\n';
    for (const auto& r : manifest.records) {
        // stored relative to the new manifest so read_manifest resolves it back
        const auto path = std::filesystem::absolute(r.path).lexically_normal().lexically_proximate(dir);
        out << csv_quote(path.generic_string()) << ',' << static_cast<int>(r.label) << ',' << r.box.x
            << ',' << r.box.y << ',' << r.box.w << ',' << r.box.h;
        if (has_split) out << ',' << (r.split ? split_tag_name(*r.split) : std::string());
        out << '\n';
    }
    if (!out) throw IoError("write failed: " + csv.string());
}

// -------------------------------------------------------------------- split

std::array<std::size_t, 3> split_sizes(std::size_t n) {
    const std::size_t train = (7 * n + 5) / 10;
    const std::size_t val = (2 * n + 5) / 10;
    return {train, val, n - train - val};
}

namespace {

// Tenths of a record: 10 * count - percent * n.
long long deviation(std::size_t count, std::size_t n, int percent) {
    return 10 * static_cast<long long>(count) - percent * static_cast<long long>(n);
}

struct LabelQuota {
    std::size_t train;
    std::size_t val;
};

// Per-label (train, val) counts for two label groups that hit the global
// split sizes exactly, minimising squared deviation from 70/20/10 per label.
std::array<LabelQuota, 2> stratified_quota(std::size_t n0, std::size_t n1) {
    const auto [t_train, t_val, t_test] = split_sizes(n0 + n1);
    std::array<LabelQuota, 2> best{};
    long long best_cost = std::numeric_limits<long long>::max();
    for (std::size_t a = 0; a <= std::min(n0, t_train); ++a) {
        const std::size_t b = t_train - a;
        if (b > n1) continue;
        for (std::size_t c = 0; c <= std::min(n0 - a, t_val); ++c) {
            const std::size_t d = t_val - c;
            if (d > n1 - b) continue;
            const long long devs[6] = {deviation(a, n0, 7),         deviation(b, n1, 7),
                                       deviation(c, n0, 2),         deviation(d, n1, 2),
                                       deviation(n0 - a - c, n0, 1), deviation(n1 - b - d, n1, 1)};
            long long cost = 0;
            for (auto v : devs) cost += v * v;
            if (cost < best_cost) {
                best_cost = cost;
                best = {LabelQuota{a, c}, LabelQuota{b, d}};
            }
        }
    }
    return best;
}

}  // namespace

SplitAssignment split_dataset(const DatasetManifest& manifest, std::uint64_t seed) {
    if (manifest.records.empty()) throw UsageError("cannot split an empty manifest");
    std::array<std::vector<std::size_t>, 2> groups;
    for (std::size_t i = 0; i < manifest.records.size(); ++i)
        groups[static_cast<std::size_t>(manifest.records[i].label)].push_back(i);

    std::mt19937_64 rng(seed);
    for (auto& g : groups) detail::shuffle(g, rng);

    const auto quota = stratified_quota(groups[0].size(), groups[1].size());
    SplitAssignment out;
    for (std::size_t l = 0; l < 2; ++l) {
        const auto& g = groups[l];
        const auto [ntrain, nval] = quota[l];
        out.train.insert(out.train.end(), g.begin(), g.begin() + ntrain);
        out.validation.insert(out.validation.end(), g.begin() + ntrain, g.begin() + ntrain + nval);
        out.test.insert(out.test.end(), g.begin() + ntrain + nval, g.end());
    }
    std::sort(out.train.begin(), out.train.end());
    std::sort(out.validation.begin(), out.validation.end());
    std::sort(out.test.begin(), out.test.end());
    return out;
}

}  // namespace oralnet
