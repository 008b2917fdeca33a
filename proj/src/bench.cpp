#include "oralnet/bench.hpp"

#include <sys/resource.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "oralnet/errors.hpp"
#include "oralnet/head_trainer.hpp"
#include "oralnet/image.hpp"
#include "oralnet/weight_io.hpp"

namespace oralnet {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
    return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

std::uint64_t read_vm_hwm() {
    std::ifstream status("/proc/self/status");
    std::string line;
    while (std::getline(status, line)) {
        if (line.rfind("VmHWM:", 0) == 0) {
            std::istringstream in(line.substr(6));
            std::uint64_t kb = 0;
            if (in >> kb) return kb * 1024;
        }
    }
    return 0;
}

ModelGraph load_backbone(const std::filesystem::path& weights, Architecture arch) {
    const WeightStore store = read_weights_file(weights);
    BuildOptions opts;
    opts.require_head = false;
    return build_model(arch, store, opts);
}

}  // namespace

double median(std::vector<double> v) {
    if (v.empty()) throw UsageError("median of an empty sample");
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double percentile_nearest_rank(std::vector<double> v, double pct) {
    if (v.empty()) throw UsageError("percentile of an empty sample");
    if (!(pct > 0.0 && pct <= 100.0)) throw UsageError("percentile must be in (0, 100]");
    std::sort(v.begin(), v.end());
    auto rank = static_cast<std::size_t>(std::ceil(pct / 100.0 * static_cast<double>(v.size())));
    rank = std::clamp<std::size_t>(rank, 1, v.size());
    return v[rank - 1];
}

std::uint64_t peak_rss_bytes() {
    if (const auto hwm = read_vm_hwm()) return hwm;
    rusage usage{};
    getrusage(RUSAGE_SELF, &usage);
    return static_cast<std::uint64_t>(usage.ru_maxrss) * 1024;
}

bool reset_peak_rss() {
    std::ofstream out("/proc/self/clear_refs");
    if (!out) return false;
    out << "5";
    out.flush();
    return static_cast<bool>(out);
}

BenchReport bench_model(const std::filesystem::path& weights, Architecture arch, const Tensor& input,
                        std::size_t runs, std::size_t warmup) {
    if (runs == 0) throw UsageError("bench needs at least one timed run");
    reset_peak_rss();

    BenchReport report;
    report.model = std::string(architecture_name(arch));
    const auto load_start = Clock::now();
    ModelGraph model = load_backbone(weights, arch);
    if (!model.has_head())
        model.bind_head(Tensor({kNumClasses, kFeatureDim}), Tensor({kNumClasses}));
    report.load_ms = ms_since(load_start);

    for (std::size_t i = 0; i < warmup; ++i) (void)model.forward(input);

    Tensor first;
    report.latencies_ms.reserve(runs);
    for (std::size_t i = 0; i < runs; ++i) {
        const auto start = Clock::now();
        Tensor logits = model.forward(input);
        report.latencies_ms.push_back(ms_since(start));
        if (i == 0) {
            first = std::move(logits);
        } else if (logits.size() != first.size() ||
                   std::memcmp(logits.raw(), first.raw(), first.size() * sizeof(float)) != 0) {
            throw DataError("forward pass is not deterministic: run " + std::to_string(i) +
                            " differs from run 0");
        }
    }
    report.median_ms = median(report.latencies_ms);
    report.p95_ms = percentile_nearest_rank(report.latencies_ms, 95.0);
    report.peak_rss_bytes = peak_rss_bytes();
    report.macs = model.count_macs(input.shape()).total();
    return report;
}

std::string bench_csv_header() { return "model,load_ms,median_ms,p95_ms,peak_rss_bytes,macs,runs"; }

std::string bench_csv_row(const BenchReport& r) {
    char buf[256];
    std::snprintf(buf, sizeof buf, "%s,%.3f,%.3f,%.3f,%llu,%llu,%zu", r.model.c_str(), r.load_ms,
                  r.median_ms, r.p95_ms, static_cast<unsigned long long>(r.peak_rss_bytes),
                  static_cast<unsigned long long>(r.macs.macs), r.latencies_ms.size());
    return buf;
}

Tensor load_model_input(const std::filesystem::path& path, const std::optional<BoundingBox>& box) {
    if (path.extension() == ".tkrt") return read_raw_tensor_file(path);
    const RgbImage image = load_image(path);
    return preprocess_image(image, box.value_or(BoundingBox{0, 0, image.width, image.height}));
}

ModelGraph load_classifier(const std::filesystem::path& weights, Architecture arch,
                           const std::filesystem::path& checkpoint) {
    if (!std::filesystem::exists(checkpoint))
        throw IoError("checkpoint not found: " + checkpoint.string());
    ModelGraph model = load_backbone(weights, arch);
    const Checkpoint ckpt = load_checkpoint(checkpoint);
    model.bind_head(ckpt.head.weight_tensor(), ckpt.head.bias_tensor());
    return model;
}

Classification classify(const ModelGraph& model, const Tensor& input) {
    const Tensor z = model.forward(input);
    Classification c;
    c.logits = {z[0], z[1]};
    const double z0 = z[0], z1 = z[1];
    const double m = std::max(z0, z1);
    const double e0 = std::exp(z0 - m), e1 = std::exp(z1 - m);
    c.probabilities = {e0 / (e0 + e1), e1 / (e0 + e1)};
    c.label = z[1] >= z[0] ? Label::calculus : Label::no_calculus;
    return c;
}

Classification classify(const std::filesystem::path& weights, Architecture arch,
                        const std::filesystem::path& checkpoint, const std::filesystem::path& input,
                        const std::optional<BoundingBox>& box) {
    const ModelGraph model = load_classifier(weights, arch, checkpoint);
    return classify(model, load_model_input(input, box));
}

}  // namespace oralnet
