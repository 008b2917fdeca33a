#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "oralnet/kernels.hpp"
#include "oralnet/model.hpp"
#include "oralnet/preprocess.hpp"

namespace oralnet {

struct BenchReport {
    std::string model;
    double load_ms = 0.0;
    std::vector<double> latencies_ms;  // timed runs only, warmups excluded
    double median_ms = 0.0;
    double p95_ms = 0.0;
    std::uint64_t peak_rss_bytes = 0;
    MacCount macs;
};

inline constexpr std::size_t kDefaultBenchRuns = 30;
inline constexpr std::size_t kDefaultBenchWarmup = 3;

/// Loads `weights` (timed), then `warmup` untimed and `runs` timed forward
/// passes on `input`. A store without a head gets a zero head. UsageError
/// when runs == 0, IoError when the weights cannot be read, DataError if two
/// runs disagree in a single bit.
BenchReport bench_model(const std::filesystem::path& weights, Architecture arch, const Tensor& input,
                        std::size_t runs = kDefaultBenchRuns,
                        std::size_t warmup = kDefaultBenchWarmup);

/// Median of the lower/upper middle pair for even counts; p95 by nearest rank.
double median(std::vector<double> values);
double percentile_nearest_rank(std::vector<double> values, double pct);

/// Peak resident set size so far, in bytes (VmHWM, or getrusage if unavailable).
std::uint64_t peak_rss_bytes();
/// Resets the peak counter where the kernel supports it; false otherwise.
bool reset_peak_rss();

/// `model,load_ms,median_ms,p95_ms,peak_rss_bytes,macs,runs`
std::string bench_csv_header();
std::string bench_csv_row(const BenchReport& report);

/// A `.tkrt` file is read as is; anything else is decoded as an image and
/// preprocessed with `box` (whole image when absent).
Tensor load_model_input(const std::filesystem::path& path,
                        const std::optional<BoundingBox>& box = std::nullopt);

struct Classification {
    Label label = Label::no_calculus;
    std::array<float, 2> logits{};
    std::array<double, 2> probabilities{};  // {no_calculus, calculus}
};

/// Backbone from `weights`, head from the `checkpoint` file written by training.
ModelGraph load_classifier(const std::filesystem::path& weights, Architecture arch,
                           const std::filesystem::path& checkpoint);
Classification classify(const ModelGraph& model, const Tensor& input);
Classification classify(const std::filesystem::path& weights, Architecture arch,
                        const std::filesystem::path& checkpoint, const std::filesystem::path& input,
                        const std::optional<BoundingBox>& box = std::nullopt);

}  // namespace oralnet
